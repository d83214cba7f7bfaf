"""Numerical search for translated points of contactomorphisms of lens spaces.

The package lifts a Z/kZ-equivariant contact isotopy of the round sphere to a
homogeneous Hamiltonian map of C^n, finds its translated points both directly
and as critical points of a generating function, and compares the number of
distinct time-shifts with the 2n lower bound coming from the mod-p cohomology
of the lens space.
"""

__version__ = "0.1.0"
