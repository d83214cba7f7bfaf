import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lenspoints.core import LensSetting, circle_distance, lens_apply, norm, orbit_representative, sphere_sample
from lenspoints.dynamics import HamiltonianTerm, IsotopyStep, build_lift, factorize, reeb_lift
from lenspoints.errors import DomainError
from lenspoints.genfun import GFProblem, fixed_point_defect
from lenspoints.solve import (
    ShiftSpectrum,
    TranslatedPointRecord,
    count_time_shifts,
    damped_newton,
    direct_scan,
    genfun_scan,
    match_records,
    residual,
    verdict,
)

from oracles import line_time_shifts

L33 = LensSetting(2, 3, (1, 1))
DIAG = IsotopyStep(HamiltonianTerm.diagonal([0.15, 0.35]), 1.0)
TWIN = [
    DIAG,
    IsotopyStep(HamiltonianTerm.resonant(0.02, (3, 0), (0, 0)), 1.0),
    IsotopyStep(HamiltonianTerm.resonant(0.02, (0, 3), (0, 0)), 1.0),
]
E1 = np.array([1.0, 0.0], dtype=complex)
E2 = np.array([0.0, 1.0], dtype=complex)


def rec(tau, p=E1, nullity=0, family=False, setting=L33):
    return TranslatedPointRecord(p=p, tau=tau, residual=0.0, orbit_rep=orbit_representative(setting, p),
                                 source="direct", nullity=nullity, reeb_family=family)


@pytest.fixture(scope="module")
def diag_scan():
    return direct_scan(build_lift(L33, [DIAG]), (32, 16))


@pytest.fixture(scope="module")
def twin_scan():
    return direct_scan(build_lift(L33, TWIN), (64, 16))


class TestResidual:
    def test_identity(self):
        pts = sphere_sample(2, 16, seed=0)
        assert np.max(norm(residual(build_lift(L33, []), pts, 0.0))) == 0.0

    def test_reeb_lift(self):
        pts = sphere_sample(2, 16, seed=1)
        assert np.max(norm(residual(reeb_lift(L33, 0.3), pts, 0.3))) <= 1e-14

    def test_diagonal(self):
        phi = build_lift(L33, [DIAG])
        assert norm(residual(phi, E1, 0.15)) <= 1e-15
        expected = abs(np.exp(2j * np.pi * 0.15) - np.exp(2j * np.pi * 0.35))
        assert norm(residual(phi, E1, 0.35)) == pytest.approx(expected, rel=1e-12)

    def test_non_unit(self):
        with pytest.raises(DomainError):
            residual(build_lift(L33, []), 2 * E1, 0.0)

    @given(st.floats(-2, 2), st.floats(0.1, 10))
    def test_periodic_and_homogeneous(self, tau, s):
        phi = build_lift(L33, TWIN)
        p = np.array([0.6, 0.8j])
        r = residual(phi, p, tau)
        np.testing.assert_allclose(residual(phi, p, tau + 1.0), r, atol=1e-12)
        # residual(s p) = s residual(p); evaluated through the unnormalized formula
        scaled = phi(s * p) - np.exp(2j * np.pi * tau) * s * p
        np.testing.assert_allclose(scaled, s * r, atol=1e-12 * s)


class TestDirectScan:
    def test_diagonal_shifts_on_coordinate_circles(self, diag_scan):
        assert diag_scan.records
        for r in diag_scan.records:
            target = 0.15 if abs(r.p[1]) < 1e-6 else 0.35
            assert circle_distance(r.tau, target) <= 1e-8
            assert min(abs(r.p[0]), abs(r.p[1])) <= 1e-7
            assert r.residual <= 1e-8
            assert r.nullity == 1 and r.reeb_family
        assert count_time_shifts(diag_scan.records).centers == pytest.approx([0.15, 0.35], abs=1e-8)

    def test_identity_single_degenerate_cluster(self):
        result = direct_scan(build_lift(L33, []), (32, 8))
        spectrum = count_time_shifts(result.records)
        assert len(spectrum) == 1
        assert circle_distance(spectrum.centers[0], 0.0) <= 1e-8
        report = verdict(spectrum, L33)
        assert report["degenerate"] and report["status"] == "ATTENTION"

    def test_symmetry_broken_matches_line_oracle(self, twin_scan):
        spectrum = count_time_shifts(twin_scan.records)
        expected = sorted(set(np.round(line_time_shifts(0.15, 0.02, 3) + line_time_shifts(0.35, 0.02, 3), 9)))
        assert len(expected) == 4
        assert spectrum.centers == pytest.approx(expected, abs=1e-8)
        assert all(c.nullity == 0 for c in spectrum.clusters)
        assert verdict(spectrum, L33)["status"] == "PASS"

    def test_hits_are_equivariant(self, twin_scan):
        phi = build_lift(L33, TWIN)
        for r in twin_scan.records:
            for g in range(L33.k):
                assert norm(residual(phi, lens_apply(L33, r.p, g), r.tau)) <= 1e-8

    def test_grid_validation(self):
        with pytest.raises(DomainError):
            direct_scan(build_lift(L33, []), (0, 4))

    def test_thread_count_does_not_change_results(self):
        phi = build_lift(L33, TWIN)
        a = direct_scan(phi, (40, 16), threads=1)
        b = direct_scan(phi, (40, 16), threads=3)
        assert [r.to_dict() for r in a.records] == [r.to_dict() for r in b.records]
        assert a.diagnostics == b.diagnostics


class TestDampedNewton:
    def test_converges_on_square_root(self):
        def values(x):
            return x**2 - 2.0

        def system(x):
            return values(x), (2.0 * x)[:, :, None]

        x, ok, _ = damped_newton(values, system, np.array([[1.0], [-3.0]]))
        assert ok.all()
        np.testing.assert_allclose(x[:, 0], [np.sqrt(2), -np.sqrt(2)], atol=1e-12)

    def test_reports_failure_without_root(self):
        def values(x):
            return x**2 + 1.0

        def system(x):
            return values(x), (2.0 * x)[:, :, None]

        _, ok, _ = damped_newton(values, system, np.array([[0.5]]), maxiter=20)
        assert not ok.any()


class TestClustering:
    def test_merges_within_tolerance(self):
        spectrum = count_time_shifts([rec(0.15), rec(0.35), rec(0.150000001)], 1e-5)
        assert len(spectrum) == 2

    def test_wraparound(self):
        spectrum = count_time_shifts([rec(0.999999), rec(0.000001)], 1e-4)
        assert len(spectrum) == 1
        assert circle_distance(spectrum.centers[0], 0.0) <= 1e-12

    def test_empty_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="lenspoints"):
            spectrum = count_time_shifts([])
        assert len(spectrum) == 0 and spectrum.warning
        assert "no records" in caplog.text

    @settings(max_examples=50)
    @given(st.lists(st.floats(0, 0.999), min_size=1, max_size=30), st.floats(1e-6, 1e-2))
    def test_cluster_properties(self, taus, tol):
        spectrum = count_time_shifts([rec(t) for t in taus], tol)
        assert sum(len(c.members) for c in spectrum.clusters) == len(taus)
        centers = spectrum.centers
        for i in range(len(centers)):
            for j in range(i + 1, len(centers)):
                assert circle_distance(centers[i], centers[j]) > tol


class TestVerdict:
    def test_circle_families(self):
        spectrum = count_time_shifts([rec(0.15, nullity=1), rec(0.35, E2, nullity=1)])
        report = verdict(spectrum, L33)
        assert report["status"] == "ATTENTION"
        assert "non-isolated translated points suspected" in report["message"]

    def test_enough_shifts(self):
        report = verdict(count_time_shifts([rec(t) for t in (0.1, 0.2, 0.3, 0.4)]), L33)
        assert report["status"] == "PASS" and report["clusters"] == 4

    def test_undersampled(self):
        report = verdict(count_time_shifts([rec(0.1)]), L33)
        assert report["status"] == "ATTENTION" and "under-sampling" in report["message"]
        assert verdict(ShiftSpectrum([], 1e-5), L33)["clusters"] == 0


@pytest.fixture(scope="module")
def diag_genfun():
    problem = GFProblem(factorize(build_lift(L33, [DIAG]), 0.1), L33)
    return problem, genfun_scan(problem, starts=(16, 4))


class TestGenfunScan:
    def test_hits(self, diag_genfun):
        problem, result = diag_genfun
        assert result.records
        for r in result.records:
            assert min(abs(r.p[0]), abs(r.p[1])) <= 1e-7
            assert abs(r.critical_value) <= 1e-9
            assert r.closure_defect <= 1e-7
            assert fixed_point_defect(problem, r.tau, r.p) <= 1e-8

    def test_agrees_with_direct(self, diag_genfun, diag_scan):
        _, result = diag_genfun
        m = match_records(diag_scan.records, result.records, L33)
        assert not m["unmatched_a"] and not m["unmatched_b"]
        assert m["max_discrepancy"] <= 1e-6

    def test_window_validation(self, diag_genfun):
        problem, _ = diag_genfun
        with pytest.raises(DomainError):
            genfun_scan(problem, t_window=(0.0, 3.0))


class TestMatching:
    def test_pointwise(self):
        p = np.array([0.6, 0.8j])
        m = match_records([rec(0.2, p)], [rec(0.2, lens_apply(L33, p))], L33)
        assert len(m["pairs"]) == 1 and m["max_discrepancy"] <= 1e-14

    def test_shift_mismatch(self):
        m = match_records([rec(0.2)], [rec(0.2 + 1e-4)], L33)
        assert len(m["unmatched_a"]) == 1 and len(m["unmatched_b"]) == 1

    def test_reeb_family_modulo_circle(self):
        p = np.array([0.6, 0.8j])
        q = np.exp(0.7j) * p
        assert len(match_records([rec(0.2, p)], [rec(0.2, q)], L33)["pairs"]) == 0
        m = match_records([rec(0.2, p, 1, True)], [rec(0.2, q, 1, True)], L33)
        assert len(m["pairs"]) == 1 and m["family_pairs"] == 1

    def test_empty(self):
        m = match_records([], [rec(0.1)], L33)
        assert m["pairs"] == [] and len(m["unmatched_b"]) == 1
