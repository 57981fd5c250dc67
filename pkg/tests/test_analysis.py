import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsgbomp.analysis import (
    cell_count,
    classical_ric,
    f_K,
    f_K_inverse,
    g_bounds,
    g_empirical,
    operator_norm_dev,
    pibric,
    pibric_table,
    real_part_lower_bound_check,
    thm1_certificate,
    thm2_bound,
    verify_lemmas,
)
from tsgbomp.sensing import gaussian_matrix, identity_matrix, orthonormal_matrix
from tsgbomp.signal_model import EnumerationCapError, PibsParams, iter_cell


class TestOperatorNormDev:
    def test_orthonormal_columns(self):
        Phi = identity_matrix(8)
        assert operator_norm_dev(Phi, [1, 4, 6]) == pytest.approx(0.0, abs=1e-10)

    def test_duplicated_column(self):
        Phi = gaussian_matrix(15, 6, "unit", True, np.random.default_rng(0))
        assert operator_norm_dev(Phi, [3, 3]) == pytest.approx(1.0, abs=1e-10)

    def test_two_columns_equals_inner_product(self):
        rng = np.random.default_rng(1)
        Phi = gaussian_matrix(15, 6, "unit", True, rng)
        c = abs(np.vdot(Phi.entries[:, 0], Phi.entries[:, 4]))
        assert operator_norm_dev(Phi, [1, 5]) == pytest.approx(c, abs=1e-10)

    def test_empty_selection_rejected(self):
        with pytest.raises(ValueError):
            operator_norm_dev(identity_matrix(4), [])


class TestPibric:
    def test_orthonormal_matrix_gives_zero(self):
        Phi = orthonormal_matrix(16, np.random.default_rng(2))
        params = PibsParams(n=16, b=1, p=1, l=2, Lsep=2, K=2, R=1)
        est = pibric(Phi, params, 2, 1)
        assert est.delta == pytest.approx(0.0, abs=1e-10)

    def test_reduces_to_pairwise_scan(self):
        rng = np.random.default_rng(3)
        Phi = gaussian_matrix(15, 20, "unit", True, rng)
        params = PibsParams(n=20, b=1, p=1, l=0, Lsep=2, K=2, R=0)
        est = pibric(Phi, params, 2, 0)
        G = Phi.gram
        pairwise = max(
            abs(G[i, j]) for i in range(20) for j in range(i + 3, 20)
        )
        assert est.delta == pytest.approx(pairwise, abs=1e-10)
        assert est.argmax_support is not None
        assert len(est.argmax_support.columns) == 2

    def test_block_monotonicity_on_random_matrices(self):
        params = PibsParams(n=24, b=1, p=1, l=2, Lsep=2, K=3, R=0)
        for seed in range(10):
            Phi = gaussian_matrix(16, 24, "unit", True, np.random.default_rng(seed))
            d = [pibric(Phi, params, K, 0).delta for K in (1, 2, 3)]
            assert d[0] <= d[1] + 1e-12 <= d[2] + 2e-12

    def test_cap_error(self):
        params = PibsParams(n=60, b=1, p=1, l=0, Lsep=1, K=4, R=0)
        Phi = identity_matrix(60)
        with pytest.raises(EnumerationCapError):
            pibric(Phi, params, 4, 0, cap=100)

    def test_cell_count_matches_enumeration(self):
        params = PibsParams(n=30, b=2, p=2, l=4, Lsep=6, K=2, R=2)
        for k in range(3):
            for r in range(3):
                assert cell_count(params, k, r) == sum(
                    1 for _ in iter_cell(params, k, r)
                )

    def test_structured_constant_below_classical(self):
        rng = np.random.default_rng(5)
        Phi = gaussian_matrix(10, 12, "unit", True, rng)
        params = PibsParams(n=12, b=1, p=1, l=1, Lsep=2, K=2, R=1)
        structured = pibric(Phi, params, 2, 1).delta
        unstructured = classical_ric(Phi, 3)
        assert structured <= unstructured + 1e-12

    def test_jobs_do_not_change_result(self):
        rng = np.random.default_rng(6)
        Phi = gaussian_matrix(20, 30, "unit", True, rng)
        params = PibsParams(n=30, b=2, p=2, l=4, Lsep=6, K=2, R=1)
        serial = pibric(Phi, params, 2, 1, jobs=1)
        parallel = pibric(Phi, params, 2, 1, jobs=2)
        assert serial.delta == parallel.delta
        assert serial.argmax_support == parallel.argmax_support
        assert serial.supports_scanned == parallel.supports_scanned

    def test_complex_matrix_pairwise_reduction(self):
        rng = np.random.default_rng(9)
        Phi = gaussian_matrix(18, 14, "unit", True, rng, complex_entries=True)
        params = PibsParams(n=14, b=1, p=1, l=0, Lsep=2, K=2, R=0)
        est = pibric(Phi, params, 2, 0)
        G = Phi.gram
        pairwise = max(
            abs(G[i, j]) for i in range(14) for j in range(i + 3, 14)
        )
        assert est.delta == pytest.approx(pairwise, abs=1e-10)


class TestVerifyLemmas:
    def test_orthonormal_matrix_all_pass(self):
        Phi = orthonormal_matrix(30, np.random.default_rng(4))
        params = PibsParams(n=30, b=2, p=2, l=8, Lsep=8, K=2, R=1)
        report = verify_lemmas(Phi, params, 2, 1, np.random.default_rng(0))
        assert report.all_passed
        ran = {e.name for e in report.entries if not e.skipped}
        assert "norm-sandwich" in ran
        assert "projected-column-bound" in ran

    def test_gaussian_matrix_passes_at_acceptance_geometry(self):
        params = PibsParams.from_window(n=60, b=2, p=2, l=10, L=4, K=2, R=2)
        rng = np.random.default_rng(11)
        Phi = gaussian_matrix(40, 60, "unit", True, rng)
        report = verify_lemmas(Phi, params, 2, 2, rng)
        assert report.all_passed, report.render()
        names = [e.name for e in report.entries]
        assert names == [
            "norm-sandwich",
            "budget-monotonicity",
            "pseudo-length-monotonicity",
            "block-for-pseudo-trade",
            "projected-sandwich",
            "projected-innerproduct",
            "projected-column-bound",
        ]

    def test_render_and_csv(self):
        Phi = orthonormal_matrix(24, np.random.default_rng(1))
        params = PibsParams(n=24, b=1, p=1, l=4, Lsep=4, K=1, R=1)
        report = verify_lemmas(Phi, params, 1, 1, np.random.default_rng(0))
        assert "lemma checks" in report.render()
        assert report.margins_csv().startswith("lemma,passed,skipped")

    def test_requires_matching_pseudo_length(self):
        params = PibsParams(n=24, b=1, p=1, l=1, Lsep=4, K=1, R=1)
        Phi = identity_matrix(24)
        with pytest.raises(ValueError):
            verify_lemmas(Phi, params, 1, 1, np.random.default_rng(0))


class TestRealPartBound:
    def test_real_ratio_gives_exact_magnitude(self):
        lhs, rhs, ok = real_part_lower_bound_check(3.0, 1.5)
        assert ok
        assert lhs == pytest.approx(3.0, abs=1e-12)

    def test_imaginary_perturbation(self):
        lhs, rhs, ok = real_part_lower_bound_check(1.0, 0.6j)
        assert ok
        assert lhs == pytest.approx(1.0 / math.sqrt(1.36), abs=1e-12)
        assert rhs == pytest.approx(0.8, abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            real_part_lower_bound_check(0.0, 1.0)
        with pytest.raises(ValueError):
            real_part_lower_bound_check(1.0, 2.0)

    @given(
        zr=st.floats(-5, 5), zi=st.floats(-5, 5),
        wr=st.floats(-5, 5), wi=st.floats(-5, 5),
    )
    @settings(max_examples=300)
    def test_random_property(self, zr, zi, wr, wi):
        z = complex(zr, zi)
        w = complex(wr, wi)
        if z == 0 or abs(w / z) >= 1:
            return
        _, _, ok = real_part_lower_bound_check(z, w)
        assert ok


class TestScalingFunction:
    def test_zero_at_zero(self):
        for K, b, p in [(1, 1, 1), (3, 2, 2), (5, 4, 2)]:
            assert f_K(0.0, K, b, p) == 0.0

    def test_pinned_value(self):
        assert f_K(1.0, 1, 1, 1) == pytest.approx(0.25 + (math.sqrt(2) + 1) / 2, abs=1e-14)

    def test_inverse_round_trip(self):
        u = f_K_inverse(f_K(0.3, 2, 2, 2), 2, 2, 2)
        assert u == pytest.approx(0.3, abs=1e-10)

    @given(u=st.floats(0.001, 50), K=st.integers(1, 6), b=st.integers(1, 4), p=st.integers(1, 3))
    @settings(max_examples=100)
    def test_strictly_increasing(self, u, K, b, p):
        assert f_K(u, K, b, p) < f_K(u * 1.01 + 1e-9, K, b, p)

    def test_unreachable_target(self):
        with pytest.raises(ValueError):
            f_K_inverse(1e9, 1, 1, 1, bracket=10.0)


class TestCertificate:
    def test_zero_delta_always_passes(self):
        for field in ("real", "complex"):
            cert = thm1_certificate(0.0, 2, 2, 2, epsilon=0.0, x_min=0.01,
                                    x_max=1.0, field=field)
            assert cert.passed
            assert cert.margin_18 == pytest.approx(0.01)

    def test_delta_condition_fails(self):
        cert = thm1_certificate(0.6, 1, 1, 1)
        assert not cert.condition_17_ok
        assert cert.margin_17 == pytest.approx(1 / math.sqrt(3) - 0.6)

    def test_real_threshold_double_evaluation(self):
        # independent term-by-term evaluation of the magnitude condition
        d, K, b, p = 0.2, 2, 4, 2
        Bp = p * b - b + 1
        assert Bp == 5
        coeff = d * math.sqrt(Bp * b) / (1 + d)
        bracket = K * (1 + d) / (4 * Bp) + math.sqrt(K + 1) + 1
        required = coeff * bracket
        assert required == pytest.approx(2.1257931603357276, rel=1e-12)
        cert = thm1_certificate(d, K, b, p, epsilon=0.0, x_min=required * 1.001,
                                x_max=1.0)
        assert cert.condition_18_ok
        cert2 = thm1_certificate(d, K, b, p, epsilon=0.0, x_min=required * 0.999,
                                 x_max=1.0)
        assert not cert2.condition_18_ok

    def test_complex_threshold_double_evaluation(self):
        d, K, b, p = 0.15, 2, 2, 2
        Bp = p * b - b + 1
        bracket = K * (1 + d) / (4 * Bp) + math.sqrt(K + 1) + 1
        numer = (d * math.sqrt(K * b)
                 + d * (1 - d**2) * math.sqrt(Bp * b) / (1 + d) * bracket)
        required = numer / math.sqrt((1 - d**2) ** 2 + d**2)
        cert = thm1_certificate(d, K, b, p, epsilon=0.0, x_min=required * 1.001,
                                x_max=1.0, field="complex")
        assert cert.condition_18_ok
        assert cert.margin_18 == pytest.approx(required * 0.001, rel=1e-6)

    def test_noise_term(self):
        d, K, b, p, eps = 0.1, 1, 1, 1, 0.5
        Bp = 1
        noise = math.sqrt(2 * (1 + Bp) * (1 + d)) * eps / (1 - d * math.sqrt(3))
        cert = thm1_certificate(d, K, b, p, epsilon=eps, x_min=10.0, x_max=10.0)
        expected = f_K(d, K, b, p) * 10.0 + noise
        assert cert.margin_18 == pytest.approx(10.0 - expected, rel=1e-12)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            thm1_certificate(1.0, 1, 1, 1)
        with pytest.raises(ValueError):
            thm1_certificate(0.1, 0, 1, 1)


class TestThm2:
    def test_bound_never_exceeds_one(self):
        for m in (100, 1000, 10_000, 100_000):
            rep = thm2_bound(1, 1, 2, 4, 2, m, 200, eps0=0.05, eps=0.05)
            assert rep.bound <= 1.0

    def test_bound_monotone_on_m_ladder(self):
        bounds = [
            thm2_bound(1, 1, 2, 4, 2, m, 200, eps0=0.05, eps=0.05).bound
            for m in (2_000, 4_000, 8_000, 16_000, 32_000, 64_000)
        ]
        assert all(a <= b + 1e-15 for a, b in zip(bounds, bounds[1:]))

    def test_invalid_order_flagged_not_raised(self):
        rep = thm2_bound(2, 2, 4, 2, 2, 50, 100, eps0=0.1, eps=0.1)
        assert not rep.flags["nu-rho-order"] or not rep.flags["cluster-capacity"]
        assert isinstance(rep.bound, float)

    def test_lambda_variants(self):
        sep = thm2_bound(1, 1, 2, 4, 2, 1000, 200, eps0=0.05, eps=0.05)
        win = thm2_bound(1, 1, 2, 4, 2, 1000, 200, eps0=0.05, eps=0.05,
                         lambda_variant="window")
        Lp = 2 + 2 * 1 * 1 - 1
        assert sep.quantities.lam == pytest.approx(math.sqrt((3 + 2 * Lp) / 1000))
        assert win.quantities.lam == pytest.approx(math.sqrt((3 + 2 * 2) / 1000))
        assert win.quantities.lam < sep.quantities.lam

    def test_intermediates_match_definitions(self):
        b, p, L, K, R, m, n = 1, 1, 2, 4, 2, 2000, 200
        rep = thm2_bound(b, p, L, K, R, m, n, eps0=0.05, eps=0.05)
        q = rep.quantities
        Lp = L + 2 * p * b - b
        assert q.nu == pytest.approx(q.lam**2 + 2 * q.lam, rel=1e-12)
        assert f_K(q.rho, K, b, p) == pytest.approx(1.0, abs=1e-9)
        assert q.A == pytest.approx(3 * p * (K - 1) / (2 * (p + 1) ** 2) + R)
        assert q.C == pytest.approx(math.log(p) + 21 / 8 - 1 / p)
        assert q.D == n - (K - 1) * b + Lp
        assert q.E == Lp - 1
        assert q.h == pytest.approx(q.A + K * q.C + K * math.log(p * q.D / K - q.E))
        assert q.c1 == pytest.approx(2 * math.exp(q.h))
        assert q.c2 == pytest.approx(m / (q.lam + 1 + math.sqrt(1 + q.rho)) ** 2)

    def test_becomes_positive_for_large_m(self):
        rep = thm2_bound(1, 1, 2, 3, 2, 1_000_000, 200, eps0=0.02, eps=0.01)
        assert rep.bound > 0.5
        ok_except_window = {k: v for k, v in rep.flags.items() if k != "eps0-window"}
        assert all(ok_except_window.values()), rep.flags

    def test_eps0_window_unsatisfiable_as_stated(self):
        # rho = f_K^{-1}(1) sits below 1/sqrt(2K+1) for every (K, b, p), so
        # the eps0 window can never open; the flag must say so honestly
        for K, b, p in [(1, 1, 1), (4, 1, 1), (6, 2, 2), (12, 4, 2)]:
            t = 1.0 / math.sqrt(2 * K + 1)
            assert f_K(t, K, b, p) > 1.0
            rep = thm2_bound(b, p, max(2, p * b), K, 2, 10_000, 500, eps0=0.01, eps=0.01)
            assert not rep.flags["eps0-window"]

    def test_user_supplied_g(self):
        rep = thm2_bound(1, 1, 2, 4, 2, 60_000, 200, eps0=0.09, eps=0.09, g_value=1.0)
        tail = rep.quantities.c1 * math.exp(-rep.quantities.c2 * 0.09**2)
        assert rep.bound == pytest.approx(1.0 - 2.0 * tail, rel=1e-9)


class TestGBounds:
    def test_endpoints(self):
        assert g_bounds(0.0, 2, 1) == (1.0, 1.0)
        assert g_bounds(1.0, 2, 1) == (0.0, 0.0)
        lower, upper = g_bounds(0.0, 2, 2)  # Kb = 4
        assert lower == pytest.approx(0.5)
        assert upper == pytest.approx(2.0)

    def test_length_one_vector(self):
        assert g_bounds(0.5, 1, 1) == (1.0, 1.0)
        assert g_bounds(1.0, 1, 1) == (0.0, 0.0)

    def test_empirical_within_bounds(self):
        rng = np.random.default_rng(0)
        w = 2 / math.pi * math.atan2(1, 0.5) - 0.5
        lower, upper = g_bounds(0.5, 4, 1)
        assert lower == pytest.approx(4 * w**3)
        assert upper == pytest.approx(4 * w)
        est = g_empirical(0.5, 4, 1, 100_000, rng)
        se = math.sqrt(max(est * (1 - est), 1e-6) / 100_000)
        assert lower - 3 * se <= est <= upper + 3 * se

    def test_empirical_extremes(self):
        rng = np.random.default_rng(1)
        assert g_empirical(0.0, 2, 1, 10_000, rng) == 1.0
        assert g_empirical(1.0, 2, 1, 10_000, rng) == 0.0
