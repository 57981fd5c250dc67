import numpy as np
import pytest

from tsgbomp.experiments import (
    ALGORITHMS,
    CurvePoint,
    ExperimentConfig,
    check_curve,
    curve_to_csv,
    feasible_K,
    max_feasible_K,
    run_curve,
    run_trial,
    theorem_regime_suite,
    trial_seed,
)
from tsgbomp.signal_model import min_separation


def small_config(**kw):
    defaults = dict(
        n=48, m=32, b=2, p=2, L=4, K_grid=(1, 2), trials=5, master_seed=7
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestConfig:
    def test_round_trip_through_text(self):
        cfg = small_config()
        again = ExperimentConfig.from_text(cfg.to_text())
        assert again == cfg

    def test_from_text_with_comments(self):
        text = "# comment\nn=48\nm=32\nb=2\np=2\nL=4\nK_grid=1,2\nmaster_seed=3\n"
        cfg = ExperimentConfig.from_text(text)
        assert cfg.K_grid == (1, 2)
        assert cfg.trials == 200  # default

    def test_infeasible_K_rejected(self):
        with pytest.raises(ValueError, match="infeasible"):
            small_config(K_grid=(1, 50))

    def test_identity_kind_needs_square(self):
        with pytest.raises(ValueError):
            small_config(matrix_kind="identity")
        cfg = small_config(m=48, matrix_kind="identity")
        assert cfg.matrix_kind == "identity"

    def test_unknown_algorithm_rejected(self):
        with pytest.raises(ValueError):
            small_config(algorithms=("tsgbomp", "omp"))


class TestFeasibility:
    def test_published_grid_limits(self):
        assert max_feasible_K(200, 4, 2, 8) == 15
        assert max_feasible_K(200, 4, 1, 8) == 13
        Lsep = min_separation(4, 2, 8)
        assert not feasible_K(200, 4, 2, Lsep, 16)
        assert feasible_K(200, 4, 2, Lsep, 15)

    def test_zero_blocks_always_fit(self):
        assert feasible_K(1, 4, 2, 20, 0)


class TestTrials:
    def test_seed_derivation_is_stable(self):
        assert trial_seed(7, 3, "tsgbomp", 11) == 13825836463410059764
        assert trial_seed(7, 3, "tsgbomp", 11) == trial_seed(7, 3, "tsgbomp", 11)
        assert trial_seed(7, 3, "tsgbomp", 11) != trial_seed(7, 3, "bomp", 11)

    def test_trial_reproducible(self):
        cfg = small_config()
        a = run_trial(cfg, 2, "tsgbomp", 12345)
        b = run_trial(cfg, 2, "tsgbomp", 12345)
        assert (a.success, a.iterations, a.rel_error) == (
            b.success,
            b.iterations,
            b.rel_error,
        )

    def test_identity_override_always_succeeds(self):
        cfg = small_config(m=48, matrix_kind="identity", K_grid=(1, 2, 3))
        for K in cfg.K_grid:
            rec = run_trial(cfg, K, "tsgbomp", trial_seed(cfg.master_seed, K, "tsgbomp", 0))
            assert rec.success

    def test_pinned_fixture(self):
        cfg = ExperimentConfig(
            n=200, m=160, b=4, p=2, L=8, K_grid=(2,), trials=1, master_seed=0
        )
        rec = run_trial(cfg, 2, "tsgbomp", 42)
        assert rec.success
        assert rec.iterations == 2
        assert rec.rel_error < 1e-12


class TestCurves:
    def test_row_count(self):
        cfg = small_config()
        pts = run_curve(cfg)
        assert len(pts) == len(cfg.K_grid) * len(cfg.algorithms)

    def test_identity_curve_all_ones(self):
        cfg = small_config(
            m=48, matrix_kind="identity", trials=1, algorithms=("tsgbomp",)
        )
        pts = run_curve(cfg)
        assert all(pt.success_rate == 1.0 for pt in pts)

    def test_jobs_do_not_change_results(self, tmp_path):
        cfg = small_config(trials=6)
        out1 = tmp_path / "curve1.csv"
        out2 = tmp_path / "curve2.csv"
        run_curve(cfg, jobs=1, out_path=str(out1))
        run_curve(cfg, jobs=2, out_path=str(out2))
        assert out1.read_bytes() == out2.read_bytes()

    def test_csv_format(self):
        pts = [CurvePoint(K=1, algorithm="tsgbomp", success_rate=0.5, trials=2)]
        csv = curve_to_csv(pts)
        lines = csv.splitlines()
        assert lines[0] == "K,algorithm,success_rate,trials"
        assert lines[1] == "1,tsgbomp,0.5,2"

    def test_check_curve_flags_rises(self):
        pts = [
            CurvePoint(1, "tsgbomp", 0.5, 10),
            CurvePoint(2, "tsgbomp", 0.9, 10),
        ]
        violations = check_curve(pts)
        assert violations and "rises" in violations[0]
        assert not check_curve(
            [CurvePoint(1, "tsgbomp", 0.9, 10), CurvePoint(2, "tsgbomp", 0.88, 10)]
        )


class TestTheoremRegime:
    def test_empty_report(self):
        rep = theorem_regime_suite(0, np.random.default_rng(0))
        assert rep.attempted == 0
        assert rep.render() == "no instances\n"

    def test_small_run_all_recovered(self):
        rep = theorem_regime_suite(6, np.random.default_rng(3))
        assert rep.attempted == 6
        assert rep.certified >= 1
        assert rep.all_recovered, rep.render()

    def test_certified_instances_have_valid_constant(self):
        rep = theorem_regime_suite(4, np.random.default_rng(1))
        for inst in rep.instances:
            if inst.certified:
                assert inst.delta < 1.0 / np.sqrt(2 * inst.config.K + 1)
