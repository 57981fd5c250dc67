"""Monte Carlo recovery experiments: phase-transition curves over block
sparsity and the certified-instance validation suite.

Every trial is reproducible from (config, trial seed) alone: the trial seed
is a stable SHA-256 hash of (master seed, K, algorithm, trial index), and one
Generator seeded with it drives matrix, support, and value draws in a fixed
order. Parallel execution over trials therefore cannot change any result.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import f_K, pibric, thm1_certificate
from .recovery import bomp, relative_error, success_check, tsgbomp
from .sensing import gaussian_matrix, identity_matrix, measure
from .signal_model import (
    GeometryError,
    PibsParams,
    SignalInstance,
    Support,
    fill_values,
    min_separation,
    sample_support,
)

__all__ = [
    "ALGORITHMS",
    "ExperimentConfig",
    "TrialRecord",
    "CurvePoint",
    "RegimeInstance",
    "RegimeReport",
    "feasible_K",
    "max_feasible_K",
    "trial_seed",
    "run_trial",
    "run_curve",
    "check_curve",
    "curve_to_csv",
    "theorem_regime_suite",
]

ALGORITHMS = ("tsgbomp", "bomp")


def feasible_K(n: int, b: int, p: int, Lsep: int, K: int) -> bool:
    """Whether K blocks can be arranged: the tightest packing uses ceil(K/p)
    clusters, so K*b + (ceil(K/p) - 1)*Lsep must fit in n."""
    if K == 0:
        return True
    k_min = -(-K // p)
    return K * b + (k_min - 1) * Lsep <= n


def max_feasible_K(n: int, b: int, p: int, L: int) -> int:
    Lsep = min_separation(b, p, L)
    K = 0
    while feasible_K(n, b, p, Lsep, K + 1):
        K += 1
    return K


@dataclass(frozen=True)
class ExperimentConfig:
    """One phase-transition experiment. `epsilon` is the residual-threshold
    multiplier on ||y|| (trials are noiseless)."""

    n: int
    m: int
    b: int
    p: int
    L: int
    K_grid: tuple[int, ...]
    value_scheme: str = "const:10"
    trials: int = 200
    epsilon: float = 1e-6
    algorithms: tuple[str, ...] = ALGORITHMS
    master_seed: int = 0
    matrix_kind: str = "gaussian"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")
        if self.matrix_kind not in ("gaussian", "identity"):
            raise ValueError("matrix_kind must be 'gaussian' or 'identity'")
        if self.matrix_kind == "identity" and self.m != self.n:
            raise ValueError("identity matrices need m == n")
        if self.n % self.L != 0:
            raise ValueError("n must be divisible by L")
        Lsep = min_separation(self.b, self.p, self.L)
        for K in self.K_grid:
            if not feasible_K(self.n, self.b, self.p, Lsep, K):
                raise ValueError(
                    f"K={K} infeasible: needs {K * self.b + (-(-K // self.p) - 1) * Lsep} "
                    f"indices but n={self.n}"
                )

    @property
    def Lsep(self) -> int:
        return min_separation(self.b, self.p, self.L)

    def params_for(self, K: int) -> PibsParams:
        return PibsParams.from_window(
            n=self.n, b=self.b, p=self.p, l=self.L, L=self.L, K=K, R=0
        )

    def to_text(self) -> str:
        lines = [
            f"n={self.n}",
            f"m={self.m}",
            f"b={self.b}",
            f"p={self.p}",
            f"L={self.L}",
            "K_grid=" + ",".join(str(k) for k in self.K_grid),
            f"value_scheme={self.value_scheme}",
            f"trials={self.trials}",
            f"epsilon={self.epsilon!r}",
            "algorithms=" + ",".join(self.algorithms),
            f"master_seed={self.master_seed}",
            f"matrix_kind={self.matrix_kind}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        fields: dict[str, str] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
        required = {"n", "m", "b", "p", "L", "K_grid", "master_seed"}
        missing = required - fields.keys()
        if missing:
            raise ValueError(f"config missing keys: {sorted(missing)}")
        kwargs = dict(
            n=int(fields["n"]),
            m=int(fields["m"]),
            b=int(fields["b"]),
            p=int(fields["p"]),
            L=int(fields["L"]),
            K_grid=tuple(int(v) for v in fields["K_grid"].split(",") if v),
            master_seed=int(fields["master_seed"]),
        )
        if "value_scheme" in fields:
            kwargs["value_scheme"] = fields["value_scheme"]
        if "trials" in fields:
            kwargs["trials"] = int(fields["trials"])
        if "epsilon" in fields:
            kwargs["epsilon"] = float(fields["epsilon"])
        if "algorithms" in fields:
            kwargs["algorithms"] = tuple(v for v in fields["algorithms"].split(",") if v)
        if "matrix_kind" in fields:
            kwargs["matrix_kind"] = fields["matrix_kind"]
        return cls(**kwargs)


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    K: int
    algorithm: str
    success: bool
    iterations: int
    rel_error: float
    runtime: float


@dataclass(frozen=True)
class CurvePoint:
    K: int
    algorithm: str
    success_rate: float
    trials: int


def trial_seed(master_seed: int, K: int, algorithm: str, index: int) -> int:
    """Stable 64-bit per-trial seed: first 8 little-endian bytes of
    SHA-256 over 'master|K|algorithm|index'."""
    digest = hashlib.sha256(f"{master_seed}|{K}|{algorithm}|{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _fill(support: Support, scheme: str, rng: np.random.Generator) -> SignalInstance:
    if scheme.startswith("const:"):
        return fill_values(support, "const", float(scheme.split(":", 1)[1]), rng)
    if scheme == "gaussian":
        return fill_values(support, "gaussian", rng=rng)
    raise ValueError(f"unknown value scheme {scheme!r}")


def run_trial(config: ExperimentConfig, K: int, algorithm: str, seed: int) -> TrialRecord:
    """One seeded trial: fresh matrix and signal, noiseless measurement,
    solve, exact-recovery check."""
    rng = np.random.default_rng(seed)
    if config.matrix_kind == "identity":
        Phi = identity_matrix(config.n)
    else:
        Phi = gaussian_matrix(config.m, config.n, "unit", True, rng)
    support = sample_support(config.params_for(K), K, 0, rng)
    signal = _fill(support, config.value_scheme, rng)
    meas = measure(Phi, signal.x)
    eps = config.epsilon * float(np.linalg.norm(meas.y))

    t0 = time.perf_counter()
    if algorithm == "tsgbomp":
        result = tsgbomp(Phi, meas, K=K, L=config.L, b=config.b, p=config.p, epsilon=eps)
    elif algorithm == "bomp":
        result = bomp(Phi, meas, K=K, block=config.b * config.p, epsilon=eps)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    runtime = time.perf_counter() - t0

    return TrialRecord(
        seed=seed,
        K=K,
        algorithm=algorithm,
        success=success_check(result, signal, rel_tol=1e-6),
        iterations=result.iterations,
        rel_error=relative_error(result, signal),
        runtime=runtime,
    )


def _trial_task(args) -> TrialRecord:
    config, K, algorithm, seed = args
    return run_trial(config, K, algorithm, seed)


def run_curve(
    config: ExperimentConfig, jobs: int = 1, out_path: str | None = None
) -> list[CurvePoint]:
    """Aggregate success rates over the (K, algorithm) grid. Results are
    independent of `jobs`; on a per-trial error the points finished so far
    are flushed to `out_path` before the error propagates."""
    tasks = [
        (config, K, alg, trial_seed(config.master_seed, K, alg, t))
        for K in config.K_grid
        for alg in config.algorithms
        for t in range(config.trials)
    ]
    records: list[TrialRecord] = []
    try:
        if jobs <= 1:
            for task in tasks:
                records.append(_trial_task(task))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for rec in pool.map(_trial_task, tasks, chunksize=32):
                    records.append(rec)
    except Exception:
        if out_path is not None:
            partial = _aggregate(config, records, complete_only=True)
            _write(out_path, curve_to_csv(partial))
        raise
    points = _aggregate(config, records)
    if out_path is not None:
        _write(out_path, curve_to_csv(points))
    return points


def _aggregate(
    config: ExperimentConfig, records: list[TrialRecord], complete_only: bool = False
) -> list[CurvePoint]:
    by_key: dict[tuple[int, str], list[TrialRecord]] = {}
    for rec in records:
        by_key.setdefault((rec.K, rec.algorithm), []).append(rec)
    points = []
    for K in config.K_grid:
        for alg in config.algorithms:
            recs = by_key.get((K, alg), [])
            if complete_only and len(recs) < config.trials:
                continue
            if not recs:
                continue
            rate = sum(r.success for r in recs) / len(recs)
            points.append(CurvePoint(K=K, algorithm=alg, success_rate=rate, trials=len(recs)))
    return points


def curve_to_csv(points: list[CurvePoint]) -> str:
    lines = ["K,algorithm,success_rate,trials"]
    for pt in points:
        lines.append(f"{pt.K},{pt.algorithm},{pt.success_rate!r},{pt.trials}")
    return "\n".join(lines) + "\n"


def _write(path: str, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def check_curve(points: list[CurvePoint], slack: float = 0.05) -> list[str]:
    """Statistical sanity checks on a finished curve: success rate should be
    nonincreasing in K up to Monte Carlo slack. Returns violation messages."""
    violations = []
    by_alg: dict[str, list[CurvePoint]] = {}
    for pt in points:
        by_alg.setdefault(pt.algorithm, []).append(pt)
    for alg, pts in by_alg.items():
        pts = sorted(pts, key=lambda p: p.K)
        for a, b in zip(pts, pts[1:]):
            if b.success_rate > a.success_rate + slack:
                violations.append(
                    f"{alg}: success rate rises from {a.success_rate:.3f} (K={a.K}) "
                    f"to {b.success_rate:.3f} (K={b.K})"
                )
    return violations


# ---------------------------------------------------------------------------
# certified-instance validation

@dataclass(frozen=True)
class RegimeConfig:
    """Small geometry for exact-constant certification runs."""

    n: int
    m: int
    b: int
    p: int
    L: int
    K: int

    @property
    def Lsep(self) -> int:
        return min_separation(self.b, self.p, self.L)


DEFAULT_REGIME_CONFIGS = (
    RegimeConfig(n=32, m=320, b=1, p=1, L=2, K=1),
    RegimeConfig(n=32, m=400, b=1, p=1, L=2, K=2),
    RegimeConfig(n=40, m=320, b=1, p=1, L=4, K=1),
)


@dataclass(frozen=True)
class RegimeInstance:
    config: RegimeConfig
    delta: float
    certified: bool
    success: bool | None


@dataclass(frozen=True)
class RegimeReport:
    instances: tuple[RegimeInstance, ...]

    @property
    def attempted(self) -> int:
        return len(self.instances)

    @property
    def certified(self) -> int:
        return sum(1 for i in self.instances if i.certified)

    @property
    def recovered(self) -> int:
        return sum(1 for i in self.instances if i.certified and i.success)

    @property
    def all_recovered(self) -> bool:
        return self.recovered == self.certified

    def render(self) -> str:
        if not self.instances:
            return "no instances\n"
        lines = [
            f"instances: {self.attempted}",
            f"certified: {self.certified}",
            f"recovered: {self.recovered}",
        ]
        if self.certified == 0:
            lines.append("no certified instances found")
        return "\n".join(lines) + "\n"


def theorem_regime_suite(
    count: int,
    rng: np.random.Generator,
    configs: tuple[RegimeConfig, ...] = DEFAULT_REGIME_CONFIGS,
    cap: int = 1_000_000,
) -> RegimeReport:
    """Generate instances, keep those where the exactly-computed constant
    certifies recovery, and solve them. Certified instances must all recover;
    the report says whether they did.

    The signal is built to clear the magnitude condition with margin: the
    largest magnitude is 1 and the smallest is kept two percent above the
    certificate threshold f_K(delta).
    """
    instances: list[RegimeInstance] = []
    for i in range(count):
        cfg = configs[i % len(configs)]
        Phi = gaussian_matrix(cfg.m, cfg.n, "one_over_m", True, rng)
        params = PibsParams(
            n=cfg.n, b=cfg.b, p=cfg.p, l=cfg.Lsep, Lsep=cfg.Lsep,
            K=max(cfg.K - 1, 0), R=2,
        )
        est = pibric(Phi, params, max(cfg.K - 1, 0), 2, cap=cap)
        delta = est.delta

        thresh17 = 1.0 / np.sqrt(2.0 * cfg.K + 1.0)
        floor = f_K(delta, cfg.K, cfg.b, cfg.p) if delta < 1 else np.inf
        if delta >= thresh17 or floor >= 0.97:
            instances.append(RegimeInstance(cfg, delta, certified=False, success=None))
            continue

        sig_params = PibsParams.from_window(
            n=cfg.n, b=cfg.b, p=cfg.p, l=cfg.L, L=cfg.L, K=cfg.K, R=0
        )
        support = sample_support(sig_params, cfg.K, 0, rng)
        cols = support.column_array
        lo = float(floor) * 1.02
        mags = rng.uniform(lo, 1.0, size=cols.size)
        mags[int(rng.integers(0, cols.size))] = 1.0
        signs = rng.integers(0, 2, size=cols.size) * 2 - 1
        x = np.zeros(cfg.n)
        x[cols] = mags * signs
        signal = SignalInstance(
            x=x, support=support, params=sig_params,
            x_min=float(np.min(mags)), x_max=1.0,
        )

        cert = thm1_certificate(
            delta, cfg.K, cfg.b, cfg.p, epsilon=0.0,
            x_min=signal.x_min, x_max=signal.x_max, field="real",
        )
        if not cert.passed:
            instances.append(RegimeInstance(cfg, delta, certified=False, success=None))
            continue

        meas = measure(Phi, signal.x)
        eps = 1e-9 * float(np.linalg.norm(meas.y))
        result = tsgbomp(Phi, meas, K=cfg.K, L=cfg.L, b=cfg.b, p=cfg.p, epsilon=eps)
        instances.append(
            RegimeInstance(
                cfg, delta, certified=True, success=success_check(result, signal)
            )
        )
    return RegimeReport(instances=tuple(instances))
