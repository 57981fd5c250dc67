"""Greedy block-sparse recovery: the two-stage window/cluster solver and the
fixed-partition block OMP baseline, sharing least-squares machinery.

Both solvers iterate: correlate columns with the residual, pick a group of
columns, refit by least squares on everything selected so far, and update the
residual to the projection error. The two-stage solver first picks the window
(a fixed length-L group of columns) whose correlation norm is largest, then
scans every cluster of B = p*b consecutive columns overlapping that window
and keeps the best one. Ties always break toward the smallest index, so runs
are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sensing import Measurement, SensingMatrix
from .signal_model import SignalInstance

__all__ = [
    "IterationRecord",
    "RecoveryResult",
    "least_squares_on",
    "tsgbomp",
    "bomp",
    "success_check",
    "result_report",
    "trace_to_csv",
]


@dataclass(frozen=True)
class IterationRecord:
    """One solver iteration: chosen window, chosen cluster start, the block
    starts appended, and the residual norm after refitting. 1-based."""

    k: int
    window: int
    cluster_start: int
    block_starts: tuple[int, ...]
    residual_norm: float


@dataclass(frozen=True)
class RecoveryResult:
    estimated_columns: tuple[int, ...]
    x_hat: np.ndarray
    trace: tuple[IterationRecord, ...]
    iterations: int
    stop_reason: str  # "budget" | "residual-threshold"


def least_squares_on(Phi: SensingMatrix, columns, y: np.ndarray) -> np.ndarray:
    """Minimize ||y - Phi_cols u|| over u; minimum-norm solution on rank
    deficiency. `columns` is a 1-based sequence, duplicates allowed."""
    cols = np.asarray(list(columns), dtype=np.intp)
    if cols.size == 0:
        raise ValueError("least squares needs at least one column")
    if cols.min() < 1 or cols.max() > Phi.n:
        raise ValueError("column index out of range")
    A = Phi.entries[:, cols - 1]
    u, *_ = np.linalg.lstsq(A, y, rcond=None)
    return u


def _block_columns(block_starts, b: int, n: int) -> np.ndarray:
    """Deduplicated, sorted 0-based columns covered by length-b blocks."""
    cols = set()
    for t in block_starts:
        cols.update(range(t - 1, t - 1 + b))
    arr = np.asarray(sorted(cols), dtype=np.intp)
    if arr.size and (arr[0] < 0 or arr[-1] >= n):
        raise ValueError("block extends outside the signal range")
    return arr


def _refit(Phi: SensingMatrix, cols0: np.ndarray, y: np.ndarray):
    A = Phi.entries[:, cols0]
    u, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ u
    return u, r


def tsgbomp(
    Phi: SensingMatrix,
    measurement: Measurement,
    K: int,
    L: int,
    b: int,
    p: int,
    epsilon: float,
) -> RecoveryResult:
    """Two-stage greedy recovery with block budget K.

    Stage 1 scans the n/L fixed windows for the largest correlation norm.
    Stage 2 scans cluster starts i in {L*(w-1)+1-(B-1), ..., L*w}, clamped to
    [1, n-B+1] so every candidate cluster of B = p*b columns is fully in
    range, and selects the start whose B correlation entries have the largest
    norm. The p block starts {i, i+b, ..., i+(p-1)b} join the running set,
    the coefficients are refit on all covered columns, and the residual is
    the refit error. Stops when the residual drops below epsilon or after K
    iterations.
    """
    y = measurement.y
    m, n = Phi.m, Phi.n
    if y.shape != (m,):
        raise ValueError(f"measurement length {y.shape} does not match m={m}")
    if n % L != 0:
        raise ValueError(f"n={n} must be divisible by the window length L={L}")
    B = p * b
    if L < B:
        raise ValueError(f"window length L={L} must be at least B=p*b={B}")
    if K < 0:
        raise ValueError("block budget K must be >= 0")

    n_windows = n // L
    r = y.astype(complex if Phi.is_complex or np.iscomplexobj(y) else float)
    block_starts: set[int] = set()
    trace: list[IterationRecord] = []
    u = None
    cols0 = np.empty(0, dtype=np.intp)

    k = 0
    while np.linalg.norm(r) >= epsilon and k < K:
        k += 1
        c = Phi.entries.conj().T @ r
        power = np.abs(c) ** 2

        win_norms = power.reshape(n_windows, L).sum(axis=1)
        w = int(np.argmax(win_norms)) + 1

        lo = max(1, L * (w - 1) + 1 - (B - 1))
        hi = min(L * w, n - B + 1)
        # norms over sliding length-B column runs, via prefix sums
        csum = np.concatenate(([0.0], np.cumsum(power)))
        starts = np.arange(lo, hi + 1)
        run_norms = csum[starts - 1 + B] - csum[starts - 1]
        i_k = int(starts[np.argmax(run_norms)])
        h_k = tuple(i_k + j * b for j in range(p))

        block_starts.update(h_k)
        cols0 = _block_columns(sorted(block_starts), b, n)
        u, r = _refit(Phi, cols0, y)
        trace.append(
            IterationRecord(
                k=k,
                window=w,
                cluster_start=i_k,
                block_starts=h_k,
                residual_norm=float(np.linalg.norm(r)),
            )
        )

    stop = "residual-threshold" if np.linalg.norm(r) < epsilon else "budget"
    x_hat = np.zeros(n, dtype=complex if Phi.is_complex or np.iscomplexobj(y) else float)
    if u is not None:
        x_hat[cols0] = u
    return RecoveryResult(
        estimated_columns=tuple(int(c) + 1 for c in cols0),
        x_hat=x_hat,
        trace=tuple(trace),
        iterations=k,
        stop_reason=stop,
    )


def bomp(
    Phi: SensingMatrix,
    measurement: Measurement,
    K: int,
    block: int,
    epsilon: float,
) -> RecoveryResult:
    """Block OMP over the fixed partition into n/block consecutive blocks."""
    y = measurement.y
    m, n = Phi.m, Phi.n
    if y.shape != (m,):
        raise ValueError(f"measurement length {y.shape} does not match m={m}")
    if n % block != 0:
        raise ValueError(f"n={n} must be divisible by the block length {block}")
    if K < 0:
        raise ValueError("iteration budget K must be >= 0")

    n_blocks = n // block
    r = y.astype(complex if Phi.is_complex or np.iscomplexobj(y) else float)
    chosen: set[int] = set()
    trace: list[IterationRecord] = []
    u = None
    cols0 = np.empty(0, dtype=np.intp)

    k = 0
    while np.linalg.norm(r) >= epsilon and k < K:
        k += 1
        c = Phi.entries.conj().T @ r
        power = np.abs(c) ** 2
        norms = power.reshape(n_blocks, block).sum(axis=1)
        j = int(np.argmax(norms))
        chosen.add(j)
        cols0 = np.asarray(
            sorted(col for blk in chosen for col in range(blk * block, (blk + 1) * block)),
            dtype=np.intp,
        )
        u, r = _refit(Phi, cols0, y)
        start = j * block + 1
        trace.append(
            IterationRecord(
                k=k,
                window=j + 1,
                cluster_start=start,
                block_starts=(start,),
                residual_norm=float(np.linalg.norm(r)),
            )
        )

    stop = "residual-threshold" if np.linalg.norm(r) < epsilon else "budget"
    x_hat = np.zeros(n, dtype=complex if Phi.is_complex or np.iscomplexobj(y) else float)
    if u is not None:
        x_hat[cols0] = u
    return RecoveryResult(
        estimated_columns=tuple(int(c) + 1 for c in cols0),
        x_hat=x_hat,
        trace=tuple(trace),
        iterations=k,
        stop_reason=stop,
    )


def success_check(result: RecoveryResult, truth: SignalInstance, rel_tol: float = 1e-6) -> bool:
    """Exact-recovery criterion: estimated columns cover the true support and
    the relative coefficient error is within rel_tol."""
    true_cols = set(truth.support.columns)
    if not true_cols.issubset(result.estimated_columns):
        return False
    denom = np.linalg.norm(truth.x)
    err = np.linalg.norm(result.x_hat - truth.x)
    if denom == 0:
        return err == 0
    return bool(err / denom <= rel_tol)


def relative_error(result: RecoveryResult, truth: SignalInstance) -> float:
    denom = np.linalg.norm(truth.x)
    err = np.linalg.norm(result.x_hat - truth.x)
    if denom == 0:
        return 0.0 if err == 0 else float("inf")
    return float(err / denom)


def result_report(result: RecoveryResult) -> str:
    lines = [
        f"iterations: {result.iterations}",
        f"stop: {result.stop_reason}",
        "k window cluster_start residual",
    ]
    for rec in result.trace:
        lines.append(
            f"{rec.k} {rec.window} {rec.cluster_start} {rec.residual_norm:.6e}"
        )
    cols = " ".join(str(c) for c in result.estimated_columns)
    lines.append(f"estimated columns: {cols}")
    return "\n".join(lines) + "\n"


def trace_to_csv(result: RecoveryResult) -> str:
    lines = ["k,window,cluster_start,block_starts,residual_norm"]
    for rec in result.trace:
        starts = ";".join(str(s) for s in rec.block_starts)
        lines.append(f"{rec.k},{rec.window},{rec.cluster_start},{starts},{rec.residual_norm!r}")
    return "\n".join(lines) + "\n"
