"""Block-sparse signal model: cluster/pseudo-block supports, their generation,
enumeration, exact counting, and value filling.

A support consists of "true clusters" (runs of 1..p adjacent blocks of b
indices each) separated by at least ``Lsep`` indices free of clusters, plus
optional fixed-length "pseudo blocks" that may sit anywhere in the gaps as
long as they overlap nothing. All user-facing indices are 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "GeometryError",
    "EnumerationCapError",
    "PibsParams",
    "Support",
    "SignalInstance",
    "CountComparison",
    "min_separation",
    "validate_support",
    "sample_support",
    "enumerate_cell",
    "enumerate_supports",
    "count_supports_formula",
    "count_supports_bound",
    "formula_assumptions",
    "compare_counts",
    "fill_values",
    "support_to_text",
    "support_from_text",
    "signal_to_csv",
    "signal_values_from_csv",
]


class GeometryError(ValueError):
    """The requested arrangement does not fit in the signal length."""


class EnumerationCapError(RuntimeError):
    """Support enumeration exceeds the configured cap."""

    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"enumeration size {count} exceeds cap {cap}")


def min_separation(b: int, p: int, L: int) -> int:
    """Minimum cluster separation induced by a window of length L: L + 2pb - b."""
    if b < 1 or p < 1 or L < 1:
        raise ValueError("b, p, L must all be >= 1")
    return L + 2 * p * b - b


@dataclass(frozen=True)
class PibsParams:
    """Geometry of the sparsity model.

    n: signal length; b: block size; p: max blocks per cluster;
    l: pseudo-block length; Lsep: minimum inter-cluster separation;
    K: total true-block budget; R: pseudo-block budget.
    ``L`` is recorded when Lsep was derived from a window length.
    """

    n: int
    b: int
    p: int
    l: int
    Lsep: int
    K: int
    R: int
    L: int | None = None

    def __post_init__(self):
        if self.b < 1 or self.p < 1:
            raise ValueError("b and p must be >= 1")
        if self.K < 0 or self.R < 0:
            raise ValueError("K and R must be >= 0")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.Lsep < 1:
            raise ValueError("Lsep must be >= 1")
        if not (0 <= self.l <= self.Lsep):
            raise ValueError("pseudo length l must satisfy 0 <= l <= Lsep")
        if self.L is not None and min_separation(self.b, self.p, self.L) != self.Lsep:
            raise ValueError("recorded window length inconsistent with Lsep")

    @classmethod
    def from_window(cls, n: int, b: int, p: int, l: int, L: int, K: int, R: int) -> "PibsParams":
        return cls(n=n, b=b, p=p, l=l, Lsep=min_separation(b, p, L), K=K, R=R, L=L)

    @property
    def B(self) -> int:
        """Cluster capacity p*b."""
        return self.p * self.b

    @property
    def window_length(self) -> int:
        """Window length, recorded or implied by Lsep = L + 2pb - b."""
        if self.L is not None:
            return self.L
        return self.Lsep - 2 * self.p * self.b + self.b

    @property
    def analysis_grade(self) -> bool:
        """Whether n hosts every admissible arrangement within budget:
        n >= K*b + R*Lsep + (K+1)*(Lsep-1)."""
        need = self.K * self.b + self.R * self.Lsep + (self.K + 1) * (self.Lsep - 1)
        return self.n >= need


@dataclass(frozen=True)
class Support:
    """A validated index set: ordered clusters (start, block count) plus
    pseudo-block starts. Starts are 1-based."""

    clusters: tuple[tuple[int, int], ...]
    pseudo: tuple[int, ...]
    params: PibsParams

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(sorted(tuple(c) for c in self.clusters)))
        object.__setattr__(self, "pseudo", tuple(sorted(self.pseudo)))

    @property
    def total_blocks(self) -> int:
        return sum(j for _, j in self.clusters)

    @property
    def pseudo_count(self) -> int:
        return len(self.pseudo)

    @cached_property
    def block_starts(self) -> tuple[int, ...]:
        b = self.params.b
        out = []
        for start, j in self.clusters:
            out.extend(start + i * b for i in range(j))
        return tuple(out)

    @cached_property
    def columns(self) -> tuple[int, ...]:
        """All covered indices, sorted, 1-based."""
        b, l = self.params.b, self.params.l
        cols: set[int] = set()
        for start, j in self.clusters:
            cols.update(range(start, start + j * b))
        for start in self.pseudo:
            cols.update(range(start, start + l))
        return tuple(sorted(cols))

    @cached_property
    def column_array(self) -> np.ndarray:
        """0-based column indices for numpy slicing."""
        return np.asarray(self.columns, dtype=np.intp) - 1

    def is_empty(self) -> bool:
        return not self.clusters and not self.pseudo


def validate_support(support: Support, params: PibsParams | None = None) -> tuple[bool, list[str]]:
    """Check every support invariant; return (ok, list of violations)."""
    p = params if params is not None else support.params
    bad: list[str] = []
    n, b, l = p.n, p.b, p.l

    for start, j in support.clusters:
        if not (1 <= j <= p.p):
            bad.append(f"cluster-size: block count {j} outside [1, {p.p}]")
        if start < 1 or start + j * b - 1 > n:
            bad.append(f"cluster-range: cluster at {start} with {j} blocks leaves [1, {n}]")
    for (s1, j1), (s2, _) in zip(support.clusters, support.clusters[1:]):
        gap = s2 - (s1 + j1 * b)
        if gap < p.Lsep:
            bad.append(f"separation: gap {gap} between clusters at {s1} and {s2} below {p.Lsep}")

    if l == 0 and support.pseudo:
        bad.append("pseudo-length: pseudo blocks present but pseudo length is 0")
    cluster_cols: set[int] = set()
    for start, j in support.clusters:
        cluster_cols.update(range(start, start + j * b))
    prev_end = 0
    for start in support.pseudo:
        if start < 1 or start + l - 1 > n:
            bad.append(f"pseudo-range: pseudo block at {start} leaves [1, {n}]")
        if start <= prev_end:
            bad.append(f"pseudo-overlap: pseudo blocks overlap at {start}")
        if cluster_cols.intersection(range(start, start + l)):
            bad.append(f"pseudo-overlap: pseudo block at {start} overlaps a cluster")
        prev_end = max(prev_end, start + l - 1)

    return (not bad, bad)


# ---------------------------------------------------------------------------
# compositions of the block budget into cluster sizes

@lru_cache(maxsize=None)
def _composition_counts(total: int, parts: int, p: int) -> int:
    """Number of compositions of `total` into exactly `parts` parts in [1, p]."""
    if parts == 0:
        return 1 if total == 0 else 0
    if total < parts or total > parts * p:
        return 0
    return sum(_composition_counts(total - j, parts - 1, p) for j in range(1, p + 1))


def _compositions(total: int, parts: int, p: int) -> Iterator[tuple[int, ...]]:
    if parts == 0:
        if total == 0:
            yield ()
        return
    for j in range(1, p + 1):
        if parts - 1 <= total - j <= (parts - 1) * p:
            for rest in _compositions(total - j, parts - 1, p):
                yield (j,) + rest


def _unrank_composition(index: int, total: int, parts: int, p: int) -> tuple[int, ...]:
    out = []
    for pos in range(parts):
        remaining_parts = parts - pos - 1
        for j in range(1, p + 1):
            c = _composition_counts(total - j, remaining_parts, p)
            if index < c:
                out.append(j)
                total -= j
                break
            index -= c
        else:
            raise IndexError("composition index out of range")
    return tuple(out)


def _arrangement_count(n: int, footprint: int, k: int, Lsep: int) -> int:
    """Stars-and-bars count of ordered cluster placements with k clusters of
    total footprint columns and interior gaps >= Lsep."""
    if k == 0:
        return 1
    slack = n - footprint - (k - 1) * Lsep
    if slack < 0:
        return 0
    return math.comb(slack + k, k)


# ---------------------------------------------------------------------------
# sampling

def sample_support(
    params: PibsParams,
    total_blocks: int,
    pseudo_count: int,
    rng: np.random.Generator,
    max_tries: int = 100_000,
) -> Support:
    """Draw a uniformly distributed admissible support.

    Cluster layout is sampled exactly uniformly over all admissible
    arrangements (composition weighted by its placement count, then a
    stars-and-bars unranking). Pseudo blocks are then placed by rejection,
    capped at `max_tries` attempts.
    """
    if total_blocks > params.K or pseudo_count > params.R:
        raise ValueError("requested counts exceed the parameter budget")
    if total_blocks < 0 or pseudo_count < 0:
        raise ValueError("counts must be nonnegative")
    if pseudo_count > 0 and params.l == 0:
        raise GeometryError("pseudo blocks of length 0 cover nothing; use pseudo_count=0")

    n, b, p, Lsep = params.n, params.b, params.p, params.Lsep
    footprint = total_blocks * b

    if total_blocks == 0:
        clusters: tuple[tuple[int, int], ...] = ()
    else:
        k_lo = -(-total_blocks // p)
        weights = []
        for k in range(k_lo, total_blocks + 1):
            weights.append(
                _composition_counts(total_blocks, k, p)
                * _arrangement_count(n, footprint, k, Lsep)
            )
        total_weight = sum(weights)
        if total_weight == 0:
            raise GeometryError(
                f"no arrangement of {total_blocks} blocks (b={b}, Lsep={Lsep}) fits in n={n}"
            )
        # exact integer inversion keeps the law uniform even for huge counts
        ticket = int(rng.integers(0, total_weight))
        k = k_lo
        for w in weights:
            if ticket < w:
                break
            ticket -= w
            k += 1
        comp_count = _composition_counts(total_blocks, k, p)
        arr_count = _arrangement_count(n, footprint, k, Lsep)
        comp_idx, arr_idx = divmod(ticket, arr_count)
        comp = _unrank_composition(comp_idx, total_blocks, k, p)
        slack = n - footprint - (k - 1) * Lsep
        gaps = _unrank_weak_composition(arr_idx, slack, k + 1)
        clusters_list = []
        pos = 1 + gaps[0]
        for j, extra in zip(comp, gaps[1:]):
            clusters_list.append((pos, j))
            pos += j * b + Lsep + extra
        clusters = tuple(clusters_list)

    pseudo = _place_pseudo_random(params, clusters, pseudo_count, rng, max_tries)
    support = Support(clusters=clusters, pseudo=pseudo, params=params)
    ok, bad = validate_support(support)
    if not ok:  # pragma: no cover - guards the sampler itself
        raise AssertionError(f"sampler produced invalid support: {bad}")
    return support


def _unrank_weak_composition(index: int, total: int, parts: int) -> tuple[int, ...]:
    """Unrank weak compositions of `total` into `parts` nonnegative parts,
    ordered lexicographically."""
    out = []
    for pos in range(parts - 1):
        for v in range(total + 1):
            c = math.comb(total - v + parts - pos - 2, parts - pos - 2)
            if index < c:
                out.append(v)
                total -= v
                break
            index -= c
        else:  # pragma: no cover
            raise IndexError("composition index out of range")
    out.append(total)
    return tuple(out)


def _place_pseudo_random(
    params: PibsParams,
    clusters: Sequence[tuple[int, int]],
    pseudo_count: int,
    rng: np.random.Generator,
    max_tries: int,
) -> tuple[int, ...]:
    if pseudo_count == 0:
        return ()
    n, b, l = params.n, params.b, params.l
    allowed = _allowed_pseudo_starts(n, b, l, clusters)
    if allowed.size == 0:
        raise GeometryError("no room for any pseudo block")
    for _ in range(max_tries):
        starts = sorted(int(allowed[i]) for i in rng.integers(0, allowed.size, size=pseudo_count))
        if all(s2 - s1 >= l for s1, s2 in zip(starts, starts[1:])):
            return tuple(starts)
    raise GeometryError(
        f"could not place {pseudo_count} pseudo blocks within {max_tries} tries"
    )


def _allowed_pseudo_starts(
    n: int, b: int, l: int, clusters: Sequence[tuple[int, int]]
) -> np.ndarray:
    """1-based starts s where [s, s+l) stays in range and misses every cluster."""
    if l == 0 or l > n:
        return np.empty(0, dtype=np.intp)
    blocked = np.zeros(n + 2, dtype=bool)
    for start, j in clusters:
        lo = max(1, start - l + 1)
        hi = min(n - l + 1, start + j * b - 1)
        if lo <= hi:
            blocked[lo : hi + 1] = True
    starts = np.arange(1, n - l + 2, dtype=np.intp)
    return starts[~blocked[1 : n - l + 2]]


# ---------------------------------------------------------------------------
# enumeration

def _cluster_arrangements(
    params: PibsParams, total_blocks: int
) -> Iterator[tuple[tuple[int, int], ...]]:
    n, b, p, Lsep = params.n, params.b, params.p, params.Lsep
    if total_blocks == 0:
        yield ()
        return
    k_lo = -(-total_blocks // p)
    for k in range(k_lo, total_blocks + 1):
        for comp in _compositions(total_blocks, k, p):
            tail = [0] * (k + 1)
            for i in range(k - 1, -1, -1):
                tail[i] = tail[i + 1] + comp[i] * b + (Lsep if i < k - 1 else 0)

            def rec(i: int, pos: int, acc: list[tuple[int, int]]):
                if i == k:
                    yield tuple(acc)
                    return
                last = n - tail[i] + 1
                for s in range(pos, last + 1):
                    acc.append((s, comp[i]))
                    yield from rec(i + 1, s + comp[i] * b + Lsep, acc)
                    acc.pop()

            yield from rec(0, 1, [])


def _pseudo_arrangements(
    params: PibsParams, clusters: tuple[tuple[int, int], ...], r: int
) -> Iterator[tuple[int, ...]]:
    if r == 0:
        yield ()
        return
    if params.l == 0:
        return
    allowed = _allowed_pseudo_starts(params.n, params.b, params.l, clusters)
    l = params.l

    def rec(start_idx: int, left: int, acc: list[int]):
        if left == 0:
            yield tuple(acc)
            return
        for i in range(start_idx, allowed.size):
            s = int(allowed[i])
            if acc and s - acc[-1] < l:
                continue
            acc.append(s)
            yield from rec(i + 1, left - 1, acc)
            acc.pop()

    yield from rec(0, r, [])


def iter_cell(params: PibsParams, k: int, r: int) -> Iterator[Support]:
    """Yield every support with exactly k true blocks and r pseudo blocks,
    in lexicographic order."""
    for clusters in _cluster_arrangements(params, k):
        for pseudo in _pseudo_arrangements(params, clusters, r):
            yield Support(clusters=clusters, pseudo=pseudo, params=params)


def enumerate_cell(params: PibsParams, k: int, r: int, cap: int = 1_000_000) -> list[Support]:
    """Materialize one (k, r) cell, guarding against blow-up."""
    out: list[Support] = []
    count = 0
    for s in iter_cell(params, k, r):
        count += 1
        if count <= cap:
            out.append(s)
    if count > cap:
        raise EnumerationCapError(count, cap)
    return out


def enumerate_supports(
    params: PibsParams, K_max: int, R_max: int, cap: int = 1_000_000
) -> list[Support]:
    """All supports with at most K_max true blocks and at most R_max pseudo
    blocks (the union of every (k, r) cell)."""
    out: list[Support] = []
    count = 0
    for k in range(K_max + 1):
        for r in range(R_max + 1):
            for s in iter_cell(params, k, r):
                count += 1
                if count <= cap:
                    out.append(s)
    if count > cap:
        raise EnumerationCapError(count, cap)
    return out


# ---------------------------------------------------------------------------
# counting

def count_supports_formula(params: PibsParams, K: int, R: int) -> int:
    """Closed-form count of the (K, R) cell via the composition/stars-and-bars
    expression; exact integers throughout.

    The R = 0 branch is exact. For R >= 1 the inner sum runs over interior
    gaps holding at least one pseudo block (q >= 1) and counts per-gap
    occupancy patterns rather than individual placements, so it can disagree
    with the enumeration oracle; compare_counts() reports such gaps instead
    of papering over them.
    """
    if K < 0 or R < 0:
        raise ValueError("K and R must be nonnegative")
    n, b, p, Lsep = params.n, params.b, params.p, params.Lsep
    if K == 0:
        if R == 0:
            return 1
        return 0  # the q-sum needs an interior gap, so no clusters means no terms

    total = 0
    k_lo = -(-K // p)
    if R == 0:
        P = n - K * b
        for k in range(k_lo, K + 1):
            comp = _composition_counts(K, k, p)
            if comp == 0:
                continue
            top = k + P - Lsep * (k - 1)
            if top >= k:
                total += comp * math.comb(top, k)
        return total

    P = n - K * b - Lsep * R
    if P < 0:
        return 0
    for k in range(k_lo, K + 1):
        comp = _composition_counts(K, k, p)
        if comp == 0:
            continue
        inner = 0
        for q in range(1, min(R, k - 1) + 1):
            top = k + P - Lsep * (k - 1 - q)
            if top < k:
                continue
            inner += math.comb(k - 1, q) * math.comb(R + 1, R - q) * math.comb(top, k)
        total += comp * inner
    return total


def formula_assumptions(params: PibsParams, K: int, R: int) -> tuple[bool, list[str]]:
    """Flags for the derivation assumptions behind the R >= 1 count."""
    if R == 0:
        return True, []
    reasons = []
    L = params.window_length
    if L < params.p * params.b:
        reasons.append(f"window length {L} below cluster capacity {params.p * params.b}")
    if (R + 1) * params.p > K:
        reasons.append(f"(R+1)*p = {(R + 1) * params.p} exceeds K = {K}")
    if params.l != params.Lsep:
        reasons.append(f"pseudo length {params.l} differs from separation {params.Lsep}")
    return (not reasons, reasons)


@dataclass(frozen=True)
class CountComparison:
    params: PibsParams
    K: int
    R: int
    formula: int
    enumerated: int
    assumptions_ok: bool
    notes: tuple[str, ...]

    @property
    def match(self) -> bool:
        return self.formula == self.enumerated

    def describe(self) -> str:
        status = "match" if self.match else "MISMATCH"
        extra = "" if self.assumptions_ok else " [assumptions violated]"
        return (
            f"(n={self.params.n}, b={self.params.b}, p={self.params.p}, "
            f"l={self.params.l}, Lsep={self.params.Lsep}, K={self.K}, R={self.R}): "
            f"formula={self.formula} enumerated={self.enumerated} {status}{extra}"
        )


def compare_counts(params: PibsParams, K: int, R: int, cap: int = 1_000_000) -> CountComparison:
    """Formula vs enumeration for one cell; mismatches are reported, never patched."""
    formula = count_supports_formula(params, K, R)
    enumerated = sum(1 for _ in iter_cell(params, K, R))
    if enumerated > cap:
        raise EnumerationCapError(enumerated, cap)
    ok, reasons = formula_assumptions(params, K, R)
    return CountComparison(
        params=params, K=K, R=R, formula=formula, enumerated=enumerated,
        assumptions_ok=ok, notes=tuple(reasons),
    )


def count_supports_bound(params: PibsParams, K: int, R: int) -> float:
    """Closed-form upper bound exp(A + K*C + K*ln(p*D/K - E)) on the (K, R)
    count, valid when L >= p*b and (R+1)*p <= K. Evaluated in the log domain."""
    b, p, Lsep, n = params.b, params.p, params.Lsep, params.n
    L = params.window_length
    if L < p * b:
        raise ValueError(f"bound requires L >= p*b ({L} < {p * b})")
    if (R + 1) * p > K:
        raise ValueError(f"bound requires (R+1)*p <= K ({(R + 1) * p} > {K})")
    A = 3.0 * p * K / (2.0 * (p + 1) ** 2) + R
    C = math.log(p) + 21.0 / 8.0 - 1.0 / p
    D = n - K * b + Lsep
    E = Lsep - 1
    arg = p * D / K - E
    if arg <= 0:
        raise ValueError("bound undefined: p*D/K - E <= 0")
    return math.exp(A + K * C + K * math.log(arg))


# ---------------------------------------------------------------------------
# values

@dataclass(frozen=True)
class SignalInstance:
    """A concrete signal: dense vector x, its support, and cached magnitude
    extremes (None for the zero signal)."""

    x: np.ndarray
    support: Support
    params: PibsParams
    x_min: float | None
    x_max: float | None

    @property
    def is_zero(self) -> bool:
        return self.x_min is None


def fill_values(
    support: Support,
    scheme: str = "const",
    amplitude: float = 10.0,
    rng: np.random.Generator | None = None,
) -> SignalInstance:
    """Fill the support with values: `const` draws equiprobable +-amplitude,
    `gaussian` draws standard normals (resampling exact zeros)."""
    if support.pseudo:
        raise ValueError("signals are filled on pseudo-free supports only")
    params = support.params
    x = np.zeros(params.n)
    cols = support.column_array
    if cols.size:
        if scheme == "const":
            if rng is None:
                raise ValueError("const scheme needs an rng for the signs")
            signs = rng.integers(0, 2, size=cols.size) * 2 - 1
            x[cols] = amplitude * signs
        elif scheme == "gaussian":
            if rng is None:
                raise ValueError("gaussian scheme needs an rng")
            vals = rng.standard_normal(cols.size)
            while np.any(vals == 0.0):
                zero = vals == 0.0
                vals[zero] = rng.standard_normal(int(zero.sum()))
            x[cols] = vals
        else:
            raise ValueError(f"unknown value scheme {scheme!r}")
        mags = np.abs(x[cols])
        x_min, x_max = float(mags.min()), float(mags.max())
    else:
        x_min = x_max = None
    return SignalInstance(x=x, support=support, params=params, x_min=x_min, x_max=x_max)


# ---------------------------------------------------------------------------
# serialization (1-based, line oriented / CSV)

def support_to_text(support: Support) -> str:
    lines = [f"cluster {start} {j}" for start, j in support.clusters]
    lines += [f"pseudo {start}" for start in support.pseudo]
    return "\n".join(lines) + ("\n" if lines else "")


def support_from_text(text: str, params: PibsParams) -> Support:
    clusters = []
    pseudo = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "cluster" and len(parts) == 3:
            clusters.append((int(parts[1]), int(parts[2])))
        elif parts[0] == "pseudo" and len(parts) == 2:
            pseudo.append(int(parts[1]))
        else:
            raise ValueError(f"unrecognized support record: {line!r}")
    return Support(clusters=tuple(clusters), pseudo=tuple(pseudo), params=params)


def signal_to_csv(x: np.ndarray) -> str:
    """Nonzero entries as `index,value` rows (complex: `index,re,im`), 1-based."""
    rows = []
    if np.iscomplexobj(x):
        rows.append("index,re,im")
        for i in np.flatnonzero(x):
            rows.append(f"{i + 1},{float(x[i].real)!r},{float(x[i].imag)!r}")
    else:
        rows.append("index,value")
        for i in np.flatnonzero(x):
            rows.append(f"{i + 1},{float(x[i])!r}")
    return "\n".join(rows) + "\n"


def signal_values_from_csv(text: str, n: int) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty signal file")
    header = lines[0].strip().lower()
    complex_form = header == "index,re,im"
    if not complex_form and header != "index,value":
        raise ValueError(f"unrecognized signal header: {lines[0]!r}")
    x = np.zeros(n, dtype=complex if complex_form else float)
    for ln in lines[1:]:
        parts = ln.split(",")
        idx = int(parts[0]) - 1
        if complex_form:
            x[idx] = float(parts[1]) + 1j * float(parts[2])
        else:
            x[idx] = float(parts[1])
    return x
