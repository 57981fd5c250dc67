"""Sensing matrices and noisy measurements."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "SensingMatrix",
    "Measurement",
    "gaussian_matrix",
    "identity_matrix",
    "orthonormal_matrix",
    "measure",
    "matrix_to_csv",
    "matrix_from_csv",
    "matrix_to_binary",
    "matrix_from_binary",
]

_FLAG_NORMALIZED = 1
_FLAG_COMPLEX = 2


@dataclass(frozen=True)
class SensingMatrix:
    """An m x n matrix of sensing vectors. When `normalized` is set every
    column has unit Euclidean norm (to within 1e-12)."""

    entries: np.ndarray
    normalized: bool = False

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.entries)

    @cached_property
    def gram(self) -> np.ndarray:
        """Hermitian Gram matrix of the columns, computed once."""
        return self.entries.conj().T @ self.entries

    def normalize(self) -> "SensingMatrix":
        """Rescale columns to unit norm. Idempotent: a matrix already flagged
        normalized is returned unchanged, bit for bit."""
        if self.normalized:
            return self
        norms = np.linalg.norm(self.entries, axis=0)
        if np.any(norms == 0):
            raise ValueError("cannot normalize a matrix with a zero column")
        return SensingMatrix(entries=self.entries / norms, normalized=True)


@dataclass(frozen=True)
class Measurement:
    """Measurement vector with the norm of the noise that produced it."""

    y: np.ndarray
    noise_bound: float = 0.0


def gaussian_matrix(
    m: int,
    n: int,
    variance_mode: str = "unit",
    normalize: bool = True,
    rng: np.random.Generator | None = None,
    complex_entries: bool = False,
) -> SensingMatrix:
    """i.i.d. Gaussian sensing matrix.

    variance_mode "unit" draws N(0, 1) entries, "one_over_m" draws N(0, 1/m).
    Complex matrices draw independent real and imaginary parts with half the
    variance each, so columns keep the same expected norm.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    if rng is None:
        raise ValueError("gaussian_matrix needs an explicit rng")
    if variance_mode == "unit":
        sigma2 = 1.0
    elif variance_mode == "one_over_m":
        sigma2 = 1.0 / m
    else:
        raise ValueError(f"unknown variance mode {variance_mode!r}")
    if complex_entries:
        scale = np.sqrt(sigma2 / 2.0)
        entries = scale * (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n)))
    else:
        entries = np.sqrt(sigma2) * rng.standard_normal((m, n))
    mat = SensingMatrix(entries=entries, normalized=False)
    return mat.normalize() if normalize else mat


def identity_matrix(n: int) -> SensingMatrix:
    return SensingMatrix(entries=np.eye(n), normalized=True)


def orthonormal_matrix(n: int, rng: np.random.Generator) -> SensingMatrix:
    """Haar-ish orthonormal n x n matrix via QR of a square Gaussian draw."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    return SensingMatrix(entries=q, normalized=True)


def measure(
    Phi: SensingMatrix,
    x: np.ndarray,
    noise: None | tuple[str, float] | np.ndarray = None,
    rng: np.random.Generator | None = None,
) -> Measurement:
    """y = Phi x + e. The noise bound records the exact norm of e."""
    x = np.asarray(x)
    if x.shape != (Phi.n,):
        raise ValueError(f"signal length {x.shape} does not match n={Phi.n}")
    y = Phi.entries @ x
    if noise is None:
        return Measurement(y=y, noise_bound=0.0)
    if isinstance(noise, tuple):
        kind, sigma = noise
        if kind != "gaussian":
            raise ValueError(f"unknown noise kind {kind!r}")
        if rng is None:
            raise ValueError("gaussian noise needs an rng")
        if Phi.is_complex or np.iscomplexobj(x):
            e = sigma / np.sqrt(2.0) * (
                rng.standard_normal(Phi.m) + 1j * rng.standard_normal(Phi.m)
            )
        else:
            e = sigma * rng.standard_normal(Phi.m)
    else:
        e = np.asarray(noise)
        if e.shape != (Phi.m,):
            raise ValueError(f"noise length {e.shape} does not match m={Phi.m}")
    return Measurement(y=y + e, noise_bound=float(np.linalg.norm(e)))


# ---------------------------------------------------------------------------
# serialization

def _flags(mat: SensingMatrix) -> int:
    flags = 0
    if mat.normalized:
        flags |= _FLAG_NORMALIZED
    if mat.is_complex:
        flags |= _FLAG_COMPLEX
    return flags


def matrix_to_csv(mat: SensingMatrix) -> str:
    """Row-major CSV; first line holds `m,n,flags`. Complex entries expand to
    interleaved re,im columns."""
    lines = [f"{mat.m},{mat.n},{_flags(mat)}"]
    if mat.is_complex:
        for row in mat.entries:
            lines.append(",".join(f"{float(v.real)!r},{float(v.imag)!r}" for v in row))
    else:
        for row in mat.entries:
            lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def matrix_from_csv(text: str) -> SensingMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    m, n, flags = (int(v) for v in lines[0].split(","))
    is_complex = bool(flags & _FLAG_COMPLEX)
    rows = []
    for ln in lines[1 : m + 1]:
        vals = [float(v) for v in ln.split(",")]
        if is_complex:
            re = vals[0::2]
            im = vals[1::2]
            rows.append(np.asarray(re) + 1j * np.asarray(im))
        else:
            rows.append(np.asarray(vals))
    entries = np.vstack(rows)
    if entries.shape != (m, n):
        raise ValueError(f"matrix body {entries.shape} does not match header ({m}, {n})")
    return SensingMatrix(entries=entries, normalized=bool(flags & _FLAG_NORMALIZED))


def matrix_to_binary(mat: SensingMatrix) -> bytes:
    """ASCII header line `m n flags`, then row-major little-endian float64
    payload (complex entries interleave re,im)."""
    header = f"{mat.m} {mat.n} {_flags(mat)}\n".encode("ascii")
    if mat.is_complex:
        payload = np.ascontiguousarray(
            np.stack([mat.entries.real, mat.entries.imag], axis=-1), dtype="<f8"
        ).tobytes()
    else:
        payload = np.ascontiguousarray(mat.entries, dtype="<f8").tobytes()
    return header + payload


def matrix_from_binary(blob: bytes) -> SensingMatrix:
    newline = blob.index(b"\n")
    m, n, flags = (int(v) for v in blob[:newline].decode("ascii").split())
    body = np.frombuffer(blob[newline + 1 :], dtype="<f8")
    if flags & _FLAG_COMPLEX:
        body = body.reshape(m, n, 2)
        entries = body[..., 0] + 1j * body[..., 1]
    else:
        entries = body.reshape(m, n)
    return SensingMatrix(entries=entries.copy(), normalized=bool(flags & _FLAG_NORMALIZED))
