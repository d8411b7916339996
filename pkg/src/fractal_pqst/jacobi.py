"""Jacobi (real symmetric tridiagonal) matrices on the chain ``0 - 1 - ... - N``.

Sites are 0-based: ``B[n]`` is the field on site ``n`` and ``J[n]`` couples
sites ``n`` and ``n + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal


class JacobiError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class JacobiMatrix:
    B: np.ndarray
    J: np.ndarray

    def __post_init__(self) -> None:
        B = np.asarray(self.B, dtype=float).copy()
        J = np.asarray(self.J, dtype=float).copy()
        if B.ndim != 1 or J.ndim != 1 or len(B) != len(J) + 1:
            raise JacobiError(f"need len(B) == len(J) + 1, got {B.shape} and {J.shape}")
        if np.any(~np.isfinite(B)) or np.any(~np.isfinite(J)):
            raise JacobiError("entries must be finite")
        if np.any(J <= 0):
            raise JacobiError("off-diagonal couplings must be strictly positive")
        B.setflags(write=False)
        J.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "J", J)

    @property
    def N(self) -> int:
        return len(self.J)

    @property
    def size(self) -> int:
        return len(self.B)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.B) + np.diag(self.J, 1) + np.diag(self.J, -1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, JacobiMatrix):
            return NotImplemented
        return np.array_equal(self.B, other.B) and np.array_equal(self.J, other.J)

    def __hash__(self) -> int:
        return hash((self.B.tobytes(), self.J.tobytes()))

    def is_mirror_symmetric(self) -> bool:
        return np.array_equal(self.B, self.B[::-1]) and np.array_equal(self.J, self.J[::-1])

    def to_dict(self) -> dict:
        return {"B": self.B.tolist(), "J": self.J.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence[float]]) -> JacobiMatrix:
        return cls(np.asarray(data["B"], dtype=float), np.asarray(data["J"], dtype=float))


def krawtchouk_chain(N: int) -> JacobiMatrix:
    """Couplings ``sqrt(n (N + 1 - n)) / 2`` (n = 1..N) with zero field.

    The spectrum is ``{-N/2, -N/2 + 1, ..., N/2}``, which gives perfect
    transfer from site 0 to site N at time pi.
    """
    if N < 1:
        raise JacobiError("Krawtchouk chain needs N >= 1")
    n = np.arange(1, N + 1, dtype=float)
    return JacobiMatrix(np.zeros(N + 1), np.sqrt(n * (N + 1 - n)) / 2.0)


def recurrence_polynomials(jac: JacobiMatrix, z: float) -> np.ndarray:
    """Monic polynomials ``p_0(z), ..., p_{N+1}(z)`` of the three-term recurrence.

    ``p_{N+1}`` is the characteristic polynomial, so it vanishes exactly on
    the spectrum. Overflows for long chains; use it for cross-checks only.
    """
    B, J = jac.B, jac.J
    p = np.empty(jac.size + 1, dtype=np.result_type(float, z))
    p[0] = 1.0
    p[1] = z - B[0]
    for k in range(2, jac.size + 1):
        p[k] = (z - B[k - 1]) * p[k - 1] - J[k - 2] ** 2 * p[k - 2]
    return p


def eigenvector_from_recurrence(jac: JacobiMatrix, lam: float) -> np.ndarray:
    """``(p_0, p_1/J_1, ..., p_N/(J_1...J_N))`` evaluated at ``lam``, unnormalized.

    Computed through the rescaled recurrence so the products of couplings never
    form explicitly.
    """
    B, J = jac.B, jac.J
    v = np.empty(jac.size)
    v[0] = 1.0
    if jac.size > 1:
        v[1] = (lam - B[0]) / J[0]
    for k in range(2, jac.size):
        v[k] = ((lam - B[k - 1]) * v[k - 1] - J[k - 2] * v[k - 2]) / J[k - 1]
    return v


def _fix_sign(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip columns so the first entry with ``|x| > tol`` is positive."""
    out = vectors.copy()
    for c in range(out.shape[1]):
        col = out[:, c]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size and col[nz[0]] < 0:
            out[:, c] = -col
    return out


@dataclass(frozen=True, eq=False)
class JacobiSpectrum:
    values: np.ndarray
    vectors: np.ndarray  # columns, unit Euclidean norm

    def __len__(self) -> int:
        return len(self.values)


def jacobi_spectrum(jac: JacobiMatrix, *, residual_tol: float = 1e-10) -> JacobiSpectrum:
    """Eigenvalues (increasing) and unit eigenvectors of a Jacobi matrix.

    The tridiagonal LAPACK solver is authoritative. Each eigenvector is then
    checked against ``||J v - lam v|| <= residual_tol * max(1, |lam|)`` and
    eigenvalues are checked to be strictly increasing.
    """
    try:
        if jac.size == 1:
            values, vectors = jac.B.copy(), np.ones((1, 1))
        else:
            values, vectors = eigh_tridiagonal(jac.B, jac.J)
    except LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise JacobiError(f"tridiagonal eigensolver failed for B={jac.B.tolist()}, J={jac.J.tolist()}") from exc
    vectors = _fix_sign(vectors)
    dense = jac.to_dense()
    res = np.linalg.norm(dense @ vectors - vectors * values, axis=0)
    bad = np.flatnonzero(res > residual_tol * np.maximum(1.0, np.abs(values)))
    if bad.size:
        raise JacobiError(
            f"eigenvector residual {res[bad].max():.3e} too large for B={jac.B.tolist()}, J={jac.J.tolist()}"
        )
    if np.any(np.diff(values) <= 0):
        raise JacobiError("eigenvalues of a Jacobi matrix must be simple")
    return JacobiSpectrum(values, vectors)


def dirichlet_restriction(jac: JacobiMatrix) -> JacobiMatrix:
    """Delete the first and last site (zero boundary values)."""
    if jac.N < 2:
        raise JacobiError(f"Dirichlet restriction of a chain with N={jac.N} is empty")
    return JacobiMatrix(jac.B[1:-1], jac.J[1:-1])


@dataclass(frozen=True, eq=False)
class ChainSegment:
    """Principal submatrix of a parent Jacobi matrix on sites ``start..stop``.

    ``overridden`` lists the sites whose diagonal was replaced by a caller
    supplied value instead of being copied from the parent.
    """

    start: int
    stop: int
    matrix: JacobiMatrix
    overridden: tuple[int, ...] = ()

    @property
    def span(self) -> tuple[int, int]:
        return self.start, self.stop

    def dirichlet(self) -> JacobiMatrix:
        return dirichlet_restriction(self.matrix)


def segment(
    jac: JacobiMatrix,
    a: int,
    b: int,
    *,
    diagonal_override: Mapping[int, float] | None = None,
) -> ChainSegment:
    """Sites ``a..b`` (inclusive) of ``jac``.

    ``diagonal_override`` maps parent site indices in ``[a, b]`` to replacement
    diagonal values; sites whose value actually differs are recorded.
    """
    if not (0 <= a < b <= jac.N):
        raise JacobiError(f"segment [{a}, {b}] outside 0..{jac.N}")
    B = jac.B[a : b + 1].copy()
    changed = []
    for site, value in sorted((diagonal_override or {}).items()):
        if not a <= site <= b:
            raise JacobiError(f"override site {site} outside segment [{a}, {b}]")
        if B[site - a] != value:
            changed.append(site)
        B[site - a] = value
    return ChainSegment(a, b, JacobiMatrix(B, jac.J[a:b]), tuple(changed))
