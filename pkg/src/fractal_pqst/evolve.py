"""Unitary evolution ``e^{itH}`` in the weighted space and state-transfer checks."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import eigh

from .lift import LiftedHamiltonian, check_self_adjoint, indicator
from .spectral import DENSE_BUDGET


class EvolutionError(ValueError):
    pass


class Propagator:
    """Spectral decomposition of ``D^{1/2} H D^{-1/2}``, reused for every time.

    ``e^{itH} = D^{-1/2} U e^{it Lambda} U^T D^{1/2}``.
    """

    def __init__(self, H: LiftedHamiltonian, *, budget: int = DENSE_BUDGET) -> None:
        if H.size > budget:
            raise EvolutionError(f"{H.size} vertices exceeds the dense budget of {budget}")
        scale = max(1.0, float(np.max(np.abs(H.matrix.data)))) if H.matrix.nnz else 1.0
        ok, asym = check_self_adjoint(H, tol=1e-12 * scale)
        if not ok:
            raise EvolutionError(f"Hamiltonian is not self-adjoint in the weighted inner product (asymmetry {asym:.3e})")
        S = H.symmetrized.toarray()
        self.H = H
        self.values, self.U = eigh((S + S.T) / 2)
        self.sqrt_mu = np.sqrt(H.mu)

    def __call__(self, psi: np.ndarray, t: float) -> np.ndarray:
        psi = np.asarray(psi)
        if psi.shape[0] != self.H.size:
            raise EvolutionError(f"state has {psi.shape[0]} entries, Hamiltonian acts on {self.H.size}")
        coeff = self.U.T @ (self.sqrt_mu * psi)
        return (self.U @ (np.exp(1j * t * self.values) * coeff)) / self.sqrt_mu


def evolve(H: LiftedHamiltonian, psi: np.ndarray, t: float, *, budget: int = DENSE_BUDGET) -> np.ndarray:
    """``e^{itH} psi``. Builds a fresh :class:`Propagator`; reuse one for many times."""
    return Propagator(H, budget=budget)(psi, t)


def weighted_overlap(mu: np.ndarray, target: np.ndarray, state: np.ndarray) -> complex:
    """``<target|state>_A`` with the target conjugated."""
    return complex(np.sum(np.conj(target) * state * mu))


@dataclass(frozen=True)
class TransferReport:
    time: float
    fidelity: float
    phase: float
    leakage: float
    norm_drift: float
    reverse_fidelity: float | None = None
    reverse_phase: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _transfer(prop: Propagator, A: np.ndarray, B: np.ndarray, t: float) -> tuple[float, float, float]:
    mu = prop.H.mu
    out = prop(A, t)
    nA = np.sqrt(np.sum(np.abs(A) ** 2 * mu))
    nB = np.sqrt(np.sum(np.abs(B) ** 2 * mu))
    overlap = weighted_overlap(mu, B, out) / (nA * nB)
    drift = abs(np.sqrt(np.sum(np.abs(out) ** 2 * mu)) - nA)
    fidelity = min(1.0, abs(overlap))
    phase = float(np.angle(overlap)) if fidelity > 0 else 0.0
    return fidelity, phase, float(drift)


def _endpoints(H: LiftedHamiltonian) -> tuple[np.ndarray, np.ndarray]:
    return indicator(H.graph, 0), indicator(H.graph, H.graph.N)


def pqst_check(
    H: LiftedHamiltonian,
    T: float,
    *,
    propagator: Propagator | None = None,
    reverse: bool = True,
) -> TransferReport:
    """Transfer from the first layer ``|A> = P*|0>`` to the last ``|B> = P*|N>`` at time ``T``."""
    prop = propagator or Propagator(H)
    A, B = _endpoints(H)
    f, phase, drift = _transfer(prop, A, B, T)
    rf = rphase = None
    if reverse:
        rf, rphase, rdrift = _transfer(prop, B, A, T)
        drift = max(drift, rdrift)
    return TransferReport(float(T), f, phase, 1.0 - f**2, drift, rf, rphase)


def fidelity_curve(H: LiftedHamiltonian, times: Sequence[float], *, budget: int = DENSE_BUDGET) -> list[TransferReport]:
    """Forward and reverse transfer fidelity on a non-decreasing time grid."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise EvolutionError("time grid must be a non-empty 1D sequence")
    if np.any(np.diff(times) < 0):
        raise EvolutionError("time grid must be non-decreasing")
    prop = Propagator(H, budget=budget)
    return [pqst_check(H, float(t), propagator=prop) for t in times]
