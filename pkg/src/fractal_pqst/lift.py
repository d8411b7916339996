"""Lift a chain Jacobi matrix to a Hamiltonian on a layered graph.

For adjacent ``x, y`` with layer(y) = layer(x) +- 1 the lifted entries are
``H(x, y) = J(n, n+-1) / deg_+-(x)`` and ``H(x, x) = J(n, n) / (deg_0(x) + 1)``;
adjacent vertices inside one layer get ``H(x, y) = H(x, x)``. The result is
self-adjoint for the weighted inner product ``<psi|phi>_A = sum psi conj(phi) mu``
and satisfies ``P H P* = J``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .graph import AssumptionViolation, LayeredGraph, degree_profile
from .jacobi import JacobiMatrix


class LiftError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LiftedHamiltonian:
    graph: LayeredGraph
    source: JacobiMatrix
    matrix: sp.csr_matrix

    @property
    def mu(self) -> np.ndarray:
        return self.graph.mu

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @cached_property
    def symmetrized(self) -> sp.csr_matrix:
        """``D^{1/2} H D^{-1/2}`` with ``D = diag(mu)``; symmetric when H is weighted self-adjoint."""
        s = np.sqrt(self.mu)
        return sp.csr_matrix(sp.diags(s) @ self.matrix @ sp.diags(1.0 / s))

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.matrix @ psi

    def to_dict(self) -> dict:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return {
            "order": [str(v) for v in self.graph.vertices],
            "entries": [[int(coo.row[k]), int(coo.col[k]), float(coo.data[k])] for k in order],
            "mu": self.mu.tolist(),
        }


def lift_hamiltonian(graph: LayeredGraph, jac: JacobiMatrix) -> LiftedHamiltonian:
    """Build ``H`` on ``graph`` from the chain matrix ``jac``.

    Raises :class:`LiftError` when the chain length does not match the number
    of layers or the degree maps are not constant on layers.
    """
    if jac.N != graph.N:
        raise LiftError(f"Jacobi chain has N={jac.N} but the graph has {graph.N + 1} layers")
    profile = degree_profile(graph)
    if isinstance(profile, AssumptionViolation):
        raise LiftError(f"graph violates the layer-degree assumptions at {profile.describe()}")

    layer = graph.layer_index
    plus, minus, zero = graph.vertex_degrees
    a, b = graph.edge_index
    rows, cols, vals = [], [], []

    diag = jac.B[layer] / (zero + 1)
    nz = np.flatnonzero(diag)
    rows.append(nz)
    cols.append(nz)
    vals.append(diag[nz])

    la, lb = layer[a], layer[b]
    same = la == lb
    # orient every cross-layer edge as (lower layer, upper layer)
    lo = np.where(lb > la, a, b)[~same]
    hi = np.where(lb > la, b, a)[~same]
    n = layer[lo]
    rows += [lo, hi]
    cols += [hi, lo]
    vals += [jac.J[n] / plus[lo], jac.J[n] / minus[hi]]

    sa, sb = a[same], b[same]
    if sa.size:
        rows += [sa, sb]
        cols += [sb, sa]
        vals += [diag[sa], diag[sb]]

    size = len(graph)
    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
    matrix.eliminate_zeros()
    matrix.sort_indices()
    return LiftedHamiltonian(graph, jac, matrix)


def averaging_matrix(graph: LayeredGraph) -> sp.csr_matrix:
    """The operator ``P`` as an ``(N+1) x |V|`` matrix of layer averages."""
    size = len(graph)
    return sp.csr_matrix((graph.mu, (graph.layer_index, np.arange(size))), shape=(graph.N + 1, size))


def pullback_matrix(graph: LayeredGraph) -> sp.csr_matrix:
    """The adjoint ``P*``: a chain function copied onto every vertex of its layer."""
    size = len(graph)
    return sp.csr_matrix((np.ones(size), (np.arange(size), graph.layer_index)), shape=(size, graph.N + 1))


def average(graph: LayeredGraph, psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.shape[0] != len(graph):
        raise LiftError(f"state has {psi.shape[0]} entries, graph has {len(graph)} vertices")
    out = np.zeros((graph.N + 1,) + psi.shape[1:], dtype=psi.dtype if np.iscomplexobj(psi) else float)
    np.add.at(out, graph.layer_index, psi)
    return out / graph.layer_sizes.reshape((-1,) + (1,) * (psi.ndim - 1))


def pullback(graph: LayeredGraph, phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi)
    if phi.shape[0] != graph.N + 1:
        raise LiftError(f"chain vector has {phi.shape[0]} entries, graph has {graph.N + 1} layers")
    return phi[graph.layer_index]


def radial_projection(graph: LayeredGraph, psi: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto layer-constant functions (equals ``P* P``)."""
    return pullback(graph, average(graph, psi))


def inner(graph: LayeredGraph, psi: np.ndarray, phi: np.ndarray) -> complex:
    """Weighted inner product, linear in the first argument."""
    return np.sum(np.asarray(psi) * np.conj(phi) * graph.mu)


def norm(graph: LayeredGraph, psi: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(psi) ** 2 * graph.mu)))


def indicator(graph: LayeredGraph, layer: int) -> np.ndarray:
    """``P*|layer>``: 1 on every vertex of the given layer."""
    return (graph.layer_index == layer).astype(float)


def check_self_adjoint(H: LiftedHamiltonian | tuple[np.ndarray, np.ndarray], tol: float = 1e-12) -> tuple[bool, float]:
    """Return ``(ok, max |mu(x) H(x,y) - mu(y) H(y,x)|)``.

    Accepts a lifted Hamiltonian or a raw ``(matrix, mu)`` pair.
    """
    if isinstance(H, LiftedHamiltonian):
        matrix, mu = H.matrix, H.mu
    else:
        matrix, mu = H
    weighted = sp.csr_matrix(sp.diags(mu) @ sp.csr_matrix(matrix))
    diff = weighted - weighted.T
    asym = float(np.max(np.abs(diff.data))) if diff.nnz else 0.0
    return asym <= tol, asym
