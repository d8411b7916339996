"""Spectra of lifted Hamiltonians.

Two independent routes:

* :func:`spectrum_inductive` assembles a full eigenbasis level by level: radial
  eigenvectors ``P* v`` for every eigenpair of the chain matrix, plus, for each
  chain copied at step ``i``, its Dirichlet eigenvectors placed with opposite
  signs on two copies (``w1`` against ``wj``) and pulled back to the final graph.
* :func:`spectrum_dense` diagonalizes ``D^{1/2} H D^{-1/2}`` directly.
"""

from __future__ import annotations

import csv
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from .construct import Chain, GraphSequence, hambly_kumagai_sequence
from .jacobi import ChainSegment, JacobiMatrix, eigenvector_from_recurrence, jacobi_spectrum, krawtchouk_chain, segment
from .lift import LiftedHamiltonian, lift_hamiltonian

CLUSTER_TOL = 1e-8
RESIDUAL_TOL = 1e-9
DENSE_BUDGET = 5000


class SpectralError(RuntimeError):
    pass


class ClusterError(SpectralError):
    pass


def worker_count() -> int:
    """Thread cap from ``FRACTAL_PQST_THREADS`` (default 1)."""
    raw = os.environ.get("FRACTAL_PQST_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise SpectralError(f"FRACTAL_PQST_THREADS must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class Provenance:
    kind: str  # "radial", "glued" or "dense"
    level: int | None = None
    chain: int | None = None
    branches: tuple[int, int] | None = None

    def tag(self) -> str:
        if self.kind == "glued":
            return f"glued(level={self.level},chain={self.chain},w{self.branches[0]}-w{self.branches[1]})"
        return self.kind


@dataclass(frozen=True)
class Cluster:
    value: float
    multiplicity: int


def cluster_eigenvalues(
    values: Sequence[float],
    tol: float = CLUSTER_TOL,
    gap_factor: float = 10.0,
    *,
    strict: bool = True,
    ambiguous: list[tuple[float, float]] | None = None,
) -> list[Cluster]:
    """Group sorted eigenvalues into clusters of width at most ``tol``.

    Neighbouring clusters must be separated by more than ``gap_factor * tol``.
    In strict mode anything closer raises :class:`ClusterError`; otherwise the
    offending pairs are appended to ``ambiguous`` and clustering proceeds.
    """
    vals = np.sort(np.asarray(values, dtype=float))
    if vals.size == 0:
        return []

    def complain(message: str, pair: tuple[float, float]) -> None:
        if strict:
            raise ClusterError(message)
        if ambiguous is not None:
            ambiguous.append(pair)

    groups = np.split(vals, np.flatnonzero(np.diff(vals) > tol) + 1)
    for g in groups:
        if g[-1] - g[0] > tol:
            complain(f"cluster near {g.mean():.10g} spans {g[-1] - g[0]:.3e} > tol {tol:g}", (float(g[0]), float(g[-1])))
    for prev, nxt in zip(groups, groups[1:]):
        gap = nxt[0] - prev[-1]
        if gap <= gap_factor * tol:
            complain(
                f"eigenvalues {prev[-1]:.12g} and {nxt[0]:.12g} are {gap:.3e} apart; "
                f"cannot decide multiplicity at tol {tol:g}",
                (float(prev[-1]), float(nxt[0])),
            )
    return [Cluster(float(g.mean()), len(g)) for g in groups]


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """All eigenvalues (ascending) with optional eigenvectors as columns.

    Eigenvectors are orthonormal for the weighted inner product defined by
    ``mu``.
    """

    values: np.ndarray
    provenance: tuple[Provenance, ...]
    mu: np.ndarray
    vectors: np.ndarray | None = None
    tol: float = CLUSTER_TOL

    @property
    def size(self) -> int:
        return len(self.values)

    @cached_property
    def clusters(self) -> list[Cluster]:
        return cluster_eigenvalues(self.values, self.tol)

    def select(self, value: float, tol: float | None = None) -> np.ndarray:
        """Indices of the eigenpairs whose eigenvalue lies within ``tol`` of ``value``."""
        tol = self.tol if tol is None else tol
        return np.flatnonzero(np.abs(self.values - value) <= tol)

    def to_dict(self, include_vectors: bool = False) -> dict:
        out = {
            "size": self.size,
            "clusters": [{"value": c.value, "multiplicity": c.multiplicity} for c in self.clusters],
            "eigenpairs": [
                {"value": float(v), "provenance": p.tag()} for v, p in zip(self.values, self.provenance)
            ],
        }
        if include_vectors and self.vectors is not None:
            for pair, col in zip(out["eigenpairs"], self.vectors.T):
                pair["vector"] = col.tolist()
        return out


def _sorted_decomposition(values, provenance, mu, vectors, tol) -> SpectralDecomposition:
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    return SpectralDecomposition(
        values=values[order],
        provenance=tuple(provenance[i] for i in order),
        mu=mu,
        vectors=None if vectors is None else vectors[:, order],
        tol=tol,
    )


# ---------------------------------------------------------------- radial part


def radial_eigenvectors(H: LiftedHamiltonian) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of the source chain and their lifts ``P* v`` (weighted-unit columns).

    ``v`` comes from the polynomial formula when it is accurate; on long chains
    where the forward recurrence loses precision the tridiagonal solver's
    vector is used instead.
    """
    jac = H.source
    spec = jacobi_spectrum(jac)
    dense = jac.to_dense()
    vecs = np.empty_like(spec.vectors)
    for c, lam in enumerate(spec.values):
        v = eigenvector_from_recurrence(jac, lam)
        nv = np.linalg.norm(v)
        if np.isfinite(nv) and nv > 0:
            v = v / nv
            if np.linalg.norm(dense @ v - lam * v) <= 1e-10:
                vecs[:, c] = v
                continue
        vecs[:, c] = spec.vectors[:, c]
    return spec.values, vecs[H.graph.layer_index]


# ------------------------------------------------------------- gluing part


@dataclass(frozen=True, eq=False)
class ChainMatrix:
    """Dirichlet problem of one chain copied at step ``level``.

    ``diag``/``off`` is the symmetrized restriction of ``H_{level-1}`` to the
    chain's copied vertices. ``segment`` is the matching window of the source
    Jacobi matrix (boundary diagonals taken from the Hamiltonian), present when
    the chain climbs one layer per edge and is attached at both ends.
    """

    level: int
    index: int
    chain: Chain
    diag: np.ndarray
    off: np.ndarray
    scale: np.ndarray  # sqrt(mu) on the chain vertices in G_{level-1}
    segment: ChainSegment | None
    matches_parent: bool | None

    @property
    def key(self) -> tuple[bytes, bytes]:
        return self.diag.tobytes(), self.off.tobytes()


def chain_matrices(sequence: GraphSequence, jac: JacobiMatrix, level: int) -> list[ChainMatrix]:
    """Dirichlet matrices of all chains copied at step ``level`` (1-based)."""
    prev = sequence.graphs[level - 1]
    Hprev = lift_hamiltonian(prev, jac)
    M = Hprev.matrix
    out = []
    for ci, chain in enumerate(sequence.chains[level - 1]):
        idx = np.array([prev.index[v] for v in chain.vertices])
        sub = M[idx][:, idx].toarray()
        s = np.sqrt(prev.mu[idx])
        T = s[:, None] * sub / s[None, :]
        if not np.allclose(T, T.T, rtol=0, atol=1e-12) or np.any(np.triu(T, 2)):
            raise SpectralError(f"chain {ci} at level {level} does not give a symmetric tridiagonal block")
        diag, off = np.diag(T).copy(), np.diag(T, 1).copy()

        seg, matches = None, None
        if chain.is_monotone and chain.left is not None and chain.right is not None:
            a, b = chain.span
            Mdiag = M.diagonal()
            seg = segment(
                jac,
                a,
                b,
                diagonal_override={a: Mdiag[prev.index[chain.left]], b: Mdiag[prev.index[chain.right]]},
            )
            inner = seg.matrix
            matches = (
                np.allclose(diag, inner.B[1:-1], rtol=0, atol=1e-12)
                and np.allclose(off, inner.J[1:-1], rtol=0, atol=1e-12)
                and not seg.overridden
            )
        out.append(ChainMatrix(level, ci, chain, diag, off, s, seg, matches))
    return out


def _tridiagonal_eig(diag: np.ndarray, off: np.ndarray, vectors: bool):
    if diag.size == 1:
        return diag.copy(), (np.ones((1, 1)) if vectors else None)
    if vectors:
        return eigh_tridiagonal(diag, off)
    return eigh_tridiagonal(diag, off, eigvals_only=True), None


def _solve_unique(blocks: Iterable[ChainMatrix], vectors: bool) -> dict:
    unique: dict[tuple[bytes, bytes], ChainMatrix] = {}
    for b in blocks:
        unique.setdefault(b.key, b)
    keys = list(unique)
    work = lambda k: _tridiagonal_eig(unique[k].diag, unique[k].off, vectors)
    workers = worker_count()
    if workers > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, keys))
    else:
        results = [work(k) for k in keys]
    return dict(zip(keys, results))


def _chain_placement(sequence: GraphSequence, level: int):
    """For each final vertex: (chain id, position in chain, letter) at step ``level``; -1 if not copied."""
    gi = sequence.graphs[level]
    prev = sequence.graphs[level - 1]
    maps = sequence.maps[level - 1]
    pos_of = {}
    for ci, chain in enumerate(sequence.chains[level - 1]):
        for p, v in enumerate(chain.vertices):
            pos_of[v] = (ci, p)
    chain_id = np.full(len(gi), -1, dtype=np.int64)
    position = np.full(len(gi), -1, dtype=np.int64)
    letter = np.full(len(gi), -1, dtype=np.int64)
    for z in gi.vertices:
        if z in maps.retained:
            continue
        ci, p = pos_of[maps.phi[z]]
        i = gi.index[z]
        chain_id[i], position[i], letter[i] = ci, p, z.word[-1]
    anc = sequence.ancestor_index(level)
    return chain_id[anc], position[anc], letter[anc]


def glue_eigenvectors(
    sequence: GraphSequence,
    level: int,
    block: ChainMatrix,
    solution=None,
    placement=None,
) -> tuple[np.ndarray, np.ndarray | None, list[Provenance]]:
    """Eigenpairs generated by one chain: ``(k - 1)`` per Dirichlet eigenvalue.

    Branch ``w1`` carries the Dirichlet eigenvector, branch ``wj`` its negative
    (``j = 2..k``), every other vertex zero. For ``k > 2`` the ``k - 1`` vectors
    sharing a Dirichlet eigenvector are re-orthonormalized among themselves.
    Returns values, weighted-unit vectors on the final graph (or ``None`` when
    ``solution`` carries no vectors), and provenance tags.
    """
    k = sequence.maps[level - 1].alphabet_size
    values, U = solution if solution is not None else _tridiagonal_eig(block.diag, block.off, True)
    prov = [Provenance("glued", level, block.index, (1, j)) for _ in values for j in range(2, k + 1)]
    vals = np.repeat(values, k - 1)
    if U is None:
        return vals, None, prov

    chain_id, position, letter = placement if placement is not None else _chain_placement(sequence, level)
    final = sequence.final
    rows = np.flatnonzero(chain_id == block.index)
    vD = U / block.scale[:, None]  # eigenvectors of the unsymmetrized restriction
    out = np.zeros((len(final), len(values) * (k - 1)))
    for e in range(len(values)):
        for j in range(2, k + 1):
            col = e * (k - 1) + (j - 2)
            vals_here = vD[position[rows], e]
            out[rows, col] = np.where(letter[rows] == 1, vals_here, 0.0) - np.where(letter[rows] == j, vals_here, 0.0)
        if k > 2:
            cols = slice(e * (k - 1), (e + 1) * (k - 1))
            out[:, cols] = _weighted_orthonormalize(out[:, cols], final.mu)
    if k == 2:
        out /= np.sqrt(np.sum(out**2 * final.mu[:, None], axis=0))
    return vals, out, prov


def _weighted_orthonormalize(V: np.ndarray, mu: np.ndarray) -> np.ndarray:
    s = np.sqrt(mu)[:, None]
    Q, R = np.linalg.qr(V * s)
    Q *= np.sign(np.diag(R))
    return Q / s


def spectrum_inductive(
    sequence: GraphSequence,
    H: LiftedHamiltonian,
    *,
    eigenvectors: bool = True,
    tol: float = CLUSTER_TOL,
    residual_tol: float = RESIDUAL_TOL,
) -> SpectralDecomposition:
    """Complete spectrum from the chain matrix and the Dirichlet problems of all copied chains.

    With ``eigenvectors=True`` every vector's residual ``||H v - lam v||_A`` is
    checked against ``residual_tol``. The number of eigenpairs must equal the
    vertex count; a mismatch raises :class:`SpectralError`.
    """
    final = sequence.final
    if H.graph.vertices != final.vertices:
        raise SpectralError("Hamiltonian is not defined on the final graph of the sequence")
    jac = H.source

    if eigenvectors:
        rvals, rvecs = radial_eigenvectors(H)
    else:
        rvals, rvecs = jacobi_spectrum(jac).values, None
    values = [rvals]
    vectors = [rvecs]
    provenance = [Provenance("radial")] * len(rvals)

    for level in range(1, sequence.depth + 1):
        blocks = chain_matrices(sequence, jac, level)
        solutions = _solve_unique(blocks, eigenvectors)
        placement = _chain_placement(sequence, level) if eigenvectors else None
        for b in blocks:
            v, V, p = glue_eigenvectors(sequence, level, b, solutions[b.key], placement)
            values.append(v)
            vectors.append(V)
            provenance.extend(p)

    all_values = np.concatenate(values)
    if all_values.size != len(final):
        raise SpectralError(
            f"inductive construction produced {all_values.size} eigenpairs for {len(final)} vertices"
        )
    V = np.hstack(vectors) if eigenvectors else None
    if V is not None:
        res = H.matrix @ V - V * all_values
        rnorm = np.sqrt(np.sum(res**2 * final.mu[:, None], axis=0))
        worst = int(np.argmax(rnorm))
        if rnorm[worst] > residual_tol * max(1.0, abs(all_values[worst])):
            raise SpectralError(
                f"eigenvector {provenance[worst].tag()} for {all_values[worst]:.10g} has residual {rnorm[worst]:.3e}"
            )
    return _sorted_decomposition(all_values, provenance, final.mu, V, tol)


# ---------------------------------------------------------------- dense oracle


def spectrum_dense(
    H: LiftedHamiltonian,
    *,
    budget: int = DENSE_BUDGET,
    tol: float = CLUSTER_TOL,
    eigenvectors: bool = True,
) -> SpectralDecomposition:
    """Diagonalize the symmetrized Hamiltonian with LAPACK; vectors mapped back by ``D^{-1/2}``."""
    if H.size > budget:
        raise SpectralError(f"{H.size} vertices exceeds the dense budget of {budget}")
    S = H.symmetrized.toarray()
    if not np.allclose(S, S.T, rtol=0, atol=1e-12):
        raise SpectralError("Hamiltonian is not self-adjoint in the weighted inner product")
    S = (S + S.T) / 2
    try:
        if eigenvectors:
            w, U = eigh(S)
            V = U / np.sqrt(H.mu)[:, None]
        else:
            w, V = eigh(S, eigvals_only=True), None
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SpectralError("dense eigensolver did not converge") from exc
    return _sorted_decomposition(w, [Provenance("dense")] * len(w), H.mu, V, tol)


# ------------------------------------------------------------- diagnostics


def is_localized(vector: np.ndarray, zero_tol: float = 1e-10) -> bool:
    """True if the vector vanishes (``|x| < zero_tol``) on at least one vertex."""
    return bool(np.any(np.abs(vector) < zero_tol))


def localized_count(decomp: SpectralDecomposition, zero_tol: float = 1e-10) -> int:
    """Number of basis eigenvectors whose support is a proper subset of the vertex set.

    The answer depends on the basis chosen inside degenerate eigenspaces; it is
    evaluated on the basis carried by ``decomp``.
    """
    if decomp.vectors is None:
        raise SpectralError("localized_count needs eigenvectors")
    return sum(is_localized(v, zero_tol) for v in decomp.vectors.T)


@dataclass(frozen=True, eq=False)
class IDSCurve:
    """Right-continuous step function ``x -> #{lam <= x} / |V|``.

    ``ambiguous`` lists neighbouring eigenvalue pairs closer than the cluster
    guard allows; they are kept as separate steps. A query within ``tol`` of a
    step location counts as on the step, so ``curve(0.0)`` sees a cluster
    whose representative came out as ``4e-16``.
    """

    x: np.ndarray
    fraction: np.ndarray
    multiplicity: np.ndarray
    size: int
    ambiguous: tuple[tuple[float, float], ...] = ()
    tol: float = CLUSTER_TOL

    def __call__(self, x: float | np.ndarray) -> np.ndarray | float:
        idx = np.searchsorted(self.x, np.asarray(x) + self.tol, side="right")
        padded = np.concatenate([[0.0], self.fraction])
        return padded[idx]

    @property
    def jumps(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.fraction]))


def ids(decomp: SpectralDecomposition, tol: float | None = None) -> IDSCurve:
    """Integrated density of states.

    Unlike multiplicity reports this never aborts on near-degenerate
    eigenvalues: large graphs have distinct eigenvalues split far below double
    precision, and the curve is well defined either way.
    """
    ambiguous: list[tuple[float, float]] = []
    tol = decomp.tol if tol is None else tol
    clusters = cluster_eigenvalues(decomp.values, tol, strict=False, ambiguous=ambiguous)
    mult = np.array([c.multiplicity for c in clusters], dtype=np.int64)
    x = np.array([c.value for c in clusters])
    return IDSCurve(x, np.cumsum(mult) / decomp.size, mult, decomp.size, tuple(ambiguous), tol)


@dataclass(frozen=True, eq=False)
class Multiplicity5Witness:
    level: int
    value: float
    vectors: np.ndarray  # 4 sub-branch gluings then the cross-branch vector
    provenance: tuple[Provenance, ...]


def multiplicity5_witness(level: int, decomp: SpectralDecomposition | None = None) -> Multiplicity5Witness:
    """Largest eigenvalue of ``H_level`` (HK family) of multiplicity exactly 5 with the four-plus-one gluing pattern.

    Four of its eigenvectors are gluings of one Dirichlet eigenvector on the
    four quarter chains copied at step 2; the fifth is the step-1 gluing across
    the two main branches.
    """
    if level < 3:
        raise SpectralError("a multiplicity-5 eigenvalue exists for HK levels >= 3 only")
    if decomp is None:
        seq = hambly_kumagai_sequence(level)
        H = lift_hamiltonian(seq.final, krawtchouk_chain(2**level))
        decomp = spectrum_inductive(seq, H)
    candidates = []
    for c in decomp.clusters:
        if c.multiplicity != 5:
            continue
        idx = decomp.select(c.value)
        prov = [decomp.provenance[i] for i in idx]
        levels = sorted(p.level if p.kind == "glued" else 0 for p in prov)
        if levels == [1, 2, 2, 2, 2]:
            candidates.append((c.value, idx, prov))
    if not candidates:
        raise SpectralError(f"no multiplicity-5 eigenvalue of the expected shape at level {level}")
    value, idx, prov = max(candidates, key=lambda t: t[0])
    order = sorted(range(5), key=lambda i: (prov[i].level != 2, prov[i].chain))
    return Multiplicity5Witness(
        level,
        value,
        decomp.vectors[:, idx[order]],
        tuple(prov[i] for i in order),
    )


# --------------------------------------------------------- table comparison


@dataclass(frozen=True)
class TableRow:
    j: int
    value: float
    multiplicity: int
    printed: str | None = None

    @property
    def resolution(self) -> float:
        """Last printed decimal place (0 when unknown or symbolic)."""
        if not self.printed or not re.fullmatch(r"-?\d+\.\d+", self.printed):
            return 0.0
        return 10.0 ** -len(self.printed.split(".")[1])


@dataclass
class TableComparison:
    tol: float
    matched: list[tuple[TableRow, Cluster]] = field(default_factory=list)
    wrong_multiplicity: list[tuple[TableRow, Cluster]] = field(default_factory=list)
    missing: list[TableRow] = field(default_factory=list)
    extra: list[tuple[int, Cluster]] = field(default_factory=list)  # (computed index j, cluster)
    skipped_indices: list[int] = field(default_factory=list)
    within_printed_precision: list[tuple[TableRow, Cluster]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        """Every reference row is reproduced within ``tol``; extra computed rows are only flagged."""
        return not self.missing and not self.wrong_multiplicity

    def summary(self) -> dict:
        return {
            "ok": self.ok,
            "tol": self.tol,
            "matched": len(self.matched),
            "wrong_multiplicity": [
                {"j": r.j, "value": r.value, "expected": r.multiplicity, "computed": c.multiplicity}
                for r, c in self.wrong_multiplicity
            ],
            "missing": [{"j": r.j, "value": r.value, "multiplicity": r.multiplicity} for r in self.missing],
            "missing_but_within_printed_precision": [
                {"j": r.j, "printed": r.printed, "computed": c.value, "multiplicity": c.multiplicity}
                for r, c in self.within_printed_precision
            ],
            "extra": [{"j": j, "value": c.value, "multiplicity": c.multiplicity} for j, c in self.extra],
            "skipped_indices": self.skipped_indices,
        }


def compare_table(clusters: Sequence[Cluster], rows: Sequence[TableRow], tol: float = 1e-6) -> TableComparison:
    """Match reference rows against computed clusters at absolute tolerance ``tol``.

    A row outside ``tol`` is missing. If it still agrees with a computed
    cluster to its printed number of decimals (truncated or rounded), that is
    noted separately; it does not count as a match. Computed clusters no row
    claims are listed as extra together with their rank ``j``.
    """
    result = TableComparison(tol)
    values = np.array([c.value for c in clusters])
    used = set()
    for row in rows:
        dist = np.abs(values - row.value)
        i = int(np.argmin(dist)) if values.size else -1
        if i < 0 or dist[i] > tol:
            result.missing.append(row)
            if i >= 0 and row.resolution and dist[i] < row.resolution:
                result.within_printed_precision.append((row, clusters[i]))
            continue
        used.add(i)
        pair = (row, clusters[i])
        (result.matched if clusters[i].multiplicity == row.multiplicity else result.wrong_multiplicity).append(pair)
    result.extra = [(i + 1, c) for i, c in enumerate(clusters) if i not in used]
    js = sorted(r.j for r in rows)
    if js:
        result.skipped_indices = sorted(set(range(js[0], js[-1] + 1)) - set(js))
    return result


def read_table(path) -> list[TableRow]:
    """Read a ``j,eigenvalue,multiplicity[,printed]`` CSV."""
    with open(path, newline="") as fh:
        return [
            TableRow(int(r["j"]), float(r["eigenvalue"]), int(r["multiplicity"]), r.get("printed") or None)
            for r in csv.DictReader(fh)
        ]


def format_eigenvalue(x: float) -> str:
    out = f"{x:.7f}"
    return "0.0000000" if out == "-0.0000000" else out


def write_table(path, clusters: Sequence[Cluster]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "eigenvalue", "multiplicity"])
        for j, c in enumerate(clusters, start=1):
            w.writerow([j, format_eigenvalue(c.value), c.multiplicity])


def write_ids(path, curve: IDSCurve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "N(x)"])
        for x, f in zip(curve.x, curve.fraction):
            w.writerow([format_eigenvalue(x), f"{f:.12g}"])
