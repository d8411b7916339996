"""``fractal-pqst`` command line.

Every command writes its artifacts into ``--out`` and exits 0 only when all
requested checks pass. Failures print a JSON object with ``error`` and
``message`` keys on stderr.
"""

from __future__ import annotations

import argparse
import ast
import json
import math
import operator
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .construct import ConstructionError, ConstructionPlan, GraphSequence, build_sequence, sequence_for
from .evolve import EvolutionError, Propagator, fidelity_curve, pqst_check
from .graph import AssumptionViolation, GraphError, degree_profile
from .jacobi import JacobiError, JacobiMatrix, krawtchouk_chain
from .lift import LiftError, lift_hamiltonian
from .spectral import (
    CLUSTER_TOL,
    DENSE_BUDGET,
    SpectralError,
    compare_table,
    ids,
    read_table,
    spectrum_dense,
    spectrum_inductive,
    write_ids,
    write_table,
)


class CommandFailed(Exception):
    """A requested check did not pass; ``payload`` becomes the error JSON."""

    def __init__(self, error: str, message: str, **extra) -> None:
        super().__init__(message)
        self.payload = {"error": error, "message": message, **extra}


_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}
_NAMES = {"pi": math.pi, "e": math.e}


def parse_time(expr: str) -> float:
    """Evaluate arithmetic like ``"pi"``, ``"2*pi"`` or ``"0.5"`` without ``eval``."""

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](walk(node.operand))
        raise ValueError(f"unsupported time expression {expr!r}")

    try:
        value = walk(ast.parse(expr.strip(), mode="eval"))
    except SyntaxError:
        raise ValueError(f"cannot parse time expression {expr!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"time expression {expr!r} is not finite")
    return value


@dataclass(frozen=True)
class RunConfig:
    command: str
    family: str | None
    level: int | None
    plan: Path | None
    jacobi: Path | None
    out: Path
    tol: float
    dense_budget: int

    @property
    def stem(self) -> str:
        if self.plan is not None:
            return self.plan.stem
        if self.family == "g2tilde":
            return "g2tilde"
        return f"{self.family}{self.level}"

    def sequence(self) -> GraphSequence:
        if self.plan is not None:
            data = json.loads(self.plan.read_text())
            return build_sequence(ConstructionPlan.from_dict(data), family="plan")
        if self.family is None:
            raise CommandFailed("usage", "give a family and level, or --plan FILE")
        return sequence_for(self.family, self.level)

    def chain(self, N: int) -> JacobiMatrix:
        if self.jacobi is None:
            return krawtchouk_chain(N)
        return JacobiMatrix.from_dict(json.loads(self.jacobi.read_text()))


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n")


def _hamiltonian(cfg: RunConfig, seq: GraphSequence):
    return lift_hamiltonian(seq.final, cfg.chain(seq.N))


def cmd_generate(cfg: RunConfig) -> dict:
    seq = cfg.sequence()
    g = seq.final
    _write_json(cfg.out / f"{cfg.stem}.graph.json", g.to_dict())
    _write_json(cfg.out / f"{cfg.stem}.plan.json", seq.plan.to_dict())
    profile = degree_profile(g)
    summary = {"vertices": len(g), "edges": len(g.edges), "N": g.N, "assumptions": "ok"}
    if isinstance(profile, AssumptionViolation):
        summary["assumptions"] = f"violated at {profile.describe()}"
    else:
        H = _hamiltonian(cfg, seq)
        _write_json(cfg.out / f"{cfg.stem}.jacobi.json", H.source.to_dict())
        _write_json(cfg.out / f"{cfg.stem}.hamiltonian.json", H.to_dict())
    return summary


def cmd_check_assumptions(cfg: RunConfig) -> dict:
    g = cfg.sequence().final
    profile = degree_profile(g)
    path = cfg.out / f"{cfg.stem}.assumptions.json"
    if isinstance(profile, AssumptionViolation):
        _write_json(path, {"ok": False, **profile.to_dict()})
        raise CommandFailed("assumption_violation", profile.describe(), **profile.to_dict())
    report = {
        "ok": True,
        "deg_plus": list(profile.deg_plus),
        "deg_minus": list(profile.deg_minus),
        "deg_zero": list(profile.deg_zero),
        "layer_sizes": list(profile.layer_sizes),
        "matching_identity": profile.matching_identity_holds(),
    }
    _write_json(path, report)
    return {"assumptions": "ok", "layers": g.N + 1}


def cmd_spectrum(cfg: RunConfig, oracle: bool, reference: Path | None) -> dict:
    seq = cfg.sequence()
    H = _hamiltonian(cfg, seq)
    decomp = spectrum_inductive(seq, H, eigenvectors=H.size <= cfg.dense_budget, tol=cfg.tol)
    clusters = decomp.clusters
    write_table(cfg.out / f"{cfg.stem}.spectrum.csv", clusters)
    _write_json(cfg.out / f"{cfg.stem}.provenance.json", decomp.to_dict())
    summary = {"rows": len(clusters), "eigenvalues": decomp.size}
    failures = []

    if oracle:
        dense = spectrum_dense(H, budget=cfg.dense_budget, tol=cfg.tol, eigenvectors=False)
        write_table(cfg.out / f"{cfg.stem}.dense.csv", dense.clusters)
        diff = _cluster_diff(clusters, dense.clusters, cfg.tol)
        _write_json(cfg.out / f"{cfg.stem}.diff.json", diff)
        summary["oracle_agrees"] = diff["ok"]
        if not diff["ok"]:
            failures.append(("oracle_mismatch", "inductive and dense spectra disagree", diff))

    if reference is not None:
        cmp = compare_table(clusters, read_table(reference))
        report = cmp.summary()
        _write_json(cfg.out / f"{cfg.stem}.reference.json", report)
        summary["reference_ok"] = cmp.ok
        summary["extra_rows"] = [j for j, _ in cmp.extra]
        if not cmp.ok:
            failures.append(("reference_mismatch", f"{len(cmp.missing)} reference rows not reproduced", report))

    if failures:
        error, message, detail = failures[0]
        raise CommandFailed(error, message, detail=detail, summary=summary)
    return summary


def _cluster_diff(a, b, tol: float) -> dict:
    mismatches = []
    if len(a) != len(b):
        mismatches.append({"reason": "row count", "inductive": len(a), "dense": len(b)})
    for i, (x, y) in enumerate(zip(a, b), start=1):
        if abs(x.value - y.value) > tol or x.multiplicity != y.multiplicity:
            mismatches.append(
                {"j": i, "inductive": [x.value, x.multiplicity], "dense": [y.value, y.multiplicity]}
            )
    return {"ok": not mismatches, "mismatches": mismatches}


def cmd_ids(cfg: RunConfig) -> dict:
    seq = cfg.sequence()
    H = _hamiltonian(cfg, seq)
    decomp = spectrum_inductive(seq, H, eigenvectors=False, tol=cfg.tol)
    curve = ids(decomp)
    write_ids(cfg.out / f"{cfg.stem}.ids.csv", curve)
    if np.any(np.diff(curve.fraction) <= 0) or not math.isclose(curve.fraction[-1], 1.0, abs_tol=1e-12):
        raise CommandFailed("ids_invalid", "IDS is not a monotone curve ending at 1")
    return {"steps": len(curve.x), "eigenvalues": curve.size, "near_degenerate_pairs": len(curve.ambiguous)}


def cmd_pqst(cfg: RunConfig, time: float, min_fidelity: float | None) -> dict:
    seq = cfg.sequence()
    H = _hamiltonian(cfg, seq)
    report = pqst_check(H, time, propagator=Propagator(H, budget=cfg.dense_budget))
    _write_json(cfg.out / f"{cfg.stem}.pqst.json", report.to_dict())
    if min_fidelity is not None and report.fidelity < min_fidelity:
        raise CommandFailed(
            "transfer_below_threshold",
            f"fidelity {report.fidelity:.12g} < {min_fidelity:g}",
            report=report.to_dict(),
        )
    return {"time": report.time, "fidelity": report.fidelity, "phase": report.phase}


def cmd_fidelity_curve(cfg: RunConfig, t_max: float, points: int) -> dict:
    if points < 1:
        raise CommandFailed("usage", "--points must be positive")
    seq = cfg.sequence()
    H = _hamiltonian(cfg, seq)
    times = np.linspace(0.0, t_max, points)
    reports = fidelity_curve(H, times, budget=cfg.dense_budget)
    lines = ["t,fidelity,phase,reverse_fidelity"]
    for r in reports:
        lines.append(f"{r.time:.12g},{r.fidelity:.12g},{r.phase:.12g},{r.reverse_fidelity:.12g}")
    (cfg.out / f"{cfg.stem}.fidelity.csv").write_text("\n".join(lines) + "\n")
    best = max(reports, key=lambda r: r.fidelity)
    return {"points": points, "max_fidelity": best.fidelity, "at": best.time}


class _JsonArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D401 - argparse hook
        print(json.dumps({"error": "usage", "message": message}), file=sys.stderr)
        raise SystemExit(2)


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("target", nargs="*", help="family and level, e.g. 'hk 3', 'lp:2' or 'g2tilde'")
    common.add_argument("--family", help="hk, lp or g2tilde")
    common.add_argument("--level", type=int)
    common.add_argument("--plan", type=Path, help="construction plan JSON")
    common.add_argument("--jacobi", type=Path, help="chain matrix JSON {B, J}; defaults to Krawtchouk")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--tol", type=_positive_float, default=CLUSTER_TOL, help="cluster tolerance")
    common.add_argument("--dense-budget", type=int, default=DENSE_BUDGET)

    parser = _JsonArgumentParser(prog="fractal-pqst", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_JsonArgumentParser)
    sub.add_parser("generate", parents=[common], help="write graph, plan and Hamiltonian JSON")
    sub.add_parser("check-assumptions", parents=[common], help="verify layer-constant degrees")
    p = sub.add_parser("spectrum", parents=[common], help="eigenvalue table from the inductive algorithm")
    p.add_argument("--oracle", action="store_true", help="also diagonalize densely and diff")
    p.add_argument("--reference", type=Path, help="CSV table (j, eigenvalue, multiplicity) to compare against")
    sub.add_parser("ids", parents=[common], help="integrated density of states CSV")
    p = sub.add_parser("pqst", parents=[common], help="transfer fidelity from first to last layer")
    p.add_argument("--time", default="pi", help="time expression, e.g. 'pi' or '2*pi'")
    p.add_argument("--min-fidelity", type=float, help="fail unless fidelity reaches this value")
    p = sub.add_parser("fidelity-curve", parents=[common], help="fidelity on a uniform time grid from 0")
    p.add_argument("--time", default="2*pi", help="end of the grid")
    p.add_argument("--points", type=int, default=201)
    return parser


def _config(args) -> RunConfig:
    family, level = args.family, args.level
    target = list(args.target)
    if target:
        family = target.pop(0)
        if ":" in family:
            family, lvl = family.split(":", 1)
            level = int(lvl)
        if target:
            level = int(target.pop(0))
        if target:
            raise CommandFailed("usage", f"unexpected arguments {target}")
    if level is not None and level < 0:
        raise CommandFailed("usage", "level must be >= 0")
    if args.plan is None and family not in (None, "g2tilde") and level is None:
        raise CommandFailed("usage", f"family {family!r} needs a level")
    args.out.mkdir(parents=True, exist_ok=True)
    return RunConfig(args.command, family, level, args.plan, args.jacobi, args.out, args.tol, args.dense_budget)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "generate":
            summary = cmd_generate(cfg)
        elif args.command == "check-assumptions":
            summary = cmd_check_assumptions(cfg)
        elif args.command == "spectrum":
            summary = cmd_spectrum(cfg, args.oracle, args.reference)
        elif args.command == "ids":
            summary = cmd_ids(cfg)
        elif args.command == "pqst":
            summary = cmd_pqst(cfg, parse_time(args.time), args.min_fidelity)
        else:
            summary = cmd_fidelity_curve(cfg, parse_time(args.time), args.points)
    except CommandFailed as exc:
        print(json.dumps(exc.payload), file=sys.stderr)
        return 1
    except (ConstructionError, GraphError, JacobiError, LiftError, SpectralError, EvolutionError, ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps({"command": args.command, "target": cfg.stem, **summary}))
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
