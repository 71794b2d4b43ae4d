"""Command-line front end.

Input files are JSON documents carrying ``"version": "1"``.  Item ids in every
file this module reads or writes are 1-based.  Exit codes: 0 success, 2 for
unreadable input or bad flags, 3 when the solver or an objective fails.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (
    COMBINERS,
    DEFAULT_COV,
    AdConfig,
    SynthConfig,
    run_ad_experiment,
    run_synth_experiment,
    write_ad_positions,
    write_synth_csvs,
)
from .multirank import MultiProblem, SolverParams, solve_multirank
from .objective import ConcaveObjective, ObjectiveError
from .rank_core import Instance, SolveResult, SolverError, best_cumulative_score, solve_rank, topk_solve

FORMAT_VERSION = "1"
EXIT_OK, EXIT_PARSE, EXIT_SOLVER = 0, 2, 3
NORMALIZED = ("NormalizedSum", "QuadraticNormalized")


class InputError(ValueError):
    """Input file or flag value that cannot be used."""


# -- input -------------------------------------------------------------------


def load_document(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise InputError("top level must be an object")
    if str(doc.get("version")) != FORMAT_VERSION:
        raise InputError(f"unsupported or missing version tag {doc.get('version')!r}")
    return doc


def _array(block: dict, key: str) -> np.ndarray:
    if key not in block:
        raise InputError(f"missing field {key!r}")
    vals = block[key]
    if not isinstance(vals, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
        raise InputError(f"field {key!r} must be a list of numbers")
    return np.asarray(vals, dtype=float)


def parse_instance(block, k: int | None = None) -> Instance:
    """``a``, ``b`` and either ``w`` or ``k``; an explicit ``k`` forces top-k weights."""
    if not isinstance(block, dict):
        raise InputError("instance must be an object")
    a, b = _array(block, "a"), _array(block, "b")
    if a.size != b.size:
        raise InputError(f"length mismatch: a={a.size}, b={b.size}")
    if k is None and "w" not in block:
        k = block.get("k")
        if k is None:
            raise InputError("instance needs 'w' or 'k'")
    try:
        if k is not None:
            if isinstance(k, bool) or not isinstance(k, int):
                raise InputError(f"k must be an integer, got {k!r}")
            if not 1 <= k <= a.size:
                raise InputError(f"k={k} out of range [1, {a.size}]")
            return Instance.with_topk(a, b, k)
        return Instance(a, b, _array(block, "w"))
    except InputError:
        raise
    except ValueError as exc:
        raise InputError(str(exc)) from None


def parse_objective_flag(text: str | None):
    """A kind name or an inline JSON object; None when the flag is absent."""
    if text is None:
        return None
    text = text.strip()
    if text.startswith("{"):
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"--objective: invalid JSON ({exc})") from None
        return spec
    return {"kind": text, "params": {}}


def build_objective(spec, s_a: float, s_b: float) -> ConcaveObjective:
    """Objective from ``{kind, params}``; missing normalizers default to the best scores."""
    if spec is None:
        spec = {"kind": "LogProduct"}
    if not isinstance(spec, dict):
        raise InputError("objective must be an object with 'kind' and 'params'")
    params = spec.get("params", {})
    if not isinstance(params, dict):
        raise InputError("objective params must be an object")
    params = dict(params)
    kind = spec.get("kind")
    if kind in NORMALIZED:
        params.setdefault("s_a", s_a)
        params.setdefault("s_b", s_b)
    elif kind == "ExpPenalty":
        params.setdefault("s_b", s_b)
    elif kind == "LinearSum":
        params.setdefault("u", 1.0)
        params.setdefault("v", 1.0)
    try:
        return ConcaveObjective.from_config({"kind": kind, "params": params})
    except (ObjectiveError, TypeError) as exc:
        raise InputError(f"objective: {exc}") from None


def best_scores(inst: Instance) -> tuple[float, float]:
    return (float(best_cumulative_score(inst.a, inst.w)[0]),
            float(best_cumulative_score(inst.b, inst.w)[0]))


# -- output ------------------------------------------------------------------


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def render(report: dict) -> str:
    return json.dumps(_clean(report), indent=2) + "\n"


def write_atomic(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        with open(tmp, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def emit(report: dict, out) -> None:
    text = render(report)
    if out is None:
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _aug(res: SolveResult):
    return None if res.aug_index is None else res.aug_index + 1


def result_block(res: SolveResult) -> dict:
    return {
        "ranking": (res.ranking + 1).tolist(),
        "aug_index": _aug(res),
        "alpha": res.alpha,
        "beta": res.beta,
        "dual": [res.dual_p, res.dual_q],
        "opt_bound": res.opt_bound,
        "objective": res.objective,
    }


# -- commands ------------------------------------------------------------------


def cmd_rank(args) -> dict:
    doc = load_document(args.input)
    inst = parse_instance(doc)
    spec = parse_objective_flag(args.objective) or doc.get("objective")
    f = build_objective(spec, *best_scores(inst))
    return _solve_phase(lambda: {
        "version": FORMAT_VERSION,
        "command": "rank",
        "seed": args.seed,
        "mode": args.mode,
        "objective_spec": f.to_config(),
        **result_block(solve_rank(inst, f, seed=args.seed, mode=args.mode)),
    })


def cmd_topk(args) -> dict:
    doc = load_document(args.input)
    inst = parse_instance(doc, k=args.k)
    spec = parse_objective_flag(args.objective) or doc.get("objective")
    f = build_objective(spec, *best_scores(inst))

    def run():
        items, res = topk_solve(inst.a, inst.b, args.k, f, seed=args.seed)
        return {
            "version": FORMAT_VERSION,
            "command": "topk",
            "seed": args.seed,
            "k": args.k,
            "objective_spec": f.to_config(),
            "items": (items + 1).tolist(),
            "size": int(items.size),
            "aug_index": _aug(res),
            "alpha": float(inst.a[items].sum()),
            "beta": float(inst.b[items].sum()),
            "dual": [res.dual_p, res.dual_q],
            "opt_bound": res.opt_bound,
            "objective": f.value(float(inst.a[items].sum()), float(inst.b[items].sum())),
        }

    return _solve_phase(run)


def cmd_multirank(args) -> dict:
    doc = load_document(args.input)
    blocks = doc.get("instances")
    if not isinstance(blocks, list) or not blocks:
        raise InputError("'instances' must be a non-empty list")
    if "global_objective" not in doc:
        raise InputError("missing field 'global_objective'")
    instances = [parse_instance(b) for b in blocks]
    default = doc.get("objective")
    locals_ = [build_objective(b.get("objective", default), *best_scores(inst))
               for b, inst in zip(blocks, instances)]
    totals = np.sum([best_scores(inst) for inst in instances], axis=0)
    global_f = build_objective(doc["global_objective"], *totals)
    try:
        params = SolverParams(max_outer_iters=args.max_iters, grad_tol=args.tol, seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    problem = MultiProblem(tuple(instances), tuple(locals_), global_f, params)

    def run():
        res = solve_multirank(problem)
        return {
            "version": FORMAT_VERSION,
            "command": "multirank",
            "seed": args.seed,
            "global_objective": global_f.to_config(),
            "converged": res.converged,
            "iterations": res.iterations,
            "grad_norm": res.grad_norm,
            "global_dual": list(res.global_dual),
            "global_alpha": res.global_alpha,
            "global_beta": res.global_beta,
            "objective": res.objective_value,
            "opt_bound": res.opt_bound,
            "gap": res.gap,
            "instances": [{"objective_spec": f.to_config(), **result_block(r)}
                          for f, r in zip(locals_, res.results)],
        }

    return _solve_phase(run)


def parse_cov(text: str):
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise InputError(f"--cov: expected four comma-separated numbers, got {text!r}") from None
    if len(vals) != 4:
        raise InputError(f"--cov: expected four comma-separated numbers, got {len(vals)}")
    return ((vals[0], vals[1]), (vals[2], vals[3]))


def cmd_synth(args) -> list[Path]:
    combiners = tuple(c.strip() for c in args.combiners.split(",") if c.strip())
    unknown = [c for c in combiners if c not in COMBINERS]
    if unknown or not combiners:
        raise InputError(f"--combiners: unknown {unknown}; choose from {','.join(COMBINERS)}")
    try:
        cfg = SynthConfig(m=args.m, n=args.n, cov=parse_cov(args.cov), weight_depth=args.depth,
                          seed=args.seed)
        ad_cfg = AdConfig(m=args.m, seed=args.seed)
    except InputError:
        raise
    except ValueError as exc:
        raise InputError(str(exc)) from None
    # compute everything before touching the output directory
    synth, ads = _solve_phase(lambda: (run_synth_experiment(cfg, combiners), run_ad_experiment(ad_cfg)))
    paths = write_synth_csvs(synth, args.outdir)
    paths.append(write_ad_positions(ads, args.outdir))
    return paths


class _SolveFailure(Exception):
    pass


def _solve_phase(run):
    try:
        return run()
    except (SolverError, ObjectiveError, ArithmeticError, ValueError) as exc:
        raise _SolveFailure(f"{type(exc).__name__}: {exc}") from exc


# -- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="concave-rank",
                                     description="Rank items under a concave combination of two objectives.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rank", help="solve one instance")
    p.add_argument("input")
    p.add_argument("--objective", help="kind name or JSON {kind, params}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("auto", "integer", "randomized"), default="auto")
    p.add_argument("--out")

    p = sub.add_parser("topk", help="choose k (or k+1) items")
    p.add_argument("input")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--objective", help="kind name or JSON {kind, params}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("multirank", help="solve several instances under a global objective")
    p.add_argument("input")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=SolverParams.max_outer_iters)
    p.add_argument("--tol", type=float, default=SolverParams.grad_tol)
    p.add_argument("--out")

    p = sub.add_parser("synth", help="run the synthetic and ad-ranking experiments")
    p.add_argument("--m", type=int, default=500)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--cov", default=",".join(str(x) for row in DEFAULT_COV for x in row),
                   help="2x2 covariance, row-major, comma-separated")
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--combiners", default=",".join(COMBINERS))
    p.add_argument("--outdir", default=".")
    return parser


COMMANDS = {"rank": cmd_rank, "topk": cmd_topk, "multirank": cmd_multirank, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        out = COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except _SolveFailure as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    try:
        if args.command == "synth":
            for path in out:
                print(path)
        else:
            emit(out, args.out)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK
