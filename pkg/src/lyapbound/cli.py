"""Command-line interface: ``lyapbound {classify,bounds,mc,corpus}``.

Exit codes: 0 success, 2 invalid input, 3 requested bound is -inf.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import bounds as bd
from .core import FamilyError, MatrixFamily, MonteCarloError, monte_carlo_lambda, validate_family
from .corpus import by_name
from .lifting import gamma_sdp_upper
from .optim import OptimizerSettings
from .structure import Partition, analyze

TABLE_FIELDS = ["k", "lower_kind", "lower", "upper_kind", "upper", "gap", "rel_gap", "mc_mean", "mc_stderr", "wall_ms"]
REL_EPS = 1e-12

EXIT_OK, EXIT_INPUT, EXIT_UNDEFINED = 0, 2, 3


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# family files


def family_to_dict(family: MatrixFamily) -> dict:
    return {
        "dim": family.dim,
        "matrices": family.matrices.tolist(),
        "probs": family.probs.tolist(),
    }


def dump_family(family: MatrixFamily, path) -> None:
    # json writes floats with repr(): shortest decimal that round-trips exactly
    Path(path).write_text(json.dumps(family_to_dict(family)) + "\n")


def family_from_dict(obj) -> MatrixFamily:
    if not isinstance(obj, dict) or "matrices" not in obj:
        raise InputError("family file must be a JSON object with a 'matrices' field")
    mats = obj["matrices"]
    if not isinstance(mats, list) or not mats:
        raise InputError("'matrices' must be a nonempty list")
    for a in mats:
        if not isinstance(a, list) or not all(isinstance(r, list) for r in a):
            raise InputError("each matrix must be a list of rows")
        if len({len(r) for r in a}) > 1:
            raise InputError("ragged rows in matrix")
    try:
        family = validate_family(mats, obj.get("probs"))
    except FamilyError as exc:
        raise InputError(str(exc)) from None
    if "dim" in obj and obj["dim"] != family.dim:
        raise InputError(f"'dim' is {obj['dim']} but matrices are {family.dim}x{family.dim}")
    return family


def load_family(path) -> MatrixFamily:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read family file {path}: {exc}") from None
    return family_from_dict(obj)


def parse_k_list(text: str) -> list[int]:
    try:
        ks = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"bad --k list {text!r}") from None
    if not ks or any(k < 1 for k in ks):
        raise InputError("--k needs positive integers")
    return ks


# ---------------------------------------------------------------------------
# classify


def recommend(report) -> str:
    if not report.nonnegative:
        return "gamma-sdp upper bound only; no continuous lower bound with guaranteed accuracy exists for signed families"
    if report.reducible:
        return "solve blocks, take max"
    zero_col = any(report.has_zero_col)
    if zero_col:
        return "beta is -inf (zero columns); use beta-tilde or the transposed family, alpha for the upper bound"
    if not report.condition_b:
        return "beta finite; convergence not guaranteed (condition (b) fails)"
    if isinstance(report.positivity, Partition):
        return "alpha-tilde / beta (partition case)"
    if report.positivity is None:
        return "alpha / beta (dichotomy undecided within budget)"
    return "alpha / beta"


def cmd_classify(path) -> dict:
    family = load_family(path)
    report = analyze(family)
    out = report.as_dict()
    out["recommendation"] = recommend(report)
    return out


# ---------------------------------------------------------------------------
# bounds


def _lower(family, k, method, optimize, opts):
    if method == "none":
        return None
    if method == "beta":
        return bd.beta_optimize(family, k, opts=opts) if optimize else bd.beta_eval(family, k)
    v = bd.beta_tilde_support(family, k)
    if not v.any():
        rep = bd.BoundReport("beta_tilde", k, -math.inf, parameter=v)
        rep.flag = "no admissible support for beta_tilde at this k"
        return rep
    return bd.beta_tilde_eval(family, k, v)


def _upper(family, k, method, optimize, opts, partition):
    if method == "alpha":
        return bd.alpha_optimize(family, k, opts=opts) if optimize else bd.alpha_eval(family, k)
    if method == "alpha-tilde":
        if optimize:
            return bd.alpha_tilde_optimize(family, partition, k, opts=opts)
        return bd.alpha_tilde_eval(family, partition, k)
    if method == "euclid":
        return bd.euclidean_upper(family, k)
    return gamma_sdp_upper(family, k)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return repr(float(x))


def cmd_bounds(path, k_list, lower="beta", upper="alpha", optimize=False, seed=None, mc_T=0, mc_N=0, out=None):
    """Compute one table row per ``k``; returns ``(rows, sidecar, exit_code)``."""
    family = load_family(path)
    needs_nonneg = lower != "none" or upper in ("alpha", "alpha-tilde")
    if needs_nonneg and not family.is_nonnegative:
        raise InputError(
            f"{lower if lower != 'none' else upper} needs a nonnegative family; "
            "use --lower none --upper gamma-sdp (or euclid) for signed input"
        )
    partition = None
    if upper == "alpha-tilde":
        report = analyze(family)
        if not isinstance(report.positivity, Partition):
            raise InputError("alpha-tilde needs an irreducible family in the partition case")
        partition = report.positivity.structure

    mc = None
    if mc_T:
        if seed is None:
            raise InputError("--seed is required for Monte Carlo")
        mc = monte_carlo_lambda(family, mc_T, mc_N or 1, seed)

    opts = OptimizerSettings(seed=seed or 0)
    rows, sidecar = [], []
    code = EXIT_OK
    for k in k_list:
        t0 = time.perf_counter()
        lo = _lower(family, k, lower, optimize, opts)
        up = _upper(family, k, upper, optimize, opts, partition)
        wall = int(round((time.perf_counter() - t0) * 1000))
        lv = lo.value if lo is not None else None
        gap = up.value - lv if lv is not None else None
        rel = gap / max(abs(up.value), REL_EPS) if gap is not None and math.isfinite(gap) else gap
        rows.append(
            {
                "k": k,
                "lower_kind": lo.kind if lo else "none",
                "lower": _fmt(lv),
                "upper_kind": up.kind,
                "upper": _fmt(up.value),
                "gap": _fmt(gap),
                "rel_gap": _fmt(rel),
                "mc_mean": _fmt(mc.mean) if mc else "",
                "mc_stderr": _fmt(mc.stderr) if mc else "",
                "wall_ms": wall,
            }
        )
        sidecar.append({"k": k, "lower": lo.sidecar() if lo else None, "upper": up.sidecar()})
        if lo is not None and not lo.is_finite:
            code = EXIT_UNDEFINED
            print(f"k={k}: {lo.flag}", file=sys.stderr)
    return rows, sidecar, code


def write_table(rows, fh) -> None:
    w = csv.DictWriter(fh, fieldnames=TABLE_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)


# ---------------------------------------------------------------------------
# argparse plumbing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lyapbound", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="structure report as JSON")
    p.add_argument("path")

    p = sub.add_parser("bounds", help="convergence table (CSV) over k")
    p.add_argument("path")
    p.add_argument("--k", default="1,2,4,8", help='comma list, e.g. "1,2,4,8,12"')
    p.add_argument("--lower", choices=["beta", "beta-tilde", "none"], default="beta")
    p.add_argument("--upper", choices=["alpha", "alpha-tilde", "euclid", "gamma-sdp"], default="alpha")
    p.add_argument("--optimize", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--mc-T", type=int, default=0, help="Monte Carlo trajectory length (0: skip)")
    p.add_argument("--mc-N", type=int, default=50)
    p.add_argument("--out", help="CSV path (stdout if omitted); parameters go to <out>.json")

    p = sub.add_parser("mc", help="Monte Carlo estimate of the exponent")
    p.add_argument("path")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("corpus", help="write a built-in family as JSON")
    p.add_argument("name", choices=["sigma6", "derham", "counterexample", "swap", "random"])
    p.add_argument("--omega", type=float)
    p.add_argument("--dim", type=int)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--signed", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (stdout if omitted)")
    return ap


def _run(args) -> int:
    if args.command == "classify":
        print(json.dumps(cmd_classify(args.path), indent=2))
        return EXIT_OK

    if args.command == "bounds":
        rows, sidecar, code = cmd_bounds(
            args.path,
            parse_k_list(args.k),
            lower=args.lower,
            upper=args.upper,
            optimize=args.optimize,
            seed=args.seed,
            mc_T=args.mc_T,
            mc_N=args.mc_N,
        )
        if args.out:
            with open(args.out, "w", newline="") as fh:
                write_table(rows, fh)
            Path(args.out + ".json").write_text(json.dumps(sidecar, indent=1) + "\n")
        else:
            write_table(rows, sys.stdout)
        return code

    if args.command == "mc":
        if args.T < 1 or args.N < 1:
            raise InputError("--T and --N must be >= 1")
        est = monte_carlo_lambda(load_family(args.path), args.T, args.N, args.seed)
        print(json.dumps(est.as_dict()))
        return EXIT_OK

    if args.command == "corpus":
        params = {}
        if args.name == "derham":
            if args.omega is None:
                raise InputError("derham needs --omega")
            params["omega"] = args.omega
        if args.name == "random":
            if args.dim is None or args.seed is None:
                raise InputError("random needs --dim and --seed")
            params.update(dim=args.dim, density=args.density, signed=args.signed, seed=args.seed)
        family = by_name(args.name, **params)
        if args.out:
            dump_family(family, args.out)
        else:
            print(json.dumps(family_to_dict(family)))
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (InputError, FamilyError, MonteCarloError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
