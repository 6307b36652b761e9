"""``contextsim`` command line.

Every command writes one JSON document (or CSV with ``--format csv``) to
stdout or ``--out``. Errors go to stderr as JSON. Exit codes: 0 success,
1 failed verification, 2 bad input, 3 degenerate preparation.

Examples::

    contextsim verify
    contextsim analytic --state example
    contextsim discriminate --route via-ab --shots 1000 --seed 7 --state example
    contextsim apparatus --box von-neumann --shots 10000 --seed 3
    contextsim hv --set mermin9
    contextsim additive --rho '[[0.5,0],[0.5,0],[0.5,0],[0.5,0]]'
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import contexts as cx
from . import hiddenvar as hv
from . import qlinalg as ql
from .errors import ContextSimError, InvalidState, NotNormalized
from .measurement import DensityMatrix
from .observables import (
    ContextOperators,
    Observable,
    build_context_operators,
    build_mermin_square,
    row_column_context,
    verify_algebra,
)
from .sampling import (
    ExperimentConfig,
    ShotRecord,
    discriminate_apparatus,
    lueders_apparatus,
    run_discrimination_experiment,
    von_neumann_apparatus,
)

log = logging.getLogger("contextsim")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_DEGENERATE = 0, 1, 2, 3

DEFAULTS = {
    "state": "example",
    "route": None,
    "shots": 1000,
    "split": 0.5,
    "threshold_k": 3.0,
    "format": "json",
    "out": None,
    "seed": None,
}

ADDITIVE_STATES = {
    "plusx": [0.5, 0.5, 0.5, 0.5],
    "up": [1.0, 0.0, 0.0, 0.0],
    "down": [0.0, 0.0, 0.0, 1.0],
}


class BadInput(ContextSimError):
    exit_code = EXIT_INPUT


# -- serialization ---------------------------------------------------------------

def jsonable(x: Any) -> Any:
    """Complex numbers become ``[re, im]``; arrays become nested lists."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real) + 0.0, float(x.imag) + 0.0]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) + 0.0
    return x


def dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, fixed indentation, round-trip float repr."""
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = json.dumps(v) if isinstance(v, list) else v
    return out


def summary_csv(payload: dict) -> str:
    flat = _flatten(jsonable(payload))
    keys = sorted(flat)
    return csv_text(keys, [[flat[k] for k in keys]])


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- input parsing ---------------------------------------------------------------

def _parse_complex_list(raw: Any, n: int, what: str) -> list[complex]:
    if isinstance(raw, str):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise BadInput(f"{what}: not valid JSON ({exc})") from None
    if not isinstance(raw, list) or len(raw) != n:
        raise BadInput(f"{what}: expected a list of {n} [re, im] pairs")
    vals = []
    for item in raw:
        if isinstance(item, (int, float)):
            vals.append(complex(item))
        elif isinstance(item, list) and len(item) == 2 and all(isinstance(t, (int, float)) for t in item):
            vals.append(complex(item[0], item[1]))
        else:
            raise BadInput(f"{what}: bad entry {item!r}")
    return vals


def state_from(value: Any, seed: int | None = None) -> cx.StateSpec:
    """Named state, ``random`` (needs a seed) or a list of four ``[re, im]`` amplitudes."""
    if isinstance(value, str) and not value.lstrip().startswith("["):
        if value == "random":
            if seed is None:
                raise BadInput("state 'random' requires --seed")
            return cx.StateSpec.random(np.random.default_rng(seed))
        if value not in cx.NAMED_STATES:
            raise BadInput(f"unknown state {value!r}; choose from {sorted(cx.NAMED_STATES)} or give amplitudes")
        return cx.NAMED_STATES[value]()
    amps = _parse_complex_list(value, 4, "amplitudes")
    norm2 = sum(abs(a) ** 2 for a in amps)
    err = abs(norm2 - 1.0)
    if err > 1e-6:
        raise NotNormalized(f"amplitudes have squared norm {norm2:.12g}")
    if err > 1e-9:
        log.warning("renormalizing amplitudes (squared norm %.12g)", norm2)
    return cx.StateSpec.from_amplitudes(amps, renormalize=True)


def _route(value: str | None) -> cx.Route | None:
    if value is None:
        return None
    try:
        return cx.Route.parse(value)
    except ValueError as exc:
        raise BadInput(str(exc)) from None


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BadInput(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise BadInput("config file must hold a JSON object")
    return cfg


def _settings(args: argparse.Namespace) -> dict:
    """Builtin defaults, overlaid by the config file, overlaid by explicit flags."""
    cfg = _load_config(getattr(args, "config", None))
    merged = dict(DEFAULTS)
    for k, v in cfg.items():
        merged[k.replace("-", "_")] = v
    if "amplitudes" in cfg and getattr(args, "state", None) is None:
        merged["state"] = cfg["amplitudes"]
    for k, v in vars(args).items():
        if v is not None and k not in ("func", "config", "command"):
            merged[k] = v
    if getattr(args, "amplitudes", None) is not None:
        merged["state"] = args.amplitudes
    return merged


def _require_seed(s: dict) -> int:
    if s.get("seed") is None:
        raise BadInput("randomized commands require an explicit --seed")
    return int(s["seed"])


# -- commands --------------------------------------------------------------------

def _perturbed(ops: ContextOperators, square, eps: float, seed: int):
    rng = np.random.default_rng(seed)

    def jiggle(o: Observable) -> Observable:
        noise = ql.random_hermitian(o.dim, rng)
        return Observable.from_matrix(o.label, o.matrix + eps * noise / np.max(np.abs(noise)))

    ops = ContextOperators(*(jiggle(o) for o in (ops.A, ops.B, ops.Aprime, ops.Bprime, ops.C)))
    square = type(square)(tuple(tuple(jiggle(o) for o in row) for row in square.grid))
    return ops, square


def cmd_verify(args: argparse.Namespace) -> tuple[dict, str | None, int]:
    ops, square = build_context_operators(), build_mermin_square()
    if args.perturb:
        ops, square = _perturbed(ops, square, args.perturb, args.seed or 0)
    reports = [verify_algebra(square), verify_algebra(ops)]
    # every row/column pair except the last column yields a valid C = AB = A'B'
    pairs = []
    for r in range(3):
        for c in range(2):
            rep = verify_algebra(row_column_context(square, r, c))
            pairs.append({"row": r, "column": c, "passed": rep.passed})
    passed = all(r.passed for r in reports) and all(p["passed"] for p in pairs)
    payload = {
        "passed": passed,
        "reports": [r.to_dict() for r in reports],
        "row_column_contexts": pairs,
        "check_count": sum(len(r.checks) for r in reports),
    }
    rows = [[r.subject, c.name, c.passed, c.residual] for r in reports for c in r.checks]
    return payload, csv_text(["subject", "check", "passed", "residual"], rows), EXIT_OK if passed else EXIT_FAIL


def _state_dict(spec: cx.StateSpec) -> dict:
    return {"amplitudes": spec.amplitudes()}


def cmd_analytic(args: argparse.Namespace) -> tuple[dict, str | None, int]:
    s = _settings(args)
    spec = state_from(s["state"], s.get("seed"))
    route = _route(s.get("route"))
    ops = build_context_operators()
    rho = cx.density_from_spec(spec)
    r = cx.r_coefficients(spec)
    routes = [route] if route else list(cx.PRODUCT_ROUTES)
    finals = {}
    worst = 0.0
    for rt in routes:
        numeric = cx.final_state_numeric(rho, rt, ops)
        closed = cx.closed_form_final_state(r, rt)
        gap = ql.max_abs_diff(numeric.matrix, closed.matrix)
        worst = max(worst, gap)
        finals[rt.name] = {
            "computational": numeric.matrix,
            "phi_basis": numeric.in_basis(ops.phi_basis),
            "closed_form_discrepancy": gap,
        }
    closed_t = cx.closed_form_expectations(r)
    numeric_t = cx.numeric_expectations(rho, ops)
    worst = max(worst, closed_t.max_abs_diff(numeric_t))
    payload = {
        "state": _state_dict(spec),
        "final_states": finals,
        "expectations": numeric_t.to_dict(),
        "expectations_closed_form": closed_t.to_dict(),
        "max_discrepancy": worst,
    }
    threshold = 1e-10
    mb, mbp = closed_t.get("B", cx.DIRECT_C), closed_t.get("B'", cx.DIRECT_C)
    if abs(mb) <= threshold or abs(mbp) <= threshold:
        payload["warning"] = "DegeneratePreparation: <B> or <B'> of this state is zero; routes cannot all be told apart"
    else:
        payload["analytic_discrimination"] = {
            rt.name: cx.discriminate_route(closed_t.get("B", rt), closed_t.get("B'", rt), threshold).name
            for rt in routes
        }
    rows = [[label, rt.name, numeric_t.get(label, rt), closed_t.get(label, rt)]
            for label in cx.OBSERVABLE_LABELS for rt in cx.PRODUCT_ROUTES]
    return payload, csv_text(["observable", "route", "numeric", "closed_form"], rows), EXIT_OK


def _write_shots(path: str, records: Sequence[ShotRecord]) -> None:
    Path(path).write_text(csv_text(ShotRecord.CSV_HEADER, [r.csv_row() for r in records]))


def cmd_discriminate(args: argparse.Namespace) -> tuple[dict, str | None, int]:
    s = _settings(args)
    seed = _require_seed(s)
    route = _route(s.get("route"))
    if route is None:
        raise BadInput("discriminate needs --route")
    if args.order:
        route = cx.Route(route.tag, cx.Order(args.order))
    spec = state_from(s["state"], seed)
    try:
        config = ExperimentConfig(spec, route, seed=seed, shots=int(s["shots"]),
                                  split=float(s["split"]), threshold_k=float(s["threshold_k"]))
    except ValueError as exc:
        raise BadInput(str(exc)) from None
    result = run_discrimination_experiment(config, threads=args.threads, keep_records=bool(args.per_shot))
    if args.per_shot:
        _write_shots(args.per_shot, result.records)
    payload = {"state": _state_dict(spec), "split": config.split, "threshold_k": config.threshold_k,
               **result.to_dict()}
    return payload, summary_csv(payload), EXIT_OK


def cmd_apparatus(args: argparse.Namespace) -> tuple[dict, str | None, int]:
    s = _settings(args)
    seed = _require_seed(s)
    spec = state_from(s["state"], seed)
    ops = build_context_operators()
    target = ops.C_in(args.basis)
    if args.observable == "sz":
        # one-line stand-in for a nondegenerate observable on the same space
        target = Observable.from_matrix("diag(4,3,2,1)", np.diag([4.0, 3.0, 2.0, 1.0]))
    box = lueders_apparatus(target) if args.box == "lueders" else von_neumann_apparatus(target)
    shots = int(args.shots if args.shots is not None else s.get("shots", 10000))
    verdict = discriminate_apparatus(box, spec, shots, seed, float(s["threshold_k"]), threads=args.threads)
    payload = {"state": _state_dict(spec), "box": args.box, "basis": args.basis, **verdict.to_dict()}
    return payload, summary_csv(payload), EXIT_OK


def cmd_hv(args: argparse.Namespace) -> tuple[dict, str | None, int]:
    if args.set == "context5":
        labels, cons, domain = hv.CONTEXT5_LABELS, hv.context5_constraints(), hv.PM
    elif args.set == "mermin9":
        labels, cons, domain = hv.MERMIN9_LABELS, hv.mermin9_constraints(), hv.PM
    else:
        labels, cons, domain = ("A", "B", "C"), hv.additive_constraints(), hv.ONE_ZERO
    if args.relax is not None:
        if not 0 <= args.relax < len(cons):
            raise BadInput(f"--relax must be in [0, {len(cons) - 1}]")
        cons = cons.without(args.relax)
    rows = hv.enumerate_assignments(labels, cons, domain)
    payload: dict = {
        "set": args.set,
        "labels": list(labels),
        "constraints": [c.describe() for c in cons.constraints],
        "count": len(rows),
        "assignments": [list(a.key(labels)) for a in rows],
    }
    if rows and args.set != "mermin9":
        w = [1.0 / len(rows)] * len(rows)
        routes = hv.routes_for(rows)
        stats = [hv.hv_route_statistics(rows, w, rt) for rt in routes]
        payload["route_statistics"] = [st.to_dict() for st in stats]
        payload["route_independence_tv"] = max(st.route_independence for st in stats)
    return payload, csv_text(list(labels), [a.key(labels) for a in rows]), EXIT_OK


def cmd_additive(args: argparse.Namespace) -> tuple[dict, str | None, int]:
    if args.rho is not None:
        a, b, g, d = _parse_complex_list(args.rho, 4, "rho")
    else:
        a, b, g, d = (complex(x) for x in ADDITIVE_STATES[args.state])
    rep = cx.additive_case(a, b, g, d)
    hv_rows = hv.additive_hv_table()
    payload = {
        "rho_initial": rep.rho_initial.matrix,
        "rho_direct": rep.rho_direct.matrix,
        "rho_sum": rep.rho_sum.matrix,
        "sx_direct": rep.sx_direct,
        "sx_sum": rep.sx_sum,
        "sx_direct_closed_form": rep.sx_direct_closed_form,
        "discriminable": rep.discriminable,
        "hv_table": [list(r.key(("A", "B", "C"))) for r in hv_rows],
    }
    return payload, summary_csv({k: v for k, v in payload.items() if not k.startswith("rho")}), EXIT_OK


# -- parser ----------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, state: bool = True) -> None:
    p.add_argument("--config", help="JSON config file; explicit flags override its fields")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--seed", type=int, default=None)
    if state:
        p.add_argument("--state", default=None, help="example | uniform | plusplus | random")
        p.add_argument("--amplitudes", default=None,
                       help="JSON list of four [re, im] amplitudes for |++>, |+->, |-+>, |-->")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contextsim", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check the operator algebra")
    _add_common(p, state=False)
    p.add_argument("--perturb", type=float, default=0.0, help="debug: add noise of this size to every operator")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("analytic", help="final states and expectation table for each route")
    _add_common(p)
    p.add_argument("--route", default=None)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("discriminate", help="Monte Carlo route-discrimination experiment")
    _add_common(p)
    p.add_argument("--route", default=None, help="direct-c | via-ab | via-apbp")
    p.add_argument("--order", choices=[o.value for o in cx.Order], default=None)
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--split", type=float, default=None)
    p.add_argument("--threshold-k", dest="threshold_k", type=float, default=None)
    p.add_argument("--threads", type=int, default=None, help="overrides CONTEXTSIM_THREADS")
    p.add_argument("--per-shot", dest="per_shot", default=None, help="write per-shot CSV here")
    p.set_defaults(func=cmd_discriminate)

    p = sub.add_parser("apparatus", help="tell a Lueders box from a von Neumann box")
    _add_common(p)
    p.add_argument("--box", choices=("lueders", "von-neumann"), required=True)
    p.add_argument("--basis", choices=("phi", "psi"), default="phi",
                   help="eigenbasis used by the von Neumann box")
    p.add_argument("--observable", choices=("C", "sz"), default="C",
                   help="'sz' swaps in a nondegenerate observable (rejected as non-discriminable)")
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--threshold-k", dest="threshold_k", type=float, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_apparatus)

    p = sub.add_parser("hv", help="enumerate noncontextual value assignments")
    _add_common(p, state=False)
    p.add_argument("--set", choices=("context5", "mermin9", "additive"), required=True)
    p.add_argument("--relax", type=int, default=None, help="drop constraint number N")
    p.set_defaults(func=cmd_hv)

    p = sub.add_parser("additive", help="identity = |+><+| + |-><-| on one qubit")
    _add_common(p, state=False)
    p.add_argument("--rho", default=None, help="JSON [alpha, beta, gamma, delta] as [re, im] pairs")
    p.add_argument("--state", choices=sorted(ADDITIVE_STATES), default="plusx")
    p.set_defaults(func=cmd_additive)
    return parser


def _fail(exc: Exception, code: int) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code},
                                sort_keys=True) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        payload, csv_out, code = args.func(args)
        fmt = args.format or _load_config(getattr(args, "config", None)).get("format", "json")
        out = args.out or _load_config(getattr(args, "config", None)).get("out")
        _emit(csv_out if fmt == "csv" and csv_out is not None else dumps(payload), out)
        return code
    except ContextSimError as exc:
        return _fail(exc, exc.exit_code)
    except (ValueError, OSError) as exc:
        return _fail(exc, EXIT_INPUT)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
