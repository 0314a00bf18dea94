"""Command-line front end for the library.

Every subcommand resolves a model, runs the matching library call, and
emits CSV (metadata comment block, value columns at 17 significant digits
plus a rounded 4-digit display column) or JSON (a "meta" object plus the
payload, keys sorted).  Outputs carry the full configuration and library
versions, so equal configuration and seed reproduce byte-identical files.

Exit codes: 0 success, 2 configuration errors (including non-summable
operators), 3 numerical failures, 4 refusals outside the good set.  Module
errors print one machine-readable JSON object to stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys

import numpy as np
import scipy

from . import __version__
from .boundary_law import (
    MODE_AUTO,
    SolveConfig,
    periodic_solve,
    single_site_marginal,
    solve_fixed_point,
    write_law_csv,
)
from .errors import (
    ConfigError,
    NumericalError,
    OutsideGoodSetError,
    TreeGibbsError,
)
from .ggm import fuzzy_chain, ggm_edge_marginal, increment_laws
from .goodset import GoodSetQuery, beta_threshold, membership
from .pathsim import (
    sample_path,
    wn_ggm_exact,
    wn_localized_exact,
    write_samples_csv,
    write_wn_csv,
)
from .potentials import (
    DOMAIN_Z,
    fuzzy_Q,
    load_potential,
    log_potential,
    norm_pair,
    p_norm,
    sos,
)

__all__ = ["main"]

_FAMILIES = {"sos": sos, "log": log_potential}


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------


def _resolve_model(args):
    """Potential from --model/--beta; custom files carry their own beta."""
    spec = args.model
    if spec.startswith("custom:"):
        if getattr(args, "beta", None) is not None:
            raise ConfigError("custom model files fix beta; drop --beta")
        path = spec[len("custom:"):]
        try:
            return load_potential(path)
        except OSError as exc:
            raise ConfigError(f"cannot read model file {path}: {exc}") from None
    if spec not in _FAMILIES:
        raise ConfigError(
            f"unknown model {spec!r}, expected sos, log, or custom:<path>"
        )
    beta = getattr(args, "beta", None)
    if beta is None:
        raise ConfigError(f"model {spec!r} needs --beta")
    return _FAMILIES[spec](beta)


def _parse_int_list(text: str) -> list[int]:
    try:
        items = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from exc
    if not items:
        raise ConfigError("empty integer list")
    return items


def _parse_beta_range(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"expected a:b:step, got {text!r}")
    try:
        a, b, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"expected numeric a:b:step, got {text!r}") from exc
    if step <= 0 or b < a:
        raise ConfigError(f"need a <= b and step > 0 in {text!r}")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return [a + i * step for i in range(count)]


def _f17(x) -> str:
    return "" if x is None else f"{float(x):.17g}"


def _f4(x) -> str:
    return "" if x is None else f"{float(x):.4g}"


def _jsonify(obj):
    """Recursively make obj JSON-safe; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)[:4].strip("'")
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _meta(args, **extra) -> dict:
    meta = {
        "command": args.command,
        "format": args.format,
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }
    for key in ("model", "beta", "d", "q", "pairing", "truncation", "tol",
                "seed", "replicate", "n", "beta_range", "d_list",
                "gamma", "delta", "sample_steps"):
        val = getattr(args, key, None)
        if val is not None:
            meta[key] = val
    meta.update(extra)
    return meta


def _emit_csv(meta: dict, header: str, rows: list[str]) -> str:
    out = io.StringIO()
    for key in sorted(meta):
        out.write(f"# {key}={meta[key]}\n")
    out.write(header + "\n")
    for row in rows:
        out.write(row + "\n")
    return out.getvalue()


def _emit_json(meta: dict, payload: dict) -> str:
    return json.dumps(_jsonify({"meta": meta, **payload}),
                      indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _norm_payload(report) -> dict:
    return {
        "p": report.p,
        "domain": report.domain,
        "value": None if report.is_infinite else report.value,
        "infinite": report.is_infinite,
        "tail_bound": report.tail_bound,
        "method": report.method,
        "witness": report.witness,
    }


def cmd_norms(args) -> str:
    pot = _resolve_model(args)
    rel_tol = args.tol if args.tol is not None else 1e-10
    g, dl = norm_pair(pot, args.d, args.pairing, rel_tol=rel_tol)
    n1 = p_norm(pot, 1.0, DOMAIN_Z, rel_tol)
    notes = []
    if not g.is_infinite:
        notes.append("gamma finite: localized fixed-point regime available "
                     "(the q = infinity reading of the class construction)")
    else:
        notes.append("gamma infinite: no contraction certificate at this pairing")
    if n1.is_infinite:
        notes.append("norm_1 infinite: class sums diverge, no q-periodic "
                     "gradient measure exists for any q")
    else:
        notes.append("norm_1 finite: q-periodic construction available for every q")
    meta = _meta(args)
    if args.format == "json":
        return _emit_json(meta, {
            "gamma": _norm_payload(g),
            "delta": _norm_payload(dl),
            "norm_1": _norm_payload(n1),
            "notes": notes,
        })
    rows = []
    for name, rep in (("gamma", g), ("delta", dl), ("norm_1", n1)):
        rows.append(",".join([
            name, _f17(rep.p), rep.domain, _f17(rep.value), _f4(rep.value),
            _f17(rep.tail_bound), rep.method, rep.witness or "",
        ]))
    return _emit_csv(meta, "quantity,p,domain,value,display,tail_bound,method,witness", rows)


def cmd_goodset(args) -> str:
    if (args.gamma is None) != (args.delta is None):
        raise ConfigError("--gamma and --delta come together")
    if args.gamma is not None:
        gamma, delta = args.gamma, args.delta
        source = "explicit"
    else:
        pot = _resolve_model(args)
        rel_tol = args.tol if args.tol is not None else 1e-10
        g, dl = norm_pair(pot, args.d, args.pairing, rel_tol=rel_tol)
        if g.is_infinite or dl.is_infinite:
            raise NumericalError(
                "norm pair is infinite; membership is vacuously false "
                f"(witness: {g.witness or dl.witness})"
            )
        gamma, delta = g.value, dl.value
        source = "model"
    verdict = membership(GoodSetQuery(args.d, gamma, delta))
    meta = _meta(args, source=source)
    if args.format == "json":
        return _emit_json(meta, {
            "d": verdict.d,
            "gamma": verdict.gamma,
            "delta": verdict.delta,
            "in_good_set": verdict.in_good_set,
            "epsilon": verdict.epsilon,
            "L": verdict.lipschitz,
            "reason": verdict.reason,
        })
    row = ",".join([
        str(verdict.d), _f17(verdict.gamma), _f17(verdict.delta),
        str(verdict.in_good_set).lower(), _f17(verdict.epsilon),
        _f4(verdict.epsilon), _f17(verdict.lipschitz), _f4(verdict.lipschitz),
        verdict.reason,
    ])
    return _emit_csv(
        meta,
        "d,gamma,delta,in_good_set,epsilon,epsilon_display,L,L_display,reason",
        [row],
    )


def cmd_threshold(args) -> str:
    if args.model not in _FAMILIES:
        raise ConfigError("threshold needs a parametric family: sos or log")
    tol = args.tol if args.tol is not None else 1e-7
    beta_star = beta_threshold(args.model, args.d, args.pairing, tol=tol)
    meta = _meta(args, tol_used=_f17(tol))
    if args.format == "json":
        return _emit_json(meta, {
            "model": args.model, "d": args.d, "pairing": args.pairing,
            "beta_star": beta_star, "display": _f4(beta_star),
        })
    row = ",".join([args.model, str(args.d), args.pairing,
                    _f17(beta_star), _f4(beta_star)])
    return _emit_csv(meta, "model,d,pairing,beta_star,display", [row])


def _report_dict(report) -> dict:
    return {
        "iterations": report.iterations,
        "final_residual": report.final_residual,
        "contraction_estimate": report.contraction_estimate,
        "a_priori_bound": report.a_priori_bound,
        "a_posteriori_bound": report.a_posteriori_bound,
        "lipschitz": report.lipschitz,
        "epsilon": report.epsilon,
        "gamma": report.gamma,
        "delta": report.delta,
        "certified": report.certified,
        "mode": report.mode,
    }


def _law_output(args, law, report) -> str:
    rep = {k: v for k, v in _report_dict(report).items() if v is not None}
    if args.format == "json":
        return _emit_json(_meta(args), {
            "law": {
                "support": law.kind,
                "d": law.d,
                "radius": law.radius,
                "q": law.q,
                "indices": law.indices,
                "x": law.x,
                "lambda": law.lam,
                "marginal": single_site_marginal(law),
                "residual": law.residual,
                "ball_radius": law.ball_radius,
                "certified": law.certified,
                "free_state": law.free_state,
            },
            "report": rep,
        })
    meta = _meta(args)
    for k, v in rep.items():
        if isinstance(v, bool):
            meta[k] = str(v).lower()
        elif isinstance(v, float):
            meta[k] = _f17(v)
        else:
            meta[k] = v
    out = io.StringIO()
    write_law_csv(law, out, meta=meta)
    return out.getvalue()


def cmd_solve(args) -> str:
    pot = _resolve_model(args)
    config = SolveConfig(radius=args.truncation,
                         tol=args.tol if args.tol is not None else 1e-12)
    law, report = solve_fixed_point(pot, args.d, config)
    return _law_output(args, law, report)


def cmd_periodic(args) -> str:
    if args.q is None:
        raise ConfigError("periodic needs --q")
    pot = _resolve_model(args)
    config = SolveConfig(tol=args.tol if args.tol is not None else 1e-12,
                         mode=MODE_AUTO)
    law, report = periodic_solve(pot, args.d, args.q, config)
    return _law_output(args, law, report)


def cmd_ggm(args) -> str:
    if args.q is None:
        raise ConfigError("ggm needs --q")
    pot = _resolve_model(args)
    config = SolveConfig(tol=args.tol if args.tol is not None else 1e-12,
                         mode=MODE_AUTO)
    law, report = periodic_solve(pot, args.d, args.q, config)
    fc = fuzzy_chain(law, fuzzy_Q(pot, args.q))
    laws = increment_laws(pot, args.q, radius=args.truncation)
    window = max(inc.radius for inc in laws) + args.q
    marginal = ggm_edge_marginal(fc, laws, window)
    if args.format == "json":
        return _emit_json(_meta(args, window=window), {
            "alpha": fc.alpha,
            "P": fc.P,
            "certified": law.certified,
            "edge_marginal": {"k": list(range(-window, window + 1)),
                              "prob": marginal},
            "increment_laws": [
                {"residue": inc.residue, "support": inc.support,
                 "weights": inc.weights, "tail_mass_bound": inc.tail_mass_bound}
                for inc in laws
            ],
            "report": {k: v for k, v in _report_dict(report).items()
                       if v is not None},
        })
    meta = _meta(args, window=window, certified=str(law.certified).lower(),
                 alpha=";".join(_f17(a) for a in fc.alpha))
    rows = [f"{k},{_f17(p)},{_f4(p)}"
            for k, p in zip(range(-window, window + 1), marginal.tolist())]
    return _emit_csv(meta, "k,prob,display", rows)


def cmd_simulate(args) -> str:
    pot = _resolve_model(args)
    if args.q is not None:
        config = SolveConfig(tol=1e-12, mode=MODE_AUTO)
        law, _ = periodic_solve(pot, args.d, args.q, config)
        fc = fuzzy_chain(law, fuzzy_Q(pot, args.q))
        laws = increment_laws(pot, args.q)
        source = (fc, laws)

        def exact(n):
            return wn_ggm_exact(fc, laws, n, window=args.truncation)
    else:
        law, _ = solve_fixed_point(pot, args.d)
        source = law

        def exact(n):
            return wn_localized_exact(law, n, window=args.truncation)

    if args.sample_steps is not None:
        inc, states = sample_path(source, args.sample_steps,
                                  seed=args.seed, replicate=args.replicate)
        if args.format == "json":
            return _emit_json(_meta(args), {
                "increments": inc, "states": states, "total": int(inc.sum()),
            })
        out = io.StringIO()
        meta = _meta(args)
        write_samples_csv(inc, states, out,
                          meta={k: meta[k] for k in sorted(meta)})
        return out.getvalue()

    ns = _parse_int_list(args.n)
    dists = [exact(n) for n in ns]
    if args.format == "json":
        return _emit_json(_meta(args), {"tables": [
            {"n": d.n, "window": d.window, "law": d.law,
             "leaked_mass": d.leaked_mass, "sup": d.sup(),
             **({"limit": d.limit} if d.limit is not None else {})}
            for d in dists
        ]})
    out = io.StringIO()
    meta = _meta(args)
    write_wn_csv(dists, out, meta={k: meta[k] for k in sorted(meta)})
    return out.getvalue()


def cmd_phase_diagram(args) -> str:
    if args.model not in _FAMILIES:
        raise ConfigError("phase-diagram needs a parametric family: sos or log")
    make = _FAMILIES[args.model]
    betas = _parse_beta_range(args.beta_range)
    ds = _parse_int_list(args.d_list)
    rel_tol = args.tol if args.tol is not None else 1e-10
    points = []
    for d in sorted(ds):
        for beta in betas:
            entry = {"model": args.model, "beta": beta, "d": d,
                     "gamma": None, "delta": None, "in_good_set": None,
                     "epsilon": None, "L": None, "reason": "", "error": ""}
            try:
                g, dl = norm_pair(make(beta), d, args.pairing, rel_tol=rel_tol,
                                  cross_check=False)
                entry["gamma"], entry["delta"] = g.value, dl.value
                if g.is_infinite or dl.is_infinite:
                    entry["in_good_set"] = False
                    entry["reason"] = "norm_infinite"
                else:
                    verdict = membership(GoodSetQuery(d, g.value, dl.value))
                    entry.update(in_good_set=verdict.in_good_set,
                                 epsilon=verdict.epsilon, L=verdict.lipschitz,
                                 reason=verdict.reason)
            except TreeGibbsError as exc:
                entry["error"] = f"{type(exc).__name__}: {exc}"
            points.append(entry)
    meta = _meta(args, rows=len(points))
    if args.format == "json":
        return _emit_json(meta, {"points": points})
    rows = []
    for e in points:
        flag = "" if e["in_good_set"] is None else str(e["in_good_set"]).lower()
        rows.append(",".join([
            e["model"], _f17(e["beta"]), str(e["d"]), _f17(e["gamma"]),
            _f17(e["delta"]), flag, _f17(e["epsilon"]), _f17(e["L"]),
            e["reason"], e["error"].replace(",", ";"),
        ]))
    return _emit_csv(
        meta, "model,beta,d,gamma,delta,in_good_set,epsilon,L,reason,error", rows)


def cmd_table(args) -> str:
    if args.model not in _FAMILIES:
        raise ConfigError("table needs a parametric family: sos or log")
    ds = _parse_int_list(args.d)
    tol = args.tol if args.tol is not None else 1e-7
    rows = []
    for d in sorted(ds):
        beta_star = beta_threshold(args.model, d, args.pairing, tol=tol)
        rows.append((d, beta_star))
    meta = _meta(args, tol_used=_f17(tol))
    meta["d"] = args.d
    if args.format == "json":
        return _emit_json(meta, {"rows": [
            {"model": args.model, "d": d, "beta_star": b, "display": _f4(b)}
            for d, b in rows
        ]})
    return _emit_csv(meta, "model,d,beta_star,display", [
        ",".join([args.model, str(d), _f17(b), _f4(b)]) for d, b in rows
    ])


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------


def _add_common(parser, degree=True):
    parser.add_argument("--model", default="sos",
                        help="sos, log, or custom:<json path>")
    parser.add_argument("--beta", type=float, default=None)
    if degree:
        parser.add_argument("--d", type=int, default=2)
    parser.add_argument("--pairing", choices=("half", "one"), default="half")
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--truncation", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="-")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treegibbs",
        description="Localized and q-periodic boundary laws for integer "
                    "gradient models on regular trees",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norms", help="certified norm pair and l1 norm")
    _add_common(p)

    p = sub.add_parser("goodset", help="good-set membership for a norm pair")
    _add_common(p)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)

    p = sub.add_parser("threshold", help="smallest beta inside the good set")
    _add_common(p)

    p = sub.add_parser("solve", help="certified truncated boundary law")
    _add_common(p)

    p = sub.add_parser("periodic", help="q-periodic boundary law")
    _add_common(p)
    p.add_argument("--q", type=int, default=None)

    p = sub.add_parser("ggm", help="fuzzy chain and edge increment marginal")
    _add_common(p)
    p.add_argument("--q", type=int, default=None)

    p = sub.add_parser("simulate", help="exact W_n tables or sampled paths")
    _add_common(p)
    p.add_argument("--q", type=int, default=None,
                   help="class count; omit for the localized chain")
    p.add_argument("--n", default="1,8,64",
                   help="comma list of path lengths for exact tables")
    p.add_argument("--sample-steps", dest="sample_steps", type=int,
                   default=None, help="emit one sampled path instead")
    p.add_argument("--replicate", type=int, default=0)

    p = sub.add_parser("phase-diagram", help="membership over a (beta, d) grid")
    _add_common(p)
    p.add_argument("--beta-range", dest="beta_range", required=True,
                   help="a:b:step")
    p.add_argument("--d-list", dest="d_list", required=True,
                   help="comma list of degrees")

    p = sub.add_parser("table", help="threshold column over degrees")
    _add_common(p, degree=False)
    p.add_argument("--d", default="2,3,6,7,100,1000",
                   help="comma list of degrees")
    return parser


_HANDLERS = {
    "norms": cmd_norms,
    "goodset": cmd_goodset,
    "threshold": cmd_threshold,
    "solve": cmd_solve,
    "periodic": cmd_periodic,
    "ggm": cmd_ggm,
    "simulate": cmd_simulate,
    "phase-diagram": cmd_phase_diagram,
    "table": cmd_table,
}


def _write_out(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        text = _HANDLERS[args.command](args)
    except TreeGibbsError as exc:
        if isinstance(exc, OutsideGoodSetError):
            code = 4
        elif isinstance(exc, ConfigError):
            code = 2
        else:
            code = 3
        sys.stderr.write(json.dumps({"error": {
            "type": type(exc).__name__,
            "message": str(exc),
            "exit_code": code,
        }}, sort_keys=True) + "\n")
        return code
    _write_out(args.out, text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
