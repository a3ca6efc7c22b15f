"""Batch command line: ``stableharnack <subcommand> [--config FILE] [flags]``.

Flags override values from the JSON config file.  ``STABLEHARNACK_OUT`` sets
the directory for outputs whose path is not given explicitly.  Errors are
reported as one JSON object on standard error with a nonzero exit status.
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
from .io import write_csv, write_json, write_long_csv
from .sequences import (CandidateFamily, FillRule, SequencePair, construct_sequences, reject_candidate,
                        verify_lemma_conditions)

OUT_ENV = "STABLEHARNACK_OUT"
STOCHASTIC = {"harnack", "weak-harnack", "green-survey"}

# values used when neither the config file nor a flag sets them
DEFAULTS = {
    "seq": {"c": 2.0, "n_max": 12, "ratio_floor": None, "alpha_fraction": 0.5, "alpha1": math.pi / 8,
            "beta1": math.pi / 8, "reject": True, "out": "seq.json"},
    "geom": {"seq": None, "c": 2.0, "n_max": 12, "alpha": 0.5, "out": "geom.csv"},
    "measure": {"seq": None, "c": 2.0, "n_max": 12, "isotropic": False, "out": "measure.json"},
    "kernel": {"alpha": 1.0, "measure": None, "grid_n": 1024, "tail_tol": 1e-8, "green_nodes": 2048,
               "out": "kernel"},
    "harnack": {"seq": None, "modest": False, "alpha": None, "n_min": 1, "n_max": None, "samples": 1_000_000,
                "seed": None, "eps": None, "workers": 1, "mc_threshold": 10.0, "out": "harnack.csv",
                "plot_csv": None},
    "weak-harnack": {"alpha": 0.5, "data_count": 5, "data_seed": 0, "samples": 100_000, "l1_points": None,
                     "seed": None, "eps": None, "workers": 1, "out": "weak_harnack.json"},
    "green-survey": {"alpha": 0.5, "pairs": 50, "samples": 10_000, "seed": None, "eps": None, "workers": 1,
                     "out": "green_survey.csv"},
}
# settings that cannot change results and are left out of embedded configs
NON_RESULT = {"workers", "config", "out", "plot_csv"}


class ConfigError(ValueError):
    pass


def _count(s: str) -> int:
    v = float(s)
    if v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return int(v)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stableharnack", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"stableharnack {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def add(name, help_):
        q = sub.add_parser(name, help=help_, argument_default=S)
        q.add_argument("--config", help="JSON file with default values for the flags")
        q.add_argument("--out", help="output path")
        return q

    q = add("seq", "construct and verify the angle sequences and reject candidate families")
    q.add_argument("--c", type=float)
    q.add_argument("--n-max", dest="n_max", type=int)
    q.add_argument("--ratio-floor", dest="ratio_floor", type=float)
    q.add_argument("--alpha-fraction", dest="alpha_fraction", type=float)
    q.add_argument("--alpha1", type=float)
    q.add_argument("--beta1", type=float)
    q.add_argument("--no-reject", dest="reject", action="store_false")

    for name, help_ in (("geom", "geometry records and identity report"), ("measure", "emit the spectral measure")):
        q = add(name, help_)
        q.add_argument("--seq", help="sequence JSON from the seq subcommand")
        q.add_argument("--c", type=float)
        q.add_argument("--n-max", dest="n_max", type=int)
        if name == "geom":
            q.add_argument("--alpha", type=float)
        else:
            q.add_argument("--isotropic", action="store_true")

    q = add("kernel", "heat kernel grid and Green angular profile")
    q.add_argument("--alpha", type=float)
    q.add_argument("--measure", help="spectral measure JSON; isotropic if omitted")
    q.add_argument("--grid-n", dest="grid_n", type=int)
    q.add_argument("--tail-tol", dest="tail_tol", type=float)
    q.add_argument("--green-nodes", dest="green_nodes", type=int)

    q = add("harnack", "Harnack ratio experiment on the counterexample measure")
    q.add_argument("--seq")
    q.add_argument("--modest", action="store_true", help="use the built-in modest sequence and its alpha")
    q.add_argument("--alpha", type=float)
    q.add_argument("--n-min", dest="n_min", type=int)
    q.add_argument("--n-max", dest="n_max", type=int)
    q.add_argument("--mc-threshold", dest="mc_threshold", type=float)
    q.add_argument("--plot-csv", dest="plot_csv")

    q = add("weak-harnack", "weak Harnack ratio for random indicator boundary data")
    q.add_argument("--alpha", type=float)
    q.add_argument("--data-count", dest="data_count", type=int)
    q.add_argument("--data-seed", dest="data_seed", type=int)
    q.add_argument("--l1-points", dest="l1_points", type=_count)

    q = add("green-survey", "Green estimate ratio survey on the unit ball")
    q.add_argument("--alpha", type=float)
    q.add_argument("--pairs", type=int)

    for name in STOCHASTIC:
        q = sub.choices[name]
        q.add_argument("--samples", type=_count)
        q.add_argument("--seed", type=int)
        q.add_argument("--eps", type=float)
        q.add_argument("--workers", type=int)
    return p


def resolve_config(argv=None) -> dict:
    args = _parser().parse_args(argv)
    cmd = args.command
    cfg = dict(DEFAULTS[cmd])
    flags = {k: v for k, v in vars(args).items() if k != "command"}
    if "config" in flags:
        try:
            file_cfg = json.loads(Path(flags["config"]).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config file: {e}") from e
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {cmd}: {sorted(unknown)}")
        cfg.update(file_cfg)
    cfg.update({k: v for k, v in flags.items() if k != "config"})
    cfg["command"] = cmd
    _validate(cfg)
    out = Path(cfg["out"])
    if not out.is_absolute() and "out" not in flags and OUT_ENV in os.environ:
        out = Path(os.environ[OUT_ENV]) / out
    cfg["out"] = str(out)
    return cfg


def _validate(cfg: dict) -> None:
    cmd = cfg["command"]

    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    if cmd in STOCHASTIC:
        need(cfg.get("seed") is not None, f"{cmd} needs --seed")
        need(int(cfg["samples"]) >= 1, "samples must be positive")
        need(cfg.get("eps") is None or cfg["eps"] > 0, "eps must be positive")
        need(int(cfg.get("workers", 1)) >= 1, "workers must be positive")
        cfg["samples"] = int(cfg["samples"])
    if "c" in cfg and cfg.get("c") is not None:
        need(cfg["c"] > 1, "c must exceed 1")
    if cfg.get("n_max") is not None:
        need(int(cfg["n_max"]) >= 1, "n_max must be positive")
    a = cfg.get("alpha")
    if a is not None:
        need(0 < a < (1 if cmd == "harnack" else 2), "alpha out of range")
    if cmd == "kernel":
        need(cfg["grid_n"] >= 16 and cfg["grid_n"] % 2 == 0, "grid_n must be even and >= 16")
    if cmd == "harnack":
        need(cfg.get("seq") or cfg.get("modest"), "harnack needs --seq or --modest")
        need(cfg.get("modest") or a is not None, "harnack needs --alpha")
    if cmd == "green-survey":
        need(cfg["pairs"] >= 1, "pairs must be positive")


def _recorded(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k not in NON_RESULT}


def _load_seq(cfg: dict) -> SequencePair:
    if cfg.get("seq"):
        doc = json.loads(Path(cfg["seq"]).read_text())
        return SequencePair.from_dict(doc["sequence"] if "sequence" in doc else doc)
    return construct_sequences(cfg["c"], int(cfg["n_max"]))


# --------------------------------------------------------------------------- subcommands


def cmd_seq(cfg: dict) -> dict:
    seq = construct_sequences(cfg["c"], int(cfg["n_max"]), FillRule(cfg["ratio_floor"], cfg["alpha_fraction"]),
                              alpha1=cfg["alpha1"], beta1=cfg["beta1"])
    conds = []
    for n in range(1, seq.n_max + 1):
        r = verify_lemma_conditions(seq, n)
        conds.append({"n": n, "all_hold": r.all_hold, "bounded_sums": r.bounded_sums, "converging": r.converging,
                      "ratio_condition": r.ratio_condition, "tan_condition": r.tan_condition,
                      "tangent_ratio": r.tangent_ratio, "ratio_margin": r.ratio_margin})
    payload = {"sequence": seq.to_dict(), "conditions": conds,
               "all_conditions_hold": all(c["all_hold"] for c in conds)}
    if cfg["reject"]:
        fams = [CandidateFamily.power2_harmonic(), CandidateFamily.geometric(2, 2), CandidateFamily.geometric(3, 2),
                CandidateFamily.harmonic_polylog(0.5), CandidateFamily.gaussian_exp()]
        payload["candidates"] = []
        for f in fams:
            v = reject_candidate(f)
            payload["candidates"].append({"family": f.kind, "a": f.a, "b": f.b, "delta": f.delta,
                                          "trailing_min_ratio": v.trailing_min,
                                          "fails_ratio_condition": v.fails_ratio_condition})
    write_json(cfg["out"], payload, _recorded(cfg))
    return {"out": cfg["out"], "n_max": seq.n_max, "all_conditions_hold": payload["all_conditions_hold"]}


def cmd_geom(cfg: dict) -> dict:
    from .geometry import GeometryError, geometry_record, harnack_terms, verify_geometry

    seq = _load_seq(cfg)
    cols = ["n", "T0", "T1", "T2", "delta", "delta_prime", "x", "y", "c", "d", "x_S", "y_S", "r",
            "max_residual", "identities_pass", "a_n", "b_n"]
    rows, ok = [], True
    for n in range(1, seq.n_max + 1):
        rec = geometry_record(seq, n)
        rep = verify_geometry(rec)
        eqs = [ch for ch in rep.checks if ch.name in EQUALITIES]
        worst = max(ch.log_residual if rep.log_space else ch.rel_residual for ch in eqs)
        try:
            t = harnack_terms(rec, cfg["alpha"])
            an, bn = t.a_n, t.b_n
        except (GeometryError, ValueError):
            an = bn = math.nan
        ok &= rep.passed
        rows.append([n, rec.T0, rec.T1, rec.T2, rec.delta, rec.delta_prime, rec.x, rec.y, rec.c, rec.d, rec.x_S,
                     rec.y_S, rec.r, worst, rep.passed, an, bn])
    write_csv(cfg["out"], cols, rows, _recorded(cfg))
    return {"out": cfg["out"], "identities_pass": bool(ok)}


def cmd_measure(cfg: dict) -> dict:
    from .spectral import SpectralMeasure, counterexample_measure

    mu = SpectralMeasure.isotropic() if cfg["isotropic"] else counterexample_measure(_load_seq(cfg))
    write_json(cfg["out"], {"measure": mu.to_dict()}, _recorded(cfg))
    return {"out": cfg["out"], "total_mass": mu.total_mass}


def cmd_kernel(cfg: dict) -> dict:
    from .kernels import build_kernel_grid, green_evaluator
    from .spectral import SpectralMeasure, StableModel

    if cfg.get("measure"):
        doc = json.loads(Path(cfg["measure"]).read_text())
        mu = SpectralMeasure.from_dict(doc.get("measure", doc))
        model = StableModel(cfg["alpha"], mu)
    else:
        model = StableModel.isotropic(cfg["alpha"])
    grid = build_kernel_grid(model, int(cfg["grid_n"]), cfg["tail_tol"])
    stem = Path(cfg["out"])
    stem.parent.mkdir(parents=True, exist_ok=True)
    header = {"meta": {"tool": "stableharnack", "version": __version__, "config": _recorded(cfg)}}
    jpath, cpath = grid.save(stem, header)
    green = green_evaluator(model, int(cfg["green_nodes"]))
    theta = np.linspace(0.0, math.pi, 181)
    gpath = write_csv(stem.with_name(stem.name + "_green.csv"), ["theta", "G0e"],
                      zip(theta.tolist(), green.angular(theta).tolist()), _recorded(cfg))
    return {"grid_json": str(jpath), "grid_csv": str(cpath), "green_csv": str(gpath),
            "normalization": grid.normalization(), "tail_bound": grid.tail_bound}


def cmd_harnack(cfg: dict) -> dict:
    from .experiments import MODEST, harnack_ratio_experiment, modest_sequence

    if cfg.get("modest") and not cfg.get("seq"):
        seq = modest_sequence(int(cfg["n_max"] or 8))
    else:
        seq = _load_seq(cfg)
    alpha = cfg["alpha"] if cfg.get("alpha") is not None else MODEST["alpha"]
    hi = seq.n_max if cfg["n_max"] is None else min(int(cfg["n_max"]), seq.n_max)
    rows = harnack_ratio_experiment(seq, alpha, range(int(cfg["n_min"]), hi + 1), cfg["samples"], cfg["seed"],
                                    cfg["eps"], int(cfg["workers"]), mc_threshold=cfg["mc_threshold"])
    cols = list(rows[0].to_dict()) if rows else []
    write_csv(cfg["out"], cols, [list(r.to_dict().values()) for r in rows], _recorded(cfg))
    if cfg.get("plot_csv"):
        rec = []
        for r in rows:
            rec.append(("a_n_b_n", r.n, r.product, r.product, r.product))
            if r.mode == "mc":
                rec.append(("u_0", r.n, r.u0, r.u0 - 2 * r.u0_se, r.u0 + 2 * r.u0_se))
                rec.append(("u_w0", r.n, r.uw, r.uw - 2 * r.uw_se, r.uw + 2 * r.uw_se))
        write_long_csv(cfg["plot_csv"], rec, _recorded(cfg))
    return {"out": cfg["out"], "rows": len(rows), "mc_rows": sum(r.mode == "mc" for r in rows)}


def cmd_weak_harnack(cfg: dict) -> dict:
    from .experiments import random_indicator_data, weak_harnack_survey
    from .spectral import StableModel

    model = StableModel.isotropic(cfg["alpha"])
    data = random_indicator_data(int(cfg["data_count"]), int(cfg["data_seed"]))
    res = weak_harnack_survey(model, data, cfg["samples"], cfg["l1_points"], cfg["seed"], cfg["eps"],
                              int(cfg["workers"]))
    payload = {"data": [vars(d) for d in data], "results": [r.to_dict() for r in res],
               "max_ratio": max(r.ratio for r in res)}
    write_json(cfg["out"], payload, _recorded(cfg))
    return {"out": cfg["out"], "max_ratio": payload["max_ratio"], "flagged": sum(r.flagged for r in res)}


def cmd_green_survey(cfg: dict) -> dict:
    from .experiments import green_estimate_survey
    from .spectral import StableModel

    model = StableModel.isotropic(cfg["alpha"])
    s = green_estimate_survey(model, int(cfg["pairs"]), cfg["samples"], cfg["seed"], cfg["eps"], int(cfg["workers"]))
    cols = ["x1", "x2", "y1", "y2", "green_ball", "green_ball_se", "green", "exit_time", "exit_time_se", "ratio", "ok"]
    rows = [[r.x[0], r.x[1], r.y[0], r.y[1], r.green_ball, r.green_ball_se, r.green, r.exit_time, r.exit_time_se,
             r.ratio, r.ok] for r in s.rows]
    cfg_rec = _recorded(cfg)
    cfg_rec["summary"] = {"dropped": s.dropped, "ratio_min": s.ratio_min, "ratio_max": s.ratio_max,
                          "ratio_median": s.ratio_median, "c_hat": s.c_hat}
    write_csv(cfg["out"], cols, rows, cfg_rec)
    return {"out": cfg["out"], "c_hat": s.c_hat, "dropped": s.dropped}


EQUALITIES = ("d_identity", "d_definition", "c_identity", "c_definition", "ball_left", "ball_right",
              "ball_bottom", "ball_top", "delta_over_y")

COMMANDS = {"seq": cmd_seq, "geom": cmd_geom, "measure": cmd_measure, "kernel": cmd_kernel,
            "harnack": cmd_harnack, "weak-harnack": cmd_weak_harnack, "green-survey": cmd_green_survey}


def _fail(kind: str, msg: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": msg}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
    except SystemExit as e:
        # argparse already printed usage; --help and --version exit 0
        if e.code in (0, None):
            return 0
        return _fail("usage", "invalid command line", 2)
    except ConfigError as e:
        return _fail("config", str(e), 2)
    try:
        summary = COMMANDS[cfg["command"]](cfg)
    except (ValueError, ArithmeticError, OSError, KeyError) as e:
        return _fail(type(e).__name__, str(e), 1)
    sys.stdout.write(json.dumps(summary, sort_keys=True, default=str) + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
