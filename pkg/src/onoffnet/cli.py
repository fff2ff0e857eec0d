"""Command-line entry point.

Every run resolves a JSON-style config (file first, explicit flags on top),
validates it against a schema and writes a CSV whose ``#`` header block
echoes the resolved config. Exit codes: 0 success, 1 runtime error,
2 config error, 3 a ``verify-bounds`` check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Any, Optional

import jsonschema
import numpy as np

from onoffnet import __version__
from onoffnet.bounds import (
    concentration_check,
    max_gain_check,
    sinr_tail_check,
    xi_exponential_check,
)
from onoffnet.errors import ConfigurationError, OnOffNetError
from onoffnet.experiments import (
    MODES,
    VIRTUAL,
    run_trials,
    scaling_sweep,
)
from onoffnet.fading import FadingSpec, SeedSpec, sample_gain_matrix
from onoffnet.netmodel import NetworkParams
from onoffnet.oracle import max_throughput_exhaustive, tblas_optimality_gap
from onoffnet.tblas import (
    SlackRule,
    ThresholdPolicy,
    first_order_correction,
    rayleigh_asymptotics,
    solve_zero_order,
    threshold_for,
    zero_order_residual,
)

OUTPUT_DIR_ENV = "ONOFFNET_OUTPUT_DIR"

SUBCOMMANDS = ("simulate", "optimize-threshold", "solve-threshold", "asymptotics", "oracle", "sweep", "verify-bounds")
THRESHOLD_MODES = ("fixed", "optimize", "zero-order", "first-order", "asymptotic")
_METHOD = {"optimize": "grid+golden", "zero-order": "zero-order", "first-order": "first-order", "asymptotic": "asymptotic"}
RULES = ("zero", "log", "loglog", "sqrt_loglog")

DEFAULTS = {
    "rho": 1.0,
    "fading": {"kind": "rayleigh"},
    "threshold": "optimize",
    "xi": "sqrt_loglog",
    "psi": "log",
    "phi": "loglog",
    "trials": 100,
    "samples": 100000,
    "seed": 0,
    "mode": VIRTUAL,
    "bits": False,
    "threads": 1,
}

_rule = {"oneOf": [{"type": "string", "enum": list(RULES)}, {"type": "number", "minimum": 0}]}
_count = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "subcommand": {"type": "string", "enum": list(SUBCOMMANDS)},
        "n": _count,
        "n_list": {"type": "array", "items": _count, "minItems": 1},
        "rho": {"type": "number", "exclusiveMinimum": 0},
        "fading": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"type": "string", "enum": ["rayleigh", "exponential", "table"]},
                "mean": {"type": "number", "exclusiveMinimum": 0},
                "table_u": {"type": "array", "items": {"type": "number"}},
                "table_x": {"type": "array", "items": {"type": "number"}},
            },
        },
        "threshold": {"type": "string", "enum": list(THRESHOLD_MODES)},
        "delta": {"type": "number", "minimum": 0},
        "xi": _rule,
        "psi": _rule,
        "phi": _rule,
        "trials": _count,
        "samples": _count,
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "mode": {"type": "string", "enum": list(MODES)},
        "output": {"type": "string"},
        "bits": {"type": "boolean"},
        "threads": _count,
        "gains": {"type": "array", "items": {"type": "array", "items": {"type": "number", "minimum": 0}}},
    },
    "required": ["subcommand"],
}


class ConfigError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="onoffnet",
        description="Threshold link activation in on-off wireless networks with i.i.d. fading.",
        argument_default=argparse.SUPPRESS,
    )
    p.add_argument("subcommand", nargs="?", default=None, choices=SUBCOMMANDS, help="what to run (may come from the config file)")
    p.add_argument("--config", help="JSON config file; explicit flags override its values")
    p.add_argument("--n", type=int, help="number of links")
    p.add_argument("--n-list", type=int, nargs="+", dest="n_list", help="several link counts (sweep, asymptotics, ...)")
    p.add_argument("--rho", type=float, help="transmit SNR P/eta (default 1.0)")
    p.add_argument("--fading", choices=["rayleigh", "exponential"], help="fading law (default rayleigh); tables via config file")
    p.add_argument("--fading-mean", type=float, dest="fading_mean", help="mean gain for exponential fading")
    p.add_argument("--threshold", choices=THRESHOLD_MODES, help="threshold choice (default optimize; --delta implies fixed)")
    p.add_argument("--delta", type=float, help="fixed activation threshold")
    p.add_argument("--xi", help="active-count slack: zero|log|loglog|sqrt_loglog or a number (default sqrt_loglog)")
    p.add_argument("--psi", help="interference slack, same choices (default log)")
    p.add_argument("--phi", help="max-gain slack for verify-bounds, same choices (default loglog)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials (default 100)")
    p.add_argument("--samples", type=int, help="samples per tail-law check in verify-bounds (default 100000)")
    p.add_argument("--seed", type=int, help="master seed, unsigned 64-bit (default 0)")
    p.add_argument("--mode", choices=MODES, help="sampling path (default virtual)")
    p.add_argument("--output", help=f"output file (default: ${OUTPUT_DIR_ENV}/<subcommand>.csv if set, else stdout)")
    p.add_argument("--bits", action="store_true", help="report rates in bits instead of nats")
    p.add_argument("--threads", type=int, help="worker threads; never changes results (default 1)")
    return p


def _rule_value(v):
    if isinstance(v, str):
        if v in RULES:
            return v
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"xi/psi/phi: {v!r} is neither a rule name {RULES} nor a number") from None
    return v


def parse_config(argv: Optional[list] = None) -> dict:
    """Resolve and validate a run config; raises :class:`ConfigError`."""
    ns = vars(build_parser().parse_args(argv))
    cfg: dict[str, Any] = {}
    path = ns.pop("config", None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
    sub = ns.pop("subcommand", None)
    if sub is not None:
        if "subcommand" in cfg and cfg["subcommand"] != sub:
            raise ConfigError(f"subcommand: command line says {sub!r}, config says {cfg['subcommand']!r}")
        cfg["subcommand"] = sub
    kind = ns.pop("fading", None)
    mean = ns.pop("fading_mean", None)
    if kind is not None or mean is not None:
        fading = dict(cfg.get("fading", {"kind": "rayleigh"}))
        if kind is not None:
            fading = {"kind": kind}
        if mean is not None:
            fading["mean"] = mean
        cfg["fading"] = fading
    for key in ("xi", "psi", "phi"):
        if key in ns:
            ns[key] = _rule_value(ns[key])
    cfg.update(ns)
    _validate(cfg)
    return _resolve(cfg)


def _validate(cfg: dict):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None


def _resolve(cfg: dict) -> dict:
    out = {**DEFAULTS, **cfg}
    if "delta" in cfg:
        if cfg.get("threshold", "fixed") != "fixed":
            raise ConfigError(f"delta: a fixed threshold conflicts with threshold={cfg['threshold']!r}")
        out["threshold"] = "fixed"
    elif out["threshold"] == "fixed":
        raise ConfigError("delta: threshold=fixed needs a delta value")
    fading = out["fading"]
    if fading["kind"] == "exponential" and "mean" not in fading:
        raise ConfigError("fading/mean: exponential fading needs a mean")
    if fading["kind"] != "exponential" and "mean" in fading:
        raise ConfigError(f"fading/mean: not allowed for kind {fading['kind']!r}")
    if fading["kind"] == "table" and not ("table_u" in fading and "table_x" in fading):
        raise ConfigError("fading: table fading needs table_u and table_x")
    if out["mode"] == "dense" and "n" in out and out["n"] > 30000:
        raise ConfigError("mode: dense sampling is limited to n <= 30000")
    try:
        make_fading(out)
    except ConfigurationError as exc:
        raise ConfigError(f"fading: {exc}") from None
    return out


def make_fading(cfg: dict) -> FadingSpec:
    f = cfg["fading"]
    if f["kind"] == "rayleigh":
        return FadingSpec.rayleigh()
    if f["kind"] == "exponential":
        return FadingSpec.exponential(f["mean"])
    return FadingSpec.from_table(f["table_u"], f["table_x"])


def make_policy(cfg: dict) -> ThresholdPolicy:
    return ThresholdPolicy(cfg.get("delta"), SlackRule.of(cfg["xi"]), SlackRule.of(cfg["psi"]), make_fading(cfg))


def _n_values(cfg: dict) -> list:
    if "n_list" in cfg:
        return list(cfg["n_list"])
    if "n" in cfg:
        return [cfg["n"]]
    raise ConfigError(f"n: subcommand {cfg['subcommand']!r} needs n or n_list")


def _threshold(cfg: dict, n: int, policy: ThresholdPolicy) -> float:
    if cfg["threshold"] == "fixed":
        return float(cfg["delta"])
    return float(threshold_for(n, policy, _METHOD[cfg["threshold"]]).delta)


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Table:
    """Rows plus the columns that carry rates (converted under ``--bits``)."""

    def __init__(self, columns: list, rate_columns=()):
        self.columns = columns
        self.rate_columns = set(rate_columns)
        self.rows: list[list] = []

    def add(self, *values):
        self.rows.append(list(values))

    def render(self, cfg: dict) -> str:
        scale = 1 / math.log(2) if cfg["bits"] else 1.0
        cols = [c.replace("_nats", "_bits") if cfg["bits"] and c in self.rate_columns else c for c in self.columns]
        rate_idx = [i for i, c in enumerate(self.columns) if c in self.rate_columns]
        buf = io.StringIO()
        buf.write(f"# onoffnet {__version__}\n")
        buf.write(f"# subcommand: {cfg['subcommand']}\n")
        # output location and worker count never change the results
        echo = {k: v for k, v in cfg.items() if k not in ("output", "threads")}
        buf.write(f"# config: {json.dumps(echo, sort_keys=True, separators=(',', ':'))}\n")
        buf.write(f"# units: {'bits' if cfg['bits'] else 'nats'} per channel use; link indices start at 0\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.rows:
            row = list(row)
            for i in rate_idx:
                if row[i] is not None:
                    row[i] = float(row[i]) * scale
            w.writerow([fmt(v) for v in row])
        return buf.getvalue()


def cmd_simulate(cfg: dict):
    t = Table(
        ["n", "seed", "stream", "delta", "k_active", "throughput_nats", "rate_per_link_nats", "bound_Ta", "bound_satisfied"],
        ["throughput_nats", "rate_per_link_nats", "bound_Ta"],
    )
    policy = make_policy(cfg)
    for i, n in enumerate(_n_values(cfg)):
        d = _threshold(cfg, n, policy)
        recs = run_trials(NetworkParams(n, cfg["rho"]), policy.with_delta(d), cfg["mode"], cfg["seed"], cfg["trials"], cfg["threads"], i << 32)
        for r in recs:
            t.add(r.n, r.seed, r.stream, r.delta, r.k_active, r.throughput, r.rate_per_link, r.bound, r.bound_satisfied)
    return t, 0


def cmd_sweep(cfg: dict):
    policy = make_policy(cfg)
    ns = _n_values(cfg)
    deltas = [_threshold(cfg, n, policy) for n in ns]
    rep = scaling_sweep(ns, cfg["trials"], policy, cfg["mode"], cfg["seed"], cfg["rho"], cfg["threads"], deltas)
    cols = ["n", "trials", "mean_T", "sd_T", "mean_k", "sd_k", "mean_rbar", "ratio_T", "ratio_k", "ratio_rbar", "ci95_T"]
    t = Table(cols, ["mean_T", "sd_T", "mean_rbar", "ci95_T"])
    for r in rep.rows:
        t.add(*(getattr(r, c) for c in cols))
    return t, 0


def cmd_optimize(cfg: dict):
    policy = make_policy(cfg)
    method = _METHOD.get(cfg["threshold"])
    if method is None:
        raise ConfigError("threshold: optimize-threshold needs a non-fixed threshold mode")
    t = Table(["n", "delta", "throughput_nats", "k_pred", "rbar_pred_nats", "method"], ["throughput_nats", "rbar_pred_nats"])
    for n in _n_values(cfg):
        s = threshold_for(n, policy, method)
        t.add(n, s.delta, s.throughput, s.k_pred, s.rbar_pred, s.method)
    return t, 0


def cmd_solve(cfg: dict):
    t = Table(["n", "delta", "residual"])
    for n in _n_values(cfg):
        d = solve_zero_order(n)
        t.add(n, d, zero_order_residual(n, d))
    return t, 0


def cmd_asymptotics(cfg: dict):
    xi = SlackRule.of(cfg["xi"])
    t = Table(
        ["n", "delta", "throughput_nats", "k", "rbar_nats", "delta_first_order", "first_order_error_bar"],
        ["throughput_nats", "rbar_nats"],
    )
    for n in _n_values(cfg):
        a = rayleigh_asymptotics(n)
        d1, err = first_order_correction(n, xi(n))
        t.add(n, a.delta, a.throughput, a.k, a.rbar, d1, err)
    return t, 0


def cmd_oracle(cfg: dict):
    params_rho = cfg["rho"]
    if "gains" in cfg:
        G = np.asarray(cfg["gains"], dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ConfigError("gains: must be a square matrix")
    else:
        n = _n_values(cfg)[0]
        G = sample_gain_matrix(make_fading(cfg), n, SeedSpec(cfg["seed"]))
    params = NetworkParams(G.shape[0], params_rho)
    res = max_throughput_exhaustive(G, params)
    grid = np.linspace(0.0, float(np.max(np.diag(G))), 64)
    gap = tblas_optimality_gap(G, params, grid, res)
    t = Table(
        ["n", "k_star", "throughput_nats", "best_set", "evaluated", "tblas_ratio", "tblas_delta", "k_tblas"],
        ["throughput_nats"],
    )
    t.add(params.n, res.k, res.throughput, " ".join(map(str, res.best)), res.evaluated, gap.ratio, gap.best_delta, gap.k_delta)
    return t, 0


def cmd_verify(cfg: dict):
    t = Table(["check", "samples", "ks_distance", "sample_mean", "target_mean", "tolerance", "passed"])
    reports = []
    seed = cfg["seed"]
    stream = 0
    for k in (2, 5, 10):
        for rho in (1.0, 10.0):
            reports.append(sinr_tail_check(k, rho, cfg["samples"], SeedSpec(seed, stream)))
            stream += 1
    reports.append(xi_exponential_check(10, 10.0, cfg["samples"], SeedSpec(seed, stream)))
    stream += 1
    n = _n_values(cfg)[0] if ("n" in cfg or "n_list" in cfg) else 10_000
    phi = SlackRule.of(cfg["phi"])(n)
    reports.append(max_gain_check(n, cfg["trials"], phi, SeedSpec(seed, stream)))
    stream += 1
    policy = make_policy(cfg)
    d = _threshold(cfg, n, policy)
    reports.extend(concentration_check(n, d, cfg["trials"], SeedSpec(seed, 1 << 32), policy.xi, policy.psi))
    for r in reports:
        t.add(r.name, r.samples, r.ks_distance, r.sample_mean, r.target_mean, r.tolerance, r.passed)
    return t, 0 if all(r.passed for r in reports) else 3


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "optimize-threshold": cmd_optimize,
    "solve-threshold": cmd_solve,
    "asymptotics": cmd_asymptotics,
    "oracle": cmd_oracle,
    "verify-bounds": cmd_verify,
}


def _output_path(cfg: dict) -> Optional[str]:
    if "output" in cfg:
        return cfg["output"]
    d = os.environ.get(OUTPUT_DIR_ENV)
    if d:
        return os.path.join(d, f"{cfg['subcommand']}.csv")
    return None


def dispatch(cfg: dict, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        table, code = COMMANDS[cfg["subcommand"]](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OnOffNetError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    text = table.render(cfg)
    path = _output_path(cfg)
    if path is None:
        stdout.write(text)
    else:
        try:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {path}: {exc}", file=sys.stderr)
            return 1
    if code == 3:
        print("verification failed: see the passed column", file=sys.stderr)
    return code


def main(argv: Optional[list] = None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
