"""Command-line front end writing CSV artifacts.

Exit codes: 0 success, 2 usage/validation/file error, 1 internal invariant
breach.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import closedform, extrema, fpt, liouville
from .core import ModelParams
from .exceptions import InvariantBreach, MethodDisagreement, ReliabilityError

COMMANDS = ("analytic", "numeric", "compare", "phasemap", "fpt-sample", "fpt-estimate",
            "variance-scan", "critical-x")

TIMESERIES_HEADER = ["t", "R_analytic", "h_analytic", "R_numeric", "h_numeric"]
PHASEMAP_HEADER = ["gamma1", "gamma2", "regime", "extrema_count"]
FPT_SAMPLE_HEADER = ["shot", "bin", "censored"]
FPT_ESTIMATE_HEADER = ["t_k", "n_risk", "n_k", "R_hat", "h_hat", "var_theory"]
VARIANCE_HEADER = ["n_shots", "t", "var_emp", "var_theory"]


class ConfigError(ReliabilityError, ValueError):
    pass


def _int_list(text):
    return [int(float(v)) for v in str(text).split(",") if v.strip()]


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


# option name -> (converter, commands it applies to)
_PARAM_CMDS = ("analytic", "numeric", "compare", "fpt-sample", "fpt-estimate", "variance-scan")
OPTIONS = {
    "j": (float, _PARAM_CMDS + ("phasemap",)),
    "gamma1": (float, _PARAM_CMDS),
    "gamma2": (float, _PARAM_CMDS),
    "dt": (float, _PARAM_CMDS),
    "t-max": (float, _PARAM_CMDS),
    "n": (int, ("analytic", "numeric", "compare", "phasemap")),
    "gmin": (float, ("phasemap",)),
    "gmax": (float, ("phasemap",)),
    "band": (float, ("phasemap",)),
    "shots": (str, ("fpt-sample", "fpt-estimate", "variance-scan")),
    "seed": (int, ("fpt-sample", "fpt-estimate", "variance-scan")),
    "times": (_float_list, ("variance-scan",)),
    "reps": (int, ("variance-scan",)),
    "samples": (str, ("fpt-estimate",)),
    "out": (str, COMMANDS),
}

DEFAULTS = {
    "analytic": {"t-max": 20.0, "n": 2000},
    "numeric": {"t-max": 20.0, "n": 2000, "dt": liouville.DEFAULT_DT},
    "compare": {"t-max": 20.0, "n": 2000, "dt": liouville.DEFAULT_DT},
    "phasemap": {"gmin": 0.05, "gmax": 3.0, "n": 100, "band": extrema.DEFAULT_BAND},
    "fpt-sample": {"dt": 0.1, "shots": "100000", "seed": 0},
    "fpt-estimate": {"dt": 0.1, "shots": "100000", "seed": 0},
    "variance-scan": {"dt": 0.1, "shots": "1000,10000,100000", "seed": 0,
                      "times": [2.5, 10.0, 17.5], "reps": 50},
    "critical-x": {},
}

REQUIRED = {
    "analytic": ("j", "gamma1", "gamma2"),
    "numeric": ("j", "gamma1", "gamma2"),
    "compare": ("j", "gamma1", "gamma2"),
    "phasemap": ("j",),
    "fpt-sample": ("j", "gamma1", "gamma2"),
    "fpt-estimate": ("j", "gamma1", "gamma2"),
    "variance-scan": ("j", "gamma1", "gamma2"),
    "critical-x": (),
}


@dataclass
class RunConfig:
    """Fully resolved invocation: command plus option values."""

    command: str
    params: Optional[ModelParams] = None
    options: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.options.get(key, default)

    @property
    def out(self) -> Optional[str]:
        return self.options.get("out")

    @property
    def seed(self) -> Optional[int]:
        return self.options.get("seed")


def read_config_file(path) -> dict:
    """Parse a ``key = value`` file with optional ``[section]`` headers.

    Keys mirror the long flags without the leading dashes.  Blank lines and
    lines starting with ``#`` or ``;`` are ignored.  Errors cite ``path:line``.
    """
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config file ({exc.strerror})") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in OPTIONS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"{path}:{lineno}: empty value for {key!r}")
        values[key] = (value, lineno)
    return values


def _convert(key, value, where):
    conv = OPTIONS[key][0]
    try:
        return conv(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: invalid value {value!r} for {key!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qreliability",
        description="Reliability and hazard of two coupled damped spins.",
        allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, allow_abbrev=False, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", metavar="PATH", help="key = value file; flags override it")
        for key, (_, cmds) in OPTIONS.items():
            if cmd not in cmds or key == "n":
                continue
            sp.add_argument(f"--{key}", dest=key, metavar=key.upper().replace("-", "_"))
        if cmd in OPTIONS["n"][1]:
            grp = sp.add_mutually_exclusive_group()
            grp.add_argument("--n", dest="n", metavar="N",
                             help="output intervals (time series) or cells per axis (phasemap)")
            grp.add_argument("--grid", dest="n", metavar="N", help="alias of --n")
    return parser


def load_config(path: Optional[str] = None, argv=(), command: Optional[str] = None) -> RunConfig:
    """Resolve a :class:`RunConfig` from an optional file and flag values.

    ``argv`` is the flag list *after* the command name.  Flags take
    precedence over file values, which take precedence over defaults.
    """
    if command is None:
        if not argv:
            raise ConfigError("missing command")
        command, argv = argv[0], list(argv[1:])
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    ns = build_parser().parse_args([command, *argv])
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    path = path or getattr(ns, "config", None)

    resolved = {}
    if path:
        for key, (value, lineno) in read_config_file(path).items():
            if command in OPTIONS[key][1]:
                resolved[key] = _convert(key, value, f"{path}:{lineno}")
    for key, value in flags.items():
        resolved[key] = _convert(key, value, f"--{key}")
    for key, value in DEFAULTS[command].items():
        resolved.setdefault(key, _convert(key, value, "default") if isinstance(value, str)
                            else value)

    missing = [k for k in REQUIRED[command] if k not in resolved]
    if missing:
        raise ConfigError(f"{command}: missing required option(s) "
                          + ", ".join(f"--{k}" for k in missing))
    if "shots" in resolved:
        shots = _convert("shots", resolved["shots"], "--shots") if isinstance(
            resolved["shots"], str) else resolved["shots"]
        shots = _int_list(shots)
        if not shots or (command != "variance-scan" and len(shots) != 1):
            raise ConfigError(f"--shots: expected {'a list' if command == 'variance-scan' else 'one'} "
                              "positive integer")
        resolved["shots"] = shots if command == "variance-scan" else shots[0]
    params = None
    if "gamma1" in resolved:
        params = ModelParams(resolved["j"], resolved["gamma1"], resolved["gamma2"])
    return RunConfig(command, params, resolved)


# --- output -------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    return "" if math.isnan(x) else format(x, ".17g")


def write_csv(path, header, rows) -> None:
    try:
        fh = open(path, "w", newline="", encoding="utf-8") if path else None
    except OSError as exc:
        raise OSError(f"{path}: cannot write output ({exc.strerror})") from None
    stream = fh or sys.stdout
    try:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    finally:
        if fh:
            fh.close()


def _cut(h, R):
    h = np.array(h, dtype=float)
    h[~(np.asarray(R) > liouville.R_CUTOFF)] = np.nan
    return h


def _timeseries(cfg: RunConfig, analytic: bool, numeric: bool):
    p = cfg.params
    n = cfg.get("n")
    if n < 1:
        raise ConfigError("--n: must be >= 1")
    t = np.linspace(0.0, cfg.get("t-max"), n + 1)
    empty = np.full(t.shape, np.nan)
    Ra = ha = Rn = hn = empty
    if analytic:
        Ra = closedform.reliability_analytic(p, t)
        ha = _cut(closedform.hazard_analytic(p, t), Ra)
    if numeric:
        traj = liouville.evolve_master(liouville.ket11(), p, t, dt=cfg.get("dt"))
        Rn = liouville.reliability_numeric(traj)
        hn = liouville.hazard_numeric(traj)
    write_csv(cfg.out, TIMESERIES_HEADER, zip(t, Ra, ha, Rn, hn))
    if analytic and numeric:
        dR = np.max(np.abs(Ra - Rn))
        both = ~np.isnan(ha) & ~np.isnan(hn)
        dh = np.max(np.abs(ha - hn)[both]) if both.any() else 0.0
        print(f"max|R_analytic-R_numeric| = {dR:.3e}  max|h_analytic-h_numeric| = {dh:.3e}",
              file=sys.stderr)


def _monitoring(cfg: RunConfig) -> fpt.MonitoringConfig:
    return fpt.MonitoringConfig(cfg.get("dt"), cfg.get("shots"), cfg.get("seed"),
                                cfg.get("t-max"))


def _read_samples(path, cfg: RunConfig) -> fpt.FptSampleSet:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != FPT_SAMPLE_HEADER:
                raise ConfigError(f"{path}:1: expected header {','.join(FPT_SAMPLE_HEADER)}")
            bins = [int(row[1]) for row in reader]
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read samples ({exc.strerror})") from None
    except (ValueError, IndexError):
        raise ConfigError(f"{path}: malformed sample row") from None
    mon = fpt.MonitoringConfig(cfg.get("dt"), len(bins), cfg.get("seed"), cfg.get("t-max"))
    return fpt.FptSampleSet(np.array(bins, dtype=np.int64), mon.resolved(cfg.params), cfg.params)


def dispatch(cfg: RunConfig) -> None:
    cmd = cfg.command
    if cmd in ("analytic", "numeric", "compare"):
        _timeseries(cfg, cmd != "numeric", cmd != "analytic")
    elif cmd == "phasemap":
        m = extrema.phase_map(cfg.get("j"), cfg.get("gmin"), cfg.get("gmax"), cfg.get("n"),
                              cfg.get("band"))
        write_csv(cfg.out, PHASEMAP_HEADER,
                  ((g1, g2, reg.value, c) for g1, g2, reg, c in m.rows()))
    elif cmd == "fpt-sample":
        s = fpt.sample_first_passage(cfg.params, _monitoring(cfg))
        write_csv(cfg.out, FPT_SAMPLE_HEADER,
                  ((i, b, int(b == fpt.CENSORED)) for i, b in enumerate(s.bins)))
    elif cmd == "fpt-estimate":
        if cfg.get("samples"):
            sample = _read_samples(cfg.get("samples"), cfg)
        else:
            sample = fpt.sample_first_passage(cfg.params, _monitoring(cfg))
        e = fpt.estimate(sample)
        write_csv(cfg.out, FPT_ESTIMATE_HEADER,
                  zip(e.t, e.n_risk, e.n_k, e.R_hat, e.h_hat, e.var_theory))
    elif cmd == "variance-scan":
        base = fpt.MonitoringConfig(cfg.get("dt"), 1, cfg.get("seed"), cfg.get("t-max"))
        rows = fpt.variance_experiment(cfg.params, base, cfg.get("shots"), cfg.get("times"),
                                       cfg.get("reps"))
        write_csv(cfg.out, VARIANCE_HEADER,
                  ((r.n_shots, r.t, r.var_emp, r.var_theory) for r in rows))
    elif cmd == "critical-x":
        x = extrema.critical_x_k2()
        if cfg.out:
            write_csv(cfg.out, ["x_star"], [(x,)])
        print(_fmt(x))


def run(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = load_config(argv=argv)
        dispatch(cfg)
    except SystemExit as exc:  # argparse usage errors / --help
        return int(exc.code or 0)
    except (InvariantBreach, MethodDisagreement) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ReliabilityError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())
