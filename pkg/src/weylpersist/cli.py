"""Command-line harness: configuration, subcommands and result files.

Every run writes one header record (config snapshot, build id, timestamp,
duration) followed by one record per estimate, fit, report or derived
quantity.  Everything after the header is a deterministic function of the
config, so two runs with the same seed produce identical payload lines.
"""
import argparse
import configparser
import csv
import dataclasses
import io
import json
import math
import os
import subprocess
import sys
import time
from datetime import datetime, timezone

from . import __version__, _accel, bounds
from .errors import (
    BoundsFailed,
    ConfigInvalid,
    InsufficientData,
    WeylPersistError,
)
from .kernels import KernelSpec
from .persistence import (
    Side,
    fit_exponent,
    product_decomposition,
    slope_ratio,
    slopes_agree,
    sweep_n,
    sweep_T,
)
from .sampler import RngStream

SCHEMA_VERSION = 1
DEFAULT_SEED = 20240517
CONFIG_SECTION = "experiment"
COMMANDS = ("estimate-b", "weyl-exponent", "verify-bounds", "decompose")

_COMMAND_DEFAULTS = {
    "estimate-b": {"kernel": "gauss", "T_list": (10.0, 15.0, 20.0, 25.0), "step": 0.05, "trials": 1_000_000},
    "weyl-exponent": {"n_list": (64, 100, 196, 256, 400), "step": 0.05, "trials": 1_000_000, "side": "half"},
    "verify-bounds": {"n_list": bounds.DEFAULT_N},
    "decompose": {"n_list": (64, 100, 196), "step": 0.05, "trials": 1_000_000},
}


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one run.  ``None`` means "use the command default"."""

    command: str
    kernel: str | None = None
    n_list: tuple | None = None
    T_list: tuple | None = None
    step: float | None = None
    trials: int | None = None
    seed: int = DEFAULT_SEED
    workers: int | None = None
    side: str | None = None
    refine: bool = False
    out: str | None = None
    format: str = "jsonl"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigInvalid(f"unknown command {self.command!r}")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigInvalid(f"unsupported schema_version {self.schema_version}")
        if self.kernel is not None:
            try:
                KernelSpec.parse(self.kernel)
            except ValueError as exc:
                raise ConfigInvalid(str(exc)) from None
        if self.step is not None and not (self.step > 0 and math.isfinite(self.step)):
            raise ConfigInvalid("step must be positive")
        if self.trials is not None and self.trials < 1:
            raise ConfigInvalid("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigInvalid("seed must fit in 64 unsigned bits")
        if self.workers is not None and self.workers < 1:
            raise ConfigInvalid("workers must be >= 1")
        if self.side is not None and self.side not in ("half", "whole", "both"):
            raise ConfigInvalid("side must be half, whole or both")
        if self.format not in ("jsonl", "csv"):
            raise ConfigInvalid("format must be jsonl or csv")
        if self.n_list is not None and (not self.n_list or min(self.n_list) < 0):
            raise ConfigInvalid("n_list must hold nonnegative degrees")
        if self.T_list is not None and (not self.T_list or min(self.T_list) < 0):
            raise ConfigInvalid("T_list must hold nonnegative horizons")

    def resolved(self):
        """Copy with the command defaults filled in."""
        fill = {k: v for k, v in _COMMAND_DEFAULTS[self.command].items() if getattr(self, k) is None}
        return dataclasses.replace(self, **fill)

    def to_ini(self):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        section = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(repr(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            section[f.name] = str(value)
        parser[CONFIG_SECTION] = section
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text, **overrides):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigInvalid(f"unreadable config: {exc}") from None
        extra = [s for s in parser.sections() if s != CONFIG_SECTION]
        if extra:
            raise ConfigInvalid(f"unknown config sections: {extra}")
        raw = dict(parser[CONFIG_SECTION]) if parser.has_section(CONFIG_SECTION) else {}
        values = {k: _parse_field(k, v) for k, v in raw.items()}
        values.update({k: v for k, v in overrides.items() if v is not None})
        if "command" not in values:
            raise ConfigInvalid("config has no command")
        return cls(**values)

    def snapshot(self):
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in dataclasses.fields(self)}


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _parse_field(name, text):
    if name not in _FIELD_TYPES:
        raise ConfigInvalid(f"unknown config key {name!r}")
    try:
        if name == "n_list":
            return _int_list(text)
        if name == "T_list":
            return _float_list(text)
        if name in ("step",):
            return float(text)
        if name in ("trials", "seed", "workers", "schema_version"):
            return int(text)
        if name == "refine":
            return {"true": True, "false": False}[text.strip().lower()]
    except (ValueError, KeyError):
        raise ConfigInvalid(f"bad value for {name}: {text!r}") from None
    return text


def _int_list(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


def _num(v):
    """JSON-safe float: infinities and NaN become strings."""
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def estimate_record(e, **params):
    return {
        "type": "estimate",
        "params": {"label": e.label, "stream": e.seed.stream_index if e.seed else None, **params},
        "trials": e.trials,
        "successes": e.successes,
        "p_hat": e.p_hat,
        "ci": [e.ci_low, e.ci_high],
        "log_p": _num(e.log_p),
        "scale": e.scale,
    }


def fit_record(fit, label):
    return {
        "type": "fit",
        "params": {"label": label},
        "slope": fit.slope,
        "stderr": fit.slope_stderr,
        "intercept": fit.intercept,
        "r2": fit.r_squared,
        "points": [list(p) for p in fit.points],
    }


@dataclasses.dataclass
class RunRecord:
    config: ExperimentConfig
    build: str
    timestamp: str
    duration: float = 0.0
    records: list = dataclasses.field(default_factory=list)
    exit_code: int = 0

    def header(self):
        return {
            "type": "run",
            "schema_version": SCHEMA_VERSION,
            "version": __version__,
            "build": self.build,
            "backend": _accel.backend(),
            "timestamp": self.timestamp,
            "duration_s": round(self.duration, 3),
            "exit_code": self.exit_code,
            "config": self.config.snapshot(),
        }

    def payload_lines(self):
        return [json.dumps(r, sort_keys=True) for r in self.records]

    def to_jsonl(self):
        return "\n".join([json.dumps(self.header(), sort_keys=True), *self.payload_lines()]) + "\n"

    def to_csv(self):
        columns = ["type", "label", "scale", "trials", "successes", "p_hat", "ci_low", "ci_high", "log_p",
                   "slope", "stderr", "intercept", "r2", "name", "worst_margin", "pass", "value"]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, columns, restval="", extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for r in self.records:
            row = dict(r)
            row["label"] = r.get("params", {}).get("label", r.get("name", ""))
            if "ci" in r:
                row["ci_low"], row["ci_high"] = r["ci"]
            writer.writerow(row)
        return buf.getvalue()


def build_id():
    """``git describe`` of the source tree, or the package version outside a checkout."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=here, capture_output=True, text=True, timeout=5, check=True,
        )
        return out.stdout.strip() or f"v{__version__}"
    except (OSError, subprocess.SubprocessError):
        return f"v{__version__}"


def write_record(record, path, fmt="jsonl", append=False):
    """Write the run in one ``write`` call so concurrent appenders never interleave lines."""
    text = record.to_jsonl() if fmt == "jsonl" else record.to_csv()
    flags = os.O_WRONLY | os.O_CREAT | (os.O_APPEND if append else os.O_TRUNC)
    fd = os.open(path, flags, 0o644)
    try:
        os.write(fd, text.encode())
    finally:
        os.close(fd)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_estimate_b(config, record):
    kernel = KernelSpec.parse(config.kernel)
    if not kernel.stationary:
        raise ConfigInvalid("estimate-b needs a stationary kernel (gauss or sech)")
    seed = RngStream(config.seed)
    ests = sweep_T(kernel, config.T_list, config.step, config.trials, seed, config.workers)
    for e in ests:
        record.records.append(estimate_record(e, kernel=str(kernel), T=e.scale, step=config.step))
    fit = fit_exponent(ests)
    record.records.append(fit_record(fit, f"{kernel}:log_p~T"))
    rates = [(-e.log_p / e.scale if e.scale > 0 and e.successes else None) for e in ests]
    record.records.append(
        {"type": "summary", "name": "b_hat", "value": -fit.slope, "stderr": fit.slope_stderr,
         "params": {"label": str(kernel)}, "rates": [_num(r) if r is not None else None for r in rates]}
    )
    return [f"{kernel}: b_hat = {-fit.slope:.5f} +/- {fit.slope_stderr:.5f}"] + [
        f"  T={e.scale:g}: p_hat={e.p_hat:.4g} [{e.ci_low:.3g}, {e.ci_high:.3g}]  -log p/T={r if r is None else round(r, 4)}"
        for e, r in zip(ests, rates)
    ]


def _weyl_side(config, side, offset, record, lines):
    seed = RngStream(config.seed, offset)
    ests = sweep_n(side, config.n_list, config.step, config.trials, seed, config.workers)
    for e, n in zip(ests, config.n_list):
        record.records.append(estimate_record(e, side=side, n=n, step=config.step))
    fit = fit_exponent(ests)
    record.records.append(fit_record(fit, f"{side}:log_p~sqrt(n):step={config.step:g}"))
    lines.append(f"{side}: slope = {fit.slope:.5f} +/- {fit.slope_stderr:.5f}")
    for e in ests:
        lines.append(f"  {e.label}: p_hat={e.p_hat:.4g} ({e.successes}/{e.trials})")
    if config.refine:
        fine_step = config.step / 2
        fine = sweep_n(side, config.n_list, fine_step, config.trials, seed, config.workers)
        for e, n in zip(fine, config.n_list):
            record.records.append(estimate_record(e, side=side, n=n, step=fine_step))
        fine_fit = fit_exponent(fine)
        record.records.append(fit_record(fine_fit, f"{side}:log_p~sqrt(n):step={fine_step:g}"))
        agree = slopes_agree(fit, fine_fit)
        record.records.append(
            {"type": "refinement", "name": f"{side}_step_refinement", "params": {"label": side},
             "value": fine_fit.slope - fit.slope, "stderr": math.hypot(fit.slope_stderr, fine_fit.slope_stderr),
             "pass": agree}
        )
        lines.append(f"  step {fine_step:g}: slope = {fine_fit.slope:.5f} ({'agrees' if agree else 'DISAGREES'})")
    return fit


def cmd_weyl_exponent(config, record):
    lines = []
    sides = ("half", "whole") if config.side == "both" else (config.side,)
    fits = {}
    for k, side in enumerate(sides):
        fits[side] = _weyl_side(config, Side(side).value, k * len(config.n_list), record, lines)
    if len(fits) == 2:
        r, err = slope_ratio(fits["whole"], fits["half"])
        record.records.append(
            {"type": "ratio", "name": "whole_over_half", "params": {"label": "whole/half"}, "value": r, "stderr": err}
        )
        lines.append(f"slope ratio whole/half = {r:.4f} +/- {err:.4f}")
    return lines


def cmd_verify_bounds(config, record):
    reports = bounds.default_suite(config.n_list)
    lines = []
    for rep in reports:
        record.records.append(rep.to_record())
        lines.append(f"{'PASS' if rep.passed else 'FAIL'}  {rep.name:<22} worst margin {rep.worst_margin:.3e}")
    failed = [r.name for r in reports if not r.passed]
    if failed:
        raise BoundsFailed(f"failed reports: {', '.join(failed)}")
    return lines


def cmd_decompose(config, record):
    lines = []
    for i, n in enumerate(config.n_list):
        seed = RngStream(config.seed, i)
        d = product_decomposition(n, config.step, config.trials, seed, config.workers)
        for key in ("a", "b", "c", "full"):
            e = getattr(d, key)
            record.records.append(estimate_record(e, n=n, piece=key, step=config.step))
        gap, combined = d.slepian_gap()
        root = math.sqrt(n)
        nlb = -math.log(d.b.p_hat) / root if d.b.p_hat > 0 else math.inf
        nlc = -math.log(d.c.p_hat) / root if d.c.p_hat > 0 else math.inf
        record.records.append(
            {"type": "decomposition", "name": f"decompose:n={n}", "params": {"label": f"n={n}", "n": n},
             "product": d.product, "full": d.full.p_hat, "gap": gap, "combined_halfwidth": combined,
             "pass": d.slepian_consistent(), "neg_log_b_over_root_n": _num(nlb), "neg_log_c_over_root_n": _num(nlc)}
        )
        lines.append(
            f"n={n}: A={d.a.p_hat:.4g} B={d.b.p_hat:.4g} C={d.c.p_hat:.4g} full={d.full.p_hat:.4g} "
            f"product={d.product:.4g} slepian={'ok' if d.slepian_consistent() else 'VIOLATED'}"
        )
    return lines


_DISPATCH = {
    "estimate-b": cmd_estimate_b,
    "weyl-exponent": cmd_weyl_exponent,
    "verify-bounds": cmd_verify_bounds,
    "decompose": cmd_decompose,
}


def run(config):
    """Execute ``config``; returns ``(RunRecord, summary lines)``.

    Module errors propagate after the partial record is stamped with their
    exit code, so callers can still persist what was computed.
    """
    config = config.resolved()
    record = RunRecord(config, build_id(), datetime.now(timezone.utc).isoformat(timespec="seconds"))
    started = time.perf_counter()
    try:
        lines = _DISPATCH[config.command](config, record)
    except WeylPersistError as exc:
        record.exit_code = exc.exit_code
        record.records.append({"type": "error", "name": type(exc).__name__, "message": str(exc)})
        exc.record = record
        raise
    finally:
        record.duration = time.perf_counter() - started
    return record, lines


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="weylpersist",
        description="Persistence exponents of random Weyl polynomials and certification of the bounds behind them.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, sampling=True):
        p.add_argument("--config", help="INI file with an [experiment] section; flags override it")
        p.add_argument("--n", dest="n_list", type=_int_list, default=None, help="comma-separated degrees")
        if sampling:
            p.add_argument("--step", type=float, default=None, help="grid spacing")
            p.add_argument("--trials", type=int, default=None, help="Monte Carlo trials per estimate")
            p.add_argument("--seed", type=int, default=None, help=f"master seed (default {DEFAULT_SEED})")
            p.add_argument("--workers", type=int, default=None, help="threads (default: all cores)")
        p.add_argument("--out", default=None, help="result file (default: JSONL on stdout)")
        p.add_argument("--format", choices=("jsonl", "csv"), default=None)
        p.add_argument("--append", action="store_true", help="append to --out instead of replacing it")
        return p

    p = common(sub.add_parser("estimate-b", help="decay rate b of a stationary Gaussian process"))
    p.add_argument("--kernel", default=None, help="gauss (default) or sech")
    p.add_argument("--T", dest="T_list", type=_float_list, default=None, help="comma-separated horizons")

    p = common(sub.add_parser("weyl-exponent", help="persistence exponent of Weyl polynomials in sqrt(n)"))
    p.add_argument("--side", choices=("half", "whole", "both"), default=None)
    p.add_argument("--refine", action=argparse.BooleanOptionalAction, default=None,
                   help="rerun at half the step with the same draws and compare slopes")

    common(sub.add_parser("verify-bounds", help="sweep every inequality and report margins"), sampling=False)
    common(sub.add_parser("decompose", help="bulk/crossover/edge decomposition of the half-line probability"))
    return parser


def config_from_args(args):
    overrides = {
        k: v for k, v in vars(args).items()
        if k not in ("config", "append") and v is not None
    }
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigInvalid(f"cannot read config: {exc}") from None
        overrides.pop("command")
        cfg = ExperimentConfig.from_ini(text, **overrides)
        if cfg.command != args.command:
            raise ConfigInvalid(f"config is for {cfg.command!r}, not {args.command!r}")
        return cfg
    return ExperimentConfig(**overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    record = None
    code = 0
    try:
        config = config_from_args(args)
        record, lines = run(config)
    except WeylPersistError as exc:
        print(f"error: {exc}", file=sys.stderr)
        record = getattr(exc, "record", None)
        code = exc.exit_code
        lines = []
    if record is not None:
        cfg = record.config
        if cfg.out:
            write_record(record, cfg.out, cfg.format, append=args.append)
            stream = sys.stdout
        else:
            sys.stdout.write(record.to_jsonl() if cfg.format == "jsonl" else record.to_csv())
            stream = sys.stderr
        for line in lines:
            print(line, file=stream)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
