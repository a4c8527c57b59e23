"""Command-line front end.

Subcommands: verify, noise, picard, fk, chaos, compare.  Configuration is a
JSON document (see README) whose fields can be overridden by flags.  Data
goes to CSV (first line ``#schema=1``), provenance to a JSON summary.

Exit codes: 0 success, 1 failed verification, 2 invalid configuration,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import subprocess
import sys
import traceback
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import chaos_engine as ce
from . import feynman_kac as fk
from . import picard_solver as ps
from ._quad import QuadratureError
from .noise_model import (
    ATOM_FIXTURE,
    InfiniteVarianceError,
    measure_from_dict,
    measure_to_dict,
    noise_eval,
    sample_noise,
)
from .verify import run_verify

SCHEMA = "#schema=1"
COMMANDS = ("verify", "noise", "picard", "fk", "chaos", "compare")
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("stratowave")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


@dataclass
class GridConfig:
    n_t: int = 50
    n_x: int = 0  # 0: matched to n_t (dx = dt)
    scheme: str = "auto"


@dataclass
class RunConfig:
    command: str = "compare"
    measure: dict = field(default_factory=lambda: measure_to_dict(ATOM_FIXTURE))
    eps: float = 0.0
    dim: int = 1
    t: float = 1.0
    x: list = field(default_factory=lambda: [0.0])
    n_paths: int = 200_000
    n_realizations: int = 10_000
    n_iters: int = ps.DEFAULT_ITERS
    n_max: int = 8
    max_jumps: int = 16
    n_freq: int = 256
    stratified: bool = False
    census: int = 0
    grid: GridConfig = field(default_factory=GridConfig)
    seed: int = 0
    out_path: str = ""

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @property
    def spectral_measure(self):
        return measure_from_dict(self.measure)

    def grid_spec(self) -> ps.GridSpec:
        n_x = self.grid.n_x or 2 * self.grid.n_t + 1
        return ps.GridSpec(self.t, tuple(self.x), self.grid.n_t, n_x, self.dim)

    @property
    def scheme(self) -> str:
        if self.grid.scheme != "auto":
            return self.grid.scheme
        return "diamond" if self.dim == 1 and self.grid_spec().is_matched else "cone"


_COUNT_FIELDS = ("n_paths", "n_realizations", "n_iters", "n_max", "max_jumps", "n_freq")


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def parse_config(text: str, *, check: bool = True) -> RunConfig:
    """Parse (and by default validate) a JSON config; errors carry the offending line."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", 1)
    return config_from_dict(raw, text, check=check)


def config_from_dict(raw: dict, text: str = "", *, check: bool = True) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown field {key!r}", _line_of(text, key))
    cfg = RunConfig()
    for key, value in raw.items():
        if key == "grid":
            if not isinstance(value, dict):
                raise ConfigError("grid must be an object", _line_of(text, key))
            gknown = {f.name for f in fields(GridConfig)}
            for gk in value:
                if gk not in gknown:
                    raise ConfigError(f"unknown grid field {gk!r}", _line_of(text, gk))
            value = GridConfig(**{**asdict(GridConfig()), **value})
        setattr(cfg, key, value)
    if check:
        validate(cfg, text)
    return cfg


def validate(cfg: RunConfig, text: str = "") -> None:
    def fail(msg, key):
        raise ConfigError(msg, _line_of(text, key))

    if cfg.command not in COMMANDS:
        fail(f"command must be one of {', '.join(COMMANDS)}", "command")
    for key in _COUNT_FIELDS:
        v = getattr(cfg, key)
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            fail(f"{key} must be a positive integer", key)
    for key in ("eps", "t"):
        v = getattr(cfg, key)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            fail(f"{key} must be a finite number", key)
        setattr(cfg, key, float(v))
    if cfg.t <= 0:
        fail("t must be positive", "t")
    if cfg.eps < 0:
        fail("eps must be non-negative", "eps")
    if cfg.dim not in (1, 2):
        fail("dim must be 1 or 2", "dim")
    if not isinstance(cfg.x, list) or len(cfg.x) != cfg.dim:
        fail(f"x must be a list of {cfg.dim} numbers", "x")
    try:
        cfg.x = [float(v) for v in cfg.x]
    except (TypeError, ValueError):
        fail(f"x must be a list of {cfg.dim} numbers", "x")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or cfg.seed < 0:
        fail("seed must be a non-negative integer", "seed")
    if not isinstance(cfg.census, int) or not 0 <= cfg.census <= 14:
        fail("census must be an integer in 0..14", "census")
    if cfg.n_max % 2:
        fail("n_max must be even (odd mean terms vanish)", "n_max")
    try:
        m = cfg.spectral_measure
    except (KeyError, TypeError, ValueError) as exc:
        fail(f"invalid measure: {exc}", "measure")
    if m.dim != cfg.dim:
        fail(f"measure dimension {m.dim} differs from dim {cfg.dim}", "measure")
    needs_function = cfg.command in ("noise", "picard", "fk", "compare") or (cfg.command == "chaos" and not cfg.census)
    if needs_function and cfg.eps == 0 and math.isinf(m.total_mass):
        fail("eps = 0 needs a finite spectral measure (the noise is not a function otherwise)", "eps")
    g = cfg.grid
    if not isinstance(g.n_t, int) or g.n_t < 1 or not isinstance(g.n_x, int) or g.n_x < 0 or g.n_x == 1:
        fail("grid needs n_t >= 1 and n_x = 0 (matched) or n_x >= 2", "grid")
    if g.scheme not in ("auto", "cone", "diamond"):
        fail("grid.scheme must be auto, cone or diamond", "scheme")
    if g.scheme == "diamond" and (cfg.dim != 1 or not cfg.grid_spec().is_matched):
        fail("the diamond scheme needs dim = 1 and n_x = 2 n_t + 1", "scheme")


# ---------------------------------------------------------------------------
# commands; each returns (header, rows, summary extras)


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def cmd_verify(cfg, threads):
    checks = run_verify()
    rows = [(c.module, c.name, "PASS" if c.passed else "FAIL", c.detail) for c in checks]
    failed = sum(not c.passed for c in checks)
    return ["module", "check", "status", "detail"], rows, {"failed": failed}


def cmd_noise(cfg, threads):
    m = cfg.spectral_measure
    s = sample_noise(m, cfg.eps, cfg.n_freq, cfg.seed)
    spec = cfg.grid_spec()
    pts = spec.points().reshape(-1, cfg.dim)
    vals = noise_eval(s, pts)
    rows = [(*map(float, p), float(v)) for p, v in zip(pts, vals)]
    header = [f"x{k}" for k in range(cfg.dim)] + ["value"]
    return header, rows, {"n_modes": int(len(s.amplitudes))}


def cmd_picard(cfg, threads):
    s = sample_noise(cfg.spectral_measure, cfg.eps, cfg.n_freq, cfg.seed)
    spec = cfg.grid_spec()
    final = ps.picard_run(s, spec, cfg.n_iters, cfg.scheme)[-1]
    header = ["t"] + [f"x{k}" for k in range(cfg.dim)] + ["value"]
    return header, list(final.rows()), {"center_value": final.at_center()}


def _est_row(name, cfg, r):
    return (name, cfg.t, " ".join(_fmt(v) for v in cfg.x), r.mean, r.stderr, r.n_samples, r.truncation_max_jumps, r.truncated_fraction, r.seed)


_EST_HEADER = ["estimator", "t", "x", "mean", "stderr", "n_samples", "max_jumps", "truncated_fraction", "seed"]


def cmd_fk(cfg, threads):
    m = cfg.spectral_measure
    kw = dict(seed=cfg.seed, threads=threads)
    s = sample_noise(m, cfg.eps, cfg.n_freq, cfg.seed)
    rows = [
        _est_row("fk_realization", cfg, fk.fk_realization(s, cfg.t, cfg.x, cfg.n_paths, cfg.max_jumps, stratified=cfg.stratified, **kw)),
        _est_row("fk_mean", cfg, fk.fk_mean(m, cfg.eps, cfg.t, cfg.x, cfg.n_paths, cfg.max_jumps, stratified=cfg.stratified, **kw)),
        _est_row("fk_second_moment", cfg, fk.fk_second_moment(m, cfg.eps, cfg.t, cfg.x, cfg.n_paths, cfg.max_jumps, **kw)),
    ]
    return _EST_HEADER, rows, {}


def cmd_chaos(cfg, threads):
    if cfg.census:
        rows = []
        for n in range(1, cfg.census + 1):
            for r in ce.decomposition_census(n):
                rows.append((n, r.level, r.count, r.label))
        return ["n", "chaos_level", "term_count", "label"], rows, {}
    m = cfg.spectral_measure
    mean = ce.stratonovich_mean_series(cfg.t, m, cfg.eps, cfg.n_max, seed=cfg.seed)
    second = ce.skorohod_second_moment(cfg.t, cfg.x, m, cfg.eps, cfg.n_max, seed=cfg.seed)
    rows = [("stratonovich_mean", 0, 1.0, 0.0)]
    rows += [("stratonovich_mean", 2 * (i + 1), v, 0.0) for i, v in enumerate(mean.terms)]
    rows += [("skorohod_second_moment", 0, 1.0, 0.0)]
    rows += [("skorohod_second_moment", i + 1, v, 0.0) for i, v in enumerate(second.terms)]
    rows += [("stratonovich_mean_total", cfg.n_max, mean.value, mean.stderr), ("skorohod_second_moment_total", cfg.n_max, second.value, second.stderr)]
    return ["quantity", "n", "value", "stderr"], rows, {"mean_tail_ratio": mean.tail_ratio}


def _dz(a, sa, b, sb) -> float:
    s = math.hypot(sa, sb)
    return abs(a - b) / s if s > 0 else (0.0 if a == b else math.inf)


def cmd_compare(cfg, threads):
    m = cfg.spectral_measure
    spec = cfg.grid_spec()
    p1, p2 = ps.moment_estimate(m, cfg.eps, spec, cfg.n_iters, cfg.n_realizations, cfg.seed, n_freq=cfg.n_freq, scheme=cfg.scheme, threads=threads)
    f1 = fk.fk_mean(m, cfg.eps, cfg.t, cfg.x, cfg.n_paths, cfg.max_jumps, cfg.seed, stratified=cfg.stratified, threads=threads)
    f2 = fk.fk_second_moment(m, cfg.eps, cfg.t, cfg.x, cfg.n_paths, cfg.max_jumps, cfg.seed, threads=threads)
    series = ce.stratonovich_mean_series(cfg.t, m, cfg.eps, cfg.n_max, seed=cfg.seed)
    est = {
        "picard_mean": (p1.mean, p1.stderr),
        "fk_mean": (f1.mean, f1.stderr),
        "series_mean": (series.value, series.stderr),
        "picard_second": (p2.mean, p2.stderr),
        "fk_second": (f2.mean, f2.stderr),
    }
    rows = [("estimate", k, "", v[0], v[1], "") for k, v in est.items()]
    pairs = [("picard_mean", "fk_mean"), ("picard_mean", "series_mean"), ("fk_mean", "series_mean"), ("picard_second", "fk_second")]
    worst = 0.0
    for a, b in pairs:
        z = _dz(*est[a], *est[b])
        worst = max(worst, z)
        rows.append(("pair", a, b, est[a][0] - est[b][0], math.hypot(est[a][1], est[b][1]), z))
    return ["kind", "method", "other", "mean", "stderr", "delta_over_sigma"], rows, {"max_delta_over_sigma": worst}


HANDLERS = {"verify": cmd_verify, "noise": cmd_noise, "picard": cmd_picard, "fk": cmd_fk, "chaos": cmd_chaos, "compare": cmd_compare}


# ---------------------------------------------------------------------------


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stratowave", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--seed", type=int)
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--out", help="CSV output path (default: stdout)")
        s.add_argument("--summary", help="JSON summary path (default: next to --out)")
        s.add_argument("--eps", type=float)
        s.add_argument("--t", type=float)
        s.add_argument("--x", type=float, nargs="+")
        s.add_argument("--n-paths", type=int)
        s.add_argument("--n-realizations", type=int)
        s.add_argument("--n-iters", type=int)
        s.add_argument("--n-max", type=int)
        s.add_argument("--max-jumps", type=int)
        s.add_argument("--n-t", type=int)
        s.add_argument("--stratified", action="store_true", default=None)
        if name == "chaos":
            s.add_argument("--census", type=int, metavar="N", help="term census for n = 1..N")
    return p


def _setup_logging():
    level = os.environ.get("STRATOWAVE_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if level not in LOG_LEVELS:
        log.error("STRATOWAVE_LOG=%r is not one of error, info, debug; using error", level)


def load_config(args) -> RunConfig:
    text = Path(args.config).read_text() if args.config else ""
    cfg = parse_config(text, check=False)
    # the subcommand decides what runs; a "command" field in the file is informational
    cfg.command = args.command
    overrides = {
        "seed": args.seed, "eps": args.eps, "t": args.t, "x": args.x,
        "n_paths": args.n_paths, "n_realizations": args.n_realizations, "n_iters": args.n_iters,
        "n_max": args.n_max, "max_jumps": args.max_jumps, "stratified": args.stratified,
        "census": getattr(args, "census", None),
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    if args.n_t is not None:
        cfg.grid.n_t = args.n_t
    if args.out:
        cfg.out_path = args.out
    validate(cfg, text)
    return cfg


def _failing_module(exc: BaseException) -> str:
    mod = "stratowave"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("stratowave.") and name != "stratowave.cli":
            mod = name.split(".", 1)[1]
    return mod


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        where = f"line {exc.line}: " if exc.line else ""
        print(f"config error: {where}{exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    log.info("running %s (config %s)", cfg.command, cfg.hash()[:12])
    try:
        header, rows, extras = HANDLERS[cfg.command](cfg, args.threads)
    except (ps.NumericalError, QuadratureError, InfiniteVarianceError, FloatingPointError) as exc:
        print(f"numerical failure in {_failing_module(exc)}: {exc}", file=sys.stderr)
        return 3

    text = render_csv(header, rows)
    if cfg.out_path:
        Path(cfg.out_path).write_text(text)
    else:
        sys.stdout.write(text)
    summary = {
        "command": cfg.command,
        "config": cfg.to_dict(),
        "config_sha256": cfg.hash(),
        "git_describe": git_describe(),
        "seed": cfg.seed,
        **extras,
    }
    summary_path = args.summary or (str(Path(cfg.out_path).with_suffix(".json")) if cfg.out_path else "")
    if summary_path:
        Path(summary_path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if cfg.command == "verify" and extras["failed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
