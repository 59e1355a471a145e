"""Command line entry point: ``ebt-radial simulate | convergence | validate``.

Exit codes: 0 ok, 1 I/O error, 2 config or usage error, 3 stability
violation, 4 property failure.  Tables go to standard output, progress to
standard error.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .harness import LevelError, build_table, default_spec, format_table, write_table_csv
from .measures import write_csv
from .metrics import MetricSpec
from .scheme import SchemeConfig, StabilityError, run
from .validation import SUITES

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_STABILITY, EXIT_PROPERTY = 0, 1, 2, 3, 4

GROUNDS = ("holder_half", "euclid")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """A scheme configuration plus the run-level settings kept in the same file."""

    scheme: SchemeConfig
    ground: str = "holder_half"
    snapshots: tuple[float, ...] = ()


_SCHEME_KEYS = {f.name: f.type for f in fields(SchemeConfig)}
_INT_KEYS = {"dimension", "n", "memory_budget_bytes"}
_STR_KEYS = {"init_rule"}


def parse_config_text(text: str) -> RunConfig:
    """Parse ``key=value`` lines; ``#`` starts a comment.

    Exactly one of ``n`` and ``dt`` must be present; the other follows from
    dt = r0 / n.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    known = set(_SCHEME_KEYS) | {"metric.ground", "snapshots"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    if ("n" in raw) == ("dt" in raw):
        raise ConfigError("give exactly one of n and dt")

    kw: dict = {}
    try:
        for key, value in raw.items():
            if key in _INT_KEYS:
                kw[key] = int(value)
            elif key in _STR_KEYS:
                kw[key] = value
            elif key in _SCHEME_KEYS:
                kw[key] = float(value)
        ground = raw.get("metric.ground", "holder_half")
        snaps = tuple(float(v) for v in raw.get("snapshots", "").split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if ground not in GROUNDS:
        raise ConfigError(f"metric.ground must be one of {GROUNDS}, got {ground!r}")

    r0 = kw.get("r0", SchemeConfig.r0)
    try:
        if "n" in kw:
            kw["dt"] = r0 / kw["n"]
            scheme = SchemeConfig(**kw)
        else:
            scheme = SchemeConfig.coupled(kw.pop("dt"), **kw)
        scheme.steps  # t_end must be a whole number of steps
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if any(not (math.isfinite(t) and 0 <= t <= scheme.t_end) for t in snaps):
        raise ConfigError("snapshot times must lie in [0, t_end]")
    return RunConfig(scheme, ground, snaps)


def load_config(path: str | Path) -> RunConfig:
    return parse_config_text(Path(path).read_text())


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config_text` (writes dt, never n)."""
    lines = ["# ebt-radial run configuration"]
    for key, value in cfg.scheme.as_dict().items():
        if key == "n":
            continue
        lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    lines.append(f"metric.ground={cfg.ground}")
    if cfg.snapshots:
        lines.append("snapshots=" + ",".join(repr(t) for t in cfg.snapshots))
    return "\n".join(lines) + "\n"


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: Path, cfg: RunConfig, outputs: Sequence[Path], seconds: float,
                   extra: dict | None = None) -> None:
    """``key=value`` manifest: config echo, version, timing, files and checksums."""
    lines = ["# ebt-radial run manifest", f"version={__version__}",
             f"wall_seconds={seconds:.3f}"]
    for key, value in cfg.scheme.as_dict().items():
        lines.append(f"config.{key}={value!r}" if isinstance(value, float) else f"config.{key}={value}")
    lines.append(f"config.metric.ground={cfg.ground}")
    for key, value in (extra or {}).items():
        lines.append(f"{key}={value}")
    for p in outputs:
        lines.append(f"file.{p.name}={p}")
        lines.append(f"sha256.{p.name}={sha256(p)}")
    path.write_text("\n".join(lines) + "\n")


def _snapshot_script(csvs: Sequence[Path]) -> str:
    plots = ", \\\n     ".join(
        f"'{p.name}' using 2:3 with lines title '{p.stem}'" for p in csvs)
    return ("# gnuplot script: mass per node against radius\n"
            "set datafile separator ','\n"
            "set key autotitle columnhead\n"
            "set xlabel 'r'\nset ylabel 'mass'\n"
            f"plot {plots}\n")


def _table_script(csv: Path, alt: str | None) -> str:
    plot = f"'{csv.name}' using 1:3 with linespoints title 'Err'"
    if alt:
        plot += f", \\\n     '' using 1:5 with linespoints title 'Err {alt}'"
    return ("# gnuplot script: paired error against step size\n"
            "set datafile separator ','\n"
            "set logscale xy\n"
            "set xlabel 'dt'\nset ylabel 'Err'\n"
            f"plot {plot}\n")


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _out_dir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    out = _out_dir(args.out)
    scheme = cfg.scheme

    def tick(step, total):
        _progress(f"step {step}/{total}")

    result = run(scheme, cfg.snapshots, progress=tick, threads=args.threads)
    written = []
    for k, snap in enumerate(result.snapshots):
        p = out / f"snapshot_{k:03d}_t{snap.time:.6g}.csv"
        write_csv(snap.measure(), p)
        written.append(p)
    final = out / "final.csv"
    write_csv(result.final.measure(), final)
    written.append(final)
    gp = out / "plot.gp"
    gp.write_text(_snapshot_script(written))
    (out / "config.txt").write_text(serialize_config(cfg))
    written += [gp, out / "config.txt"]
    d = result.diagnostics
    write_manifest(out / "manifest.txt", cfg, written, time.perf_counter() - t0,
                   {"diag.steps": d.steps, "diag.min_mass": repr(d.min_mass),
                    "diag.max_dt_interaction": repr(d.max_dt_interaction),
                    "diag.max_growth_ratio": repr(d.max_growth_ratio)})
    _progress(f"wrote {len(written)} files to {out}")
    return EXIT_OK


def parse_levels(text: str) -> list[float]:
    try:
        levels = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --levels: {exc}") from None
    return levels


def cmd_convergence(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    if not args.levels:
        raise ConfigError("--levels is required")
    levels = parse_levels(args.levels)
    dim = cfg.scheme.dimension
    spec: MetricSpec = default_spec(dim, cfg.ground)
    alt_spec = alt_label = None
    if dim == 2:
        other = "euclid" if cfg.ground == "holder_half" else "holder_half"
        alt_spec, alt_label = replace(spec, ground=other), other
    rows = build_table(cfg.scheme, levels, spec, alt_spec=alt_spec,
                       threads=args.threads, progress=_progress)

    target = Path(args.out)
    if target.suffix == ".csv":
        target.parent.mkdir(parents=True, exist_ok=True)
        csv, stem = target, target.with_suffix("")
    else:
        csv = _out_dir(args.out) / "convergence.csv"
        stem = csv.with_suffix("")
    write_table_csv(csv, rows, alt_label)
    gp = stem.with_name(stem.name + ".gp")
    gp.write_text(_table_script(csv, alt_label))
    print(format_table(rows, alt_label))
    write_manifest(stem.with_name(stem.name + ".manifest.txt"), cfg, [csv, gp],
                   time.perf_counter() - t0, {"levels": ",".join(repr(v) for v in levels)})
    return EXIT_OK


def cmd_validate(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        _progress(f"running {name} suite (seed {args.seed})")
        rep = SUITES[name](args.seed)
        for line in rep.lines():
            print(line)
        print(f"{name}: {len(rep.checks) - sum(not c.passed for c in rep.checks)}"
              f"/{len(rep.checks)} checks passed in {rep.seconds:.1f}s")
        ok &= rep.passed
    return EXIT_OK if ok else EXIT_PROPERTY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ebt-radial", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the scheme and write snapshots")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--threads", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("convergence", help="paired errors and orders over halving steps")
    c.add_argument("--config", required=True)
    c.add_argument("--levels", required=True, help="descending halving chain, e.g. 1e-3,5e-4,2.5e-4")
    c.add_argument("--out", required=True, help="output directory or .csv path")
    c.add_argument("--threads", type=int, default=1)
    c.set_defaults(func=cmd_convergence)

    v = sub.add_parser("validate", help="randomised property suites")
    v.add_argument("suite", choices=[*SUITES, "all"])
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, LevelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StabilityError as exc:
        print(f"stability violation: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
