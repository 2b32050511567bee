"""Config-driven command-line front end.

Each subcommand runs one scenario pipeline end to end, writes plot-ready
CSV artifacts plus a ``manifest.json`` (config hash, tolerances, pass/fail,
content hash of every emitted file), and exits with:

* 0 — all requested checks passed
* 1 — a check failed (residual summary on stderr)
* 2 — invalid configuration (no output files are written)
* 3 — numeric instability during the run
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, ModelInvalidError, NumericError
from .scenarios import RUNNERS, ScenarioConfig


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _parse_tol_overrides(pairs) -> dict:
    out = {}
    for item in pairs or []:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise ConfigError(f"--tol expects name=value, got {item!r}")
        try:
            out[name] = float(value)
        except ValueError:
            raise ConfigError(f"--tol {name}: {value!r} is not a number") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moshlab",
        description="Exactly solvable two-electron model atom: evolution, "
                    "density assembly, potential inversion, and consistency checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, runner in RUNNERS.items():
        p = sub.add_parser(name, help=runner.__doc__ and
                           runner.__doc__.splitlines()[0])
        p.add_argument("--config", required=True, help="JSON scenario config")
        p.add_argument("--out", default=None, help="output directory "
                       "(default: no artifact files, verdict only)")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker pool size for independent work (default 1)")
        p.add_argument("--tol", action="append", metavar="NAME=VALUE",
                       help="override one tolerance; repeatable")
        p.add_argument("--stride", type=int, default=None,
                       help="snapshot thinning (overrides config)")
        if name == "roundtrip":
            p.add_argument("--corrupt", type=float, default=0.0,
                           help="spurious quadratic-potential amplitude "
                                "(negative control; the check then expects failure)")
    return parser


def _write_manifest(out_dir: Path, config_path, cfg: ScenarioConfig,
                    result) -> Path:
    manifest = {
        "version": __version__,
        "subcommand": result.name,
        "config_sha256": _sha256_file(config_path),
        "tolerances": cfg.tolerances,
        "checks": {result.name: {"passed": result.passed,
                                 "metrics": result.metrics}},
        "files": {p.name: _sha256_file(p) for p in sorted(result.files)},
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = ScenarioConfig.from_file(args.config)
        cfg.tolerances.update(_parse_tol_overrides(args.tol))
        if args.stride is not None:
            cfg.stride = args.stride
        cfg.validate()
    except (ConfigError, ModelInvalidError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    runner = RUNNERS[args.subcommand]
    kwargs = {"out_dir": args.out, "jobs": args.jobs}
    if args.subcommand == "roundtrip":
        kwargs["corrupt"] = args.corrupt
    try:
        result = runner(cfg, **kwargs)
    except (ConfigError, ModelInvalidError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3

    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_manifest(out_dir, args.config, cfg, result)
    print(result.summary())
    if not result.passed:
        print(f"check failed: {result.name} with "
              f"{json.dumps(result.metrics)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
