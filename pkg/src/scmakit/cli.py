"""Command-line front end: ``scmakit {kpi,simulate,oracle-check,catalog}``.

Machine output goes to stdout or files, diagnostics and progress to stderr.
Exit codes: 0 success, 1 oracle agreement below threshold, 2 bad input or
configuration, 3 failure while running.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema

from . import constellation as cst
from . import kpi
from .errors import ConfigError, InvariantViolation, ScmaError, TooLarge
from .harness import MODES, SweepConfig, oracle_agreement, run_sweep

EXIT_OK = 0
EXIT_BELOW = 1
EXIT_INPUT = 2
EXIT_RUNTIME = 3

_INT_OR_NULL = {"type": ["integer", "null"]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["constellation", "case"],
    "properties": {
        "constellation": {"type": "string", "minLength": 1},
        "case": {"type": "string", "enum": ["fsc", "fic", "ffsc", "ffic", "sfsc", "sfic", "awgn"]},
        "mode": {"type": "string", "enum": list(MODES)},
        "codec": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type"],
                    "properties": {"type": {"const": "identity"}},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type"],
                    "properties": {"type": {"const": "repetition"}, "n": {"type": "integer", "minimum": 1}},
                },
            ]
        },
        "snr_db": {"type": "array", "items": {"type": "number"}},
        "seed": {"type": "integer", "minimum": 0},
        "interleaver_seed": _INT_OR_NULL,
        "min_errors": {"type": "integer", "minimum": 1},
        "max_trials": {"type": "integer", "minimum": 1},
        "block_size": _INT_OR_NULL,
        "iterations": _INT_OR_NULL,
        "n_c": {"type": "integer", "minimum": 1},
        "workers": {"type": "integer", "minimum": 1},
        "rotations": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "indicator": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}},
    },
}


def _err(msg: str) -> None:
    print(f"scmakit: {msg}", file=sys.stderr)


def _describe(e: Exception) -> str:
    if isinstance(e, InvariantViolation):
        return f"invariant {e.invariant!r} violated: {e}"
    return f"{type(e).__name__}: {e}"


def load_config(path) -> tuple[dict, SweepConfig]:
    """Read and validate an experiment config; raises :class:`ConfigError`."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config {path}: {where}: {e.message}") from e
    kw = dict(doc)
    kw["snr_db"] = tuple(kw.get("snr_db", ()))
    if "rotations" in kw:
        kw["rotations"] = tuple(tuple(r) for r in kw["rotations"])
    if "indicator" in kw:
        kw["indicator"] = tuple(tuple(r) for r in kw["indicator"])
    try:
        cfg = SweepConfig(**kw)
    except ScmaError as e:
        raise ConfigError(str(e)) from e
    return doc, cfg


def _format_report(name: str, r: kpi.KpiReport) -> str:
    lines = [name]
    for key, val in zip(kpi.TABLE_COLUMNS[1:], kpi.format_row(name, r).split(",")[1:]):
        lines.append(f"  {key:<9} {val}")
    return "\n".join(lines)


def cmd_kpi(args) -> int:
    if not args.constellation and not args.table:
        _err("kpi needs --constellation or --table")
        return EXIT_INPUT
    specs = [args.constellation] if args.constellation else [s.strip() for s in args.table.split(",") if s.strip()]
    cs = []
    for spec in specs:
        try:
            c = cst.resolve(spec)
            cst.validate(c)
        except ScmaError as e:
            _err(f"{spec}: {_describe(e)}")
            return EXIT_INPUT
        cs.append(c)
    try:
        if args.table or args.csv:
            sys.stdout.write(kpi.table(cs))
        else:
            print(_format_report(cs[0].name, kpi.report(cs[0])))
    except ScmaError as e:
        _err(_describe(e))
        return EXIT_INPUT
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        doc, cfg = load_config(args.config)
        workers = args.workers if args.workers is not None else cfg.workers
        if workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg.build_system()
    except ScmaError as e:
        _err(_describe(e))
        return EXIT_INPUT

    def progress(p):
        print(
            f"snr {p.snr_db:g} dB: {p.trials} trials, ser {p.ser:.3e}, ber {p.ber:.3e}, fer {p.fer:.3e} "
            f"({p.wall_time:.1f} s)",
            file=sys.stderr,
            flush=True,
        )

    try:
        result = run_sweep(cfg, workers=workers, progress=progress)
    except ConfigError as e:
        _err(_describe(e))
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001 - any failure mid-run maps to one exit code
        _err(f"simulation failed: {_describe(e)}")
        return EXIT_RUNTIME
    out = Path(args.out)
    try:
        out.write_text(result.to_csv(), encoding="utf-8")
        out.with_suffix(".json").write_text(result.to_json(doc), encoding="utf-8")
    except OSError as e:
        _err(f"cannot write results: {e}")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        _, cfg = load_config(args.config)
        system = cfg.build_system()
        if args.snr is not None:
            snr = args.snr
        elif cfg.snr_db:
            snr = cfg.snr_db[0]
        else:
            raise ConfigError("no SNR given: pass --snr or put a grid in the config")
        seed = cfg.seed if args.seed is None else args.seed
        rep = oracle_agreement(system, cfg.case, snr, args.trials, seed, cfg.iterations)
    except TooLarge as e:
        _err(str(e))
        return EXIT_INPUT
    except ScmaError as e:
        _err(_describe(e))
        return EXIT_INPUT
    per_user = " ".join(f"{100 * a:.2f}" for a in rep.per_user)
    print(f"agreement {100 * rep.agreement:.4f}% over {rep.trials} trials (per user: {per_user})")
    if 100 * rep.agreement < args.threshold:
        _err(f"agreement below threshold {args.threshold}%")
        return EXIT_BELOW
    return EXIT_OK


def cmd_catalog(args) -> int:
    if args.action == "list":
        for name in cst.BUILTIN_NAMES:
            c = cst.builtin(name)
            print(f"{name}\tM={c.M}\tdv={c.dv}\tbuiltin")
        seen = set()
        for d in cst.data_dirs():
            if not d.is_dir():
                continue
            for p in sorted(d.glob("*.json")):
                if p.name in seen:
                    continue
                seen.add(p.name)
                try:
                    c = cst.load(p)
                except ScmaError as e:
                    print(f"{p.name}\tinvalid\t{p}\t{_describe(e)}")
                    continue
                print(f"{c.name}\tM={c.M}\tdv={c.dv}\t{p}")
        return EXIT_OK
    if not args.name:
        _err("catalog export needs a constellation name")
        return EXIT_INPUT
    try:
        c = cst.resolve(args.name)
    except ScmaError as e:
        _err(_describe(e))
        return EXIT_INPUT
    text = cst.dumps(c)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scmakit", description="SCMA constellation KPIs and link-level simulation")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kpi", help="key performance indicators of constellations")
    k.add_argument("--constellation", help="builtin name or JSON file")
    k.add_argument("--table", help="comma-separated list of constellations; prints CSV")
    k.add_argument("--csv", action="store_true", help="CSV output")
    k.set_defaults(func=cmd_kpi)

    s = sub.add_parser("simulate", help="run a Monte Carlo sweep from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="CSV path; a JSON mirror is written next to it")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("oracle-check", help="compare Log-MPA against exhaustive joint MAP")
    o.add_argument("--config", required=True)
    o.add_argument("--trials", type=int, default=10_000)
    o.add_argument("--snr", type=float, default=None, help="Eb/N0 in dB (default: first grid point)")
    o.add_argument("--threshold", type=float, default=99.0, help="minimum agreement in percent")
    o.add_argument("--seed", type=int, default=None)
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("catalog", help="list or export constellations")
    c.add_argument("action", choices=["list", "export"])
    c.add_argument("name", nargs="?")
    c.add_argument("--out")
    c.set_defaults(func=cmd_catalog)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
