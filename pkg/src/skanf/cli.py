"""``skanf`` command line: deobfuscate, analyze, exploit, validate, full."""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from collections.abc import Sequence
from pathlib import Path

from .exploit import Exploit, validate_exploit
from .ingest import FixtureError
from .pipeline import (
    MODES,
    Outcome,
    PipelineConfig,
    PipelineError,
    load_target,
    run,
    write_json,
    write_outputs,
)
from .symbolic.engine import (
    DEFAULT_ADVERSARY,
    DEFAULT_PATH_CAP,
    DEFAULT_TABLE_CAP,
    DEFAULT_TIME_BUDGET,
)
from .words import parse_int

EXIT_NONE = 0
EXIT_ERROR = 1
EXIT_FOUND = 10
EXIT_INCOMPLETE = 20


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bytecode", type=Path, help="runtime bytecode (hex text or raw binary)")
    p.add_argument("--fixture", type=Path, help="transaction and snapshot bundle (JSON)")
    p.add_argument("--contract", type=parse_int, help="address of the analyzed contract")
    p.add_argument("--adversary", type=parse_int, default=DEFAULT_ADVERSARY)
    p.add_argument("--risky-tokens", type=Path, help="JSON list of known token addresses")
    p.add_argument("--mode", choices=MODES, default="auto")
    p.add_argument("--time-budget", type=float, default=DEFAULT_TIME_BUDGET, help="seconds")
    p.add_argument("--path-cap", type=int, default=DEFAULT_PATH_CAP)
    p.add_argument("--table-visit-cap", type=int, default=DEFAULT_TABLE_CAP)
    p.add_argument("--recorded-origin", type=parse_int, help="origin to use when the adversary cannot pass a gate")
    p.add_argument("--out-dir", type=Path)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skanf", description="Analyze obfuscated EVM contracts for asset-management flaws.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("deobfuscate", "rewrite indirect jumps through a branch table and report coverage"),
        ("analyze", "find vulnerable CALL sites and emit reports"),
        ("exploit", "synthesize and validate exploits for the reported sites"),
        ("full", "run every stage and write all output files"),
    ]:
        _common(sub.add_parser(name, help=help_))
    v = sub.add_parser("validate", help="re-validate an exploits.json against the fixture snapshots")
    _common(v)
    v.add_argument("--exploits", type=Path, required=True)
    return parser


def _config(a: argparse.Namespace) -> PipelineConfig:
    return PipelineConfig(
        bytecode=a.bytecode,
        fixture=a.fixture,
        adversary=a.adversary,
        risky_tokens=a.risky_tokens,
        time_budget=a.time_budget,
        path_cap=a.path_cap,
        table_visit_cap=a.table_visit_cap,
        mode=a.mode,
        recorded_origin=a.recorded_origin,
        contract=a.contract,
    )


def _exit_code(out: Outcome) -> int:
    if out.reports_json():
        return EXIT_FOUND
    return EXIT_INCOMPLETE if out.incomplete else EXIT_NONE


def _emit(doc, out_dir: Path | None, name: str) -> None:
    print(json.dumps(doc, indent=2))
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_json(out_dir / name, doc)


def _validate(cfg: PipelineConfig, path: Path) -> list[dict]:
    target = load_target(cfg)
    doc = json.loads(path.read_text())
    out = []
    for entry in doc.get("exploits", []):
        e = Exploit.from_json(entry["exploit"])
        v = validate_exploit(e, target.snapshots.get(e.block_number))
        out.append({"exploit": e.to_json(), "verdict": v.to_json()})
    return out


def main(argv: Sequence[str] | None = None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    random.seed(os.environ.get("SKANF_SEED", "0"))
    try:
        cfg = _config(a)
        if a.command == "validate":
            res = _validate(cfg, a.exploits)
            _emit(res, a.out_dir, "validation.json")
            return EXIT_NONE
        if a.command == "deobfuscate":
            out = run(cfg, "deobfuscate")
            doc = out.deobfuscation_json()
            print(out.instrumented.listing())
            if not out.instrumented.obfuscated:
                print("; not obfuscated: no indirect jumps found")
            print(json.dumps({k: v for k, v in doc.items() if k != "listing"}, indent=2))
            if a.out_dir is not None:
                a.out_dir.mkdir(parents=True, exist_ok=True)
                write_json(a.out_dir / "deobfuscation.json", doc)
            return EXIT_NONE
        if a.command == "analyze":
            out = run(cfg, "analyze")
            _emit(out.reports_json(), a.out_dir, "reports.json")
            return _exit_code(out)
        if a.command == "exploit":
            out = run(cfg, "full")
            _emit(out.exploits_json(), a.out_dir, "exploits.json")
            return _exit_code(out)
        out = run(cfg, "full")
        for p in write_outputs(out, a.out_dir or Path("skanf-out")):
            print(p)
        return _exit_code(out)
    except (PipelineError, FixtureError, OSError, ValueError) as exc:
        print(f"skanf: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
