"""The three analysis stages wired together: deobfuscation, vulnerability
detection and exploit generation."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .bytecode import Program, disassemble, load_bytecode
from .cfg import call_sites
from .deobfuscator import InstrumentedProgram, deobfuscate
from .evm.state import WorldState
from .exploit import (
    Exploit,
    ExploitVerdict,
    SynthesisFailure,
    synthesize,
    validate_exploit,
)
from .ingest import TransactionRecord, fixture_contract, load_fixture
from .oracle import Finding, RiskConfig, analyze_path, dedupe
from .symbolic.engine import (
    DEFAULT_ADVERSARY,
    DEFAULT_PATH_CAP,
    DEFAULT_TABLE_CAP,
    DEFAULT_TIME_BUDGET,
    Exploration,
    ExploreConfig,
    concolic_run,
    symbolic_explore,
)
from .symbolic.seeds import extract_seeds
from .words import hex_addr

log = logging.getLogger(__name__)

DEFAULT_CONTRACT = 0xC0FFEE0000000000000000000000000000C0FFEE
MODES = ("auto", "concolic-only", "fallback-only")


class PipelineError(Exception):
    """Operational error (unreadable input, inconsistent configuration)."""


@dataclass
class PipelineConfig:
    bytecode: Path | None = None
    fixture: Path | None = None
    adversary: int = DEFAULT_ADVERSARY
    risky_tokens: Path | None = None
    time_budget: float = DEFAULT_TIME_BUDGET
    path_cap: int = DEFAULT_PATH_CAP
    table_visit_cap: int = DEFAULT_TABLE_CAP
    mode: str = "auto"
    recorded_origin: int | None = None
    contract: int | None = None

    def __post_init__(self) -> None:
        if self.time_budget <= 0 or self.path_cap <= 0 or self.table_visit_cap <= 0:
            raise PipelineError("budgets must be positive")
        if self.mode not in MODES:
            raise PipelineError(f"mode must be one of {', '.join(MODES)}")
        if self.bytecode is None and self.fixture is None:
            raise PipelineError("either a bytecode file or a fixture is required")


@dataclass
class Target:
    """The contract under analysis and the chain data around it."""

    contract: int
    program: Program
    records: list[TransactionRecord]
    snapshots: dict[int, WorldState]

    @property
    def latest_block(self) -> int:
        return max(self.snapshots)

    def world(self, block: int | None = None) -> WorldState | None:
        w = self.snapshots.get(self.latest_block if block is None else block)
        return w.clone() if w is not None else None


def load_target(cfg: PipelineConfig) -> Target:
    records: list[TransactionRecord] = []
    snapshots: dict[int, WorldState] = {}
    contract = cfg.contract
    if cfg.fixture is not None:
        try:
            records, snapshots = load_fixture(cfg.fixture)
        except OSError as exc:
            raise PipelineError(f"cannot read fixture: {exc}") from exc
        contract = contract or fixture_contract(cfg.fixture)
    contract = contract or DEFAULT_CONTRACT
    code = None
    if cfg.bytecode is not None:
        try:
            code = load_bytecode(cfg.bytecode)
        except (OSError, ValueError) as exc:
            raise PipelineError(f"cannot read bytecode: {exc}") from exc
    if not snapshots:
        snapshots = {0: WorldState()}
    for w in snapshots.values():
        acct = w.get(contract)
        if code is not None and (acct is None or not acct.code):
            w.set_code(contract, code)
    if code is None:
        acct = snapshots[max(snapshots)].get(contract)
        if acct is None or not acct.code:
            raise PipelineError(f"no code for contract {hex_addr(contract)} in the fixture")
        code = acct.code
    return Target(contract, disassemble(code), records, snapshots)


@dataclass
class Analysis:
    findings: list[Finding] = field(default_factory=list)
    seeds: int = 0
    concolic_paths: int = 0
    fallback_used: bool = False
    explorations: dict[int, Exploration] = field(default_factory=dict)
    incomplete: bool = False
    notes: list[str] = field(default_factory=list)


@dataclass
class Outcome:
    """Everything one pipeline run produced."""

    target: Target
    instrumented: InstrumentedProgram
    analysis: Analysis | None = None
    exploits: list[tuple[Exploit, ExploitVerdict]] = field(default_factory=list)
    failures: list[SynthesisFailure] = field(default_factory=list)

    def deobfuscation_json(self) -> dict[str, Any]:
        ip = self.instrumented
        out: dict[str, Any] = {"contract": hex_addr(self.target.contract), "obfuscated": ip.obfuscated}
        out.update(ip.summary())
        if not ip.obfuscated:
            out["notice"] = "not obfuscated: no indirect jumps found"
        out["listing"] = ip.listing().splitlines()
        return out

    def reports_json(self) -> list[dict[str, Any]]:
        return [f.report().to_json() for f in self.analysis.findings] if self.analysis else []

    def exploits_json(self) -> dict[str, Any]:
        return {
            "exploits": [{"exploit": e.to_json(), "verdict": v.to_json()} for e, v in self.exploits],
            "failures": [f.to_json() for f in self.failures],
        }

    @property
    def incomplete(self) -> bool:
        return bool(self.analysis and self.analysis.incomplete)

    def summary_json(self) -> dict[str, Any]:
        a = self.analysis
        ip = self.instrumented
        return {
            "contract": hex_addr(self.target.contract),
            "obfuscated": ip.obfuscated,
            "indirectJumps": len(ip.indirect_jumps),
            "coverageBefore": ip.summary()["coverage_before"],
            "coverageAfter": ip.summary()["coverage_after"],
            "seeds": a.seeds if a else 0,
            "concolicPaths": a.concolic_paths if a else 0,
            "fallbackUsed": a.fallback_used if a else False,
            "exploration": {hex(pc): ex.to_json() | {"sinks": len(ex)} for pc, ex in sorted(a.explorations.items())}
            if a else {},
            "reports": len(self.reports_json()),
            "findings": [f.meta() for f in a.findings] if a else [],
            "exploits": len(self.exploits),
            "validExploits": sum(1 for _, v in self.exploits if v.valid),
            "synthesisFailures": len(self.failures),
            "incomplete": self.incomplete,
            "notes": list(a.notes) if a else [],
        }


def stage_deobfuscate(target: Target) -> InstrumentedProgram:
    return deobfuscate(target.program)


def stage_analyze(cfg: PipelineConfig, target: Target, ip: InstrumentedProgram,
                  risk: RiskConfig, deadline: float) -> Analysis:
    out = Analysis()
    findings: list[Finding] = []
    recorded = cfg.recorded_origin
    if cfg.mode != "fallback-only" and target.records:
        seeds, skipped = extract_seeds(target.records, target.contract, target.snapshots)
        out.seeds = len(seeds)
        for rep in skipped:
            out.notes.append(f"divergent replay skipped: {rep.record.hash} ({rep.reason})")
        for seed in seeds:
            world = target.snapshots.get(seed.block_number)
            paths = concolic_run(ip, seed, world, address=target.contract)
            out.concolic_paths += len(paths)
            if paths.reason:
                out.notes.append(f"seed {seed.tx_hash}: {paths.reason}")
            for p in paths:
                f = analyze_path(p, target.contract, risk, world, cfg.adversary, recorded)
                if f is not None:
                    findings.append(f)
            if recorded is None:
                recorded = seed.origin
    if recorded is None:
        recorded = next((r.sender for r in target.records if r.status == "success"), None)
    if cfg.mode == "fallback-only" or (cfg.mode == "auto" and not findings):
        out.fallback_used = True
        block = target.latest_block
        world = target.snapshots[block]
        for pc in call_sites(target.program):
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                out.incomplete = True
                out.notes.append("time budget exhausted before fallback finished")
                break
            xcfg = ExploreConfig(
                recorded_origin=recorded,
                table_visit_cap=cfg.table_visit_cap,
                path_cap=cfg.path_cap,
                time_budget=remaining,
                block_number=block,
            )
            ex = symbolic_explore(ip, world, target.contract, 0, pc, xcfg)
            out.explorations[pc] = ex
            if ex.incomplete and not ex:
                out.incomplete = True
            for p in ex:
                f = analyze_path(p, target.contract, risk, world, cfg.adversary)
                if f is not None:
                    findings.append(f)
    kept = dedupe(f for f in findings if f.validated is not False)
    for f in findings:
        if f.validated is False and f.call_pc not in {k.call_pc for k in kept}:
            out.notes.append(f"CALL {f.call_pc:#x}: preliminary validation failed; not reported")
    out.findings = kept
    if time.monotonic() > deadline:
        out.incomplete = True
    return out


def stage_exploit(cfg: PipelineConfig, target: Target, ip: InstrumentedProgram, analysis: Analysis,
                  risk: RiskConfig) -> tuple[list[tuple[Exploit, ExploitVerdict]], list[SynthesisFailure]]:
    pairs: list[tuple[Exploit, ExploitVerdict]] = []
    failures: list[SynthesisFailure] = []
    for f in analysis.findings:
        world = target.snapshots.get(f.path.block_number)
        if world is None:
            failures.append(SynthesisFailure(f.call_pc, None, "snapshot",
                                             f"verdict unavailable: no snapshot for block {f.path.block_number}"))
            continue
        exps, fails = synthesize(f, ip, world, cfg.adversary, risk)
        failures.extend(fails)
        for e in exps:
            pairs.append((e, validate_exploit(e, target.snapshots.get(e.block_number))))
    pairs.sort(key=lambda ev: (ev[0].call_pc, ev[0].expected.token))
    failures.sort(key=lambda x: (x.call_pc, x.token or 0))
    return pairs, failures


def risk_config(cfg: PipelineConfig) -> RiskConfig:
    return RiskConfig.from_file(cfg.risky_tokens) if cfg.risky_tokens is not None else RiskConfig()


def run(cfg: PipelineConfig, stages: str = "full") -> Outcome:
    """Run the pipeline up to ``stages`` (deobfuscate | analyze | full)."""
    deadline = time.monotonic() + cfg.time_budget
    target = load_target(cfg)
    ip = stage_deobfuscate(target)
    out = Outcome(target, ip)
    if stages == "deobfuscate":
        return out
    risk = risk_config(cfg)
    out.analysis = stage_analyze(cfg, target, ip, risk, deadline)
    if stages == "analyze":
        return out
    out.exploits, out.failures = stage_exploit(cfg, target, ip, out.analysis, risk)
    return out


def write_json(path: Path, doc: Any) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def write_outputs(out: Outcome, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "deobfuscation.json": out.deobfuscation_json(),
        "reports.json": out.reports_json(),
        "exploits.json": out.exploits_json(),
        "summary.json": out.summary_json(),
    }
    paths = []
    for name, doc in files.items():
        p = out_dir / name
        write_json(p, doc)
        paths.append(p)
    return paths
