"""Command-line entry point: every lifecycle operation as a subcommand.

Commands are thin adapters over the module operations; exit code 0 means
the operation's postcondition held, 1 means a refusal or violation (the
text names it), 2 means a verifier could not reach a verdict. With
--json, a stable machine report is printed instead of prose.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

from . import layout, schemas, yamlio
from . import closeout as closeout_ops
from . import engine
from . import gates as gate_ops
from . import ledger as ledger_ops
from . import state as state_ops
from . import verify as verify_ops
from .errors import EgretError
from .fsops import repo_write_lock, write_file_atomic
from .githist import GitHistory
from .model import (
    AuthorityRef,
    Blocker,
    BlockerKind,
    ClaimRecord,
    ClaimStatus,
    EvidenceRequirement,
    GateManifest,
    GateOutcome,
    Insight,
    InsightConsequence,
    InsightKind,
    PassCondition,
    ProvenanceRef,
    RqNode,
    TaskContract,
    Verdict,
    VersionStatus,
    WorkerBinding,
    parse_claim_class,
)

_DRAFT_INSIGHTS = ".egret-insight-drafts.yaml"


def _repo(args) -> Path:
    return Path(args.repo).resolve()


def _load(args):
    return state_ops.load_state(_repo(args), args.version)


def _emit(args, exit_code: int, human_text: str, report: dict | None = None) -> int:
    if args.json and report is not None:
        print(json.dumps(report, sort_keys=True, indent=2, default=str))
    elif human_text:
        print(human_text)
    return exit_code


# ---------------------------------------------------------------------------
# lifecycle commands
# ---------------------------------------------------------------------------


def cmd_init(args) -> int:
    state = state_ops.init_repo(
        _repo(args),
        big_rq=args.big_rq,
        falsification_boundary=args.falsification_boundary,
        autonomy_limits=args.autonomy_limits,
    )
    return _emit(
        args,
        0,
        f"initialized {state.version_id} at {_repo(args)}",
        {"version": state.version_id, "status": state.status.value},
    )


def _state_report(state) -> dict:
    return {
        "version": state.version_id,
        "status": state.status.value,
        "epoch_role": state.epoch_role,
        "focus_rq": state.focus_rq,
        "runnable_rqs": state.runnable_rqs,
        "blocked_rqs": state.blocked_rqs,
        "completed_rqs": state.completed_rqs,
        "rqs": sorted(state.spine.rq_ids()),
        "tasks": {t.task_id: t.status.value for t in state.contracts.values()},
        "gates": {
            gate_id: (gate.status or "pending")
            for gate_id, gate in sorted(state.gates.items())
        },
        "claims": {c.claim_id: c.status.value for c in state.ledger.claims},
        "blockers": {
            b.blocker_id: ("resolved" if b.resolution else b.kind.value)
            for b in state.blockers
        },
        "evidence_count": len(state.evidence.objects),
        "paper_binding": {
            "allowed": state.paper_binding_allowed,
            "reason": state.paper_binding_reason,
        },
    }


def cmd_status(args) -> int:
    state = _load(args)
    report = _state_report(state)
    lines = [
        f"{state.version_id} [{state.status.value}] {state.epoch_role}".rstrip(),
        f"  rqs: {len(state.spine.rqs)} (runnable: {', '.join(state.runnable_rqs) or 'none'})",
        f"  tasks: " + (
            ", ".join(f"{t.task_id}={t.status.value}" for t in state.contracts.values())
            or "none"
        ),
        f"  gates: " + (
            ", ".join(f"{g}={report['gates'][g]}" for g in report["gates"]) or "none"
        ),
        f"  claims: " + (
            ", ".join(f"{c.claim_id}={c.status.value}" for c in state.ledger.claims)
            or "none"
        ),
        f"  blockers: {len(state.blockers)} "
        f"({sum(1 for b in state.blockers if b.resolution is None)} unresolved)",
        f"  evidence objects: {len(state.evidence.objects)}",
    ]
    return _emit(args, 0, "\n".join(lines), report)


def cmd_next(args) -> int:
    state = _load(args)
    task = state_ops.next_runnable_task(state)
    if task is None:
        return _emit(args, 0, "no runnable task", {"task": None})
    return _emit(
        args,
        0,
        f"next runnable task: {task.task_id} (rq {task.rq_id}, role {task.routed_role or 'any'})",
        {"task": task.task_id, "rq": task.rq_id},
    )


def cmd_open(args) -> int:
    repo = _repo(args)
    with repo_write_lock(repo):
        direction = state_ops.load_direction(repo)
        seed = None
        if args.seed:
            predecessor = layout.read_current(repo)
            closeout = closeout_ops.load_closeout(repo, predecessor)
            seed = closeout.seed or closeout_ops.seed_next_version(closeout)
        state = state_ops.open_version(
            repo, args.version_id, direction, seed=seed, epoch_role=args.epoch_role
        )
    return _emit(
        args,
        0,
        f"opened {state.version_id} (carrying {len(state.blockers)} blockers)",
        {"version": state.version_id, "blockers": len(state.blockers)},
    )


# ---------------------------------------------------------------------------
# registration commands
# ---------------------------------------------------------------------------


def cmd_rq_register(args) -> int:
    repo = _repo(args)
    with repo_write_lock(repo):
        state = _load(args)
        node = RqNode(
            rq_id=args.id,
            hypothesis=args.hypothesis,
            falsification_condition=args.falsification,
            method_sketch=args.method,
            metric_spec=args.metric,
            parent_rq=args.parent,
        )
        state_ops.register_rq(state, node, runnable=not args.not_runnable)
        state_ops.save_state(repo, state)
    return _emit(args, 0, f"registered {args.id}", {"rq": args.id})


def cmd_task_register(args) -> int:
    repo = _repo(args)
    with repo_write_lock(repo):
        state = _load(args)
        contract = TaskContract(
            task_id=args.id,
            rq_id=args.rq,
            claim_class=parse_claim_class(args.claim_class) if args.claim_class else None,
            allowed_files=args.allowed or [],
            expected_artifacts=args.expected or [],
            forbidden_claims=args.forbidden or [],
            routed_role=args.role,
            done_condition=args.done_condition,
            timeout_seconds=args.timeout,
            exploratory=args.exploratory,
        )
        state_ops.register_task(state, contract)
        state_ops.save_state(repo, state)
    return _emit(args, 0, f"registered task {args.id}", {"task": args.id})


def cmd_gate_register(args) -> int:
    repo = _repo(args)
    checks = []
    for i, check_text in enumerate(args.check or []):
        doc = yamlio.load_mapping(check_text.encode("utf-8"), f"--check[{i}]")
        checks.append(doc)
    gate_doc = {
        "gate_id": args.id,
        "claim_class": args.claim_class,
        "claim_scope": args.scope,
        "pass_condition": args.pass_condition,
        "required_artifacts": checks,
        "forbidden_evidence": args.forbidden or [],
        "audit_note": args.audit_note,
    }
    gate = schemas.parse_gate(yamlio.dump(gate_doc), "--gate")
    with repo_write_lock(repo):
        state = _load(args)
        state_ops.register_gate(state, gate)
        state_ops.save_state(repo, state)
    return _emit(args, 0, f"registered gate {args.id}", {"gate": args.id})


def cmd_claim_register(args) -> int:
    repo = _repo(args)
    required = []
    for spec in args.evidence or []:
        artifact_type, sep, gate_id = spec.partition(":")
        if not sep or not gate_id:
            raise EgretError(f"--evidence takes TYPE:GATE_ID, got {spec!r}")
        required.append(EvidenceRequirement(artifact_type, gate_id))
    with repo_write_lock(repo):
        state = _load(args)
        record = ClaimRecord(
            claim_id=args.id,
            rq_link=args.rq,
            claim_class=parse_claim_class(args.claim_class),
            statement=args.statement,
            required_evidence=required,
            scope=args.scope,
        )
        ledger_ops.register_claim(state.ledger, record, state)
        state_ops.save_state(repo, state)
    return _emit(args, 0, f"registered claim {args.id}", {"claim": args.id})


def cmd_apply(args) -> int:
    """Register a whole plan file (rqs, gates, claims, tasks) in one batch."""
    repo = _repo(args)
    doc = yamlio.load_mapping(Path(args.plan).read_bytes(), args.plan)
    rqs = schemas.parse_spine(
        yamlio.dump({"rqs": doc.get("rqs", [])}), f"{args.plan}:rqs"
    ).rqs
    gates = [
        schemas.parse_gate(yamlio.dump(item), f"{args.plan}:gates[{i}]")
        for i, item in enumerate(doc.get("gates", []) or [])
    ]
    claims = schemas.parse_ledger(
        yamlio.dump({"claims": doc.get("claims", [])}), f"{args.plan}:claims"
    ).claims
    tasks = schemas.parse_tasks(
        yamlio.dump({"tasks": doc.get("tasks", [])}), f"{args.plan}:tasks"
    )
    with repo_write_lock(repo):
        state = _load(args)
        for rq in rqs:
            state_ops.register_rq(state, rq)
        for gate in gates:
            state_ops.register_gate(state, gate)
        for claim in claims:
            ledger_ops.register_claim(state.ledger, claim, state)
        for task in tasks:
            state_ops.register_task(state, task)
        state_ops.save_state(repo, state)
    summary = {
        "rqs": [r.rq_id for r in rqs],
        "gates": [g.gate_id for g in gates],
        "claims": [c.claim_id for c in claims],
        "tasks": [t.task_id for t in tasks],
    }
    return _emit(
        args,
        0,
        f"applied plan: {len(rqs)} rqs, {len(gates)} gates, "
        f"{len(claims)} claims, {len(tasks)} tasks",
        summary,
    )


def cmd_blocker_register(args) -> int:
    repo = _repo(args)
    with repo_write_lock(repo):
        state = _load(args)
        blocker = Blocker(
            blocker_id=args.id,
            kind=BlockerKind(args.kind),
            description=args.description,
            affected_claims=args.claims or [],
            affected_rqs=args.rqs or [],
        )
        if state.blocker_by_id(args.id) is not None:
            raise EgretError(f"blocker {args.id} already registered")
        state.blockers.append(blocker)
        state_ops.save_state(repo, state)
    return _emit(args, 0, f"registered blocker {args.id}", {"blocker": args.id})


def cmd_blocker_resolve(args) -> int:
    repo = _repo(args)
    with repo_write_lock(repo):
        state = _load(args)
        state_ops.resolve_blocker(state, args.id, args.note)
        state_ops.save_state(repo, state)
    return _emit(args, 0, f"resolved blocker {args.id}", {"blocker": args.id})


# ---------------------------------------------------------------------------
# execution commands
# ---------------------------------------------------------------------------


def _binding(args) -> WorkerBinding:
    return WorkerBinding(
        routed_role=args.role,
        invocation=shlex.split(args.worker_cmd),
        timeout=args.timeout,
    )


def _run_report(result) -> dict:
    return {
        "task": result.worker_report.task_id if result.worker_report else None,
        "disposition": (
            result.worker_report.exit_disposition if result.worker_report else None
        ),
        "rejection": result.rejection,
        "evidence_appended": [o.path for o in result.delta.appended_evidence],
        "decisions": {g: d.outcome.value for g, d in result.decisions.items()},
        "claims": result.claim_outcomes,
        "blockers": [b.blocker_id for b in result.delta.new_blockers],
        "closeout_ready": result.trigger is not None,
    }


def cmd_run(args) -> int:
    state = _load(args)
    result = engine.execute_task(_repo(args), state, args.task_id, _binding(args))
    report = _run_report(result)
    if result.rejection:
        return _emit(
            args,
            1,
            f"task {args.task_id} rejected as invalid research work: "
            + "; ".join(result.rejection),
            report,
        )
    lines = [f"task {args.task_id}: {result.worker_report.exit_disposition}"]
    for gate_id, decision in sorted(result.decisions.items()):
        lines.append(f"  gate {gate_id}: {decision.outcome.value}")
    for claim_id, outcome in sorted(result.claim_outcomes.items()):
        lines.append(f"  claim {claim_id}: {outcome}")
    for blocker in result.delta.new_blockers:
        lines.append(f"  blocker {blocker.blocker_id}: {blocker.description}")
    if result.trigger is not None:
        lines.append("  version is ready for closeout")
    ok = result.worker_report.exit_disposition == "succeeded" and not result.delta.new_blockers
    return _emit(args, 0 if ok else 1, "\n".join(lines), report)


def cmd_fastpath(args) -> int:
    state = _load(args)
    result = engine.fastpath_task(_repo(args), state, args.task_id, _binding(args))
    report = _run_report(result)
    ok = (
        result.worker_report is not None
        and result.worker_report.exit_disposition == "succeeded"
        and not result.delta.new_blockers
    )
    text = (
        f"fast path {args.task_id}: "
        f"{result.worker_report.exit_disposition if result.worker_report else 'rejected'}; "
        f"{len(result.delta.appended_evidence)} evidence objects; ledger untouched"
    )
    return _emit(args, 0 if ok else 1, text, report)


def cmd_gate_eval(args) -> int:
    repo = _repo(args)
    with repo_write_lock(repo):
        state = _load(args)
        gate = state.gates.get(args.gate_id)
        if gate is None:
            raise EgretError(f"unknown gate {args.gate_id}")
        decision = gate_ops.evaluate_gate(
            gate, repo, evidence=state.evidence, seq=state.next_sequence()
        )
        mirror = gate_ops.record_decision(state, repo, gate, decision)
        state_ops.register_evidence(state, repo, mirror)
        state_ops.save_state(repo, state)
    report = {
        "gate": args.gate_id,
        "outcome": decision.outcome.value,
        "contradiction": decision.contradiction,
        "checks": [
            {"check": r.check_id, "outcome": r.outcome.value, "matched": r.matched_paths}
            for r in decision.per_check_results
        ],
        "detail": decision.detail,
    }
    text = f"gate {args.gate_id}: {decision.outcome.value}"
    if decision.detail:
        text += f" ({decision.detail})"
    return _emit(args, 0, text, report)


def cmd_decide(args) -> int:
    repo = _repo(args)
    with repo_write_lock(repo):
        state = _load(args)
        gate = state.gates.get(args.gate_id)
        if gate is None:
            raise EgretError(f"unknown gate {args.gate_id}")
        decision = gate_ops.human_decision(
            gate,
            GateOutcome(args.outcome),
            reviewer=args.reviewer,
            scope=args.scope,
            allowed_claim=args.allowed_claim,
            seq=state.next_sequence(),
        )
        mirror = gate_ops.record_decision(state, repo, gate, decision)
        state_ops.register_evidence(state, repo, mirror)
        state_ops.save_state(repo, state)
    return _emit(
        args,
        0,
        f"recorded human decision on {args.gate_id}: {args.outcome} (by {args.reviewer})",
        {"gate": args.gate_id, "outcome": args.outcome, "reviewer": args.reviewer},
    )


def cmd_claim_transition(args) -> int:
    repo = _repo(args)
    kind, sep, ref = args.authority.partition(":")
    if not sep:
        raise EgretError("--authority takes KIND:REF (gate_decision, human, evidence)")
    with repo_write_lock(repo):
        state = _load(args)
        ledger_ops.transition_claim(
            state.ledger,
            args.claim_id,
            ClaimStatus(args.to),
            AuthorityRef(kind, ref),
            state=state,
        )
        state_ops.save_state(repo, state)
    return _emit(
        args,
        0,
        f"claim {args.claim_id} -> {args.to}",
        {"claim": args.claim_id, "status": args.to},
    )


def cmd_claim_chain(args) -> int:
    state = _load(args)
    chain, violations = ledger_ops.validate_chain(state.ledger, args.claim_id, state)
    if violations:
        return _emit(
            args,
            1,
            f"chain incomplete for {args.claim_id}:\n  " + "\n  ".join(violations),
            {"claim": args.claim_id, "violations": violations},
        )
    report = {
        "claim": chain.claim_id,
        "rq": chain.rq_link,
        "evidence_contract": [
            {"artifact_type": r.artifact_type, "gate_id": r.gate_id}
            for r in chain.evidence_contract
        ],
        "artifacts": chain.artifact_refs,
        "gate_decisions": chain.gate_decision_refs,
        "paper_scope": chain.paper_scope,
    }
    text = (
        f"{chain.claim_id} -> {chain.rq_link} -> "
        f"[{', '.join(r.gate_id for r in chain.evidence_contract)}] -> "
        f"{len(chain.artifact_refs)} artifacts -> "
        f"[{', '.join(chain.gate_decision_refs)}] -> {chain.paper_scope}"
    )
    return _emit(args, 0, text, report)


# ---------------------------------------------------------------------------
# closeout and binding
# ---------------------------------------------------------------------------


def _draft_path(repo: Path) -> Path:
    return repo / _DRAFT_INSIGHTS


def _load_drafts(repo: Path) -> list[Insight]:
    path = _draft_path(repo)
    if not path.is_file():
        return []
    doc = yamlio.load_mapping(path.read_bytes(), str(path))
    drafts = []
    for item in doc.get("insights", []):
        consequence = item.get("consequence")
        drafts.append(
            Insight(
                insight_id=item["insight_id"],
                kind=InsightKind(item["kind"]),
                description=item.get("description", ""),
                provenance=ProvenanceRef(
                    item["provenance"]["kind"], item["provenance"]["ref"]
                ),
                consequence=InsightConsequence(consequence) if consequence else None,
                no_action_rationale=item.get("no_action_rationale", ""),
            )
        )
    return drafts


def _save_drafts(repo: Path, insights: list[Insight]) -> None:
    write_file_atomic(
        _draft_path(repo),
        yamlio.dump({"insights": [schemas.insight_to_doc(i) for i in insights]}),
    )


def cmd_closeout_collect(args) -> int:
    repo = _repo(args)
    state = _load(args)
    drafts = closeout_ops.collect_insights(state)
    _save_drafts(repo, drafts)
    lines = [f"{len(drafts)} draft insights (assign consequences, then finalize):"]
    for insight in drafts:
        lines.append(f"  {insight.insight_id} [{insight.kind.value}] {insight.description}")
    return _emit(
        args,
        0,
        "\n".join(lines),
        {"drafts": [schemas.insight_to_doc(i) for i in drafts]},
    )


def cmd_closeout_assign(args) -> int:
    repo = _repo(args)
    drafts = _load_drafts(repo)
    for insight in drafts:
        if insight.insight_id == args.insight_id:
            insight.consequence = InsightConsequence(args.consequence)
            insight.no_action_rationale = args.rationale
            _save_drafts(repo, drafts)
            return _emit(
                args,
                0,
                f"{args.insight_id}: consequence {args.consequence}",
                {"insight": args.insight_id, "consequence": args.consequence},
            )
    raise EgretError(f"no draft insight {args.insight_id}; run closeout collect first")


def cmd_closeout_finalize(args) -> int:
    repo = _repo(args)
    if not args.yes:
        raise EgretError("closeout finalize is irreversible; pass --yes to confirm")
    irrelevant = {}
    for spec in args.irrelevant or []:
        key, sep, note = spec.partition("=")
        if not sep:
            raise EgretError("--irrelevant takes ITEM=NOTE")
        irrelevant[key] = note
    with repo_write_lock(repo):
        state = _load(args)
        insights = _load_drafts(repo)
        closeout = closeout_ops.produce_closeout(
            repo, state, insights, VersionStatus(args.status), irrelevant
        )
    if _draft_path(repo).is_file():
        _draft_path(repo).unlink()
    return _emit(
        args,
        0,
        f"{closeout.version_id} closed as {closeout.final_status.value}; "
        f"{len(closeout.unresolved_blockers)} blockers carried forward",
        {
            "version": closeout.version_id,
            "final_status": closeout.final_status.value,
            "unresolved_blockers": [b.blocker_id for b in closeout.unresolved_blockers],
            "insights": len(closeout.insights),
        },
    )


def cmd_closeout_seed(args) -> int:
    repo = _repo(args)
    version_id = args.version or layout.read_current(repo)
    closeout = closeout_ops.load_closeout(repo, version_id)
    seed = closeout.seed or closeout_ops.seed_next_version(closeout)
    report = {
        "from_version": seed.from_version,
        "candidate_rqs": [c.candidate_id for c in seed.candidate_rqs],
        "carried_blockers": [b.blocker_id for b in seed.carried_blockers],
        "carried_claims": [
            {"claim": cid, "status": status.value} for cid, status in seed.carried_claims
        ],
        "frontier_items": seed.frontier_items,
    }
    text = (
        f"seed from {seed.from_version}: {len(seed.candidate_rqs)} candidate RQs, "
        f"{len(seed.carried_blockers)} blockers, {len(seed.carried_claims)} carried claims"
    )
    return _emit(args, 0, text, report)


def cmd_bind(args) -> int:
    repo = _repo(args)
    if not args.yes:
        raise EgretError("paper binding is a publication step; pass --yes to confirm")
    with repo_write_lock(repo):
        state = _load(args)
        if state.status not in (
            VersionStatus.ACTIVE,
            VersionStatus.PAPER_BINDING_READY,
        ):
            raise EgretError(
                f"version {state.version_id} is {state.status.value}; "
                "binding needs an active or paper_binding_ready version"
            )
        binding = ledger_ops.project_paper_binding(state.ledger, state)
        state.ledger.paper_binding = binding
        state.paper_binding_allowed = binding.allowed
        state.paper_binding_reason = binding.reason
        state_ops.save_state(repo, state)
    report = {
        "allowed": binding.allowed,
        "reason": binding.reason,
        "admitted_claims": binding.admitted_claims,
    }
    if not binding.allowed:
        return _emit(args, 1, f"binding refused: {binding.reason}", report)
    return _emit(
        args,
        0,
        "paper binding allowed; admitted claims:\n  " + "\n  ".join(binding.admitted_claims),
        report,
    )


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


def cmd_verify_invariants(args) -> int:
    repo = _repo(args)
    reports = verify_ops.verify_all(repo, GitHistory(repo))
    lines = []
    for report in reports:
        lines.append(f"{report.invariant.value}: {report.verdict.value}")
        for ref, description in report.violations:
            lines.append(f"  {ref}: {description}")
    machine = {
        r.invariant.value: {
            "verdict": r.verdict.value,
            "violations": [list(v) for v in r.violations],
        }
        for r in reports
    }
    if any(r.verdict is Verdict.FAIL for r in reports):
        code = 1
    elif any(r.verdict is Verdict.INDETERMINATE for r in reports):
        code = 2
    else:
        code = 0
    return _emit(args, code, "\n".join(lines), machine)


def cmd_verify_package(args) -> int:
    repo = _repo(args)
    results = verify_ops.verify_package(repo, Path(args.manifest))
    lines = []
    for result in results:
        marker = "ok" if result.ok() else "FAIL"
        lines.append(
            f"{result.category}: {result.checks_passed}/{result.checks_run} {marker}"
        )
        for failure in result.failures:
            lines.append(f"  {failure}")
        for warning in result.warnings:
            lines.append(f"  warning: {warning}")
    machine = {
        r.category: {
            "checks_run": r.checks_run,
            "checks_passed": r.checks_passed,
            "failures": r.failures,
            "warnings": r.warnings,
        }
        for r in results
    }
    code = 0 if all(r.ok() for r in results) else 1
    return _emit(args, code, "\n".join(lines), machine)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egret",
        description="evidence-gated research state runtime",
    )
    parser.add_argument("--repo", default=".", help="repository root (default: cwd)")
    parser.add_argument("--version", default=None, help="version id (default: CURRENT)")
    parser.add_argument("--json", action="store_true", help="emit a machine report")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="materialize the layout and adoption files")
    p.add_argument("--big-rq", default="State the top-level research question here.")
    p.add_argument(
        "--falsification-boundary",
        default="State what evidence would falsify the direction.",
    )
    p.add_argument(
        "--autonomy-limits",
        default="State what workers may never change without human sign-off.",
    )
    p.set_defaults(func=cmd_init)

    sub.add_parser("status", help="show the current version state").set_defaults(
        func=cmd_status
    )
    sub.add_parser("next", help="show the next runnable task").set_defaults(
        func=cmd_next
    )

    p = sub.add_parser("open", help="open the next version from a closeout")
    p.add_argument("version_id")
    p.add_argument("--seed", action="store_true", help="seed from the predecessor closeout")
    p.add_argument("--epoch-role", default="")
    p.set_defaults(func=cmd_open)

    p = sub.add_parser("rq", help="research question registry")
    rq_sub = p.add_subparsers(dest="subcommand", required=True)
    p = rq_sub.add_parser("register")
    p.add_argument("--id", required=True)
    p.add_argument("--hypothesis", default="")
    p.add_argument("--falsification", default="")
    p.add_argument("--method", default="")
    p.add_argument("--metric", default="")
    p.add_argument("--parent", default=None)
    p.add_argument("--not-runnable", action="store_true")
    p.set_defaults(func=cmd_rq_register)

    p = sub.add_parser("task", help="task contract registry")
    task_sub = p.add_subparsers(dest="subcommand", required=True)
    p = task_sub.add_parser("register")
    p.add_argument("--id", required=True)
    p.add_argument("--rq", required=True)
    p.add_argument("--claim-class", default=None)
    p.add_argument("--allowed", action="append", help="allowed file glob (repeatable)")
    p.add_argument("--expected", action="append", help="expected artifact glob (repeatable)")
    p.add_argument("--forbidden", action="append", help="forbidden claim id or pattern")
    p.add_argument("--role", default="")
    p.add_argument("--done-condition", default="")
    p.add_argument("--timeout", type=int, default=None)
    p.add_argument("--exploratory", action="store_true")
    p.set_defaults(func=cmd_task_register)

    p = sub.add_parser("gate", help="gate manifests and evaluation")
    gate_sub = p.add_subparsers(dest="subcommand", required=True)
    p = gate_sub.add_parser("register")
    p.add_argument("--id", required=True)
    p.add_argument("--claim-class", default=None)
    p.add_argument("--scope", default="")
    p.add_argument("--pass-condition", choices=["all", "any"], default="all")
    p.add_argument(
        "--check",
        action="append",
        help="one check as a YAML mapping, e.g. '{path: \"runs/*.json\", check: existence}'",
    )
    p.add_argument("--forbidden", action="append", help="forbidden evidence pattern")
    p.add_argument("--audit-note", default="")
    p.set_defaults(func=cmd_gate_register)
    p = gate_sub.add_parser("eval")
    p.add_argument("gate_id")
    p.set_defaults(func=cmd_gate_eval)

    p = sub.add_parser("decide", help="record a human gate decision")
    p.add_argument("gate_id")
    p.add_argument("--outcome", choices=[o.value for o in GateOutcome], required=True)
    p.add_argument("--reviewer", required=True)
    p.add_argument("--scope", required=True)
    p.add_argument("--allowed-claim", default="")
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("claim", help="claim ledger operations")
    claim_sub = p.add_subparsers(dest="subcommand", required=True)
    p = claim_sub.add_parser("register")
    p.add_argument("--id", required=True)
    p.add_argument("--rq", required=True)
    p.add_argument("--claim-class", required=True)
    p.add_argument("--statement", default="")
    p.add_argument("--scope", default="none")
    p.add_argument("--evidence", action="append", help="TYPE:GATE_ID (repeatable)")
    p.set_defaults(func=cmd_claim_register)
    p = claim_sub.add_parser("transition")
    p.add_argument("claim_id")
    p.add_argument("--to", choices=[s.value for s in ClaimStatus], required=True)
    p.add_argument("--authority", required=True, help="KIND:REF")
    p.set_defaults(func=cmd_claim_transition)
    p = claim_sub.add_parser("chain")
    p.add_argument("claim_id")
    p.set_defaults(func=cmd_claim_chain)

    p = sub.add_parser("apply", help="register a plan file in one batch")
    p.add_argument("--plan", required=True, help="YAML file with rqs/gates/claims/tasks")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("blocker", help="blocker registry")
    blocker_sub = p.add_subparsers(dest="subcommand", required=True)
    p = blocker_sub.add_parser("register")
    p.add_argument("--id", required=True)
    p.add_argument("--kind", choices=[k.value for k in BlockerKind], required=True)
    p.add_argument("--description", required=True)
    p.add_argument("--claims", action="append")
    p.add_argument("--rqs", action="append")
    p.set_defaults(func=cmd_blocker_register)
    p = blocker_sub.add_parser("resolve")
    p.add_argument("--id", required=True)
    p.add_argument("--note", required=True)
    p.set_defaults(func=cmd_blocker_resolve)

    p = sub.add_parser("run", help="execute one task under its contract")
    p.add_argument("task_id")
    p.add_argument("--worker-cmd", required=True)
    p.add_argument("--role", default="")
    p.add_argument("--timeout", type=int, default=3600)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fastpath", help="exploratory run; never feeds admission")
    p.add_argument("task_id")
    p.add_argument("--worker-cmd", required=True)
    p.add_argument("--role", default="")
    p.add_argument("--timeout", type=int, default=3600)
    p.set_defaults(func=cmd_fastpath)

    p = sub.add_parser("closeout", help="end-of-version synthesis")
    closeout_sub = p.add_subparsers(dest="subcommand", required=True)
    closeout_sub.add_parser("collect").set_defaults(func=cmd_closeout_collect)
    p = closeout_sub.add_parser("assign")
    p.add_argument("insight_id")
    p.add_argument(
        "--consequence", choices=[c.value for c in InsightConsequence], required=True
    )
    p.add_argument("--rationale", default="")
    p.set_defaults(func=cmd_closeout_assign)
    p = closeout_sub.add_parser("finalize")
    p.add_argument(
        "--status",
        choices=[
            VersionStatus.CLOSED_STABLE.value,
            VersionStatus.CLOSED_NEGATIVE.value,
            VersionStatus.CLOSED_SUCCESS.value,
            VersionStatus.PAPER_BINDING_READY.value,
        ],
        required=True,
    )
    p.add_argument("--irrelevant", action="append", help="ITEM=NOTE (repeatable)")
    p.add_argument("--yes", action="store_true")
    p.set_defaults(func=cmd_closeout_finalize)
    closeout_sub.add_parser("seed").set_defaults(func=cmd_closeout_seed)

    p = sub.add_parser("bind", help="project admitted claims into the paper binding")
    p.add_argument("--yes", action="store_true")
    p.set_defaults(func=cmd_bind)

    p = sub.add_parser("verify", help="independent invariant and package checks")
    verify_sub = p.add_subparsers(dest="subcommand", required=True)
    verify_sub.add_parser("invariants").set_defaults(func=cmd_verify_invariants)
    p = verify_sub.add_parser("package")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_verify_package)

    return parser


_PARSER: list = []


def main(argv=None) -> int:
    if not _PARSER:
        _PARSER.append(build_parser())
    args = _PARSER[0].parse_args(argv)
    try:
        return args.func(args)
    except EgretError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
