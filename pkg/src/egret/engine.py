"""One-task execution: contract check, worker run, evidence, gates, claims.

The engine is the only place where worker output turns into state. It
snapshots the tree before and after the worker, so produced artifacts and
out-of-contract writes are observed, never self-reported. All resulting
changes land in a single atomic save; the returned delta is the faithful
record of what changed.
"""

from __future__ import annotations

import copy
import os
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import layout, schemas
from . import state as state_ops
from .errors import UsageError
from .fsops import repo_write_lock, sha256_file, stat_tree, glob_match, match_tree
from .gates import (
    effective_decisions,
    evaluate_gate,
    gate_is_terminal,
    record_decision,
    resolve_gate_conflict,
)
from .ledger import transition_claim
from .errors import AdmissionError, TransitionError
from .model import (
    AuthorityRef,
    Blocker,
    BlockerKind,
    ClaimRecord,
    ClaimStatus,
    ClaimTransition,
    CloseoutTrigger,
    EvidenceKind,
    EvidenceObject,
    GateDecision,
    GateManifest,
    GateOutcome,
    GATE_OUTCOME_RANK,
    StateDelta,
    TaskContract,
    TaskStatus,
    TaskStatusUpdate,
    VersionState,
    VersionStatus,
    WorkerBinding,
    WorkerReport,
)

DEFAULT_TIMEOUT = 3600


@dataclass
class ExecutionResult:
    state: VersionState
    delta: StateDelta
    worker_report: WorkerReport | None = None
    decisions: dict[str, GateDecision] = field(default_factory=dict)
    claim_outcomes: dict[str, str] = field(default_factory=dict)
    rejection: list[str] = field(default_factory=list)
    trigger: CloseoutTrigger | None = None


def validate_contract(task: TaskContract, state: VersionState) -> list[str]:
    """Empty list means valid research work; otherwise every missing binding."""
    return state_ops.contract_violations(task, state)


def linked_claims(state: VersionState, task: TaskContract) -> list[ClaimRecord]:
    """Claims a task may move: same RQ, same class, not forbidden by contract."""
    picked = []
    for claim in state.ledger.claims:
        if claim.rq_link != task.rq_id or claim.claim_class is not task.claim_class:
            continue
        if claim.status not in (
            ClaimStatus.PLANNED,
            ClaimStatus.DRAFT_ONLY,
            ClaimStatus.BLOCKED,
        ):
            continue
        if _claim_forbidden(task, claim):
            continue
        picked.append(claim)
    return picked


def _claim_forbidden(task: TaskContract, claim: ClaimRecord) -> bool:
    for pattern in task.forbidden_claims:
        if pattern == claim.claim_id or glob_match(pattern, claim.claim_id):
            return True
        if pattern and pattern in claim.statement:
            return True
    return False


def classify_artifact(path: str) -> EvidenceKind:
    name = path.rsplit("/", 1)[-1].lower()
    if "manifest" in name:
        return EvidenceKind.MANIFEST
    if name.endswith(".log"):
        return EvidenceKind.LOG
    if "hash" in name or "checksum" in name:
        return EvidenceKind.HASH_RECORD
    return EvidenceKind.RUN_REPORT


def contract_scratch_paths(repo_root: Path, state: VersionState, task: TaskContract):
    rq_dir = layout.rqs_dir(repo_root, state.version_id) / (task.rq_id or "unbound")
    contract_path = rq_dir / f"{task.task_id}.contract.yaml"
    report_path = rq_dir / f"{task.task_id}.report.txt"
    return contract_path, report_path


def materialize_contract(
    repo_root: Path, state: VersionState, task: TaskContract
) -> tuple[Path, Path]:
    """Write the contract where the worker will find it; report path inside."""
    contract_path, report_path = contract_scratch_paths(repo_root, state, task)
    contract_path.parent.mkdir(parents=True, exist_ok=True)
    doc = schemas._task_to_doc(task)
    doc["version_id"] = state.version_id
    doc["report_path"] = layout.rel(repo_root, report_path)
    from . import yamlio

    contract_path.write_bytes(yamlio.dump(doc))
    return contract_path, report_path


def invoke_worker(
    repo_root: Path,
    state: VersionState,
    task: TaskContract,
    binding: WorkerBinding,
    contract_path: Path,
    report_path: Path,
) -> str:
    """Run the executor; exit code 0 is success, anything else is failure."""
    mapping = {
        "contract": str(contract_path),
        "repo": str(repo_root),
        "version": state.version_id,
        "task": task.task_id,
        "report": str(report_path),
    }
    argv = [arg.format(**mapping) for arg in binding.invocation]
    env = dict(os.environ)
    env.update(binding.environment)
    env.update(
        {
            "EGRET_REPO_ROOT": str(repo_root),
            "EGRET_VERSION_ID": state.version_id,
            "EGRET_TASK_ID": task.task_id,
            "EGRET_CONTRACT_PATH": str(contract_path),
            "EGRET_REPORT_PATH": str(report_path),
        }
    )
    timeout = task.timeout_seconds or binding.timeout or DEFAULT_TIMEOUT
    try:
        # workers communicate purely through the file system; their
        # stdout/stderr are not part of the contract. A blocking wait with
        # a kill timer avoids the polling loop subprocess.run uses for
        # timeouts.
        proc = subprocess.Popen(
            argv,
            cwd=repo_root,
            env=env,
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
    except OSError as exc:
        raise UsageError(f"worker invocation failed to start: {exc}") from exc
    timed_out = threading.Event()

    def _kill():
        timed_out.set()
        proc.kill()

    timer = threading.Timer(timeout, _kill)
    timer.start()
    try:
        returncode = proc.wait()
    finally:
        timer.cancel()
    if timed_out.is_set():
        return "failed"
    return "succeeded" if returncode == 0 else "failed"


def execute_task(
    repo_root: Path,
    state: VersionState,
    task_id: str,
    binding: WorkerBinding,
    route_claims: bool = True,
) -> ExecutionResult:
    """Run one task contract end to end and persist the outcome atomically.

    With ``route_claims`` off this is the fast path: evidence is still
    registered (monotonicity holds) but no gate feeds the ledger.
    """
    repo_root = Path(repo_root)
    with repo_write_lock(repo_root):
        return _execute_locked(repo_root, state, task_id, binding, route_claims)


def _execute_locked(
    repo_root: Path,
    state: VersionState,
    task_id: str,
    binding: WorkerBinding,
    route_claims: bool,
) -> ExecutionResult:
    if state.status is not VersionStatus.ACTIVE:
        raise UsageError(
            f"version {state.version_id} is {state.status.value}; tasks run only when active"
        )
    task = state.contracts.get(task_id)
    if task is None:
        raise UsageError(f"unknown task {task_id}")
    if task.status is not TaskStatus.QUEUED:
        raise UsageError(f"task {task_id} is {task.status.value}, not queued")

    new_state = copy.deepcopy(state)
    task = new_state.contracts[task_id]
    delta = StateDelta()

    violations = validate_contract(task, new_state)
    if violations:
        update = TaskStatusUpdate(
            task_id, TaskStatus.REJECTED, blocker_reason="; ".join(violations)
        )
        _apply_task_update(new_state, update)
        delta.task_status_updates.append(update)
        state_ops.save_state(repo_root, new_state)
        return ExecutionResult(state=new_state, delta=delta, rejection=violations)

    contract_path, report_path = materialize_contract(repo_root, new_state, task)
    report_rel = layout.rel(repo_root, report_path)
    before = stat_tree(repo_root, skip_state_files=True)

    disposition = invoke_worker(
        repo_root, new_state, task, binding, contract_path, report_path
    )

    after = stat_tree(repo_root, skip_state_files=True)
    changed = sorted(
        rel
        for rel, sig in after.items()
        if before.get(rel) != sig and rel != report_rel
    )
    changed_digests = {rel: sha256_file(repo_root / rel) for rel in changed}

    report_text = ""
    report_exists = report_path.is_file()
    if report_exists:
        try:
            report_text = report_path.read_text(encoding="utf-8")
        except UnicodeDecodeError:
            report_text = "<binary report>"

    out_of_contract = [
        rel
        for rel in changed
        if not any(glob_match(pattern, rel) for pattern in task.allowed_files)
    ]
    report = WorkerReport(
        task_id=task_id,
        exit_disposition=disposition,
        produced_artifacts=[(rel, changed_digests[rel]) for rel in changed],
        report_text=report_text,
        out_of_contract_writes=out_of_contract,
        report_path=report_rel if report_exists else None,
    )

    # produced artifacts and the worker report enter the evidence base
    # unconditionally; failures may not erase what was produced
    for i, rel in enumerate(changed):
        obj = EvidenceObject(
            evidence_id=f"EV_{task_id}_a{i:02d}",
            kind=classify_artifact(rel),
            path=rel,
            digest="",
            producing_task=task_id,
            scope=f"task:{task_id}",
        )
        state_ops.register_evidence(new_state, repo_root, obj)
        delta.appended_evidence.append(obj)
    if report_exists:
        obj = EvidenceObject(
            evidence_id=f"EV_{task_id}_report",
            kind=EvidenceKind.WORKER_REPORT,
            path=report_rel,
            digest="",
            producing_task=task_id,
            scope=f"task:{task_id}",
        )
        state_ops.register_evidence(new_state, repo_root, obj)
        delta.appended_evidence.append(obj)

    missing_expected = [
        pattern
        for pattern in task.expected_artifacts
        if not match_tree(repo_root, pattern)
    ]

    result = ExecutionResult(state=new_state, delta=delta, worker_report=report)

    failure_blocker = None
    if disposition == "failed":
        failure_blocker = Blocker(
            blocker_id=f"B_{task_id}_exec",
            kind=BlockerKind.EXECUTION_FAILURE,
            description=f"worker for {task_id} exited with failure",
        )
    elif not report_exists:
        failure_blocker = Blocker(
            blocker_id=f"B_{task_id}_report",
            kind=BlockerKind.EXECUTION_FAILURE,
            description=f"worker for {task_id} produced no report",
        )
    elif missing_expected:
        failure_blocker = Blocker(
            blocker_id=f"B_{task_id}_missing",
            kind=BlockerKind.MISSING_ARTIFACT,
            description=(
                f"expected artifacts missing after {task_id}: "
                + ", ".join(missing_expected)
            ),
        )
    elif out_of_contract:
        failure_blocker = Blocker(
            blocker_id=f"B_{task_id}_scope",
            kind=BlockerKind.EXECUTION_FAILURE,
            description=(
                f"{task_id} wrote outside allowed_files: " + ", ".join(out_of_contract)
            ),
        )

    if failure_blocker is not None:
        claims = linked_claims(new_state, task) if route_claims else []
        failure_blocker.affected_claims = [c.claim_id for c in claims]
        failure_blocker.affected_rqs = [task.rq_id] if task.rq_id else []
        new_state.blockers.append(failure_blocker)
        delta.new_blockers.append(failure_blocker)
        update = TaskStatusUpdate(
            task_id, TaskStatus.BLOCKED, blocker_reason=failure_blocker.description
        )
        _apply_task_update(new_state, update)
        delta.task_status_updates.append(update)
        state_ops.save_state(repo_root, new_state)
        result.trigger = maybe_close_version(new_state)
        return result

    if route_claims:
        _route_claims(repo_root, new_state, task, delta, result)

    update = TaskStatusUpdate(task_id, TaskStatus.DONE, result_ref=report_rel)
    _apply_task_update(new_state, update)
    delta.task_status_updates.append(update)

    state_ops.save_state(repo_root, new_state)
    result.trigger = maybe_close_version(new_state)
    return result


def _apply_task_update(state: VersionState, update: TaskStatusUpdate) -> None:
    task = state.contracts[update.task_id]
    task.status = update.status
    if update.result_ref is not None:
        task.result_ref = update.result_ref
    if update.blocker_reason is not None:
        task.blocker_reason = update.blocker_reason
    for entry in state.spine.task_queue:
        if entry.task_id == update.task_id:
            entry.status = update.status
    if update.status is TaskStatus.DONE:
        state.last_completed_task = update.task_id
    if state.current_task == update.task_id and update.status is not TaskStatus.RUNNING:
        state.current_task = None


def _route_claims(
    repo_root: Path,
    state: VersionState,
    task: TaskContract,
    delta: StateDelta,
    result: ExecutionResult,
) -> None:
    """Alg-style claim routing: gate evaluation then lattice transitions."""
    claims = linked_claims(state, task)
    gate_ids = sorted(
        {
            req.gate_id
            for claim in claims
            for req in claim.required_evidence
            if req.gate_id in state.gates
        }
    )
    for gate_id in gate_ids:
        gate = state.gates[gate_id]
        decision = evaluate_gate(
            gate, repo_root, evidence=state.evidence, seq=state.next_sequence()
        )
        mirror = record_decision(state, repo_root, gate, decision)
        state_ops.register_evidence(state, repo_root, mirror)
        delta.appended_evidence.append(mirror)
        result.decisions[gate_id] = decision

    for claim in claims:
        speaking = []
        for req in claim.required_evidence:
            gate = state.gates.get(req.gate_id)
            if gate is not None:
                speaking.extend(effective_decisions(gate))
        if not speaking:
            result.claim_outcomes[claim.claim_id] = claim.status.value
            continue
        effective = resolve_gate_conflict(speaking)
        contradicted = any(d.contradiction for d in speaking)
        authority = AuthorityRef(
            "gate_decision",
            ";".join(
                f"{gate_id}#{len(state.gates[gate_id].decision_log) - 1}"
                for gate_id in sorted({d.gate_id for d in speaking})
                if gate_id in state.gates
            ),
        )
        if contradicted:
            evidence_ref = _contradicting_evidence(state, result.decisions.values())
            _transition(
                state,
                delta,
                result,
                claim,
                ClaimStatus.CONTRADICTED,
                AuthorityRef("evidence", evidence_ref),
            )
        elif effective.outcome is GateOutcome.PASSED:
            _admit(state, delta, result, claim, ClaimStatus.ADMITTED, authority)
        elif effective.outcome is GateOutcome.PASSED_LIMITED:
            _admit(state, delta, result, claim, ClaimStatus.ADMITTED_LIMITED, authority)
        else:
            _keep_non_admitted(state, delta, result, claim, authority)


def _contradicting_evidence(state: VersionState, decisions) -> str:
    """The registered evidence object behind a contradiction signal."""
    for decision in decisions:
        if not decision.contradiction:
            continue
        for forb in decision.forbidden_matches:
            for obj in state.evidence.objects:
                if obj.evidence_id in forb:
                    return obj.evidence_id
        for check in decision.per_check_results:
            if check.contradiction:
                for path in check.matched_paths:
                    for obj in state.evidence.objects:
                        if obj.path == path:
                            return obj.evidence_id
    # fall back to the most recent audit label (the decision mirror itself)
    for obj in reversed(state.evidence.objects):
        if obj.kind is EvidenceKind.AUDIT_LABEL:
            return obj.evidence_id
    return state.evidence.objects[-1].evidence_id


def _transition(state, delta, result, claim, to_status, authority) -> None:
    from_status = claim.status
    transition_claim(
        state.ledger, claim.claim_id, to_status, authority, state=state
    )
    delta.claim_transitions.append(
        ClaimTransition(claim.claim_id, from_status, to_status, authority)
    )
    result.claim_outcomes[claim.claim_id] = to_status.value


def _admit(state, delta, result, claim, target, authority) -> None:
    try:
        _transition(state, delta, result, claim, target, authority)
    except (AdmissionError, TransitionError):
        # incomplete chain: keep the claim non-admitted with the gap recorded
        _keep_non_admitted(state, delta, result, claim, authority)


def _keep_non_admitted(state, delta, result, claim, authority) -> None:
    if claim.status is ClaimStatus.PLANNED:
        _transition(state, delta, result, claim, ClaimStatus.BLOCKED, authority)
    else:
        # draft_only and blocked stay where they are
        result.claim_outcomes[claim.claim_id] = claim.status.value


def detect_contradiction(
    gate: GateManifest, decision: GateDecision, claim: ClaimRecord | None = None
) -> bool:
    """Contradiction is mechanical: a forbidden-evidence hit or a marker match.

    A passed gate never signals contradiction; plain missing artifacts are
    failure, not contradiction.
    """
    if decision.outcome is GateOutcome.PASSED:
        return False
    if decision.forbidden_matches:
        return True
    return any(r.contradiction for r in decision.per_check_results if r.required)


def maybe_close_version(state: VersionState) -> CloseoutTrigger | None:
    """Trigger once every registered gate is terminal and the queue drained."""
    open_gates = [g.gate_id for g in state.gates.values() if not gate_is_terminal(g)]
    if open_gates:
        return None
    busy = [
        t.task_id
        for t in state.contracts.values()
        if t.status in (TaskStatus.QUEUED, TaskStatus.RUNNING)
    ]
    if busy:
        return None
    return CloseoutTrigger(
        version_id=state.version_id,
        terminal_gates=sorted(state.gates),
    )


def fastpath_task(
    repo_root: Path, state: VersionState, task_id: str, binding: WorkerBinding
) -> ExecutionResult:
    """Exploratory execution that can never feed admitted status."""
    task = state.contracts.get(task_id)
    if task is None:
        raise UsageError(f"unknown task {task_id}")
    from .model import ClaimClass

    if not (task.exploratory or task.claim_class is ClaimClass.SMOKE_TEST):
        raise UsageError(
            f"task {task_id} is paper-facing ({task.claim_class.value if task.claim_class else 'unset'}); "
            "the fast path takes only smoke_test or exploratory tasks"
        )
    return execute_task(repo_root, state, task_id, binding, route_claims=False)
