"""Parsing, validation, and normalized serialization of every state file.

Reading is liberal where historical files demand it (several field
spellings per format are in the wild); writing is a single normalized
shape. Serialization is a pure function of the document value: all known
keys are always emitted, unknown keys are preserved and emitted after the
known ones in sorted order, so the same value always produces identical
bytes and any value violating a type invariant is refused before a byte
is written.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import yamlio
from .errors import SchemaError
from .model import (
    ArtifactCheck,
    Blocker,
    BlockerKind,
    BlockerResolution,
    CandidateRq,
    CheckMethod,
    CheckOutcome,
    CheckResult,
    ClaimLedger,
    ClaimRecord,
    ClaimStatus,
    Closeout,
    CloseoutSeed,
    EvidenceBase,
    EvidenceObject,
    EvidenceKind,
    EvidenceRequirement,
    GateDecision,
    GateManifest,
    GateOutcome,
    HistoryEntry,
    AuthorityRef,
    Insight,
    InsightConsequence,
    InsightKind,
    PassCondition,
    PaperBindingRecord,
    ProvenanceRef,
    QueueEntry,
    RqNode,
    RqSpine,
    SchemaViolation,
    TaskContract,
    TaskStatus,
    VersionStatus,
    parse_claim_class,
    ADMITTED_STATUSES,
    ClaimClass,
)

_SCHEMA_VERSIONS = {
    "status": {1, "1", "status_v1"},
    "spine": {1, "research_spine_v1"},
    "tasks": {1, "task_queue_v1"},
    "gate": {1, "evidence_gate_v1"},
    "ledger": {1, "claim_ledger_v1"},
    "evidence_log": {1, "evidence_log_v1"},
    "closeout": {1, "closeout_v1"},
}

_DEFAULT_SCHEMA_VERSION = {
    "status": 1,
    "spine": "research_spine_v1",
    "tasks": "task_queue_v1",
    "gate": "evidence_gate_v1",
    "ledger": "claim_ledger_v1",
    "evidence_log": "evidence_log_v1",
    "closeout": "closeout_v1",
}

_GATE_DOC_STATUSES = {"pending", "passed", "failed", "passed_limited", "blocked"}


class _Ctx:
    """Accumulates schema violations so a parse reports everything at once."""

    def __init__(self, source: str):
        self.source = source
        self.violations: list[SchemaViolation] = []

    def add(self, field_path: str, expected: str, found) -> None:
        self.violations.append(
            SchemaViolation(self.source, field_path, expected, repr(found))
        )

    def raise_if_any(self) -> None:
        if self.violations:
            raise SchemaError(self.violations)


def _req_str(ctx: _Ctx, doc: dict, key: str, path: str = "") -> str:
    value = doc.get(key)
    if not isinstance(value, str) or not value:
        ctx.add(path or key, "non-empty string", value if key in doc else None)
        return ""
    return value


def _opt_str(ctx: _Ctx, doc: dict, key: str, path: str = "", default: str = ""):
    value = doc.get(key, default)
    if value is None:
        return default
    if not isinstance(value, str):
        ctx.add(path or key, "string", value)
        return default
    return value


def _nullable_str(ctx: _Ctx, doc: dict, key: str, path: str = ""):
    value = doc.get(key)
    if value is not None and not isinstance(value, str):
        ctx.add(path or key, "string or null", value)
        return None
    return value


def _str_list(ctx: _Ctx, doc: dict, key: str, path: str = "") -> list[str]:
    value = doc.get(key, [])
    if value is None:
        return []
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        ctx.add(path or key, "list of strings", value)
        return []
    return list(value)


def _opt_bool(ctx: _Ctx, doc: dict, key: str, path: str = "", default: bool = False):
    value = doc.get(key, default)
    if not isinstance(value, bool):
        ctx.add(path or key, "boolean", value)
        return default
    return value


def _enum(ctx: _Ctx, enum_cls, value, path: str, default=None):
    if value is None:
        if default is not None:
            return default
        ctx.add(path, f"one of {[e.value for e in enum_cls]}", None)
        return None
    try:
        return enum_cls(value)
    except ValueError:
        ctx.add(path, f"one of {[e.value for e in enum_cls]}", value)
        return default


def _schema_version(ctx: _Ctx, doc: dict, fmt: str):
    value = doc.get("schema_version")
    if value is None:
        return _DEFAULT_SCHEMA_VERSION[fmt]
    if value not in _SCHEMA_VERSIONS[fmt]:
        ctx.add(
            "schema_version",
            f"one of {sorted(map(str, _SCHEMA_VERSIONS[fmt]))}",
            value,
        )
        return _DEFAULT_SCHEMA_VERSION[fmt]
    return value


def _extras(doc: dict, known: set[str]) -> dict:
    return {k: doc[k] for k in doc if k not in known}


def _emit_extras(out: dict, extras: dict) -> None:
    for key in sorted(extras):
        out[key] = extras[key]


# ---------------------------------------------------------------------------
# STATUS.yaml
# ---------------------------------------------------------------------------

_STATUS_KEYS = {
    "schema_version",
    "generated_by",
    "version",
    "epoch_role",
    "status",
    "direction_ref",
    "direction_digest",
    "source_version",
    "current_gate",
    "focus_rq",
    "runnable_rqs",
    "blocked_rqs",
    "completed_rqs",
    "current_task",
    "last_completed_task",
    "paper_binding",
    "blockers",
    "notes",
}


@dataclass
class StatusHeader:
    """Everything STATUS.yaml records about one version."""

    version: str
    status: VersionStatus
    schema_version: object = 1
    generated_by: str = ""
    epoch_role: str = ""
    direction_ref: str = "../RESEARCH_DIRECTION.md"
    direction_digest: str | None = None
    source_version: str | None = None
    current_gate: str | None = None
    focus_rq: str | None = None
    runnable_rqs: list[str] = field(default_factory=list)
    blocked_rqs: list[str] = field(default_factory=list)
    completed_rqs: list[str] = field(default_factory=list)
    current_task: str | None = None
    last_completed_task: str | None = None
    paper_binding_allowed: bool = False
    paper_binding_reason: str = ""
    paper_binding_extras: dict = field(default_factory=dict)
    blockers: list[Blocker] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    extras: dict = field(default_factory=dict)


def _parse_blocker(ctx: _Ctx, item, path: str) -> Blocker | None:
    if not isinstance(item, dict):
        ctx.add(path, "mapping", item)
        return None
    blocker_id = _req_str(ctx, item, "blocker_id", f"{path}.blocker_id")
    kind = _enum(ctx, BlockerKind, item.get("kind"), f"{path}.kind")
    description = _opt_str(ctx, item, "description", f"{path}.description")
    resolution = None
    res_doc = item.get("resolution")
    if res_doc is not None:
        if not isinstance(res_doc, dict):
            ctx.add(f"{path}.resolution", "mapping or null", res_doc)
        else:
            resolution = BlockerResolution(
                resolved_in_version=_opt_str(
                    ctx, res_doc, "resolved_in_version", f"{path}.resolution.resolved_in_version"
                ),
                audit_note=_opt_str(
                    ctx, res_doc, "audit_note", f"{path}.resolution.audit_note"
                ),
            )
    if kind is None or not blocker_id:
        return None
    return Blocker(
        blocker_id=blocker_id,
        kind=kind,
        description=description,
        affected_claims=_str_list(ctx, item, "affected_claims", f"{path}.affected_claims"),
        affected_rqs=_str_list(ctx, item, "affected_rqs", f"{path}.affected_rqs"),
        resolution=resolution,
    )


def parse_status(data: bytes, source: str = "STATUS.yaml") -> StatusHeader:
    doc = yamlio.load_mapping(data, source)
    ctx = _Ctx(source)
    schema_version = _schema_version(ctx, doc, "status")
    version = _req_str(ctx, doc, "version")
    status = _enum(ctx, VersionStatus, doc.get("status"), "status")

    pb_allowed = False
    pb_reason = ""
    pb_extras: dict = {}
    pb = doc.get("paper_binding")
    if pb is not None:
        if not isinstance(pb, dict):
            ctx.add("paper_binding", "mapping", pb)
        else:
            pb_allowed = _opt_bool(ctx, pb, "allowed", "paper_binding.allowed")
            pb_reason = _opt_str(ctx, pb, "reason", "paper_binding.reason")
            pb_extras = _extras(pb, {"allowed", "reason"})

    blockers = []
    raw_blockers = doc.get("blockers", [])
    if raw_blockers is None:
        raw_blockers = []
    if not isinstance(raw_blockers, list):
        ctx.add("blockers", "list", raw_blockers)
        raw_blockers = []
    for i, item in enumerate(raw_blockers):
        blocker = _parse_blocker(ctx, item, f"blockers[{i}]")
        if blocker is not None:
            blockers.append(blocker)
    seen = set()
    for blocker in blockers:
        if blocker.blocker_id in seen:
            ctx.add("blockers", "unique blocker ids", blocker.blocker_id)
        seen.add(blocker.blocker_id)

    header = StatusHeader(
        version=version,
        status=status or VersionStatus.ACTIVE,
        schema_version=schema_version,
        generated_by=_opt_str(ctx, doc, "generated_by"),
        epoch_role=_opt_str(ctx, doc, "epoch_role"),
        direction_ref=_opt_str(ctx, doc, "direction_ref", default="../RESEARCH_DIRECTION.md"),
        direction_digest=_nullable_str(ctx, doc, "direction_digest"),
        source_version=_nullable_str(ctx, doc, "source_version"),
        current_gate=_nullable_str(ctx, doc, "current_gate"),
        focus_rq=_nullable_str(ctx, doc, "focus_rq"),
        runnable_rqs=_str_list(ctx, doc, "runnable_rqs"),
        blocked_rqs=_str_list(ctx, doc, "blocked_rqs"),
        completed_rqs=_str_list(ctx, doc, "completed_rqs"),
        current_task=_nullable_str(ctx, doc, "current_task"),
        last_completed_task=_nullable_str(ctx, doc, "last_completed_task"),
        paper_binding_allowed=pb_allowed,
        paper_binding_reason=pb_reason,
        paper_binding_extras=pb_extras,
        blockers=blockers,
        notes=_str_list(ctx, doc, "notes"),
        extras=_extras(doc, _STATUS_KEYS),
    )
    ctx.raise_if_any()
    return header


def _blocker_to_doc(blocker: Blocker) -> dict:
    resolution = None
    if blocker.resolution is not None:
        resolution = {
            "resolved_in_version": blocker.resolution.resolved_in_version,
            "audit_note": blocker.resolution.audit_note,
        }
    return {
        "blocker_id": blocker.blocker_id,
        "kind": blocker.kind.value,
        "description": blocker.description,
        "affected_claims": list(blocker.affected_claims),
        "affected_rqs": list(blocker.affected_rqs),
        "resolution": resolution,
    }


def serialize_status(header: StatusHeader, validate: bool = True) -> bytes:
    out = {
        "schema_version": header.schema_version,
        "generated_by": header.generated_by,
        "version": header.version,
        "epoch_role": header.epoch_role,
        "status": header.status.value,
        "direction_ref": header.direction_ref,
        "direction_digest": header.direction_digest,
        "source_version": header.source_version,
        "current_gate": header.current_gate,
        "focus_rq": header.focus_rq,
        "runnable_rqs": list(header.runnable_rqs),
        "blocked_rqs": list(header.blocked_rqs),
        "completed_rqs": list(header.completed_rqs),
        "current_task": header.current_task,
        "last_completed_task": header.last_completed_task,
        "paper_binding": dict(
            {"allowed": header.paper_binding_allowed, "reason": header.paper_binding_reason},
            **{k: header.paper_binding_extras[k] for k in sorted(header.paper_binding_extras)},
        ),
        "blockers": [_blocker_to_doc(b) for b in header.blockers],
        "notes": list(header.notes),
    }
    _emit_extras(out, header.extras)
    data = yamlio.dump(out)
    if validate:
        parse_status(data, "<serialize_status>")
    return data


# ---------------------------------------------------------------------------
# RESEARCH_SPINE.yaml
# ---------------------------------------------------------------------------

_RQ_KEYS = {
    "rq_id",
    "hypothesis",
    "falsification_condition",
    "method_sketch",
    "metric_spec",
    "parent_rq",
}


def parse_spine(data: bytes, source: str = "RESEARCH_SPINE.yaml") -> RqSpine:
    doc = yamlio.load_mapping(data, source)
    ctx = _Ctx(source)
    _schema_version(ctx, doc, "spine")

    rqs: list[RqNode] = []
    raw_rqs = doc.get("rqs", []) or []
    if not isinstance(raw_rqs, list):
        ctx.add("rqs", "list", raw_rqs)
        raw_rqs = []
    for i, item in enumerate(raw_rqs):
        path = f"rqs[{i}]"
        if not isinstance(item, dict):
            ctx.add(path, "mapping", item)
            continue
        rq_id = _req_str(ctx, item, "rq_id", f"{path}.rq_id")
        rqs.append(
            RqNode(
                rq_id=rq_id,
                hypothesis=_opt_str(ctx, item, "hypothesis", f"{path}.hypothesis"),
                falsification_condition=_opt_str(
                    ctx, item, "falsification_condition", f"{path}.falsification_condition"
                ),
                method_sketch=_opt_str(ctx, item, "method_sketch", f"{path}.method_sketch"),
                metric_spec=_opt_str(ctx, item, "metric_spec", f"{path}.metric_spec"),
                parent_rq=_nullable_str(ctx, item, "parent_rq", f"{path}.parent_rq"),
                extras=_extras(item, _RQ_KEYS),
            )
        )

    ids = set()
    for rq in rqs:
        if rq.rq_id in ids:
            ctx.add("rqs", "unique rq ids", rq.rq_id)
        ids.add(rq.rq_id)

    # parent links must form a forest: every parent resolves, no cycles
    for rq in rqs:
        if rq.parent_rq is not None and rq.parent_rq not in ids:
            ctx.add("rqs", f"parent of {rq.rq_id} registered", rq.parent_rq)
    parent_of = {rq.rq_id: rq.parent_rq for rq in rqs}
    for rq in rqs:
        seen = set()
        node = rq.rq_id
        while node is not None:
            if node in seen:
                ctx.add("rqs", "acyclic parent links", f"cycle through {node}")
                break
            seen.add(node)
            node = parent_of.get(node)

    queue: list[QueueEntry] = []
    raw_queue = doc.get("task_queue", []) or []
    if not isinstance(raw_queue, list):
        ctx.add("task_queue", "list", raw_queue)
        raw_queue = []
    for i, item in enumerate(raw_queue):
        path = f"task_queue[{i}]"
        if not isinstance(item, dict):
            ctx.add(path, "mapping", item)
            continue
        task_id = _req_str(ctx, item, "task_id", f"{path}.task_id")
        status = _enum(
            ctx, TaskStatus, item.get("status", "queued"), f"{path}.status"
        )
        queue.append(QueueEntry(task_id=task_id, status=status or TaskStatus.QUEUED))

    spine = RqSpine(
        rqs=rqs,
        task_queue=queue,
        extras=_extras(doc, {"schema_version", "rqs", "task_queue"}),
    )
    ctx.raise_if_any()
    return spine


def serialize_spine(spine: RqSpine, validate: bool = True) -> bytes:
    out = {
        "schema_version": _DEFAULT_SCHEMA_VERSION["spine"],
        "rqs": [],
        "task_queue": [
            {"task_id": q.task_id, "status": q.status.value} for q in spine.task_queue
        ],
    }
    for rq in spine.rqs:
        item = {
            "rq_id": rq.rq_id,
            "hypothesis": rq.hypothesis,
            "falsification_condition": rq.falsification_condition,
            "method_sketch": rq.method_sketch,
            "metric_spec": rq.metric_spec,
            "parent_rq": rq.parent_rq,
        }
        _emit_extras(item, rq.extras)
        out["rqs"].append(item)
    _emit_extras(out, spine.extras)
    data = yamlio.dump(out)
    if validate:
        parse_spine(data, "<serialize_spine>")
    return data


# ---------------------------------------------------------------------------
# TASKS.yaml
# ---------------------------------------------------------------------------

_TASK_KEYS = {
    "task_id",
    "rq_id",
    "claim_class",
    "status",
    "allowed_files",
    "expected_artifacts",
    "forbidden_claims",
    "routed_role",
    "done_condition",
    "result_ref",
    "blocker_reason",
    "timeout_seconds",
    "exploratory",
}


def _parse_task(ctx: _Ctx, item: dict, path: str) -> TaskContract:
    task_id = _req_str(ctx, item, "task_id", f"{path}.task_id")
    claim_class = None
    raw_class = item.get("claim_class")
    if raw_class is not None:
        try:
            claim_class = parse_claim_class(raw_class)
        except (ValueError, TypeError):
            ctx.add(f"{path}.claim_class", "a claim class", raw_class)
    status = _enum(ctx, TaskStatus, item.get("status", "queued"), f"{path}.status")
    status = status or TaskStatus.QUEUED
    result_ref = _nullable_str(ctx, item, "result_ref", f"{path}.result_ref")
    blocker_reason = _nullable_str(ctx, item, "blocker_reason", f"{path}.blocker_reason")
    if status is TaskStatus.DONE and not result_ref:
        ctx.add(f"{path}.result_ref", "set when status=done", result_ref)
    if status is TaskStatus.BLOCKED and not blocker_reason:
        ctx.add(f"{path}.blocker_reason", "set when status=blocked", blocker_reason)
    timeout = item.get("timeout_seconds")
    if timeout is not None and not isinstance(timeout, int):
        ctx.add(f"{path}.timeout_seconds", "integer or null", timeout)
        timeout = None
    return TaskContract(
        task_id=task_id,
        rq_id=_opt_str(ctx, item, "rq_id", f"{path}.rq_id"),
        claim_class=claim_class,
        status=status,
        allowed_files=_str_list(ctx, item, "allowed_files", f"{path}.allowed_files"),
        expected_artifacts=_str_list(
            ctx, item, "expected_artifacts", f"{path}.expected_artifacts"
        ),
        forbidden_claims=_str_list(
            ctx, item, "forbidden_claims", f"{path}.forbidden_claims"
        ),
        routed_role=_opt_str(ctx, item, "routed_role", f"{path}.routed_role"),
        done_condition=_opt_str(ctx, item, "done_condition", f"{path}.done_condition"),
        result_ref=result_ref,
        blocker_reason=blocker_reason,
        timeout_seconds=timeout,
        exploratory=_opt_bool(ctx, item, "exploratory", f"{path}.exploratory"),
        extras=_extras(item, _TASK_KEYS),
    )


def parse_tasks(data: bytes, source: str = "TASKS.yaml") -> list[TaskContract]:
    doc = yamlio.load_mapping(data, source)
    ctx = _Ctx(source)
    _schema_version(ctx, doc, "tasks")
    if "tasks" in doc:
        raw = doc.get("tasks") or []
        if not isinstance(raw, list):
            ctx.add("tasks", "list", raw)
            raw = []
        items = raw
    elif "task_id" in doc:
        # single flat contract document
        items = [{k: v for k, v in doc.items() if k != "schema_version"}]
    else:
        items = []
    tasks = []
    for i, item in enumerate(items):
        path = f"tasks[{i}]"
        if not isinstance(item, dict):
            ctx.add(path, "mapping", item)
            continue
        tasks.append(_parse_task(ctx, item, path))
    seen = set()
    for task in tasks:
        if task.task_id in seen:
            ctx.add("tasks", "unique task ids", task.task_id)
        seen.add(task.task_id)
    ctx.raise_if_any()
    return tasks


def _task_to_doc(task: TaskContract) -> dict:
    out = {
        "task_id": task.task_id,
        "rq_id": task.rq_id,
        "claim_class": task.claim_class.value if task.claim_class else None,
        "status": task.status.value,
        "routed_role": task.routed_role,
        "allowed_files": list(task.allowed_files),
        "expected_artifacts": list(task.expected_artifacts),
        "forbidden_claims": list(task.forbidden_claims),
        "done_condition": task.done_condition,
        "result_ref": task.result_ref,
        "blocker_reason": task.blocker_reason,
        "timeout_seconds": task.timeout_seconds,
        "exploratory": task.exploratory,
    }
    _emit_extras(out, task.extras)
    return out


def serialize_tasks(tasks: list[TaskContract], validate: bool = True) -> bytes:
    out = {
        "schema_version": _DEFAULT_SCHEMA_VERSION["tasks"],
        "tasks": [_task_to_doc(t) for t in tasks],
    }
    data = yamlio.dump(out)
    if validate:
        parse_tasks(data, "<serialize_tasks>")
    return data


# ---------------------------------------------------------------------------
# EVIDENCE_GATE.yaml
# ---------------------------------------------------------------------------

_CHECK_KEYS = {
    "id",
    "type",
    "path",
    "check",
    "expectation",
    "required",
    "note",
    "contradicts_on",
}

_GATE_KEYS = {
    "gate_id",
    "gate",
    "id",
    "version",
    "claim_class",
    "status",
    "blocked_reason",
    "claim_scope",
    "pass_condition",
    "required_artifacts",
    "required_evidence",
    "forbidden_evidence",
    "paper_claim_rule",
    "audit_note",
    "gate_decision",
    "decision_log",
}

_METHOD_NAMES = {m.value for m in CheckMethod}


def _parse_check(ctx: _Ctx, item: dict, path: str) -> ArtifactCheck:
    raw_check = item.get("check")
    method = CheckMethod.EXISTENCE
    note = ""
    if raw_check is None:
        method = CheckMethod.EXISTENCE
    elif isinstance(raw_check, str) and raw_check in _METHOD_NAMES:
        method = CheckMethod(raw_check)
    elif isinstance(raw_check, str):
        # free-text inspection notes degrade to an existence check
        method = CheckMethod.EXISTENCE
        note = raw_check
    else:
        ctx.add(f"{path}.check", "inspection method or note text", raw_check)

    expectation = item.get("expectation")
    if expectation is not None and not isinstance(expectation, str):
        ctx.add(f"{path}.expectation", "string or null", expectation)
        expectation = None
    if method is CheckMethod.HASH and not expectation:
        ctx.add(f"{path}.expectation", "hex digest for hash checks", expectation)
    if method is CheckMethod.CONTENT_MATCH and expectation == "":
        ctx.add(f"{path}.expectation", "non-empty pattern when given", expectation)

    return ArtifactCheck(
        path=_req_str(ctx, item, "path", f"{path}.path"),
        method=method,
        check_id=_nullable_str(ctx, item, "id", f"{path}.id"),
        artifact_type=_opt_str(ctx, item, "type", f"{path}.type"),
        expectation=expectation,
        required=_opt_bool(ctx, item, "required", f"{path}.required", default=True),
        note=note or _opt_str(ctx, item, "note", f"{path}.note"),
        contradicts_on=_nullable_str(ctx, item, "contradicts_on", f"{path}.contradicts_on"),
        extras=_extras(item, _CHECK_KEYS),
    )


def _parse_outcome(ctx: _Ctx, value, path: str) -> GateOutcome | None:
    if isinstance(value, bool):
        return GateOutcome.PASSED if value else GateOutcome.FAILED
    return _enum(ctx, GateOutcome, value, path)


def _parse_check_result(ctx: _Ctx, item: dict, path: str) -> CheckResult:
    method = _enum(ctx, CheckMethod, item.get("method"), f"{path}.method")
    outcome = _enum(ctx, CheckOutcome, item.get("outcome"), f"{path}.outcome")
    return CheckResult(
        check_id=_opt_str(ctx, item, "check_id", f"{path}.check_id"),
        path_pattern=_opt_str(ctx, item, "path", f"{path}.path"),
        method=method or CheckMethod.EXISTENCE,
        outcome=outcome or CheckOutcome.FAIL,
        matched_paths=_str_list(ctx, item, "matched_paths", f"{path}.matched_paths"),
        detail=_opt_str(ctx, item, "detail", f"{path}.detail"),
        required=_opt_bool(ctx, item, "required", f"{path}.required", default=True),
        contradiction=_opt_bool(ctx, item, "contradiction", f"{path}.contradiction"),
    )


_DECISION_KEYS = {
    "gate_id",
    "passed",
    "outcome",
    "scope",
    "allowed_claim",
    "per_check_results",
    "evaluated_at",
    "inputs_digest",
    "decided_by",
    "forbidden_matches",
    "contradiction",
    "detail",
}


def _parse_decision(ctx: _Ctx, item: dict, path: str, gate_id: str) -> GateDecision | None:
    raw_outcome = item.get("outcome", item.get("passed"))
    outcome = _parse_outcome(ctx, raw_outcome, f"{path}.outcome")
    if outcome is None:
        return None
    results = []
    raw_results = item.get("per_check_results", []) or []
    if not isinstance(raw_results, list):
        ctx.add(f"{path}.per_check_results", "list", raw_results)
        raw_results = []
    for i, raw in enumerate(raw_results):
        if not isinstance(raw, dict):
            ctx.add(f"{path}.per_check_results[{i}]", "mapping", raw)
            continue
        results.append(_parse_check_result(ctx, raw, f"{path}.per_check_results[{i}]"))
    evaluated_at = item.get("evaluated_at", 0)
    if not isinstance(evaluated_at, int):
        ctx.add(f"{path}.evaluated_at", "integer", evaluated_at)
        evaluated_at = 0
    return GateDecision(
        gate_id=_opt_str(ctx, item, "gate_id", f"{path}.gate_id", default=gate_id) or gate_id,
        outcome=outcome,
        scope=_opt_str(ctx, item, "scope", f"{path}.scope"),
        allowed_claim=_opt_str(ctx, item, "allowed_claim", f"{path}.allowed_claim"),
        per_check_results=results,
        evaluated_at=evaluated_at,
        inputs_digest=_opt_str(ctx, item, "inputs_digest", f"{path}.inputs_digest"),
        decided_by=_opt_str(ctx, item, "decided_by", f"{path}.decided_by", default="mechanical"),
        forbidden_matches=_str_list(ctx, item, "forbidden_matches", f"{path}.forbidden_matches"),
        contradiction=_opt_bool(ctx, item, "contradiction", f"{path}.contradiction"),
        detail=_opt_str(ctx, item, "detail", f"{path}.detail"),
        extras=_extras(item, _DECISION_KEYS),
    )


def parse_gate(data_or_doc, source: str = "EVIDENCE_GATE.yaml") -> GateManifest:
    """Parse a single gate document in any of its accepted shapes."""
    if isinstance(data_or_doc, (bytes, bytearray)):
        doc = yamlio.load_mapping(bytes(data_or_doc), source)
    else:
        doc = data_or_doc
    ctx = _Ctx(source)
    gate = _parse_gate_doc(ctx, doc, "")
    ctx.raise_if_any()
    return gate


def _parse_gate_doc(ctx: _Ctx, doc: dict, prefix: str) -> GateManifest:
    def p(key: str) -> str:
        return f"{prefix}.{key}" if prefix else key

    body = doc
    gate_id = None
    if isinstance(doc.get("gate"), dict):
        body = doc["gate"]
        gate_id = body.get("id")
    elif isinstance(doc.get("gate"), str):
        gate_id = doc["gate"]
    elif "gate_id" in doc:
        gate_id = doc.get("gate_id")
    elif "id" in doc:
        gate_id = doc.get("id")
    if not isinstance(gate_id, str) or not gate_id:
        ctx.add(p("gate_id"), "non-empty gate id", gate_id)
        gate_id = ""
    if "schema_version" in body:
        _schema_version(ctx, body, "gate")

    claim_class = None
    raw_class = body.get("claim_class")
    if raw_class is not None:
        try:
            claim_class = parse_claim_class(raw_class)
        except (ValueError, TypeError):
            ctx.add(p("claim_class"), "a claim class", raw_class)

    pass_condition = _enum(
        ctx,
        PassCondition,
        body.get("pass_condition", "all"),
        p("pass_condition"),
    )

    checks = []
    raw_checks = body.get("required_artifacts", body.get("required_evidence", [])) or []
    if not isinstance(raw_checks, list):
        ctx.add(p("required_artifacts"), "list", raw_checks)
        raw_checks = []
    for i, item in enumerate(raw_checks):
        path = p(f"required_artifacts[{i}]")
        if not isinstance(item, dict):
            ctx.add(path, "mapping", item)
            continue
        checks.append(_parse_check(ctx, item, path))

    status = body.get("status")
    if status is not None and status not in _GATE_DOC_STATUSES:
        ctx.add(p("status"), f"one of {sorted(_GATE_DOC_STATUSES)} or null", status)
        status = None

    decision_log: list[GateDecision] = []
    raw_log = body.get("decision_log")
    if raw_log is not None:
        if not isinstance(raw_log, list):
            ctx.add(p("decision_log"), "list", raw_log)
        else:
            for i, item in enumerate(raw_log):
                if not isinstance(item, dict):
                    ctx.add(p(f"decision_log[{i}]"), "mapping", item)
                    continue
                decision = _parse_decision(ctx, item, p(f"decision_log[{i}]"), gate_id)
                if decision is not None:
                    decision_log.append(decision)
    elif isinstance(body.get("gate_decision"), dict):
        decision = _parse_decision(ctx, body["gate_decision"], p("gate_decision"), gate_id)
        if decision is not None:
            decision_log.append(decision)

    manifest = GateManifest(
        gate_id=gate_id,
        claim_class=claim_class,
        required_artifacts=checks,
        forbidden_evidence=_str_list(ctx, body, "forbidden_evidence", p("forbidden_evidence")),
        pass_condition=pass_condition or PassCondition.ALL,
        audit_note=_opt_str(ctx, body, "audit_note", p("audit_note")),
        claim_scope=_opt_str(ctx, body, "claim_scope", p("claim_scope")),
        status=status,
        blocked_reason=_nullable_str(ctx, body, "blocked_reason", p("blocked_reason")),
        paper_claim_rule=_opt_str(ctx, body, "paper_claim_rule", p("paper_claim_rule")),
        version=_nullable_str(ctx, body, "version", p("version")),
        decision_log=decision_log,
        extras=_extras(body, _GATE_KEYS | {"schema_version"}),
    )
    return manifest


def parse_gate_file(data: bytes, source: str = "EVIDENCE_GATE.yaml") -> list[GateManifest]:
    """Parse a gate file holding one flat gate or a ``gates:`` list."""
    doc = yamlio.load_mapping(data, source)
    ctx = _Ctx(source)
    _schema_version(ctx, doc, "gate")
    gates: list[GateManifest] = []
    if "gates" in doc:
        raw = doc.get("gates") or []
        if not isinstance(raw, list):
            ctx.add("gates", "list", raw)
            raw = []
        for i, item in enumerate(raw):
            if not isinstance(item, dict):
                ctx.add(f"gates[{i}]", "mapping", item)
                continue
            gates.append(_parse_gate_doc(ctx, item, f"gates[{i}]"))
    elif doc:
        gates.append(_parse_gate_doc(ctx, doc, ""))
    seen = set()
    for gate in gates:
        if gate.gate_id in seen:
            ctx.add("gates", "unique gate ids", gate.gate_id)
        seen.add(gate.gate_id)
    ctx.raise_if_any()
    return gates


def _check_to_doc(check: ArtifactCheck) -> dict:
    out = {
        "id": check.check_id,
        "type": check.artifact_type,
        "path": check.path,
        "check": check.method.value,
        "expectation": check.expectation,
        "required": check.required,
        "note": check.note,
        "contradicts_on": check.contradicts_on,
    }
    _emit_extras(out, check.extras)
    return out


def decision_to_doc(decision: GateDecision) -> dict:
    out = {
        "gate_id": decision.gate_id,
        "outcome": decision.outcome.value,
        "scope": decision.scope,
        "allowed_claim": decision.allowed_claim,
        "evaluated_at": decision.evaluated_at,
        "inputs_digest": decision.inputs_digest,
        "decided_by": decision.decided_by,
        "forbidden_matches": list(decision.forbidden_matches),
        "contradiction": decision.contradiction,
        "detail": decision.detail,
        "per_check_results": [
            {
                "check_id": r.check_id,
                "path": r.path_pattern,
                "method": r.method.value,
                "outcome": r.outcome.value,
                "matched_paths": list(r.matched_paths),
                "detail": r.detail,
                "required": r.required,
                "contradiction": r.contradiction,
            }
            for r in decision.per_check_results
        ],
    }
    _emit_extras(out, decision.extras)
    return out


def _gate_to_doc(gate: GateManifest) -> dict:
    out = {
        "gate_id": gate.gate_id,
        "version": gate.version,
        "claim_class": gate.claim_class.value if gate.claim_class else None,
        "status": gate.status,
        "blocked_reason": gate.blocked_reason,
        "claim_scope": gate.claim_scope,
        "pass_condition": gate.pass_condition.value,
        "required_artifacts": [_check_to_doc(c) for c in gate.required_artifacts],
        "forbidden_evidence": list(gate.forbidden_evidence),
        "paper_claim_rule": gate.paper_claim_rule,
        "audit_note": gate.audit_note,
        "decision_log": [decision_to_doc(d) for d in gate.decision_log],
    }
    _emit_extras(out, gate.extras)
    return out


def serialize_gates(gates: list[GateManifest], validate: bool = True) -> bytes:
    out = {
        "schema_version": _DEFAULT_SCHEMA_VERSION["gate"],
        "gates": [_gate_to_doc(g) for g in gates],
    }
    data = yamlio.dump(out)
    if validate:
        parse_gate_file(data, "<serialize_gates>")
    return data


# ---------------------------------------------------------------------------
# PAPER_CLAIM_LEDGER.yaml
# ---------------------------------------------------------------------------

_CLAIM_KEYS = {
    "id",
    "claim_id",
    "rq_link",
    "claim_class",
    "class",
    "statement",
    "required_evidence",
    "status",
    "evidence_status",
    "scope",
    "paper_section",
    "audit_note",
    "history",
}


def _parse_history_entry(ctx: _Ctx, item: dict, path: str) -> HistoryEntry | None:
    from_status = _enum(ctx, ClaimStatus, item.get("from"), f"{path}.from")
    to_status = _enum(ctx, ClaimStatus, item.get("to"), f"{path}.to")
    seq = item.get("seq", 0)
    if not isinstance(seq, int):
        ctx.add(f"{path}.seq", "integer", seq)
        seq = 0
    if from_status is None or to_status is None:
        return None
    return HistoryEntry(
        from_status=from_status,
        to_status=to_status,
        authority=AuthorityRef(
            kind=_opt_str(ctx, item, "authority_kind", f"{path}.authority_kind"),
            ref=_opt_str(ctx, item, "authority_ref", f"{path}.authority_ref"),
        ),
        seq=seq,
    )


def _parse_claim(ctx: _Ctx, item: dict, path: str) -> ClaimRecord:
    claim_id = item.get("id", item.get("claim_id"))
    if not isinstance(claim_id, str) or not claim_id:
        ctx.add(f"{path}.id", "non-empty claim id", claim_id)
        claim_id = ""
    raw_class = item.get("claim_class", item.get("class"))
    claim_class = ClaimClass.PROCESS
    if raw_class is None:
        ctx.add(f"{path}.claim_class", "a claim class", None)
    else:
        try:
            claim_class = parse_claim_class(raw_class)
        except (ValueError, TypeError):
            ctx.add(f"{path}.claim_class", "a claim class", raw_class)
    status = _enum(
        ctx,
        ClaimStatus,
        item.get("status", item.get("evidence_status", "planned")),
        f"{path}.status",
    )
    status = status or ClaimStatus.PLANNED
    scope = item.get("scope", item.get("paper_section", "none"))
    if not isinstance(scope, str) or not scope:
        ctx.add(f"{path}.scope", "paper section label or 'none'", scope)
        scope = "none"

    required = []
    raw_required = item.get("required_evidence", []) or []
    if not isinstance(raw_required, list):
        ctx.add(f"{path}.required_evidence", "list", raw_required)
        raw_required = []
    for i, raw in enumerate(raw_required):
        rpath = f"{path}.required_evidence[{i}]"
        if not isinstance(raw, dict):
            ctx.add(rpath, "mapping", raw)
            continue
        required.append(
            EvidenceRequirement(
                artifact_type=_opt_str(ctx, raw, "artifact_type", f"{rpath}.artifact_type"),
                gate_id=_req_str(ctx, raw, "gate_id", f"{rpath}.gate_id"),
            )
        )

    history = []
    raw_history = item.get("history", []) or []
    if not isinstance(raw_history, list):
        ctx.add(f"{path}.history", "list", raw_history)
        raw_history = []
    for i, raw in enumerate(raw_history):
        if not isinstance(raw, dict):
            ctx.add(f"{path}.history[{i}]", "mapping", raw)
            continue
        entry = _parse_history_entry(ctx, raw, f"{path}.history[{i}]")
        if entry is not None:
            history.append(entry)

    if status in ADMITTED_STATUSES:
        if scope == "none":
            ctx.add(f"{path}.scope", "a paper scope for admitted claims", scope)
        if claim_class is ClaimClass.SMOKE_TEST:
            ctx.add(
                f"{path}.status",
                "smoke_test claims are never admissible",
                status.value,
            )
    if status is ClaimStatus.CONTRADICTED:
        cited = any(
            h.to_status is ClaimStatus.CONTRADICTED and h.authority.kind == "evidence"
            for h in history
        )
        if not cited:
            ctx.add(
                f"{path}.history",
                "a contradicting evidence reference",
                "no evidence-backed contradicted entry",
            )

    return ClaimRecord(
        claim_id=claim_id,
        rq_link=_opt_str(ctx, item, "rq_link", f"{path}.rq_link"),
        claim_class=claim_class,
        statement=_opt_str(ctx, item, "statement", f"{path}.statement"),
        required_evidence=required,
        status=status,
        scope=scope,
        audit_note=_opt_str(ctx, item, "audit_note", f"{path}.audit_note"),
        history=history,
        extras=_extras(item, _CLAIM_KEYS),
    )


def parse_ledger(data: bytes, source: str = "PAPER_CLAIM_LEDGER.yaml") -> ClaimLedger:
    doc = yamlio.load_mapping(data, source)
    ctx = _Ctx(source)
    _schema_version(ctx, doc, "ledger")

    claims = []
    raw_claims = doc.get("claims", []) or []
    if not isinstance(raw_claims, list):
        ctx.add("claims", "list", raw_claims)
        raw_claims = []
    for i, item in enumerate(raw_claims):
        path = f"claims[{i}]"
        if not isinstance(item, dict):
            ctx.add(path, "mapping", item)
            continue
        claims.append(_parse_claim(ctx, item, path))
    seen = set()
    for claim in claims:
        if claim.claim_id in seen:
            ctx.add("claims", "unique claim ids", claim.claim_id)
        seen.add(claim.claim_id)

    binding = PaperBindingRecord()
    pb = doc.get("paper_binding")
    if pb is not None:
        if not isinstance(pb, dict):
            ctx.add("paper_binding", "mapping", pb)
        else:
            binding = PaperBindingRecord(
                allowed=_opt_bool(ctx, pb, "allowed", "paper_binding.allowed"),
                reason=_opt_str(ctx, pb, "reason", "paper_binding.reason"),
                admitted_claims=_str_list(
                    ctx, pb, "admitted_claims", "paper_binding.admitted_claims"
                ),
            )
    if binding.allowed:
        if not claims:
            ctx.add(
                "paper_binding.allowed",
                "false while the claims list is empty",
                True,
            )
        if not binding.admitted_claims:
            ctx.add(
                "paper_binding.admitted_claims",
                "non-empty when binding is allowed",
                [],
            )
        by_id = {c.claim_id: c for c in claims}
        for cid in binding.admitted_claims:
            claim = by_id.get(cid)
            if claim is not None and claim.status not in ADMITTED_STATUSES:
                ctx.add(
                    "paper_binding.admitted_claims",
                    f"{cid} admitted or admitted_limited",
                    claim.status.value,
                )

    ledger = ClaimLedger(
        claims=claims,
        paper_binding=binding,
        extras=_extras(doc, {"schema_version", "claims", "paper_binding"}),
    )
    ctx.raise_if_any()
    return ledger


def _claim_to_doc(claim: ClaimRecord) -> dict:
    out = {
        "id": claim.claim_id,
        "rq_link": claim.rq_link,
        "claim_class": claim.claim_class.value,
        "statement": claim.statement,
        "required_evidence": [
            {"artifact_type": r.artifact_type, "gate_id": r.gate_id}
            for r in claim.required_evidence
        ],
        "status": claim.status.value,
        "scope": claim.scope,
        "audit_note": claim.audit_note,
        "history": [
            {
                "from": h.from_status.value,
                "to": h.to_status.value,
                "authority_kind": h.authority.kind,
                "authority_ref": h.authority.ref,
                "seq": h.seq,
            }
            for h in claim.history
        ],
    }
    _emit_extras(out, claim.extras)
    return out


def serialize_ledger(ledger: ClaimLedger, validate: bool = True) -> bytes:
    out = {
        "schema_version": _DEFAULT_SCHEMA_VERSION["ledger"],
        "claims": [_claim_to_doc(c) for c in ledger.claims],
        "paper_binding": {
            "allowed": ledger.paper_binding.allowed,
            "reason": ledger.paper_binding.reason,
            "admitted_claims": list(ledger.paper_binding.admitted_claims),
        },
    }
    _emit_extras(out, ledger.extras)
    data = yamlio.dump(out)
    if validate:
        parse_ledger(data, "<serialize_ledger>")
    return data


# ---------------------------------------------------------------------------
# EVIDENCE_LOG.yaml
# ---------------------------------------------------------------------------


def parse_evidence_log(data: bytes, source: str = "EVIDENCE_LOG.yaml") -> EvidenceBase:
    doc = yamlio.load_mapping(data, source)
    ctx = _Ctx(source)
    _schema_version(ctx, doc, "evidence_log")
    base = EvidenceBase()
    raw = doc.get("objects", []) or []
    if not isinstance(raw, list):
        ctx.add("objects", "list", raw)
        raw = []
    last_seq = 0
    ids = set()
    for i, item in enumerate(raw):
        path = f"objects[{i}]"
        if not isinstance(item, dict):
            ctx.add(path, "mapping", item)
            continue
        kind = _enum(ctx, EvidenceKind, item.get("kind"), f"{path}.kind")
        seq = item.get("registered_at")
        if not isinstance(seq, int):
            ctx.add(f"{path}.registered_at", "integer", seq)
            seq = last_seq + 1
        if seq <= last_seq:
            ctx.add(f"{path}.registered_at", f"greater than {last_seq}", seq)
            seq = last_seq + 1
        last_seq = seq
        evidence_id = _req_str(ctx, item, "evidence_id", f"{path}.evidence_id")
        if evidence_id in ids:
            ctx.add(f"{path}.evidence_id", "unique evidence id", evidence_id)
        ids.add(evidence_id)
        invalidates = _nullable_str(ctx, item, "invalidates", f"{path}.invalidates")
        if invalidates is not None and invalidates not in ids:
            ctx.add(
                f"{path}.invalidates",
                "reference to an earlier evidence object",
                invalidates,
            )
        base.objects.append(
            EvidenceObject(
                evidence_id=evidence_id,
                kind=kind or EvidenceKind.RUN_REPORT,
                path=_opt_str(ctx, item, "path", f"{path}.path"),
                digest=_opt_str(ctx, item, "digest", f"{path}.digest"),
                producing_task=_nullable_str(ctx, item, "producing_task", f"{path}.producing_task"),
                scope=_opt_str(ctx, item, "scope", f"{path}.scope"),
                invalidates=invalidates,
                registered_at=seq,
            )
        )
    ctx.raise_if_any()
    return base


def serialize_evidence_log(base: EvidenceBase, validate: bool = True) -> bytes:
    out = {
        "schema_version": _DEFAULT_SCHEMA_VERSION["evidence_log"],
        "objects": [
            {
                "evidence_id": o.evidence_id,
                "kind": o.kind.value,
                "path": o.path,
                "digest": o.digest,
                "producing_task": o.producing_task,
                "scope": o.scope,
                "invalidates": o.invalidates,
                "registered_at": o.registered_at,
            }
            for o in base.objects
        ],
    }
    data = yamlio.dump(out)
    if validate:
        parse_evidence_log(data, "<serialize_evidence_log>")
    return data


# ---------------------------------------------------------------------------
# Closeout document (structured twin of closeout.md, carries the seed)
# ---------------------------------------------------------------------------


def _parse_insight(ctx: _Ctx, item: dict, path: str) -> Insight | None:
    kind = _enum(ctx, InsightKind, item.get("kind"), f"{path}.kind")
    prov = item.get("provenance")
    provenance = None
    if not isinstance(prov, dict):
        ctx.add(f"{path}.provenance", "mapping with kind and ref", prov)
    else:
        provenance = ProvenanceRef(
            kind=_req_str(ctx, prov, "kind", f"{path}.provenance.kind"),
            ref=_req_str(ctx, prov, "ref", f"{path}.provenance.ref"),
        )
    consequence = None
    raw_consequence = item.get("consequence")
    if raw_consequence is not None:
        consequence = _enum(ctx, InsightConsequence, raw_consequence, f"{path}.consequence")
    rationale = _opt_str(ctx, item, "no_action_rationale", f"{path}.no_action_rationale")
    if consequence is InsightConsequence.NO_ACTION and not rationale:
        ctx.add(
            f"{path}.no_action_rationale",
            "rationale text when consequence is no_action",
            rationale,
        )
    if kind is None or provenance is None:
        return None
    return Insight(
        insight_id=_req_str(ctx, item, "insight_id", f"{path}.insight_id"),
        kind=kind,
        description=_opt_str(ctx, item, "description", f"{path}.description"),
        provenance=provenance,
        consequence=consequence,
        no_action_rationale=rationale,
    )


def insight_to_doc(insight: Insight) -> dict:
    return {
        "insight_id": insight.insight_id,
        "kind": insight.kind.value,
        "description": insight.description,
        "provenance": {"kind": insight.provenance.kind, "ref": insight.provenance.ref},
        "consequence": insight.consequence.value if insight.consequence else None,
        "no_action_rationale": insight.no_action_rationale,
    }


def parse_closeout(data: bytes, source: str = "CLOSEOUT.yaml") -> Closeout:
    doc = yamlio.load_mapping(data, source)
    ctx = _Ctx(source)
    _schema_version(ctx, doc, "closeout")
    version = _req_str(ctx, doc, "version")
    final_status = _enum(ctx, VersionStatus, doc.get("final_status"), "final_status")

    blockers = []
    for i, item in enumerate(doc.get("unresolved_blockers", []) or []):
        blocker = _parse_blocker(ctx, item, f"unresolved_blockers[{i}]")
        if blocker is not None:
            blockers.append(blocker)

    insights = []
    for i, item in enumerate(doc.get("insights", []) or []):
        if not isinstance(item, dict):
            ctx.add(f"insights[{i}]", "mapping", item)
            continue
        insight = _parse_insight(ctx, item, f"insights[{i}]")
        if insight is not None:
            insights.append(insight)

    dispositions = []
    for i, item in enumerate(doc.get("claim_dispositions", []) or []):
        path = f"claim_dispositions[{i}]"
        if not isinstance(item, dict):
            ctx.add(path, "mapping", item)
            continue
        status = _enum(ctx, ClaimStatus, item.get("status"), f"{path}.status")
        dispositions.append(
            (_req_str(ctx, item, "claim_id", f"{path}.claim_id"), status or ClaimStatus.PLANNED)
        )

    notes = doc.get("irrelevance_notes", {}) or {}
    if not isinstance(notes, dict):
        ctx.add("irrelevance_notes", "mapping", notes)
        notes = {}

    seed = None
    raw_seed = doc.get("seed")
    if raw_seed is not None:
        if not isinstance(raw_seed, dict):
            ctx.add("seed", "mapping", raw_seed)
        else:
            candidates = []
            for i, item in enumerate(raw_seed.get("candidate_rqs", []) or []):
                path = f"seed.candidate_rqs[{i}]"
                if not isinstance(item, dict):
                    ctx.add(path, "mapping", item)
                    continue
                derived = _str_list(ctx, item, "derived_from_insights", f"{path}.derived_from_insights")
                if not derived:
                    ctx.add(f"{path}.derived_from_insights", "at least one insight id", derived)
                candidates.append(
                    CandidateRq(
                        candidate_id=_req_str(ctx, item, "candidate_id", f"{path}.candidate_id"),
                        derived_from_insights=derived,
                        note=_opt_str(ctx, item, "note", f"{path}.note"),
                    )
                )
            carried_blockers = []
            for i, item in enumerate(raw_seed.get("carried_blockers", []) or []):
                blocker = _parse_blocker(ctx, item, f"seed.carried_blockers[{i}]")
                if blocker is not None:
                    carried_blockers.append(blocker)
            carried_claims = []
            for i, item in enumerate(raw_seed.get("carried_claims", []) or []):
                path = f"seed.carried_claims[{i}]"
                if not isinstance(item, dict):
                    ctx.add(path, "mapping", item)
                    continue
                status = _enum(ctx, ClaimStatus, item.get("status"), f"{path}.status")
                carried_claims.append(
                    (
                        _req_str(ctx, item, "claim_id", f"{path}.claim_id"),
                        status or ClaimStatus.PLANNED,
                    )
                )
            seed = CloseoutSeed(
                from_version=_opt_str(ctx, raw_seed, "from_version", "seed.from_version", default=version),
                candidate_rqs=candidates,
                carried_blockers=carried_blockers,
                carried_claims=carried_claims,
                frontier_items=_str_list(ctx, raw_seed, "frontier_items", "seed.frontier_items"),
            )

    closeout = Closeout(
        version_id=version,
        final_status=final_status or VersionStatus.CLOSED_STABLE,
        evidence_summary=_str_list(ctx, doc, "evidence_summary"),
        unresolved_blockers=blockers,
        insights=insights,
        claim_dispositions=dispositions,
        irrelevance_notes={str(k): str(v) for k, v in notes.items()},
        seed=seed,
    )
    ctx.raise_if_any()
    return closeout


def serialize_closeout(closeout: Closeout) -> bytes:
    seed_doc = None
    if closeout.seed is not None:
        seed = closeout.seed
        seed_doc = {
            "from_version": seed.from_version,
            "candidate_rqs": [
                {
                    "candidate_id": c.candidate_id,
                    "derived_from_insights": list(c.derived_from_insights),
                    "note": c.note,
                }
                for c in seed.candidate_rqs
            ],
            "carried_blockers": [_blocker_to_doc(b) for b in seed.carried_blockers],
            "carried_claims": [
                {"claim_id": cid, "status": status.value}
                for cid, status in seed.carried_claims
            ],
            "frontier_items": list(seed.frontier_items),
        }
    out = {
        "schema_version": _DEFAULT_SCHEMA_VERSION["closeout"],
        "version": closeout.version_id,
        "final_status": closeout.final_status.value,
        "evidence_summary": list(closeout.evidence_summary),
        "unresolved_blockers": [_blocker_to_doc(b) for b in closeout.unresolved_blockers],
        "insights": [insight_to_doc(i) for i in closeout.insights],
        "claim_dispositions": [
            {"claim_id": cid, "status": status.value}
            for cid, status in closeout.claim_dispositions
        ],
        "irrelevance_notes": {
            k: closeout.irrelevance_notes[k] for k in sorted(closeout.irrelevance_notes)
        },
        "seed": seed_doc,
    }
    data = yamlio.dump(out)
    parse_closeout(data, "<serialize_closeout>")
    return data


# ---------------------------------------------------------------------------
# Opaque calibration document
# ---------------------------------------------------------------------------


def parse_calibration(data: bytes, source: str = "RQ_CALIBRATION.yaml") -> dict:
    """No published schema; preserved as an opaque mapping."""
    return yamlio.load_mapping(data, source)


def serialize_calibration(doc: dict) -> bytes:
    return yamlio.dump(doc)


def serialize(document) -> bytes:
    """Serialize any recognized document value to normalized bytes."""
    if isinstance(document, StatusHeader):
        return serialize_status(document)
    if isinstance(document, RqSpine):
        return serialize_spine(document)
    if isinstance(document, ClaimLedger):
        return serialize_ledger(document)
    if isinstance(document, EvidenceBase):
        return serialize_evidence_log(document)
    if isinstance(document, Closeout):
        return serialize_closeout(document)
    if isinstance(document, GateManifest):
        return serialize_gates([document])
    if isinstance(document, list):
        if all(isinstance(item, GateManifest) for item in document) and document:
            return serialize_gates(document)
        if all(isinstance(item, TaskContract) for item in document):
            return serialize_tasks(document)
    if isinstance(document, dict):
        return serialize_calibration(document)
    raise TypeError(f"no serializer for {type(document).__name__}")
