"""Durable state objects: versions, RQ spine, contracts, evidence, claims.

Everything here is a plain value type. Persistence lives in ``schemas``
and ``state``; behavior that spans objects (gate evaluation, claim
transitions, task execution) lives in its own module. Keeping the model
free of I/O makes the oracle and the verifiers independent of the runtime
paths they check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class VersionStatus(str, Enum):
    ACTIVE = "active"
    BLOCKED = "blocked"
    CLOSED_STABLE = "closed_stable"
    CLOSED_NEGATIVE = "closed_negative"
    CLOSED_SUCCESS = "closed_success"
    PAPER_BINDING_READY = "paper_binding_ready"


# Terminal statuses reject all further mutation except next-version seeding reads.
TERMINAL_VERSION_STATUSES = frozenset(
    {
        VersionStatus.CLOSED_STABLE,
        VersionStatus.CLOSED_NEGATIVE,
        VersionStatus.CLOSED_SUCCESS,
        VersionStatus.PAPER_BINDING_READY,
    }
)


class TaskStatus(str, Enum):
    QUEUED = "queued"
    RUNNING = "running"
    DONE = "done"
    BLOCKED = "blocked"
    REJECTED = "rejected"


class ClaimClass(str, Enum):
    DESIGN = "design"
    PROTOCOL = "protocol"
    PROCESS = "process"
    AUDIT = "audit"
    EMPIRICAL_EFFECTIVENESS = "empirical_effectiveness"
    CASE_STUDY = "case_study"
    SUPPLEMENTARY_BOUNDARY_PILOT = "supplementary_boundary_pilot"
    SMOKE_TEST = "smoke_test"


# Older ledger files use short class labels; normalize on parse.
CLAIM_CLASS_ALIASES = {
    "effectiveness": ClaimClass.EMPIRICAL_EFFECTIVENESS,
    "empirical": ClaimClass.EMPIRICAL_EFFECTIVENESS,
    "case": ClaimClass.CASE_STUDY,
}


def parse_claim_class(text: str) -> ClaimClass:
    if text in CLAIM_CLASS_ALIASES:
        return CLAIM_CLASS_ALIASES[text]
    return ClaimClass(text)


class ClaimStatus(str, Enum):
    PLANNED = "planned"
    DRAFT_ONLY = "draft_only"
    ADMITTED = "admitted"
    ADMITTED_LIMITED = "admitted_limited"
    BLOCKED = "blocked"
    CONTRADICTED = "contradicted"
    FORBIDDEN = "forbidden"


ADMITTED_STATUSES = frozenset({ClaimStatus.ADMITTED, ClaimStatus.ADMITTED_LIMITED})


class EvidenceKind(str, Enum):
    RUN_REPORT = "run_report"
    LOG = "log"
    MANIFEST = "manifest"
    HASH_RECORD = "hash_record"
    SOURCE_DOSSIER = "source_dossier"
    AUDIT_LABEL = "audit_label"
    CLOSEOUT_NOTE = "closeout_note"
    WORKER_REPORT = "worker_report"


class BlockerKind(str, Enum):
    EXECUTION_FAILURE = "execution_failure"
    MISSING_ARTIFACT = "missing_artifact"
    UNAUDITED_EVIDENCE = "unaudited_evidence"
    HUMAN_DECISION_GAP = "human_decision_gap"


class GateOutcome(str, Enum):
    PASSED = "passed"
    FAILED = "failed"
    PASSED_LIMITED = "passed_limited"


# Restrictiveness order: the minimum wins when gates disagree on one claim.
GATE_OUTCOME_RANK = {
    GateOutcome.FAILED: 0,
    GateOutcome.PASSED_LIMITED: 1,
    GateOutcome.PASSED: 2,
}


class CheckMethod(str, Enum):
    EXISTENCE = "existence"
    CONTENT_MATCH = "content_match"
    HASH = "hash"


class CheckOutcome(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    IO_FAILURE = "io_failure"


class PassCondition(str, Enum):
    ALL = "all"
    ANY = "any"


@dataclass
class SchemaViolation:
    """One schema problem: which file, which field, what was expected."""

    file: str
    field_path: str
    expected: str
    found: str

    def __str__(self) -> str:
        where = f"{self.file}:{self.field_path}" if self.field_path else self.file
        return f"{where}: expected {self.expected}, found {self.found}"


@dataclass
class ResearchDirection:
    """The frozen top-level question and its boundaries.

    ``content_digest`` is the SHA-256 of the direction document bytes; the
    state layer refuses any delta that would change it.
    """

    big_rq: str
    falsification_boundary: str = ""
    autonomy_limits: str = ""
    content_digest: str = ""


@dataclass
class RqNode:
    rq_id: str
    hypothesis: str = ""
    falsification_condition: str = ""
    method_sketch: str = ""
    metric_spec: str = ""
    parent_rq: str | None = None
    extras: dict = field(default_factory=dict)


@dataclass
class QueueEntry:
    """One slot in the spine's task-queue projection."""

    task_id: str
    status: TaskStatus = TaskStatus.QUEUED


@dataclass
class RqSpine:
    rqs: list[RqNode] = field(default_factory=list)
    task_queue: list[QueueEntry] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def rq_ids(self) -> set[str]:
        return {rq.rq_id for rq in self.rqs}


@dataclass
class TaskContract:
    """Binding of one worker action to an RQ, scope, and expected outputs.

    A contract is runnable only when rq_id, claim_class, expected_artifacts,
    and allowed_files are all non-empty; that check lives in the transition
    engine, not the parser, so historical files stay loadable.
    """

    task_id: str
    rq_id: str = ""
    claim_class: ClaimClass | None = None
    status: TaskStatus = TaskStatus.QUEUED
    allowed_files: list[str] = field(default_factory=list)
    expected_artifacts: list[str] = field(default_factory=list)
    forbidden_claims: list[str] = field(default_factory=list)
    routed_role: str = ""
    done_condition: str = ""
    result_ref: str | None = None
    blocker_reason: str | None = None
    timeout_seconds: int | None = None
    exploratory: bool = False
    extras: dict = field(default_factory=dict)


@dataclass
class EvidenceObject:
    evidence_id: str
    kind: EvidenceKind
    path: str
    digest: str
    producing_task: str | None = None
    scope: str = ""
    invalidates: str | None = None
    registered_at: int = 0


@dataclass
class EvidenceBase:
    """Append-only: objects are never removed, only superseded."""

    objects: list[EvidenceObject] = field(default_factory=list)

    def append(self, obj: EvidenceObject) -> None:
        if self.objects and obj.registered_at <= self.objects[-1].registered_at:
            raise ValueError(
                "evidence sequence must strictly increase: "
                f"{obj.registered_at} after {self.objects[-1].registered_at}"
            )
        if any(o.evidence_id == obj.evidence_id for o in self.objects):
            raise ValueError(f"duplicate evidence id: {obj.evidence_id}")
        self.objects.append(obj)

    def by_id(self, evidence_id: str) -> EvidenceObject | None:
        for obj in self.objects:
            if obj.evidence_id == evidence_id:
                return obj
        return None

    def ids(self) -> list[str]:
        return [o.evidence_id for o in self.objects]


@dataclass
class BlockerResolution:
    resolved_in_version: str
    audit_note: str


@dataclass
class Blocker:
    """Never deleted; resolution only adds fields."""

    blocker_id: str
    kind: BlockerKind
    description: str
    affected_claims: list[str] = field(default_factory=list)
    affected_rqs: list[str] = field(default_factory=list)
    resolution: BlockerResolution | None = None


@dataclass(frozen=True)
class AuthorityRef:
    """Who or what licensed a claim transition.

    kind is one of ``gate_decision``, ``human``, ``evidence``. Admission
    always requires kind ``gate_decision``; ``forbidden`` always requires
    kind ``human``; ``contradicted`` must cite the contradicting evidence.
    """

    kind: str
    ref: str

    def __str__(self) -> str:
        return f"{self.kind}:{self.ref}"


@dataclass
class HistoryEntry:
    from_status: ClaimStatus
    to_status: ClaimStatus
    authority: AuthorityRef
    seq: int


@dataclass
class EvidenceRequirement:
    artifact_type: str
    gate_id: str


@dataclass
class ClaimRecord:
    """A candidate manuscript claim and its admission bookkeeping.

    scope is a paper-section label or the literal "none"; a claim can never
    be admitted while scope is "none".
    """

    claim_id: str
    rq_link: str = ""
    claim_class: ClaimClass = ClaimClass.PROCESS
    statement: str = ""
    required_evidence: list[EvidenceRequirement] = field(default_factory=list)
    status: ClaimStatus = ClaimStatus.PLANNED
    scope: str = "none"
    audit_note: str = ""
    history: list[HistoryEntry] = field(default_factory=list)
    extras: dict = field(default_factory=dict)


@dataclass
class PaperBindingRecord:
    allowed: bool = False
    reason: str = ""
    admitted_claims: list[str] = field(default_factory=list)


@dataclass
class AdmissionChain:
    """The five-link record behind an admission; every link must resolve."""

    claim_id: str
    rq_link: str
    evidence_contract: list[EvidenceRequirement]
    artifact_refs: list[str]
    gate_decision_refs: list[str]
    paper_scope: str


@dataclass
class ClaimLedger:
    claims: list[ClaimRecord] = field(default_factory=list)
    paper_binding: PaperBindingRecord = field(default_factory=PaperBindingRecord)
    extras: dict = field(default_factory=dict)

    def by_id(self, claim_id: str) -> ClaimRecord | None:
        for claim in self.claims:
            if claim.claim_id == claim_id:
                return claim
        return None

    def claim_ids(self) -> set[str]:
        return {c.claim_id for c in self.claims}


@dataclass
class ArtifactCheck:
    """One checkable item in a gate manifest.

    ``expectation`` is the substring a content_match must find or the hex
    digest a hash check must equal. A content_match without an expectation
    degrades to "file exists and has readable, non-empty content"; hash
    checks always need a digest. ``contradicts_on`` is an optional marker
    text whose presence in a matched file signals contradiction rather
    than mere failure.
    """

    path: str
    method: CheckMethod = CheckMethod.EXISTENCE
    check_id: str | None = None
    artifact_type: str = ""
    expectation: str | None = None
    required: bool = True
    note: str = ""
    contradicts_on: str | None = None
    extras: dict = field(default_factory=dict)


@dataclass
class CheckResult:
    check_id: str
    path_pattern: str
    method: CheckMethod
    outcome: CheckOutcome
    matched_paths: list[str] = field(default_factory=list)
    detail: str = ""
    required: bool = True
    contradiction: bool = False


@dataclass
class GateDecision:
    """A recorded gate evaluation; append-only and reproducible.

    ``inputs_digest`` hashes the sorted (path, digest) pairs the evaluation
    examined, so a later audit can show whether the file tree drifted.
    ``decided_by`` is "mechanical" or "human:<reviewer>"; passed_limited
    only ever comes from a human record.
    """

    gate_id: str
    outcome: GateOutcome
    scope: str = ""
    allowed_claim: str = ""
    per_check_results: list[CheckResult] = field(default_factory=list)
    evaluated_at: int = 0
    inputs_digest: str = ""
    decided_by: str = "mechanical"
    forbidden_matches: list[str] = field(default_factory=list)
    contradiction: bool = False
    detail: str = ""
    extras: dict = field(default_factory=dict)


@dataclass
class GateManifest:
    gate_id: str
    claim_class: ClaimClass | None = None
    required_artifacts: list[ArtifactCheck] = field(default_factory=list)
    forbidden_evidence: list[str] = field(default_factory=list)
    pass_condition: PassCondition = PassCondition.ALL
    audit_note: str = ""
    claim_scope: str = ""
    status: str | None = None
    blocked_reason: str | None = None
    paper_claim_rule: str = ""
    version: str | None = None
    decision_log: list[GateDecision] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def latest_decision(self) -> GateDecision | None:
        return self.decision_log[-1] if self.decision_log else None


@dataclass
class EffectiveDecision:
    """Most-restrictive-wins resolution across decisions for one claim."""

    outcome: GateOutcome
    gate_ids: list[str]
    decisions: list[GateDecision] = field(default_factory=list)


@dataclass
class TaskStatusUpdate:
    task_id: str
    status: TaskStatus
    result_ref: str | None = None
    blocker_reason: str | None = None


@dataclass
class ClaimTransition:
    claim_id: str
    from_status: ClaimStatus
    to_status: ClaimStatus
    authority: AuthorityRef


@dataclass
class StateDelta:
    """One batch of state changes; structurally unable to touch the direction."""

    appended_evidence: list[EvidenceObject] = field(default_factory=list)
    task_status_updates: list[TaskStatusUpdate] = field(default_factory=list)
    new_blockers: list[Blocker] = field(default_factory=list)
    claim_transitions: list[ClaimTransition] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (
            self.appended_evidence
            or self.task_status_updates
            or self.new_blockers
            or self.claim_transitions
        )


@dataclass
class VersionState:
    """All durable state of one research epoch."""

    version_id: str
    status: VersionStatus = VersionStatus.ACTIVE
    epoch_role: str = ""
    direction: ResearchDirection | None = None
    direction_ref: str = "../RESEARCH_DIRECTION.md"
    source_version: str | None = None
    spine: RqSpine = field(default_factory=RqSpine)
    contracts: dict[str, TaskContract] = field(default_factory=dict)
    evidence: EvidenceBase = field(default_factory=EvidenceBase)
    ledger: ClaimLedger = field(default_factory=ClaimLedger)
    blockers: list[Blocker] = field(default_factory=list)
    gates: dict[str, GateManifest] = field(default_factory=dict)
    current_gate: str | None = None
    current_task: str | None = None
    last_completed_task: str | None = None
    focus_rq: str | None = None
    runnable_rqs: list[str] = field(default_factory=list)
    blocked_rqs: list[str] = field(default_factory=list)
    completed_rqs: list[str] = field(default_factory=list)
    paper_binding_allowed: bool = False
    paper_binding_reason: str = ""
    notes: list[str] = field(default_factory=list)
    status_extras: dict = field(default_factory=dict)
    calibration: dict = field(default_factory=dict)

    def is_terminal(self) -> bool:
        return self.status in TERMINAL_VERSION_STATUSES

    def blocker_by_id(self, blocker_id: str) -> Blocker | None:
        for blocker in self.blockers:
            if blocker.blocker_id == blocker_id:
                return blocker
        return None

    def next_sequence(self) -> int:
        """Monotonic counter derived from state, not stored separately."""
        seqs = [0]
        seqs.extend(o.registered_at for o in self.evidence.objects)
        for gate in self.gates.values():
            seqs.extend(d.evaluated_at for d in gate.decision_log)
        for claim in self.ledger.claims:
            seqs.extend(h.seq for h in claim.history)
        return max(seqs) + 1


@dataclass
class WorkerReport:
    task_id: str
    exit_disposition: str  # "succeeded" | "failed"
    produced_artifacts: list[tuple[str, str]] = field(default_factory=list)
    report_text: str = ""
    out_of_contract_writes: list[str] = field(default_factory=list)
    report_path: str | None = None


@dataclass
class WorkerBinding:
    """How to invoke an executor for a routed role.

    ``invocation`` is an argv template; each element may use the
    placeholders {contract}, {repo}, {version}, {task}, {report}.
    """

    routed_role: str
    invocation: list[str]
    environment: dict[str, str] = field(default_factory=dict)
    timeout: int = 3600


class InsightKind(str, Enum):
    FAILURE = "failure"
    ANOMALY = "anomaly"
    BLOCKER_REF = "blocker_ref"
    DESIGN_TENSION = "design_tension"
    NEGATIVE_OBSERVATION = "negative_observation"
    BOUNDARY_CLARIFICATION = "boundary_clarification"


class InsightConsequence(str, Enum):
    REFINE_RQ = "refine_rq"
    NARROW_CLAIM_BOUNDARY = "narrow_claim_boundary"
    ADD_BASELINE = "add_baseline"
    REVISE_TASK_SUITE = "revise_task_suite"
    STRENGTHEN_AUDIT_RUBRIC = "strengthen_audit_rubric"
    ESCALATE_HUMAN = "escalate_human"
    TERMINATE_LINE = "terminate_line"
    NO_ACTION = "no_action"


@dataclass
class ProvenanceRef:
    """Pointer to the artifact or decision an insight came from.

    kind is one of ``evidence``, ``blocker``, ``claim``, ``decision``.
    """

    kind: str
    ref: str

    def __str__(self) -> str:
        return f"{self.kind}:{self.ref}"


@dataclass
class Insight:
    insight_id: str
    kind: InsightKind
    description: str
    provenance: ProvenanceRef
    consequence: InsightConsequence | None = None
    no_action_rationale: str = ""


@dataclass
class CandidateRq:
    """A next-version RQ candidate; text is left for the human to write."""

    candidate_id: str
    derived_from_insights: list[str]
    note: str = ""


@dataclass
class CloseoutSeed:
    from_version: str
    candidate_rqs: list[CandidateRq] = field(default_factory=list)
    carried_blockers: list[Blocker] = field(default_factory=list)
    carried_claims: list[tuple[str, ClaimStatus]] = field(default_factory=list)
    frontier_items: list[str] = field(default_factory=list)


@dataclass
class Closeout:
    version_id: str
    final_status: VersionStatus
    evidence_summary: list[str] = field(default_factory=list)
    unresolved_blockers: list[Blocker] = field(default_factory=list)
    insights: list[Insight] = field(default_factory=list)
    claim_dispositions: list[tuple[str, ClaimStatus]] = field(default_factory=list)
    irrelevance_notes: dict[str, str] = field(default_factory=dict)
    seed: CloseoutSeed | None = None


@dataclass
class CloseoutTrigger:
    version_id: str
    terminal_gates: list[str]
    reason: str = "all gates terminal and task queue drained"


class InvariantKind(str, Enum):
    DIRECTION_LOCK = "direction_lock"
    EVIDENCE_MONOTONICITY = "evidence_monotonicity"
    GATE_BOUNDED_ADMISSION = "gate_bounded_admission"
    BLOCKER_CONSERVATION = "blocker_conservation"


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INDETERMINATE = "indeterminate"


@dataclass
class InvariantReport:
    invariant: InvariantKind
    verdict: Verdict
    violations: list[tuple[str, str]] = field(default_factory=list)

    def ok(self) -> bool:
        return self.verdict is Verdict.PASS


@dataclass
class PackageCheckResult:
    category: str
    checks_run: int
    checks_passed: int
    failures: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def ok(self) -> bool:
        return self.checks_passed == self.checks_run and not self.failures
