"""Version lifecycle and durable-state persistence.

One writer at a time (advisory lock taken by mutating CLI commands); any
number of readers. ``apply_delta`` works on a deep copy and persists the
whole version in a single staged batch, so a refused delta leaves both
the in-memory state and the files untouched.
"""

from __future__ import annotations

import copy
import re
from pathlib import Path

from . import layout, schemas
from .errors import (
    AdmissionError,
    DirectionIntegrityError,
    IntegrityError,
    LifecycleError,
    UsageError,
)
from .fsops import commit_files, compile_glob, sha256_bytes, sha256_file
from .model import (
    Blocker,
    BlockerResolution,
    ClaimStatus,
    CloseoutSeed,
    EvidenceBase,
    GateManifest,
    QueueEntry,
    ResearchDirection,
    RqNode,
    RqSpine,
    StateDelta,
    TaskContract,
    TaskStatus,
    VersionState,
    VersionStatus,
    ADMITTED_STATUSES,
)

DIRECTION_TEMPLATE = """\
# Research Direction

## Big RQ

{big_rq}

## Falsification Boundary

{falsification_boundary}

## Autonomy Limits

{autonomy_limits}
"""

_SECTION_RE = re.compile(r"^## +(.+?)\s*$", re.MULTILINE)

_SECTION_FIELDS = {
    "Big RQ": "big_rq",
    "Falsification Boundary": "falsification_boundary",
    "Autonomy Limits": "autonomy_limits",
}


def direction_from_text(text: str) -> ResearchDirection:
    """Build a direction record from the document text.

    The document is authoritative as opaque bytes (the digest is what the
    runtime enforces); the structured fields are best-effort echoes of the
    template sections for display.
    """
    direction = ResearchDirection(big_rq=text.strip(), content_digest=sha256_bytes(text.encode("utf-8")))
    sections = _SECTION_RE.split(text)
    # split yields [preamble, title1, body1, title2, body2, ...]
    for title, body in zip(sections[1::2], sections[2::2]):
        field_name = _SECTION_FIELDS.get(title.strip())
        if field_name:
            setattr(direction, field_name, body.strip())
    return direction


_direction_cache: dict = {}


def load_direction(repo_root: Path) -> ResearchDirection:
    path = layout.direction_path(repo_root)
    try:
        st = path.stat()
    except OSError as exc:
        raise DirectionIntegrityError(f"direction document missing: {path}") from exc
    key = (str(path), st.st_mtime_ns, st.st_size)
    cached = _direction_cache.get(str(path))
    if cached is not None and cached[0] == key:
        return copy.deepcopy(cached[1])
    direction = direction_from_text(path.read_text(encoding="utf-8"))
    _direction_cache[str(path)] = (key, direction)
    return copy.deepcopy(direction)


def verify_direction(repo_root: Path, direction: ResearchDirection) -> None:
    on_disk = load_direction(repo_root)
    if direction.content_digest and on_disk.content_digest != direction.content_digest:
        raise DirectionIntegrityError(
            "direction document does not match its recorded digest: "
            f"{on_disk.content_digest} != {direction.content_digest}"
        )


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _read(path: Path) -> bytes:
    return Path(path).read_bytes()


def load_state(repo_root: Path, version_id: str | None = None) -> VersionState:
    """Load and cross-validate one version's full state."""
    repo_root = Path(repo_root)
    if version_id is None:
        version_id = layout.read_current(repo_root)
    vdir = layout.version_dir(repo_root, version_id)
    if not vdir.is_dir():
        raise UsageError(f"version directory does not exist: {vdir}")

    header = schemas.parse_status(
        _read(layout.status_path(repo_root, version_id)),
        layout.rel(repo_root, layout.status_path(repo_root, version_id)),
    )
    spine = schemas.parse_spine(
        _read(layout.spine_path(repo_root, version_id)),
        layout.rel(repo_root, layout.spine_path(repo_root, version_id)),
    )
    tasks = schemas.parse_tasks(
        _read(layout.tasks_path(repo_root, version_id)),
        layout.rel(repo_root, layout.tasks_path(repo_root, version_id)),
    )
    gates = schemas.parse_gate_file(
        _read(layout.gates_path(repo_root, version_id)),
        layout.rel(repo_root, layout.gates_path(repo_root, version_id)),
    )
    evidence_file = layout.evidence_log_path(repo_root, version_id)
    evidence = (
        schemas.parse_evidence_log(_read(evidence_file), layout.rel(repo_root, evidence_file))
        if evidence_file.is_file()
        else EvidenceBase()
    )
    ledger_file = layout.ledger_path(repo_root)
    ledger = (
        schemas.parse_ledger(_read(ledger_file), layout.rel(repo_root, ledger_file))
        if ledger_file.is_file()
        else schemas.parse_ledger(b"claims: []\n")
    )
    calibration_file = layout.calibration_path(repo_root, version_id)
    calibration = (
        schemas.parse_calibration(_read(calibration_file))
        if calibration_file.is_file()
        else {}
    )

    direction = load_direction(repo_root)
    if header.direction_digest and header.direction_digest != direction.content_digest:
        raise DirectionIntegrityError(
            f"{version_id}: direction document drifted from recorded digest"
        )

    state = VersionState(
        version_id=header.version,
        status=header.status,
        epoch_role=header.epoch_role,
        direction=direction,
        direction_ref=header.direction_ref,
        source_version=header.source_version,
        spine=spine,
        contracts={t.task_id: t for t in tasks},
        evidence=evidence,
        ledger=ledger,
        blockers=header.blockers,
        gates={g.gate_id: g for g in gates},
        current_gate=header.current_gate,
        current_task=header.current_task,
        last_completed_task=header.last_completed_task,
        focus_rq=header.focus_rq,
        runnable_rqs=header.runnable_rqs,
        blocked_rqs=header.blocked_rqs,
        completed_rqs=header.completed_rqs,
        paper_binding_allowed=header.paper_binding_allowed,
        paper_binding_reason=header.paper_binding_reason,
        notes=header.notes,
        status_extras=header.extras,
        calibration=calibration,
    )
    problems = cross_validate(state)
    if problems:
        raise IntegrityError(problems)
    return state


def cross_validate(state: VersionState) -> list[str]:
    """Every dangling cross-file reference, reported together."""
    problems = []
    rq_ids = state.spine.rq_ids()
    for task in state.contracts.values():
        if task.rq_id and task.rq_id not in rq_ids:
            problems.append(
                f"task {task.task_id} references {task.rq_id} absent from spine"
            )
    for entry in state.spine.task_queue:
        if entry.task_id not in state.contracts:
            problems.append(f"task queue references unregistered task {entry.task_id}")
    for claim in state.ledger.claims:
        # chain integrity is enforced for admitted claims; historical
        # planned/blocked claims from earlier epochs may reference retired
        # RQs and stay visible without being runnable here
        if claim.status in ADMITTED_STATUSES and claim.rq_link and claim.rq_link not in rq_ids:
            problems.append(
                f"claim {claim.claim_id} references {claim.rq_link} absent from spine"
            )
    claim_ids = state.ledger.claim_ids()
    for cid in state.ledger.paper_binding.admitted_claims:
        if cid not in claim_ids:
            problems.append(f"paper binding lists unknown claim {cid}")
    if state.current_gate and state.current_gate not in state.gates:
        problems.append(f"current_gate {state.current_gate} is not registered")
    if state.current_task and state.current_task not in state.contracts:
        problems.append(f"current_task {state.current_task} is not registered")
    for rq in state.runnable_rqs + state.blocked_rqs + state.completed_rqs:
        if rq not in rq_ids:
            problems.append(f"status lists {rq} absent from spine")
    return problems


# ---------------------------------------------------------------------------
# Saving
# ---------------------------------------------------------------------------


def _status_header(state: VersionState) -> schemas.StatusHeader:
    return schemas.StatusHeader(
        version=state.version_id,
        status=state.status,
        schema_version=1,
        generated_by="controller",
        epoch_role=state.epoch_role,
        direction_ref=state.direction_ref,
        direction_digest=state.direction.content_digest if state.direction else None,
        source_version=state.source_version,
        current_gate=state.current_gate,
        focus_rq=state.focus_rq,
        runnable_rqs=state.runnable_rqs,
        blocked_rqs=state.blocked_rqs,
        completed_rqs=state.completed_rqs,
        current_task=state.current_task,
        last_completed_task=state.last_completed_task,
        paper_binding_allowed=state.paper_binding_allowed,
        paper_binding_reason=state.paper_binding_reason,
        blockers=state.blockers,
        notes=state.notes,
        extras=state.status_extras,
    )


def state_files(state: VersionState) -> dict[str, bytes]:
    """Serialize the whole version to its repo-relative file map."""
    vdir = f"{layout.RESEARCH_ROOT}/{state.version_id}"
    # values built through the validated operations skip the self-reparse;
    # the public serialize() entry point still refuses invalid documents
    files = {
        f"{vdir}/STATUS.yaml": schemas.serialize_status(_status_header(state), validate=False),
        f"{vdir}/RESEARCH_SPINE.yaml": schemas.serialize_spine(state.spine, validate=False),
        f"{vdir}/TASKS.yaml": schemas.serialize_tasks(
            [state.contracts[k] for k in state.contracts], validate=False
        ),
        f"{vdir}/EVIDENCE_GATE.yaml": schemas.serialize_gates(
            [state.gates[k] for k in state.gates], validate=False
        ),
        layout.LEDGER_FILE: schemas.serialize_ledger(state.ledger, validate=False),
    }
    # the evidence log and the calibration document appear once they have
    # content; loading tolerates their absence
    if state.evidence.objects:
        files[f"{vdir}/EVIDENCE_LOG.yaml"] = schemas.serialize_evidence_log(
            state.evidence, validate=False
        )
    if state.calibration:
        files[f"{vdir}/RQ_CALIBRATION.yaml"] = schemas.serialize_calibration(
            state.calibration
        )
    return files


def save_state(repo_root: Path, state: VersionState) -> None:
    commit_files(Path(repo_root), state_files(state))


# ---------------------------------------------------------------------------
# Repository initialization and version opening
# ---------------------------------------------------------------------------


def init_repo(
    repo_root: Path,
    big_rq: str = "State the top-level research question here.",
    falsification_boundary: str = "State what evidence would falsify the direction.",
    autonomy_limits: str = "State what workers may never change without human sign-off.",
) -> VersionState:
    """Materialize the full layout plus the four adoption files for V0."""
    repo_root = Path(repo_root)
    if layout.current_path(repo_root).exists():
        raise LifecycleError(f"already initialized: {layout.current_path(repo_root)}")
    for rel_dir in layout.TOP_LEVEL_DIRS:
        (repo_root / rel_dir).mkdir(parents=True, exist_ok=True)

    direction_text = DIRECTION_TEMPLATE.format(
        big_rq=big_rq,
        falsification_boundary=falsification_boundary,
        autonomy_limits=autonomy_limits,
    )
    layout.direction_path(repo_root).write_text(direction_text, encoding="utf-8")
    direction = direction_from_text(direction_text)

    state = VersionState(
        version_id="V0",
        status=VersionStatus.ACTIVE,
        epoch_role="initial exploration",
        direction=direction,
    )
    for sub in ("insights", "wiki", "rqs"):
        (layout.version_dir(repo_root, "V0") / sub).mkdir(parents=True, exist_ok=True)
    files = state_files(state)
    files[f"{layout.RESEARCH_ROOT}/{layout.CURRENT_FILE}"] = b"V0\n"
    commit_files(repo_root, files)
    return state


def open_version(
    repo_root: Path,
    version_id: str,
    direction: ResearchDirection,
    seed: CloseoutSeed | None = None,
    epoch_role: str = "",
) -> VersionState:
    """Open a new version from the approved direction, optionally seeded.

    A seed must come from a closed predecessor; carried blockers arrive
    unresolved, carried non-terminal claims keep their statuses, and the
    spine nodes those claims still reference are copied over so the new
    state is internally linked from the first read.
    """
    repo_root = Path(repo_root)
    verify_direction(repo_root, direction)
    vdir = layout.version_dir(repo_root, version_id)
    if vdir.exists():
        raise LifecycleError(f"version directory already exists: {vdir}")

    source_version = layout.read_current(repo_root)
    if seed is not None and seed.from_version != source_version:
        raise UsageError(
            f"seed comes from {seed.from_version} but the current version is {source_version}"
        )
    predecessor = load_state(repo_root, source_version)
    if not predecessor.is_terminal():
        raise LifecycleError(
            f"predecessor {source_version} is not closed "
            f"(status {predecessor.status.value})"
        )

    spine = RqSpine()
    gates: dict[str, GateManifest] = {}
    evidence = EvidenceBase()
    blockers: list[Blocker] = []
    notes: list[str] = []

    # an admitted claim's chain must keep resolving in every later epoch:
    # copy forward its RQ node, its gates with their decision logs, and the
    # evidence objects those decisions rest on
    admitted = [
        c for c in predecessor.ledger.claims if c.status in ADMITTED_STATUSES
    ]
    workable_carried: set[str] = set()
    if seed is not None:
        workable_carried = {
            cid
            for cid, status in seed.carried_claims
            if status
            in (ClaimStatus.PLANNED, ClaimStatus.DRAFT_ONLY, ClaimStatus.BLOCKED)
        }
        blockers = copy.deepcopy(seed.carried_blockers)
        notes.append(f"seeded from {seed.from_version} closeout")
        if seed.candidate_rqs:
            notes.append(
                "candidate RQs awaiting human pruning: "
                + ", ".join(c.candidate_id for c in seed.candidate_rqs)
            )
        if seed.frontier_items:
            notes.append(f"frontier items carried: {len(seed.frontier_items)}")

    needed_rqs = {c.rq_link for c in admitted if c.rq_link}
    needed_rqs |= {
        c.rq_link
        for c in predecessor.ledger.claims
        if c.claim_id in workable_carried and c.rq_link
    }
    spine.rqs = [
        copy.deepcopy(rq) for rq in predecessor.spine.rqs if rq.rq_id in needed_rqs
    ]

    needed_gates = {
        req.gate_id
        for c in admitted
        for req in c.required_evidence
        if req.gate_id in predecessor.gates
    }
    gates = {
        gid: copy.deepcopy(predecessor.gates[gid]) for gid in sorted(needed_gates)
    }

    from .gates import effective_decisions

    chain_paths: set[str] = set()
    for gate in gates.values():
        for decision in effective_decisions(gate):
            for result in decision.per_check_results:
                if result.required:
                    chain_paths.update(result.matched_paths)
    for obj in predecessor.evidence.objects:
        if obj.path in chain_paths:
            carried = copy.deepcopy(obj)
            carried.registered_at = len(evidence.objects) + 1
            evidence.objects.append(carried)

    ledger_file = layout.ledger_path(repo_root)
    ledger = (
        schemas.parse_ledger(ledger_file.read_bytes())
        if ledger_file.is_file()
        else schemas.parse_ledger(b"claims: []\n")
    )

    state = VersionState(
        version_id=version_id,
        status=VersionStatus.ACTIVE,
        epoch_role=epoch_role,
        direction=direction,
        source_version=source_version,
        spine=spine,
        gates=gates,
        evidence=evidence,
        ledger=ledger,
        blockers=blockers,
        notes=notes,
    )
    for sub in ("insights", "wiki", "rqs"):
        (vdir / sub).mkdir(parents=True, exist_ok=True)
    files = state_files(state)
    files[f"{layout.RESEARCH_ROOT}/{layout.CURRENT_FILE}"] = (
        version_id.encode("utf-8") + b"\n"
    )
    commit_files(repo_root, files)
    return state


# ---------------------------------------------------------------------------
# Mutation
# ---------------------------------------------------------------------------


def register_evidence(state: VersionState, repo_root: Path, obj) -> None:
    """Assign sequence and id, verify the on-disk digest, and append."""
    seq = state.next_sequence()
    obj.registered_at = seq
    if not obj.evidence_id:
        obj.evidence_id = f"EV{seq:05d}"
    target = Path(repo_root) / obj.path
    if not target.is_file():
        raise UsageError(f"evidence file missing at registration: {obj.path}")
    digest = sha256_file(target)
    if obj.digest and obj.digest != digest:
        raise UsageError(
            f"evidence digest mismatch for {obj.path}: {digest} != {obj.digest}"
        )
    obj.digest = digest
    if obj.invalidates and state.evidence.by_id(obj.invalidates) is None:
        raise UsageError(f"evidence invalidates unknown object: {obj.invalidates}")
    state.evidence.append(obj)


def apply_delta(repo_root: Path, state: VersionState, delta: StateDelta) -> VersionState:
    """Apply one delta atomically: all files updated or none.

    The direction is untouchable by construction; transitions toward
    admitted must carry a gate-decision authority, and are validated by
    the claim ledger before anything is persisted.
    """
    from . import ledger as ledger_ops

    if state.status not in (VersionStatus.ACTIVE, VersionStatus.BLOCKED):
        raise LifecycleError(
            f"version {state.version_id} is {state.status.value}; no further mutation"
        )
    direction_rel = f"{layout.RESEARCH_ROOT}/{layout.DIRECTION_FILE}"
    for obj in delta.appended_evidence:
        if obj.path == direction_rel:
            raise UsageError("a delta may not register the direction document as evidence")
    for transition in delta.claim_transitions:
        if (
            transition.to_status in ADMITTED_STATUSES
            and transition.authority.kind != "gate_decision"
        ):
            raise AdmissionError(
                transition.claim_id,
                ["transition to admitted status requires a gate_decision authority"],
            )

    new_state = copy.deepcopy(state)

    for obj in delta.appended_evidence:
        register_evidence(new_state, repo_root, copy.deepcopy(obj))

    for update in delta.task_status_updates:
        task = new_state.contracts.get(update.task_id)
        if task is None:
            raise UsageError(f"task status update for unknown task {update.task_id}")
        task.status = update.status
        if update.result_ref is not None:
            task.result_ref = update.result_ref
        if update.blocker_reason is not None:
            task.blocker_reason = update.blocker_reason
        if update.status is TaskStatus.DONE and not task.result_ref:
            raise UsageError(f"task {update.task_id} marked done without result_ref")
        if update.status is TaskStatus.BLOCKED and not task.blocker_reason:
            raise UsageError(f"task {update.task_id} blocked without blocker_reason")
        for entry in new_state.spine.task_queue:
            if entry.task_id == update.task_id:
                entry.status = update.status
        if update.status is TaskStatus.DONE:
            new_state.last_completed_task = update.task_id
        if new_state.current_task == update.task_id and update.status is not TaskStatus.RUNNING:
            new_state.current_task = None

    for blocker in delta.new_blockers:
        if new_state.blocker_by_id(blocker.blocker_id) is not None:
            raise UsageError(f"duplicate blocker id {blocker.blocker_id}")
        new_state.blockers.append(copy.deepcopy(blocker))

    for transition in delta.claim_transitions:
        ledger_ops.transition_claim(
            new_state.ledger,
            transition.claim_id,
            transition.to_status,
            transition.authority,
            state=new_state,
            expected_from=transition.from_status,
        )

    save_state(repo_root, new_state)
    return new_state


def next_runnable_task(state: VersionState) -> TaskContract | None:
    """First queued task whose RQ is runnable and whose contract is valid.

    Deterministic: stable FIFO over the spine's task queue. Returns None
    when the version is not active, the queue is exhausted, or everything
    runnable is blocked.
    """
    if state.status is not VersionStatus.ACTIVE:
        return None
    runnable = set(state.runnable_rqs)
    for entry in state.spine.task_queue:
        task = state.contracts.get(entry.task_id)
        if task is None or task.status is not TaskStatus.QUEUED:
            continue
        if task.rq_id not in runnable:
            continue
        if contract_violations(task, state):
            continue
        return task
    return None


def contract_violations(task: TaskContract, state: VersionState) -> list[str]:
    """Why a contract is not valid research work; empty when it is."""
    problems = []
    if not task.rq_id:
        problems.append("rq_id missing")
    elif task.rq_id not in state.spine.rq_ids():
        problems.append(f"rq_id {task.rq_id} not in spine")
    if task.claim_class is None:
        problems.append("claim_class missing")
    if not task.expected_artifacts:
        problems.append("expected_artifacts empty")
    if not task.allowed_files:
        problems.append("allowed_files empty")
    if task.expected_artifacts and task.allowed_files:
        if not _artifacts_reachable(task.expected_artifacts, task.allowed_files):
            problems.append("unreachable artifacts: allowed_files excludes every expected pattern")
    return problems


def _glob_witness(pattern: str) -> str:
    """A concrete path the pattern matches, for glob-vs-glob overlap tests."""
    parts = []
    for part in pattern.rstrip("/").split("/"):
        if part == "**":
            parts.append("w")
        else:
            parts.append(part.replace("*", "w"))
    return "/".join(parts)


def _artifacts_reachable(expected: list[str], allowed: list[str]) -> bool:
    for exp in expected:
        witness = _glob_witness(exp)
        for allow in allowed:
            regex, dir_only = compile_glob(allow)
            if not dir_only and regex.match(witness):
                return True
            # also try the allowed pattern's witness against the expected glob
            exp_regex, exp_dir = compile_glob(exp)
            if not exp_dir and exp_regex.match(_glob_witness(allow)):
                return True
    return False


# ---------------------------------------------------------------------------
# Registration helpers (used by the CLI layer)
# ---------------------------------------------------------------------------


def _require_mutable(state: VersionState) -> None:
    if state.is_terminal():
        raise LifecycleError(
            f"version {state.version_id} is {state.status.value}; no further mutation"
        )


def register_rq(state: VersionState, node: RqNode, runnable: bool = True) -> None:
    _require_mutable(state)
    if node.rq_id in state.spine.rq_ids():
        raise UsageError(f"rq {node.rq_id} already registered")
    if node.parent_rq is not None and node.parent_rq not in state.spine.rq_ids():
        raise UsageError(f"parent rq {node.parent_rq} not registered")
    state.spine.rqs.append(node)
    if runnable and node.rq_id not in state.runnable_rqs:
        state.runnable_rqs.append(node.rq_id)
    if state.focus_rq is None:
        state.focus_rq = node.rq_id


def register_task(state: VersionState, contract: TaskContract) -> None:
    _require_mutable(state)
    if contract.task_id in state.contracts:
        raise UsageError(f"task {contract.task_id} already registered")
    if contract.rq_id and contract.rq_id not in state.spine.rq_ids():
        raise UsageError(f"task {contract.task_id} references unknown rq {contract.rq_id}")
    state.contracts[contract.task_id] = contract
    state.spine.task_queue.append(
        QueueEntry(task_id=contract.task_id, status=contract.status)
    )


def register_gate(state: VersionState, gate: GateManifest) -> None:
    _require_mutable(state)
    if gate.gate_id in state.gates:
        raise UsageError(f"gate {gate.gate_id} already registered")
    state.gates[gate.gate_id] = gate
    if state.current_gate is None:
        state.current_gate = gate.gate_id


def resolve_blocker(
    state: VersionState, blocker_id: str, audit_note: str, resolved_in_version: str | None = None
) -> Blocker:
    """Resolution only adds fields; the blocker itself is never removed."""
    _require_mutable(state)
    blocker = state.blocker_by_id(blocker_id)
    if blocker is None:
        raise UsageError(f"unknown blocker {blocker_id}")
    if blocker.resolution is not None:
        raise UsageError(f"blocker {blocker_id} already resolved")
    if not audit_note:
        raise UsageError("blocker resolution requires an audit note")
    blocker.resolution = BlockerResolution(
        resolved_in_version=resolved_in_version or state.version_id,
        audit_note=audit_note,
    )
    return blocker


def block_version(state: VersionState, blocker_id: str) -> None:
    """Mark the version blocked on a registered, unresolved blocker."""
    _require_mutable(state)
    blocker = state.blocker_by_id(blocker_id)
    if blocker is None:
        raise UsageError(f"unknown blocker {blocker_id}")
    state.status = VersionStatus.BLOCKED
    blocking = state.status_extras.setdefault("blocking_blockers", [])
    if blocker_id not in blocking:
        blocking.append(blocker_id)


def reactivate_version(state: VersionState) -> None:
    """blocked -> active, permitted once every blocking blocker is resolved."""
    if state.status is not VersionStatus.BLOCKED:
        raise LifecycleError(f"version {state.version_id} is not blocked")
    blocking = state.status_extras.get("blocking_blockers", [])
    unresolved = [
        bid
        for bid in blocking
        if (b := state.blocker_by_id(bid)) is not None and b.resolution is None
    ]
    if unresolved:
        raise LifecycleError(
            "cannot reactivate; unresolved blocking blockers: " + ", ".join(unresolved)
        )
    state.status = VersionStatus.ACTIVE
    state.status_extras.pop("blocking_blockers", None)
