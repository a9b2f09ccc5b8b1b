"""Deterministic gate evaluation: artifact checklists, nothing smarter.

A gate decides by looking at the file tree (existence, content match,
hash) and at the registered evidence base (forbidden patterns). It never
runs code, fetches anything, or interprets artifact semantics. Unreadable
files fail closed: unverifiable is not verified.
"""

from __future__ import annotations

from pathlib import Path

from . import layout
from .errors import UsageError
from .fsops import digest_pairs, match_tree, sha256_file
from .model import (
    ArtifactCheck,
    CheckMethod,
    CheckOutcome,
    CheckResult,
    EffectiveDecision,
    EvidenceBase,
    EvidenceKind,
    EvidenceObject,
    GateDecision,
    GateManifest,
    GateOutcome,
    GATE_OUTCOME_RANK,
    PassCondition,
    VersionState,
)
from . import schemas
from . import yamlio
from .fsops import write_file_atomic


def evaluate_check(check: ArtifactCheck, repo_root: Path) -> CheckResult:
    """Run one artifact check against the working tree."""
    repo_root = Path(repo_root)
    matched = match_tree(repo_root, check.path)
    result = CheckResult(
        check_id=check.check_id or check.artifact_type or check.path,
        path_pattern=check.path,
        method=check.method,
        outcome=CheckOutcome.FAIL,
        matched_paths=matched,
        required=check.required,
    )

    files = [p for p in matched if (repo_root / p).is_file()]

    if check.method is CheckMethod.EXISTENCE:
        if matched:
            result.outcome = CheckOutcome.PASS
        else:
            result.detail = f"no path matches {check.path!r}"
    elif check.method is CheckMethod.CONTENT_MATCH:
        if not files:
            result.detail = f"no file matches {check.path!r}"
        else:
            for rel_path in files:
                try:
                    text = (repo_root / rel_path).read_text(encoding="utf-8")
                except (OSError, UnicodeDecodeError) as exc:
                    result.outcome = CheckOutcome.IO_FAILURE
                    result.detail = f"unreadable {rel_path}: {exc}"
                    break
                if check.expectation is None:
                    if text.strip():
                        result.outcome = CheckOutcome.PASS
                        break
                elif check.expectation in text:
                    result.outcome = CheckOutcome.PASS
                    break
            if result.outcome is CheckOutcome.FAIL:
                result.detail = (
                    f"expectation {check.expectation!r} not found"
                    if check.expectation is not None
                    else "matched files have no content"
                )
    elif check.method is CheckMethod.HASH:
        if not files:
            result.detail = f"no file matches {check.path!r}"
        else:
            for rel_path in files:
                try:
                    digest = sha256_file(repo_root / rel_path)
                except OSError as exc:
                    result.outcome = CheckOutcome.IO_FAILURE
                    result.detail = f"unreadable {rel_path}: {exc}"
                    break
                if digest == check.expectation:
                    result.outcome = CheckOutcome.PASS
                    result.detail = ""
                    break
            else:
                result.detail = f"no matched file has digest {check.expectation}"

    if check.contradicts_on and result.outcome is not CheckOutcome.IO_FAILURE:
        for rel_path in files:
            try:
                text = (repo_root / rel_path).read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError):
                continue
            if check.contradicts_on in text:
                result.contradiction = True
                result.detail = (
                    f"contradiction marker {check.contradicts_on!r} in {rel_path}"
                )
                break
    return result


def forbidden_evidence_hits(gate: GateManifest, evidence: EvidenceBase | None) -> list[str]:
    """Forbidden patterns matched against evidence kind, path, and scope text."""
    if evidence is None:
        return []
    hits = []
    for pattern in gate.forbidden_evidence:
        for obj in evidence.objects:
            if (
                pattern in obj.kind.value
                or pattern in obj.path
                or pattern in obj.scope
            ):
                hits.append(f"{pattern!r} matched {obj.evidence_id} ({obj.path})")
                break
    return hits


def evaluate_gate(
    gate: GateManifest,
    repo_root: Path,
    evidence: EvidenceBase | None = None,
    seq: int = 0,
) -> GateDecision:
    """Evaluate every check and fold them under the gate's pass condition.

    Mechanical outcomes are binary (passed/failed); passed_limited exists
    only on human-annotated records. Non-required checks are recorded but
    never block. An io-failure on a required check fails the gate.
    """
    repo_root = Path(repo_root)
    results = [evaluate_check(check, repo_root) for check in gate.required_artifacts]

    examined: dict[str, str] = {}
    for result in results:
        for rel_path in result.matched_paths:
            abs_path = repo_root / rel_path
            if rel_path in examined:
                continue
            if abs_path.is_dir():
                examined[rel_path] = "dir"
            else:
                try:
                    examined[rel_path] = sha256_file(abs_path)
                except OSError:
                    examined[rel_path] = "unreadable"

    required = [r for r in results if r.required]
    detail = ""
    if gate.pass_condition is PassCondition.ALL:
        ok = all(r.outcome is CheckOutcome.PASS for r in required)
        if not required:
            detail = "vacuous: no required checks"
    else:
        ok = any(r.outcome is CheckOutcome.PASS for r in required)
        if not required:
            ok = False
            detail = "no required checks to satisfy 'any'"

    forbidden = forbidden_evidence_hits(gate, evidence)
    contradiction = bool(forbidden) or any(r.contradiction for r in required)
    if forbidden or contradiction:
        ok = False
    if forbidden and not detail:
        detail = "forbidden evidence present"

    failed_names = [r.check_id for r in required if r.outcome is not CheckOutcome.PASS]
    if not ok and failed_names and not detail:
        detail = "failed checks: " + ", ".join(failed_names)

    return GateDecision(
        gate_id=gate.gate_id,
        outcome=GateOutcome.PASSED if ok else GateOutcome.FAILED,
        scope=gate.claim_scope,
        allowed_claim="",
        per_check_results=results,
        evaluated_at=seq,
        inputs_digest=digest_pairs(examined.items()),
        decided_by="mechanical",
        forbidden_matches=forbidden,
        contradiction=contradiction,
        detail=detail,
    )


def human_decision(
    gate: GateManifest,
    outcome: GateOutcome,
    reviewer: str,
    scope: str,
    allowed_claim: str = "",
    seq: int = 0,
) -> GateDecision:
    """A recorded human gate decision; the only source of passed_limited."""
    if not reviewer:
        raise UsageError("human gate decisions require a reviewer identity")
    if not scope:
        raise UsageError("human gate decisions require scope text")
    return GateDecision(
        gate_id=gate.gate_id,
        outcome=outcome,
        scope=scope,
        allowed_claim=allowed_claim,
        per_check_results=[],
        evaluated_at=seq,
        inputs_digest="",
        decided_by=f"human:{reviewer}",
    )


def resolve_gate_conflict(decisions) -> EffectiveDecision:
    """Most restrictive outcome wins: failed < passed_limited < passed."""
    decisions = list(decisions)
    if not decisions:
        raise UsageError("resolve_gate_conflict requires at least one decision")
    minimum = min(GATE_OUTCOME_RANK[d.outcome] for d in decisions)
    contributors = [d for d in decisions if GATE_OUTCOME_RANK[d.outcome] == minimum]
    outcome = contributors[0].outcome
    return EffectiveDecision(
        outcome=outcome,
        gate_ids=sorted({d.gate_id for d in contributors}),
        decisions=contributors,
    )


def effective_decisions(gate: GateManifest) -> list[GateDecision]:
    """The decisions that currently speak for a gate.

    The latest mechanical decision and the latest human decision both
    count; a human narrowing (passed_limited) is never silently overridden
    by a later mechanical pass, because conflict resolution takes the most
    restrictive of the two.
    """
    latest_mechanical = None
    latest_human = None
    for decision in gate.decision_log:
        if decision.decided_by.startswith("human"):
            latest_human = decision
        else:
            latest_mechanical = decision
    return [d for d in (latest_mechanical, latest_human) if d is not None]


def effective_outcome(gate: GateManifest) -> GateOutcome | None:
    """Outcome the gate currently stands at, if it has any decisions."""
    decisions = effective_decisions(gate)
    if not decisions:
        return None
    return resolve_gate_conflict(decisions).outcome


def gate_is_terminal(gate: GateManifest) -> bool:
    """A gate is terminal once it carries a decision or a terminal doc status."""
    if gate.decision_log:
        return True
    return gate.status in {"passed", "failed", "passed_limited", "blocked"}


def decision_ref(decision: GateDecision, ordinal: int | None = None) -> str:
    """Stable reference to one decision within a gate's log."""
    if ordinal is None:
        return f"{decision.gate_id}@{decision.evaluated_at}"
    return f"{decision.gate_id}#{ordinal}"


def record_decision(
    state: VersionState,
    repo_root: Path,
    gate: GateManifest,
    decision: GateDecision,
) -> EvidenceObject:
    """Append a decision to the gate's log and mirror it as audit evidence.

    The mirror file under decisions/ is written once and never rewritten,
    so its digest stays valid for later audits even though the gate file
    itself is runtime state. The returned evidence object still has to go
    through a delta; nothing is registered here.
    """
    ordinal = len(gate.decision_log)
    gate.decision_log.append(decision)
    gate.status = decision.outcome.value

    path = layout.decision_file(repo_root, state.version_id, gate.gate_id, ordinal)
    data = yamlio.dump(schemas.decision_to_doc(decision))
    write_file_atomic(path, data)

    return EvidenceObject(
        evidence_id=f"EV_{gate.gate_id}_d{ordinal:03d}",
        kind=EvidenceKind.AUDIT_LABEL,
        path=layout.rel(repo_root, path),
        digest=sha256_file(path),
        producing_task=None,
        scope=f"gate:{gate.gate_id}",
        invalidates=None,
        registered_at=0,
    )
