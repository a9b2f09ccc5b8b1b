"""End-of-version synthesis: insights, the closeout record, and reseeding.

The runtime drafts insights from what it can see (blockers, contradicted
claims, failed gates) and refuses to close a version while anything
unresolved is neither covered by an insight nor explicitly ruled
irrelevant. Consequences and the terminal status are human choices; the
code only checks that they were made.
"""

from __future__ import annotations

from pathlib import Path

from . import layout, schemas, yamlio
from .engine import maybe_close_version
from .errors import CloseoutError, LifecycleError, UsageError
from .fsops import write_file_atomic
from .gates import effective_outcome
from .model import (
    CandidateRq,
    ClaimStatus,
    Closeout,
    CloseoutSeed,
    GateOutcome,
    Insight,
    InsightConsequence,
    InsightKind,
    ProvenanceRef,
    VersionState,
    VersionStatus,
    TERMINAL_VERSION_STATUSES,
    ADMITTED_STATUSES,
)
from . import state as state_ops


def _contradicting_evidence_ref(claim) -> str | None:
    for entry in reversed(claim.history):
        if entry.to_status is ClaimStatus.CONTRADICTED and entry.authority.kind == "evidence":
            return entry.authority.ref
    return None


def _failed_gates(state: VersionState) -> list[str]:
    failed = []
    for gate_id in sorted(state.gates):
        if effective_outcome(state.gates[gate_id]) is GateOutcome.FAILED:
            failed.append(gate_id)
    return failed


def collect_insights(state: VersionState) -> list[Insight]:
    """Draft one insight per unresolved blocker, contradicted claim, and
    failed gate. Consequences are deliberately left unset: assigning them
    is the human half of the boundary."""
    trigger = maybe_close_version(state)
    if trigger is None:
        raise UsageError(
            f"version {state.version_id} is not eligible for closeout yet"
        )
    drafts: list[Insight] = []
    for blocker in state.blockers:
        if blocker.resolution is not None:
            continue
        drafts.append(
            Insight(
                insight_id=f"I_{blocker.blocker_id}",
                kind=InsightKind.BLOCKER_REF,
                description=f"unresolved blocker {blocker.blocker_id}: {blocker.description}",
                provenance=ProvenanceRef("blocker", blocker.blocker_id),
            )
        )
    for claim in state.ledger.claims:
        if claim.status is not ClaimStatus.CONTRADICTED:
            continue
        evidence_ref = _contradicting_evidence_ref(claim)
        drafts.append(
            Insight(
                insight_id=f"I_{claim.claim_id}",
                kind=InsightKind.NEGATIVE_OBSERVATION,
                description=f"claim {claim.claim_id} contradicted: {claim.statement}",
                provenance=ProvenanceRef("evidence", evidence_ref or ""),
            )
        )
    for gate_id in _failed_gates(state):
        gate = state.gates[gate_id]
        drafts.append(
            Insight(
                insight_id=f"I_{gate_id}",
                kind=InsightKind.FAILURE,
                description=f"gate {gate_id} failed its evidence checklist",
                provenance=ProvenanceRef(
                    "decision", f"{gate_id}#{len(gate.decision_log) - 1}"
                ),
            )
        )
    return drafts


def _provenance_resolves(state: VersionState, prov: ProvenanceRef) -> bool:
    if prov.kind == "blocker":
        return state.blocker_by_id(prov.ref) is not None
    if prov.kind == "evidence":
        return state.evidence.by_id(prov.ref) is not None
    if prov.kind == "claim":
        return state.ledger.by_id(prov.ref) is not None
    if prov.kind == "decision":
        gate_id, _, ordinal = prov.ref.partition("#")
        gate = state.gates.get(gate_id)
        if gate is None or not ordinal.isdigit():
            return False
        return int(ordinal) < len(gate.decision_log)
    return False


def _coverage_gaps(
    state: VersionState, insights: list[Insight], irrelevance_notes: dict[str, str]
) -> list[str]:
    """Items that would be silently lost: no insight, no irrelevance note."""
    provs = {(i.provenance.kind, i.provenance.ref) for i in insights}
    gaps = []
    for blocker in state.blockers:
        if blocker.resolution is not None:
            continue
        key = f"blocker:{blocker.blocker_id}"
        if ("blocker", blocker.blocker_id) not in provs and key not in irrelevance_notes:
            gaps.append(key)
    for claim in state.ledger.claims:
        if claim.status is not ClaimStatus.CONTRADICTED:
            continue
        key = f"claim:{claim.claim_id}"
        evidence_ref = _contradicting_evidence_ref(claim)
        covered = ("evidence", evidence_ref) in provs or ("claim", claim.claim_id) in provs
        if not covered and key not in irrelevance_notes:
            gaps.append(key)
    for gate_id in _failed_gates(state):
        key = f"gate:{gate_id}"
        covered = any(
            kind == "decision" and ref.startswith(f"{gate_id}#") for kind, ref in provs
        )
        if not covered and key not in irrelevance_notes:
            gaps.append(key)
    return gaps


def produce_closeout(
    repo_root: Path,
    state: VersionState,
    insights: list[Insight],
    final_status: VersionStatus,
    irrelevance_notes: dict[str, str] | None = None,
) -> Closeout:
    """Persist the closeout and freeze the version at a terminal status.

    Refuses while any insight lacks a consequence, any provenance dangles,
    or anything unresolved is neither covered nor ruled irrelevant.
    """
    irrelevance_notes = dict(irrelevance_notes or {})
    if final_status not in TERMINAL_VERSION_STATUSES:
        raise UsageError(f"{final_status.value} is not a terminal status")
    if layout.closeout_yaml_path(repo_root, state.version_id).exists():
        raise LifecycleError(f"version {state.version_id} already has a closeout")
    trigger = maybe_close_version(state)
    if trigger is None:
        raise UsageError(
            f"version {state.version_id} is not eligible for closeout yet"
        )

    unfinished = [i.insight_id for i in insights if i.consequence is None]
    if unfinished:
        raise CloseoutError("insights without a consequence", unfinished)
    no_rationale = [
        i.insight_id
        for i in insights
        if i.consequence is InsightConsequence.NO_ACTION and not i.no_action_rationale
    ]
    if no_rationale:
        raise CloseoutError("no_action insights without rationale", no_rationale)
    dangling = [
        f"{i.insight_id} -> {i.provenance}"
        for i in insights
        if not _provenance_resolves(state, i.provenance)
    ]
    if dangling:
        raise CloseoutError("insight provenance does not resolve", dangling)
    gaps = _coverage_gaps(state, insights, irrelevance_notes)
    if gaps:
        raise CloseoutError("silent loss refused; uncovered items", gaps)

    closeout = Closeout(
        version_id=state.version_id,
        final_status=final_status,
        evidence_summary=state.evidence.ids(),
        unresolved_blockers=[b for b in state.blockers if b.resolution is None],
        insights=list(insights),
        claim_dispositions=[(c.claim_id, c.status) for c in state.ledger.claims],
        irrelevance_notes=irrelevance_notes,
    )
    closeout.seed = seed_next_version(closeout)

    write_file_atomic(
        layout.closeout_yaml_path(repo_root, state.version_id),
        schemas.serialize_closeout(closeout),
    )
    write_file_atomic(
        layout.closeout_md_path(repo_root, state.version_id),
        _render_markdown(closeout).encode("utf-8"),
    )
    insight_root = layout.insights_dir(repo_root, state.version_id)
    for insight in insights:
        write_file_atomic(
            insight_root / f"{insight.insight_id}.yaml",
            yamlio.dump(schemas.insight_to_doc(insight)),
        )

    state.status = final_status
    state_ops.save_state(repo_root, state)
    return closeout


def seed_next_version(closeout: Closeout) -> CloseoutSeed:
    """Derive the successor seed from closeout content alone.

    Insights never auto-promote: candidate RQs cite the insights that
    motivated them and carry no claim status; non-admitted claims are
    carried with their statuses intact.
    """
    candidates = [
        CandidateRq(
            candidate_id=f"RQ_CAND_{insight.insight_id}",
            derived_from_insights=[insight.insight_id],
            note=insight.description,
        )
        for insight in closeout.insights
        if insight.consequence is InsightConsequence.REFINE_RQ
    ]
    carried_claims = [
        (claim_id, status)
        for claim_id, status in closeout.claim_dispositions
        if status not in ADMITTED_STATUSES
    ]
    return CloseoutSeed(
        from_version=closeout.version_id,
        candidate_rqs=candidates,
        carried_blockers=list(closeout.unresolved_blockers),
        carried_claims=carried_claims,
        frontier_items=list(closeout.irrelevance_notes),
    )


def load_closeout(repo_root: Path, version_id: str) -> Closeout:
    path = layout.closeout_yaml_path(repo_root, version_id)
    if not path.is_file():
        raise UsageError(f"no closeout recorded for {version_id}")
    return schemas.parse_closeout(path.read_bytes(), layout.rel(repo_root, path))


def _render_markdown(closeout: Closeout) -> str:
    lines = [
        f"# Closeout: {closeout.version_id}",
        "",
        f"Final status: `{closeout.final_status.value}`",
        "",
        f"Evidence objects: {len(closeout.evidence_summary)}",
        "",
        "## Unresolved blockers",
        "",
    ]
    if closeout.unresolved_blockers:
        for blocker in closeout.unresolved_blockers:
            lines.append(
                f"- **{blocker.blocker_id}** ({blocker.kind.value}): {blocker.description}"
            )
    else:
        lines.append("- none")
    lines += ["", "## Insights", ""]
    if closeout.insights:
        for insight in closeout.insights:
            consequence = insight.consequence.value if insight.consequence else "unset"
            lines.append(
                f"- **{insight.insight_id}** [{insight.kind.value} -> {consequence}] "
                f"{insight.description} (from {insight.provenance})"
            )
    else:
        lines.append("- none")
    lines += ["", "## Claim dispositions", ""]
    if closeout.claim_dispositions:
        for claim_id, status in closeout.claim_dispositions:
            lines.append(f"- {claim_id}: {status.value}")
    else:
        lines.append("- none")
    if closeout.irrelevance_notes:
        lines += ["", "## Explicitly ruled irrelevant", ""]
        for key in sorted(closeout.irrelevance_notes):
            lines.append(f"- {key}: {closeout.irrelevance_notes[key]}")
    lines.append("")
    return "\n".join(lines)
