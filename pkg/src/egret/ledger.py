"""The claim-status state machine and the admission chain.

Nothing reaches manuscript language except through here: a claim is
admitted only when its RQ link, evidence contract, registered artifacts,
gate decisions, and paper scope all resolve together. Refusals never
mutate; downgrades never delete evidence references.
"""

from __future__ import annotations

from .errors import TransitionError, UsageError
from .gates import effective_decisions, gate_is_terminal, resolve_gate_conflict
from .model import (
    AdmissionChain,
    AuthorityRef,
    ClaimClass,
    ClaimLedger,
    ClaimRecord,
    ClaimStatus,
    GateOutcome,
    GATE_OUTCOME_RANK,
    HistoryEntry,
    PaperBindingRecord,
    VersionState,
    ADMITTED_STATUSES,
)

# Legal transitions. forbidden is terminal and reachable from anywhere,
# but only on explicit human authority; invalidating an admitted claim
# must go through contradicted so the audit trail stays honest.
_LATTICE: dict[ClaimStatus, frozenset[ClaimStatus]] = {
    ClaimStatus.PLANNED: frozenset(
        {
            ClaimStatus.DRAFT_ONLY,
            ClaimStatus.BLOCKED,
            ClaimStatus.ADMITTED,
            ClaimStatus.ADMITTED_LIMITED,
            ClaimStatus.CONTRADICTED,
            ClaimStatus.FORBIDDEN,
        }
    ),
    ClaimStatus.DRAFT_ONLY: frozenset(
        {
            ClaimStatus.BLOCKED,
            ClaimStatus.ADMITTED,
            ClaimStatus.ADMITTED_LIMITED,
            ClaimStatus.CONTRADICTED,
            ClaimStatus.FORBIDDEN,
        }
    ),
    ClaimStatus.BLOCKED: frozenset(
        {
            ClaimStatus.DRAFT_ONLY,
            ClaimStatus.ADMITTED,
            ClaimStatus.ADMITTED_LIMITED,
            ClaimStatus.CONTRADICTED,
            ClaimStatus.FORBIDDEN,
        }
    ),
    ClaimStatus.ADMITTED: frozenset({ClaimStatus.CONTRADICTED, ClaimStatus.FORBIDDEN}),
    ClaimStatus.ADMITTED_LIMITED: frozenset(
        {ClaimStatus.CONTRADICTED, ClaimStatus.FORBIDDEN}
    ),
    ClaimStatus.CONTRADICTED: frozenset({ClaimStatus.FORBIDDEN}),
    ClaimStatus.FORBIDDEN: frozenset(),
}


def register_claim(
    ledger: ClaimLedger, record: ClaimRecord, state: VersionState | None = None
) -> ClaimLedger:
    if record.status is not ClaimStatus.PLANNED:
        raise UsageError(f"claims register as planned, not {record.status.value}")
    if record.history:
        raise UsageError("a new claim starts with empty history")
    if ledger.by_id(record.claim_id) is not None:
        raise UsageError(f"claim {record.claim_id} already registered")
    if not record.rq_link:
        raise UsageError(f"claim {record.claim_id} has no rq_link")
    if state is not None and record.rq_link not in state.spine.rq_ids():
        raise UsageError(
            f"claim {record.claim_id} links {record.rq_link} absent from spine"
        )
    ledger.claims.append(record)
    return ledger


def validate_chain(
    ledger: ClaimLedger,
    claim_id: str,
    state: VersionState,
    target_status: ClaimStatus | None = None,
):
    """Resolve the admission chain or return every broken link.

    Returns (chain, violations); exactly one side is meaningful. The
    outcome threshold depends on the target: plain admission needs passed
    gates, limited admission also accepts passed_limited.
    """
    claim = ledger.by_id(claim_id)
    if claim is None:
        raise UsageError(f"unknown claim {claim_id}")
    if target_status is None:
        target_status = (
            claim.status if claim.status in ADMITTED_STATUSES else ClaimStatus.ADMITTED
        )
    threshold = (
        GateOutcome.PASSED
        if target_status is ClaimStatus.ADMITTED
        else GateOutcome.PASSED_LIMITED
    )

    violations: list[str] = []
    if not claim.rq_link:
        violations.append("rq link missing")
    elif claim.rq_link not in state.spine.rq_ids():
        violations.append(f"rq link {claim.rq_link} does not resolve")
    if not claim.required_evidence:
        violations.append("evidence contract empty")
    if claim.scope == "none":
        violations.append("paper scope missing (scope is 'none')")

    registered_paths = {obj.path: obj.evidence_id for obj in state.evidence.objects}
    artifact_refs: list[str] = []
    decision_refs: list[str] = []
    latest_decisions = []
    for requirement in claim.required_evidence:
        gate = state.gates.get(requirement.gate_id)
        if gate is None:
            violations.append(f"gate {requirement.gate_id} not registered")
            continue
        if gate.claim_class is not None and gate.claim_class is not claim.claim_class:
            violations.append(
                f"class mismatch: gate {gate.gate_id} is {gate.claim_class.value}, "
                f"claim is {claim.claim_class.value}"
            )
        speaking = effective_decisions(gate)
        if not speaking:
            violations.append(f"gate decision absent for {gate.gate_id}")
            continue
        latest_decisions.extend(speaking)
        for decision in speaking:
            decision_refs.append(
                f"{gate.gate_id}#{gate.decision_log.index(decision)}"
            )
        decision = speaking[0]
        matched = sorted(
            {
                path
                for result in decision.per_check_results
                if result.required
                for path in result.matched_paths
            }
        )
        if matched:
            refs = [registered_paths[p] for p in matched if p in registered_paths]
            if not refs:
                violations.append(
                    f"artifacts unregistered: none of the paths behind "
                    f"{gate.gate_id} are in the evidence base"
                )
            artifact_refs.extend(refs)

    if latest_decisions:
        effective = resolve_gate_conflict(latest_decisions)
        if GATE_OUTCOME_RANK[effective.outcome] < GATE_OUTCOME_RANK[threshold]:
            violations.append(
                f"gate not passed: effective outcome {effective.outcome.value} "
                f"(needs at least {threshold.value})"
            )

    if violations:
        return None, violations
    chain = AdmissionChain(
        claim_id=claim.claim_id,
        rq_link=claim.rq_link,
        evidence_contract=list(claim.required_evidence),
        artifact_refs=artifact_refs,
        gate_decision_refs=decision_refs,
        paper_scope=claim.scope,
    )
    return chain, []


def transition_claim(
    ledger: ClaimLedger,
    claim_id: str,
    to_status: ClaimStatus,
    authority: AuthorityRef,
    state: VersionState | None = None,
    expected_from: ClaimStatus | None = None,
) -> ClaimLedger:
    """Move a claim through the lattice under a recorded authority.

    Admission is refused outright when the chain is incomplete; the
    ledger is left untouched by any refusal.
    """
    claim = ledger.by_id(claim_id)
    if claim is None:
        raise UsageError(f"unknown claim {claim_id}")
    if expected_from is not None and claim.status is not expected_from:
        raise TransitionError(
            f"{claim_id}: expected to transition from {expected_from.value}, "
            f"ledger has {claim.status.value}"
        )
    if to_status not in _LATTICE[claim.status]:
        raise TransitionError(
            f"{claim_id}: {claim.status.value} -> {to_status.value} is not allowed"
        )
    if to_status is ClaimStatus.FORBIDDEN and authority.kind != "human":
        raise TransitionError(
            f"{claim_id}: forbidden requires explicit human authority"
        )
    if to_status is ClaimStatus.CONTRADICTED:
        if authority.kind != "evidence":
            raise TransitionError(
                f"{claim_id}: contradicted must cite the contradicting evidence"
            )
        if state is not None and state.evidence.by_id(authority.ref) is None:
            raise TransitionError(
                f"{claim_id}: contradicting evidence {authority.ref} is not registered"
            )
    if to_status in ADMITTED_STATUSES:
        if claim.claim_class is ClaimClass.SMOKE_TEST:
            raise TransitionError(
                f"{claim_id}: smoke_test claims are never admissible"
            )
        if authority.kind != "gate_decision":
            raise TransitionError(
                f"{claim_id}: admission requires a gate_decision authority"
            )
        if state is None:
            raise UsageError("admission requires the version state for chain validation")
        _, violations = validate_chain(ledger, claim_id, state, target_status=to_status)
        if violations:
            from .errors import AdmissionError

            raise AdmissionError(claim_id, violations)

    seq = state.next_sequence() if state is not None else _next_history_seq(ledger)
    claim.history.append(
        HistoryEntry(
            from_status=claim.status,
            to_status=to_status,
            authority=authority,
            seq=seq,
        )
    )
    claim.status = to_status
    return ledger


def _next_history_seq(ledger: ClaimLedger) -> int:
    seqs = [0]
    for claim in ledger.claims:
        seqs.extend(h.seq for h in claim.history)
    return max(seqs) + 1


def project_paper_binding(ledger: ClaimLedger, state: VersionState) -> PaperBindingRecord:
    """Allowed only when every gate is terminal and every admitted chain holds."""
    open_gates = sorted(
        gate_id for gate_id, gate in state.gates.items() if not gate_is_terminal(gate)
    )
    admitted = [c for c in ledger.claims if c.status in ADMITTED_STATUSES]
    problems: list[str] = []
    if open_gates:
        problems.append("gates without terminal disposition: " + ", ".join(open_gates))
    if not admitted:
        problems.append("no admitted claims")
    for claim in admitted:
        _, violations = validate_chain(ledger, claim.claim_id, state)
        if violations:
            problems.append(
                f"integrity violation on {claim.claim_id}: " + "; ".join(violations)
            )
    if problems:
        return PaperBindingRecord(allowed=False, reason="; ".join(problems))
    return PaperBindingRecord(
        allowed=True,
        reason=f"{len(admitted)} claims admitted with complete chains; all gates terminal",
        admitted_claims=[c.claim_id for c in admitted],
    )


def admission_violations(ledger: ClaimLedger, state: VersionState) -> list[str]:
    """Every admitted claim whose chain no longer validates."""
    problems = []
    for claim in ledger.claims:
        if claim.status in ADMITTED_STATUSES:
            _, violations = validate_chain(ledger, claim.claim_id, state)
            for violation in violations:
                problems.append(f"{claim.claim_id}: {violation}")
    return problems
