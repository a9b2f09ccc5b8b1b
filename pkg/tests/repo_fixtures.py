"""Builders for fully-linked repository fixtures used across test modules."""

from pathlib import Path

from egret import gates as gate_ops
from egret import ledger as ledger_ops
from egret import state as state_ops
from egret.model import (
    ArtifactCheck,
    CheckMethod,
    ClaimClass,
    ClaimRecord,
    EvidenceKind,
    EvidenceObject,
    EvidenceRequirement,
    GateManifest,
    RqNode,
    StateDelta,
    TaskContract,
)


def write(repo: Path, rel: str, text: str) -> Path:
    path = repo / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def evidence_for(repo: Path, rel: str, kind=EvidenceKind.RUN_REPORT, task=None, scope=""):
    return EvidenceObject(
        evidence_id="",
        kind=kind,
        path=rel,
        digest="",
        producing_task=task,
        scope=scope or f"fixture:{rel}",
    )


def design_gate() -> GateManifest:
    return GateManifest(
        gate_id="G_DESIGN_001",
        claim_class=ClaimClass.DESIGN,
        required_artifacts=[
            ArtifactCheck(path="protocol/*.yaml", artifact_type="specification"),
            ArtifactCheck(
                path="ledger/claims.yaml",
                artifact_type="ledger_entry",
                method=CheckMethod.CONTENT_MATCH,
                expectation="C_DES_001",
            ),
        ],
        audit_note="Registered.",
        claim_scope="design statements only",
    )


def design_claim() -> ClaimRecord:
    return ClaimRecord(
        claim_id="C_DES_001",
        rq_link="RQ01",
        claim_class=ClaimClass.DESIGN,
        statement="The runtime records artifact digests for every evidence object.",
        required_evidence=[EvidenceRequirement("specification", "G_DESIGN_001")],
        scope="Design",
    )


def base_repo(tmp_path: Path) -> Path:
    """Initialized repo with one RQ, one admissible design claim, one gate."""
    repo = tmp_path / "repo"
    state = state_ops.init_repo(repo, big_rq="Does gate discipline reduce unsupported claims?")
    state_ops.register_rq(
        state,
        RqNode(
            rq_id="RQ01",
            hypothesis="Evidence gates keep claims attached to artifacts.",
            falsification_condition="An admitted claim survives with a broken chain.",
            method_sketch="Run contract-bound tasks and audit the ledger.",
            metric_spec="admission soundness violations",
        ),
    )
    state_ops.register_gate(state, design_gate())
    ledger_ops.register_claim(state.ledger, design_claim(), state)
    state_ops.save_state(repo, state)

    write(repo, "protocol/claim_admission.yaml", "rule: evidence before scope\n")
    write(repo, "ledger/claims.yaml", "claims:\n  - id: C_DES_001\n")
    return repo


def admit_design_claim(repo: Path):
    """Evaluate the design gate, register artifacts, and admit the claim."""
    from egret.model import AuthorityRef, ClaimStatus, ClaimTransition

    state = state_ops.load_state(repo)
    gate = state.gates["G_DESIGN_001"]
    decision = gate_ops.evaluate_gate(
        gate, repo, evidence=state.evidence, seq=state.next_sequence()
    )
    mirror = gate_ops.record_decision(state, repo, gate, decision)
    delta = StateDelta(
        appended_evidence=[
            evidence_for(repo, "protocol/claim_admission.yaml", EvidenceKind.MANIFEST),
            evidence_for(repo, "ledger/claims.yaml", EvidenceKind.MANIFEST),
            mirror,
        ],
        claim_transitions=[
            ClaimTransition(
                claim_id="C_DES_001",
                from_status=ClaimStatus.PLANNED,
                to_status=ClaimStatus.ADMITTED,
                authority=AuthorityRef("gate_decision", "G_DESIGN_001#0"),
            )
        ],
    )
    return state_ops.apply_delta(repo, state, delta)
