"""Gate evaluation: checks, pass conditions, forbidden evidence, conflicts."""

import itertools

import pytest

from egret import schemas
from egret.errors import UsageError
from egret.gates import (
    evaluate_check,
    evaluate_gate,
    human_decision,
    resolve_gate_conflict,
)
from egret.model import (
    ArtifactCheck,
    CheckMethod,
    CheckOutcome,
    EvidenceBase,
    EvidenceKind,
    EvidenceObject,
    GateDecision,
    GateManifest,
    GateOutcome,
    PassCondition,
)

from fixture_docs import DESIGN_GATE_DOC, EMPIRICAL_GATE_DOC

# sha256 of zero bytes, computed with an external reference tool
EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def write(repo, rel, text=""):
    path = repo / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


class TestEvaluateCheck:
    def test_existence_single_file(self, tmp_path):
        write(tmp_path, "protocol/spec.yaml", "kind: spec\n")
        check = ArtifactCheck(path="protocol/*.yaml")
        result = evaluate_check(check, tmp_path)
        assert result.outcome is CheckOutcome.PASS
        assert result.matched_paths == ["protocol/spec.yaml"]

    def test_existence_directory_pattern(self, tmp_path):
        (tmp_path / "runs/E09_PI_SCICODE_VALIDATION_001").mkdir(parents=True)
        check = ArtifactCheck(path="runs/E09_PI_SCICODE_VALIDATION_*/")
        assert evaluate_check(check, tmp_path).outcome is CheckOutcome.PASS

    def test_hash_of_empty_file(self, tmp_path):
        write(tmp_path, "artifacts/empty.bin", "")
        check = ArtifactCheck(
            path="artifacts/empty.bin",
            method=CheckMethod.HASH,
            expectation=EMPTY_SHA256,
        )
        assert evaluate_check(check, tmp_path).outcome is CheckOutcome.PASS

    def test_hash_mismatch_fails(self, tmp_path):
        write(tmp_path, "artifacts/empty.bin", "not empty")
        check = ArtifactCheck(
            path="artifacts/empty.bin",
            method=CheckMethod.HASH,
            expectation=EMPTY_SHA256,
        )
        assert evaluate_check(check, tmp_path).outcome is CheckOutcome.FAIL

    def test_content_match_empty_repo(self, tmp_path):
        check = ArtifactCheck(
            path="**/*.txt", method=CheckMethod.CONTENT_MATCH, expectation="needle"
        )
        result = evaluate_check(check, tmp_path)
        assert result.outcome is CheckOutcome.FAIL
        assert result.matched_paths == []

    def test_content_match_substring(self, tmp_path):
        write(tmp_path, "ledger/claims.yaml", "claims:\n  - id: C_DES_001\n")
        check = ArtifactCheck(
            path="ledger/claims.yaml",
            method=CheckMethod.CONTENT_MATCH,
            expectation="C_DES_001",
        )
        assert evaluate_check(check, tmp_path).outcome is CheckOutcome.PASS

    def test_unreadable_file_is_io_failure(self, tmp_path):
        path = tmp_path / "runs" / "report.txt"
        path.parent.mkdir(parents=True)
        path.write_bytes(b"\xff\xfe\x00 not text")
        check = ArtifactCheck(
            path="runs/report.txt", method=CheckMethod.CONTENT_MATCH, expectation="x"
        )
        result = evaluate_check(check, tmp_path)
        assert result.outcome is CheckOutcome.IO_FAILURE
        assert "unreadable" in result.detail


class TestEvaluateGate:
    def design_fixture(self, tmp_path):
        write(tmp_path, "protocol/claim_admission.yaml", "version: 1\n")
        write(tmp_path, "ledger/claims.yaml", "claims:\n  - id: C_DES_001\n")
        return schemas.parse_gate(DESIGN_GATE_DOC)

    def test_design_gate_passes(self, tmp_path):
        gate = self.design_fixture(tmp_path)
        decision = evaluate_gate(gate, tmp_path)
        assert decision.outcome is GateOutcome.PASSED
        assert decision.decided_by == "mechanical"
        assert len(decision.per_check_results) == 2

    def test_empirical_gate_fails_naming_missing_check(self, tmp_path):
        write(tmp_path, "runs/exp01/manifest.json", "{}")
        write(tmp_path, "audits/labels.json", "[]")
        gate = schemas.parse_gate(EMPIRICAL_GATE_DOC)
        decision = evaluate_gate(gate, tmp_path)
        assert decision.outcome is GateOutcome.FAILED
        assert "baseline_lock" in decision.detail
        # restoring the missing file flips the gate
        write(tmp_path, "baselines/lock.yaml", "locked: true\n")
        assert evaluate_gate(gate, tmp_path).outcome is GateOutcome.PASSED

    def test_deterministic_over_repeats(self, tmp_path):
        gate = self.design_fixture(tmp_path)
        first = evaluate_gate(gate, tmp_path, seq=7)
        for _ in range(20):
            assert evaluate_gate(gate, tmp_path, seq=7) == first

    def test_vacuous_all_gate_passes_with_flag(self, tmp_path):
        gate = GateManifest(gate_id="G_EMPTY", pass_condition=PassCondition.ALL)
        decision = evaluate_gate(gate, tmp_path)
        assert decision.outcome is GateOutcome.PASSED
        assert "vacuous" in decision.detail

    def test_any_gate(self, tmp_path):
        write(tmp_path, "runs/a.txt", "x")
        gate = GateManifest(
            gate_id="G_ANY",
            pass_condition=PassCondition.ANY,
            required_artifacts=[
                ArtifactCheck(path="runs/a.txt"),
                ArtifactCheck(path="runs/missing.txt"),
            ],
        )
        assert evaluate_gate(gate, tmp_path).outcome is GateOutcome.PASSED

    def test_non_required_check_never_blocks(self, tmp_path):
        write(tmp_path, "runs/a.txt", "x")
        gate = GateManifest(
            gate_id="G_OPT",
            required_artifacts=[
                ArtifactCheck(path="runs/a.txt"),
                ArtifactCheck(path="runs/optional.txt", required=False),
            ],
        )
        decision = evaluate_gate(gate, tmp_path)
        assert decision.outcome is GateOutcome.PASSED
        assert len(decision.per_check_results) == 2

    def test_io_failure_on_required_check_fails_closed(self, tmp_path):
        path = tmp_path / "runs" / "a.txt"
        path.parent.mkdir(parents=True)
        path.write_bytes(b"\xff\xfe\x00 not text")
        gate = GateManifest(
            gate_id="G_IO",
            required_artifacts=[
                ArtifactCheck(
                    path="runs/a.txt", method=CheckMethod.CONTENT_MATCH, expectation="x"
                )
            ],
        )
        decision = evaluate_gate(gate, tmp_path)
        assert decision.outcome is GateOutcome.FAILED

    def test_forbidden_evidence_forces_failure(self, tmp_path):
        write(tmp_path, "runs/a.txt", "x")
        gate = GateManifest(
            gate_id="G_FORBID",
            required_artifacts=[ArtifactCheck(path="runs/a.txt")],
            forbidden_evidence=["agent-derived generated-code tests"],
        )
        evidence = EvidenceBase()
        evidence.append(
            EvidenceObject(
                evidence_id="EV1",
                kind=EvidenceKind.RUN_REPORT,
                path="runs/a.txt",
                digest="0" * 64,
                scope="agent-derived generated-code tests for step 3",
                registered_at=1,
            )
        )
        decision = evaluate_gate(gate, tmp_path, evidence=evidence)
        assert decision.outcome is GateOutcome.FAILED
        assert decision.contradiction is True
        assert decision.forbidden_matches

    def test_monotone_sensitivity_adding_files(self, tmp_path):
        """Adding unrelated files never flips a passed all-gate to failed."""
        gate = self.design_fixture(tmp_path)
        assert evaluate_gate(gate, tmp_path).outcome is GateOutcome.PASSED
        for i in range(5):
            write(tmp_path, f"runs/new_{i}.txt", "later artifact")
            assert evaluate_gate(gate, tmp_path).outcome is GateOutcome.PASSED

    def test_inputs_digest_tracks_examined_files(self, tmp_path):
        gate = self.design_fixture(tmp_path)
        before = evaluate_gate(gate, tmp_path).inputs_digest
        write(tmp_path, "ledger/claims.yaml", "claims:\n  - id: C_DES_001\n  - id: X\n")
        after = evaluate_gate(gate, tmp_path).inputs_digest
        assert before != after


class TestResolveConflict:
    @staticmethod
    def decision(outcome, gate_id="G"):
        return GateDecision(gate_id=gate_id, outcome=outcome)

    # every non-empty subset of the three outcomes, resolved by hand
    CASES = [
        ({GateOutcome.PASSED}, GateOutcome.PASSED),
        ({GateOutcome.FAILED}, GateOutcome.FAILED),
        ({GateOutcome.PASSED_LIMITED}, GateOutcome.PASSED_LIMITED),
        ({GateOutcome.PASSED, GateOutcome.FAILED}, GateOutcome.FAILED),
        ({GateOutcome.PASSED, GateOutcome.PASSED_LIMITED}, GateOutcome.PASSED_LIMITED),
        ({GateOutcome.FAILED, GateOutcome.PASSED_LIMITED}, GateOutcome.FAILED),
        (
            {GateOutcome.PASSED, GateOutcome.FAILED, GateOutcome.PASSED_LIMITED},
            GateOutcome.FAILED,
        ),
    ]

    @pytest.mark.parametrize("outcomes,expected", CASES)
    def test_subset_resolution(self, outcomes, expected):
        decisions = [
            self.decision(outcome, gate_id=f"G{i}")
            for i, outcome in enumerate(sorted(outcomes, key=lambda o: o.value))
        ]
        for perm in itertools.permutations(decisions):
            assert resolve_gate_conflict(perm).outcome is expected

    def test_ties_record_all_contributors(self):
        decisions = [
            self.decision(GateOutcome.FAILED, "G1"),
            self.decision(GateOutcome.FAILED, "G2"),
            self.decision(GateOutcome.PASSED, "G3"),
        ]
        effective = resolve_gate_conflict(decisions)
        assert effective.outcome is GateOutcome.FAILED
        assert effective.gate_ids == ["G1", "G2"]

    def test_empty_input_is_usage_error(self):
        with pytest.raises(UsageError):
            resolve_gate_conflict([])


class TestHumanDecision:
    def test_requires_reviewer_and_scope(self):
        gate = GateManifest(gate_id="G_H")
        with pytest.raises(UsageError):
            human_decision(gate, GateOutcome.PASSED_LIMITED, reviewer="", scope="s")
        with pytest.raises(UsageError):
            human_decision(gate, GateOutcome.PASSED_LIMITED, reviewer="r1", scope="")
        decision = human_decision(
            gate, GateOutcome.PASSED_LIMITED, reviewer="r1", scope="narrow scope"
        )
        assert decision.decided_by == "human:r1"
        assert decision.outcome is GateOutcome.PASSED_LIMITED
