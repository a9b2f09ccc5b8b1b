"""Parsing, round-trip, and rejection behavior for every state-file format."""

import pytest

from egret import schemas
from egret.errors import SchemaError
from egret.model import (
    ClaimClass,
    ClaimStatus,
    GateOutcome,
    PassCondition,
    CheckMethod,
    TaskStatus,
    VersionStatus,
)

from fixture_docs import (
    DESIGN_GATE_DOC,
    EMPIRICAL_GATE_DOC,
    GATE_DOC,
    LEDGER_DOC,
    STATUS_DOC,
    TASK_DOC,
)


class TestStatus:
    def test_parse_canonical(self):
        header = schemas.parse_status(STATUS_DOC)
        assert header.version == "V9"
        assert header.status is VersionStatus.PAPER_BINDING_READY
        assert header.epoch_role == "scicode_validation_expansion"
        assert header.focus_rq == "RQ01"
        assert header.completed_rqs == ["RQ01"]
        assert header.current_task is None
        assert header.last_completed_task == "RQ01_T09"
        assert header.paper_binding_allowed is True
        assert header.paper_binding_reason.startswith("V9 official")

    def test_only_schema_version_reports_every_missing_key(self):
        with pytest.raises(SchemaError) as err:
            schemas.parse_status(b"schema_version: 1\n")
        fields = {v.field_path for v in err.value.violations}
        assert {"version", "status"} <= fields

    def test_status_outside_enum_rejected(self):
        doc = STATUS_DOC.replace(b"status: paper_binding_ready", b"status: open")
        with pytest.raises(SchemaError) as err:
            schemas.parse_status(doc)
        assert any(v.field_path == "status" for v in err.value.violations)

    def test_round_trip_is_fixed_point(self):
        header = schemas.parse_status(STATUS_DOC)
        once = schemas.serialize_status(header)
        again = schemas.serialize_status(schemas.parse_status(once))
        assert once == again
        assert schemas.parse_status(once) == header

    def test_unknown_top_level_keys_preserved(self):
        doc = STATUS_DOC + b"custom_annotation: kept\n"
        header = schemas.parse_status(doc)
        assert header.extras == {"custom_annotation": "kept"}
        reparsed = schemas.parse_status(schemas.serialize_status(header))
        assert reparsed.extras == {"custom_annotation": "kept"}


class TestGate:
    def test_parse_design_gate(self):
        gate = schemas.parse_gate(DESIGN_GATE_DOC)
        assert gate.gate_id == "G_DESIGN_001"
        assert len(gate.required_artifacts) == 2
        assert gate.pass_condition is PassCondition.ALL
        assert gate.claim_class is ClaimClass.DESIGN
        assert gate.required_artifacts[0].method is CheckMethod.EXISTENCE
        assert gate.required_artifacts[1].method is CheckMethod.CONTENT_MATCH

    def test_parse_limited_gate(self):
        gate = schemas.parse_gate(GATE_DOC)
        assert gate.gate_id == "G_E09_SCICODE_VALIDATION"
        assert gate.status == "passed_limited"
        assert "agent-derived generated-code tests" in gate.forbidden_evidence
        # prose inspection notes degrade to existence checks with the note kept
        assert all(c.method is CheckMethod.EXISTENCE for c in gate.required_artifacts)
        assert gate.required_artifacts[0].note.startswith("locks SciCode")
        decision = gate.latest_decision()
        assert decision is not None
        assert decision.outcome is GateOutcome.PASSED
        assert decision.extras["verifier_status"] == "22/22 checks passed"

    def test_pass_condition_most_rejected(self):
        doc = DESIGN_GATE_DOC.replace(b"pass_condition: all", b"pass_condition: most")
        with pytest.raises(SchemaError) as err:
            schemas.parse_gate(doc)
        assert any("pass_condition" in v.field_path for v in err.value.violations)

    def test_round_trip_both_gates(self):
        for doc in (DESIGN_GATE_DOC, GATE_DOC, EMPIRICAL_GATE_DOC):
            gates = schemas.parse_gate_file(doc)
            once = schemas.serialize_gates(gates)
            assert schemas.parse_gate_file(once) == gates
            assert schemas.serialize_gates(schemas.parse_gate_file(once)) == once

    def test_multi_gate_file(self):
        gates = [schemas.parse_gate(DESIGN_GATE_DOC), schemas.parse_gate(EMPIRICAL_GATE_DOC)]
        data = schemas.serialize_gates(gates)
        assert [g.gate_id for g in schemas.parse_gate_file(data)] == [
            "G_DESIGN_001",
            "G_EMPIRICAL_001",
        ]


class TestLedger:
    def test_parse_binding_ledger(self):
        ledger = schemas.parse_ledger(LEDGER_DOC)
        assert len(ledger.claims) == 3
        assert ledger.paper_binding.allowed is True
        assert len(ledger.paper_binding.admitted_claims) == 6
        by_id = {c.claim_id: c for c in ledger.claims}
        assert by_id["C_DESIGN_001"].status is ClaimStatus.ADMITTED
        assert by_id["C_DESIGN_001"].scope == "Design"
        # short class labels normalize to the canonical enum
        assert by_id["C_E01"].claim_class is ClaimClass.EMPIRICAL_EFFECTIVENESS
        assert by_id["C_E07_SUPP"].status is ClaimStatus.ADMITTED_LIMITED

    def test_empty_ledger_requires_binding_false(self):
        ledger = schemas.parse_ledger(b"claims: []\n")
        assert ledger.paper_binding.allowed is False
        bad = b"claims: []\npaper_binding:\n  allowed: true\n  admitted_claims: [C_X]\n"
        with pytest.raises(SchemaError):
            schemas.parse_ledger(bad)

    def test_round_trip(self):
        ledger = schemas.parse_ledger(LEDGER_DOC)
        once = schemas.serialize_ledger(ledger)
        assert schemas.parse_ledger(once) == ledger
        assert schemas.serialize_ledger(schemas.parse_ledger(once)) == once
        # header annotations survive normalization
        assert schemas.parse_ledger(once).extras["template_family"] == "research_loop"


class TestTasks:
    def test_parse_single_contract(self):
        tasks = schemas.parse_tasks(TASK_DOC)
        assert len(tasks) == 1
        task = tasks[0]
        assert task.task_id == "RQ01_T04"
        assert task.rq_id == "RQ01"
        assert task.status is TaskStatus.DONE
        assert task.result_ref == "runs/E09_SCICODE_VALIDATION_metrics.json"
        assert task.routed_role == "experiment_runner"

    def test_blocked_without_reason_rejected(self):
        doc = TASK_DOC.replace(b"status: done", b"status: blocked")
        with pytest.raises(SchemaError) as err:
            schemas.parse_tasks(doc)
        assert any("blocker_reason" in v.field_path for v in err.value.violations)

    def test_round_trip(self):
        tasks = schemas.parse_tasks(TASK_DOC)
        once = schemas.serialize_tasks(tasks)
        assert schemas.parse_tasks(once) == tasks
        assert schemas.serialize_tasks(schemas.parse_tasks(once)) == once


class TestSpine:
    def test_duplicate_rq_ids_rejected(self):
        doc = (
            b"schema_version: research_spine_v1\n"
            b"rqs:\n"
            b"  - rq_id: RQ01\n"
            b"  - rq_id: RQ01\n"
        )
        with pytest.raises(SchemaError) as err:
            schemas.parse_spine(doc)
        assert any("RQ01" in v.found for v in err.value.violations)

    def test_parent_links_must_form_forest(self):
        doc = (
            b"rqs:\n"
            b"  - rq_id: RQ01\n"
            b"    parent_rq: RQ02\n"
            b"  - rq_id: RQ02\n"
            b"    parent_rq: RQ01\n"
        )
        with pytest.raises(SchemaError) as err:
            schemas.parse_spine(doc)
        assert any("cycle" in v.found for v in err.value.violations)

    def test_queue_round_trip(self):
        doc = (
            b"rqs:\n"
            b"  - rq_id: RQ01\n"
            b"task_queue:\n"
            b"  - task_id: T1\n"
            b"    status: queued\n"
        )
        spine = schemas.parse_spine(doc)
        assert spine.task_queue[0].task_id == "T1"
        once = schemas.serialize_spine(spine)
        assert schemas.parse_spine(once) == spine


class TestSerializeConventions:
    def test_empty_lists_explicit(self):
        header = schemas.parse_status(STATUS_DOC)
        text = schemas.serialize_status(header).decode()
        assert "runnable_rqs: []" in text
        assert "blockers: []" in text

    def test_serialize_is_pure(self):
        header = schemas.parse_status(STATUS_DOC)
        assert schemas.serialize_status(header) == schemas.serialize_status(header)

    def test_yaml_subset_rejects_aliases(self):
        with pytest.raises(SchemaError):
            schemas.parse_status(b"version: &v V1\nstatus: active\nother: *v\n")

    def test_generic_serialize_dispatch(self):
        assert schemas.serialize(schemas.parse_status(STATUS_DOC))
        assert schemas.serialize(schemas.parse_ledger(LEDGER_DOC))
        assert schemas.serialize(schemas.parse_tasks(TASK_DOC))
        assert schemas.serialize(schemas.parse_gate_file(GATE_DOC))


# One seeded mutation per required-field class; the acceptance suite
# replays this table and expects every entry to be rejected.
SEEDED_MUTATIONS = [
    ("status", STATUS_DOC.replace(b"version: V9\n", b""), schemas.parse_status),
    (
        "status",
        STATUS_DOC.replace(b"status: paper_binding_ready", b"status: open"),
        schemas.parse_status,
    ),
    (
        "status",
        STATUS_DOC.replace(b"  allowed: true", b'  allowed: "yes"'),
        schemas.parse_status,
    ),
    ("gate", DESIGN_GATE_DOC.replace(b"gate: G_DESIGN_001\n", b""), schemas.parse_gate),
    (
        "gate",
        DESIGN_GATE_DOC.replace(b"pass_condition: all", b"pass_condition: most"),
        schemas.parse_gate,
    ),
    (
        "gate",
        DESIGN_GATE_DOC.replace(b"check: existence", b"check: hash"),
        schemas.parse_gate,
    ),
    (
        "ledger",
        LEDGER_DOC.replace(b"id: C_E01", b"id: C_DESIGN_001"),
        schemas.parse_ledger,
    ),
    (
        "ledger",
        LEDGER_DOC.replace(b"evidence_status: admitted_limited", b"evidence_status: maybe"),
        schemas.parse_ledger,
    ),
    (
        "ledger",
        LEDGER_DOC.replace(b"class: design", b"class: smoke_test"),
        schemas.parse_ledger,
    ),
    (
        "tasks",
        TASK_DOC.replace(b"status: done", b"status: blocked"),
        schemas.parse_tasks,
    ),
    (
        "tasks",
        TASK_DOC.replace(
            b"result_ref: runs/E09_SCICODE_VALIDATION_metrics.json", b"result_ref: null"
        ),
        schemas.parse_tasks,
    ),
    (
        "spine",
        b"rqs:\n  - rq_id: RQ01\n  - rq_id: RQ01\n",
        schemas.parse_spine,
    ),
]


@pytest.mark.parametrize("family,doc,parser", SEEDED_MUTATIONS)
def test_seeded_mutation_rejected(family, doc, parser):
    with pytest.raises(SchemaError):
        parser(doc)
