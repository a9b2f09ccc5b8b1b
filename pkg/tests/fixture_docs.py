"""Canonical state-file fixtures shared across the test suite.

These mirror real production files from a long-running research project
that used this protocol family: a late-epoch status file, a
limited-scope evidence gate, a claim ledger at paper binding, and a
completed task contract, plus two small gate manifests (a design gate
and an empirical-effectiveness gate) exercised by the gate-engine tests.
"""

STATUS_DOC = b"""\
schema_version: 1
generated_by: controller
version: V9
epoch_role: scicode_validation_expansion
status: paper_binding_ready
direction_ref: ../RESEARCH_DIRECTION.md
source_version: V8
current_gate: G_E09_SCICODE_VALIDATION
focus_rq: RQ01
runnable_rqs: []
blocked_rqs: []
completed_rqs:
  - RQ01
current_task: null
last_completed_task: RQ01_T09
paper_binding:
  allowed: true
  reason: "V9 official SciCode validation-boundary evidence..."
notes:
  - "V8 closed as paper_binding_ready..."
"""

GATE_DOC = b"""\
schema_version: evidence_gate_v1
version: V9
gate_id: G_E09_SCICODE_VALIDATION
status: passed_limited
blocked_reason: null
claim_scope: supplementary_validation_boundary_study
required_evidence:
  - id: validation_task_lock
    path: runs/E09_SCICODE_VALIDATION_TASK_LOCK.json
    required: true
    check: "locks SciCode validation split..."
  - id: pi_generation_manifests
    path: runs/E09_PI_SCICODE_VALIDATION_*/
    required: true
    check: "contains PI transcripts..."
forbidden_evidence:
  - "agent-derived generated-code tests"
  - "gold-code-derived local oracle tests..."
paper_claim_rule: "No V9 SciCode claim is paper-admissible until this gate passes."
gate_decision:
  passed: true
  scope: "official public validation split, 50 validation substeps..."
  allowed_claim: "In a locked official SciCode validation-boundary experiment..."
  verifier_status: "22/22 checks passed"
"""

LEDGER_DOC = b"""\
template_family: research_loop
paper_target: arxiv_technical_report
double_anonymous: true
claims:
  - id: C_DESIGN_001
    class: design
    statement: "The runtime is a control-plane abstraction..."
    evidence_status: admitted
    paper_section: Design
  - id: C_E01
    class: effectiveness
    statement: "The protocol lowers unsupported claim rate..."
    evidence_status: admitted
    paper_section: Evaluation
  - id: C_E07_SUPP
    class: supplementary_boundary_pilot
    statement: "In a locked official SciCode validation-boundary..."
    evidence_status: admitted_limited
    paper_section: Evaluation Appendix
paper_binding:
  allowed: true
  admitted_claims:
    - C_DESIGN_001
    - C_PROTOCOL_001
    - C_CASE_001
    - C_E01
    - C_E03
    - C_E07_SUPP
"""

TASK_DOC = b"""\
schema_version: task_queue_v1
task_id: RQ01_T04
rq_id: RQ01
status: done
routed_role: experiment_runner
done_condition: "Official generated-code evaluator logs and metrics exist."
result_ref: runs/E09_SCICODE_VALIDATION_metrics.json
blocker_reason: null
"""

DESIGN_GATE_DOC = b"""\
gate: G_DESIGN_001
claim_class: design
required_artifacts:
  - type: specification
    path: "protocol/*.yaml"
    check: existence
  - type: ledger_entry
    path: "ledger/claims.yaml"
    check: content_match
pass_condition: all
audit_note: "Registered."
"""

EMPIRICAL_GATE_DOC = b"""\
gate: G_EMPIRICAL_001
claim_class: empirical_effectiveness
required_artifacts:
  - type: controlled_run_manifest
    path: "runs/*/manifest.json"
    check: existence
  - type: baseline_lock
    path: "baselines/lock.yaml"
    check: existence
  - type: deterministic_audit
    path: "audits/labels.json"
    check: existence
pass_condition: all
audit_note: "Audit scope only."
"""
