"""Randomized multi-version trajectories with synthetic workers.

The harness drives the real CLI against a scratch repository: it
registers RQs, gates, claims, and contracts, generates small shell
workers into the repo, runs every task, closes versions, and reseeds.
Alongside it keeps an independent oracle: a literal transcription of the
one-task transition rule over plain dictionaries, fed only by the
scenario's declared intent, never by engine internals. A scenario is
fully determined by its seed.
"""

from __future__ import annotations

import contextlib
import copy
import io
import random
import stat
from dataclasses import dataclass, field
from pathlib import Path

from . import layout, yamlio
from . import state as state_ops
from .cli import main as cli_main
from .errors import UsageError
from .githist import commit_all, init_git
from .model import VersionState

CONTRADICTION_MARKER = "CONTRADICTS_HYPOTHESIS"

_OUTCOMES = ("succeed", "fail", "contradict", "out_of_contract")

_CLAIM_CLASSES = ("process", "design", "audit", "case_study")


@dataclass
class ScenarioSpec:
    rng_seed: int
    versions: int = 1
    tasks_per_version: tuple[int, int] = (1, 3)
    worker_outcome_mix: dict = field(
        default_factory=lambda: {
            "succeed": 0.55,
            "fail": 0.15,
            "contradict": 0.15,
            "out_of_contract": 0.15,
        }
    )
    gate_shape_mix: dict = field(
        default_factory=lambda: {"check_counts": [1, 2, 3], "pass_conditions": ["all", "any"]}
    )
    max_claims: int = 5
    max_artifacts: int = 3
    use_git: bool = False
    close_final_version: bool = False

    def validate(self) -> None:
        total = sum(self.worker_outcome_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise UsageError(f"worker_outcome_mix must sum to 1, got {total}")
        unknown = set(self.worker_outcome_mix) - set(_OUTCOMES)
        if unknown:
            raise UsageError(f"unknown worker outcomes: {sorted(unknown)}")
        if self.versions < 1:
            raise UsageError("a scenario needs at least one version")


def load_scenario_spec(path: Path) -> ScenarioSpec:
    doc = yamlio.load_mapping(Path(path).read_bytes(), str(path))
    spec = ScenarioSpec(
        rng_seed=int(doc.get("rng_seed", 0)),
        versions=int(doc.get("versions", 1)),
        tasks_per_version=tuple(doc.get("tasks_per_version", (1, 3))),
        use_git=bool(doc.get("use_git", False)),
        close_final_version=bool(doc.get("close_final_version", False)),
    )
    if "worker_outcome_mix" in doc:
        spec.worker_outcome_mix = dict(doc["worker_outcome_mix"])
    if "gate_shape_mix" in doc:
        spec.gate_shape_mix = dict(doc["gate_shape_mix"])
    spec.validate()
    return spec


@dataclass
class TaskPlan:
    """Everything the scenario decided about one task, oracle-readable."""

    task_id: str
    rq_id: str
    claim_class: str
    outcome: str
    artifact_count: int
    claims: list[str] = field(default_factory=list)
    gates: dict[str, dict] = field(default_factory=dict)  # gate_id -> shape

    def artifact_paths(self) -> list[str]:
        return [
            f"runs/{self.task_id}/art_{j}.yaml" for j in range(self.artifact_count)
        ]


@dataclass
class ScenarioResult:
    repo: Path
    summary: dict
    mismatches: list = field(default_factory=list)

    def ok(self) -> bool:
        return not self.mismatches


# ---------------------------------------------------------------------------
# The independent oracle: the one-task transition rule over plain dicts
# ---------------------------------------------------------------------------


def initial_snapshot() -> dict:
    return {
        "tasks": {},
        "claims": {},
        "blockers": [],
        "evidence_paths": [],
        "last_completed_task": None,
    }


def snapshot_from_state(state: VersionState) -> dict:
    return {
        "tasks": {tid: t.status.value for tid, t in state.contracts.items()},
        "claims": {c.claim_id: c.status.value for c in state.ledger.claims},
        "blockers": sorted(
            (b.blocker_id, b.kind.value, b.resolution is not None)
            for b in state.blockers
        ),
        "evidence_paths": sorted(o.path for o in state.evidence.objects),
        "last_completed_task": state.last_completed_task,
    }


def snapshot_from_repo(repo: Path) -> dict:
    """Read only the files the snapshot needs; no cross-validation."""
    from . import schemas

    version_id = layout.read_current(repo)
    header = schemas.parse_status(
        layout.status_path(repo, version_id).read_bytes()
    )
    tasks = schemas.parse_tasks(layout.tasks_path(repo, version_id).read_bytes())
    ledger = schemas.parse_ledger(layout.ledger_path(repo).read_bytes())
    evidence_file = layout.evidence_log_path(repo, version_id)
    evidence = (
        schemas.parse_evidence_log(evidence_file.read_bytes())
        if evidence_file.is_file()
        else None
    )
    return {
        "tasks": {t.task_id: t.status.value for t in tasks},
        "claims": {c.claim_id: c.status.value for c in ledger.claims},
        "blockers": sorted(
            (b.blocker_id, b.kind.value, b.resolution is not None)
            for b in header.blockers
        ),
        "evidence_paths": sorted(o.path for o in evidence.objects) if evidence else [],
        "last_completed_task": header.last_completed_task,
    }


def oracle_step(snapshot: dict, task: dict, outcomes: dict) -> dict:
    """Expected state after one task, transcribed line by line.

    ``task`` declares the contract (id, rq, class, linked claims, gates,
    validity); ``outcomes`` declares what the worker did and what the
    gates must therefore decide. No engine code is consulted.
    """
    snap = copy.deepcopy(snapshot)
    task_id = task["task_id"]

    # line 1-3: an unbound contract is rejected as invalid research work
    if not task.get("valid", True):
        snap["tasks"][task_id] = "rejected"
        return snap

    # execute w; append produced artifacts and the report as evidence
    evidence = list(snap["evidence_paths"])
    evidence.extend(outcomes.get("artifacts_written", []))
    if outcomes.get("report_written", True):
        evidence.append(
            f"docs/research/{task['version_id']}/rqs/{task['rq_id']}/{task_id}.report.txt"
        )
    evidence.extend(outcomes.get("extra_writes", []))

    failed = outcomes["disposition"] == "failed"
    missing = bool(outcomes.get("missing_expected"))
    strayed = bool(outcomes.get("extra_writes"))
    if failed or missing or not outcomes.get("report_written", True) or strayed:
        # register blocker; keep affected claims non-admitted
        if failed:
            blocker = (f"B_{task_id}_exec", "execution_failure", False)
        elif not outcomes.get("report_written", True):
            blocker = (f"B_{task_id}_report", "execution_failure", False)
        elif missing:
            blocker = (f"B_{task_id}_missing", "missing_artifact", False)
        else:
            blocker = (f"B_{task_id}_scope", "execution_failure", False)
        snap["blockers"] = sorted(snap["blockers"] + [blocker])
        snap["tasks"][task_id] = "blocked"
        snap["evidence_paths"] = sorted(evidence)
        return snap

    # gates of linked claims are evaluated once each; every evaluation is
    # logged and mirrored into the evidence base as an audit label
    gate_outcomes = outcomes.get("gate_outcomes", {})
    for gate_id in sorted(gate_outcomes):
        ordinal = outcomes.get("gate_ordinals", {}).get(gate_id, 0)
        evidence.append(
            f"docs/research/{task['version_id']}/decisions/{gate_id}.d{ordinal:03d}.yaml"
        )

    for claim_id in task.get("claims", []):
        status = snap["claims"].get(claim_id)
        if status not in ("planned", "draft_only", "blocked"):
            continue
        gates = task["claim_gates"][claim_id]
        decided = [gate_outcomes[g] for g in gates if g in gate_outcomes]
        if not decided:
            continue
        contradiction = any(
            outcomes.get("gate_contradictions", {}).get(g, False) for g in gates
        )
        effective = min(
            decided, key=lambda o: {"failed": 0, "passed_limited": 1, "passed": 2}[o]
        )
        if contradiction:
            snap["claims"][claim_id] = "contradicted"
        elif effective == "passed" and task.get("chain_ok", True):
            snap["claims"][claim_id] = "admitted"
        elif effective == "passed_limited" and task.get("chain_ok", True):
            snap["claims"][claim_id] = "admitted_limited"
        else:
            if status == "planned":
                snap["claims"][claim_id] = "blocked"
            # draft_only and blocked stay where they are

    snap["tasks"][task_id] = "done"
    snap["last_completed_task"] = task_id
    snap["evidence_paths"] = sorted(evidence)
    return snap


def oracle_open_version(snapshot: dict, admitted_artifacts: dict) -> dict:
    """Expected state right after reseeding into a fresh version.

    Claims persist globally; unresolved blockers carry; the evidence base
    restarts with the artifacts backing already-admitted chains.
    """
    carried_evidence = sorted(
        {
            path
            for claim_id, paths in admitted_artifacts.items()
            if snapshot["claims"].get(claim_id) in ("admitted", "admitted_limited")
            for path in paths
        }
    )
    return {
        "tasks": {},
        "claims": dict(snapshot["claims"]),
        "blockers": sorted(b for b in snapshot["blockers"] if not b[2]),
        "evidence_paths": carried_evidence,
        "last_completed_task": None,
    }


# ---------------------------------------------------------------------------
# Scenario planner and driver
# ---------------------------------------------------------------------------


def _draw(rng: random.Random, mix: dict) -> str:
    roll = rng.random()
    acc = 0.0
    for name in _OUTCOMES:
        acc += mix.get(name, 0.0)
        if roll < acc:
            return name
    return "succeed"


def plan_version(
    spec: ScenarioSpec, rng: random.Random, version: int, claim_budget: int
) -> list[TaskPlan]:
    count = rng.randint(*spec.tasks_per_version)
    plans = []
    for t in range(count):
        task_id = f"T{version:02d}_{t:02d}"
        plan = TaskPlan(
            task_id=task_id,
            rq_id=f"RQ{version:02d}_{t:02d}",
            claim_class=rng.choice(_CLAIM_CLASSES),
            outcome=_draw(rng, spec.worker_outcome_mix),
            artifact_count=rng.randint(1, spec.max_artifacts),
        )
        n_claims = rng.choice([0, 1, 1, 1, 2])
        n_claims = min(n_claims, claim_budget)
        claim_budget -= n_claims
        for c in range(n_claims):
            claim_id = f"C{version:02d}_{t:02d}_{c}"
            gate_id = f"G{version:02d}_{t:02d}_{c}"
            checks = rng.choice(spec.gate_shape_mix["check_counts"])
            checks = min(checks, plan.artifact_count)
            plan.claims.append(claim_id)
            plan.gates[gate_id] = {
                "pass_condition": rng.choice(spec.gate_shape_mix["pass_conditions"]),
                "check_count": checks,
                "method": rng.choice(["existence", "content_match"]),
            }
        plans.append(plan)
    return plans


_WORKER_TEMPLATES = {
    "succeed": """\
mkdir -p "$EGRET_REPO_ROOT/runs/{task_id}"
{artifact_lines}
printf 'finished cleanly\\n' > "$EGRET_REPORT_PATH"
""",
    "fail": """\
printf 'gave up\\n' > "$EGRET_REPORT_PATH"
exit 1
""",
    "contradict": """\
mkdir -p "$EGRET_REPO_ROOT/runs/{task_id}"
{artifact_lines}
printf 'status: {marker}\\n' > "$EGRET_REPO_ROOT/runs/{task_id}/art_0.yaml"
printf 'observed contradiction\\n' > "$EGRET_REPORT_PATH"
""",
    "out_of_contract": """\
mkdir -p "$EGRET_REPO_ROOT/runs/{task_id}"
{artifact_lines}
printf 'stray\\n' > "$EGRET_REPO_ROOT/experiments/stray_{task_id}.txt"
printf 'wandered\\n' > "$EGRET_REPORT_PATH"
""",
}


def _write_worker(repo: Path, plan: TaskPlan) -> str:
    artifact_lines = "\n".join(
        f"printf 'status: ok\\n' > \"$EGRET_REPO_ROOT/{path}\""
        for path in plan.artifact_paths()
    )
    body = _WORKER_TEMPLATES[plan.outcome].format(
        task_id=plan.task_id,
        artifact_lines=artifact_lines,
        marker=CONTRADICTION_MARKER,
    )
    rel = f"experiments/workers/{plan.task_id}.sh"
    script = repo / rel
    script.parent.mkdir(parents=True, exist_ok=True)
    script.write_text("#!/bin/sh\nset -e\n" + body)
    script.chmod(script.stat().st_mode | stat.S_IEXEC)
    return rel


def _cli(repo: Path, *argv) -> int:
    sink = io.StringIO()
    with contextlib.redirect_stdout(sink), contextlib.redirect_stderr(sink):
        return cli_main(["--repo", str(repo), *argv])


def _plan_documents(plans: list[TaskPlan]) -> dict:
    """One declarative plan file covering a whole version's registrations."""
    doc: dict = {"rqs": [], "gates": [], "claims": [], "tasks": []}
    for plan in plans:
        doc["rqs"].append(
            {
                "rq_id": plan.rq_id,
                "hypothesis": f"synthetic hypothesis for {plan.task_id}",
            }
        )
        for gate_id, shape in plan.gates.items():
            checks = []
            for j in range(shape["check_count"]):
                check = {
                    "type": "run_report",
                    "path": f"runs/{plan.task_id}/art_{j}.yaml",
                    "check": shape["method"],
                    "contradicts_on": CONTRADICTION_MARKER,
                }
                if shape["method"] == "content_match":
                    check["expectation"] = "status"
                checks.append(check)
            doc["gates"].append(
                {
                    "gate_id": gate_id,
                    "claim_class": plan.claim_class,
                    "claim_scope": f"synthetic scope for {gate_id}",
                    "pass_condition": shape["pass_condition"],
                    "required_artifacts": checks,
                }
            )
        for claim_id in plan.claims:
            doc["claims"].append(
                {
                    "id": claim_id,
                    "rq_link": plan.rq_id,
                    "claim_class": plan.claim_class,
                    "statement": f"synthetic claim {claim_id}",
                    "scope": "Evaluation",
                    "required_evidence": [
                        {"artifact_type": "run_report", "gate_id": f"G{claim_id[1:]}"}
                    ],
                }
            )
        doc["tasks"].append(
            {
                "task_id": plan.task_id,
                "rq_id": plan.rq_id,
                "claim_class": plan.claim_class,
                "allowed_files": [f"runs/{plan.task_id}/**"],
                "expected_artifacts": [f"runs/{plan.task_id}/art_*.yaml"],
                "routed_role": "synthetic",
            }
        )
    return doc


def _register_plans(repo: Path, workdir: Path, version: int, plans: list[TaskPlan]) -> None:
    plan_path = Path(workdir) / f"plan_v{version}.yaml"
    plan_path.write_bytes(yamlio.dump(_plan_documents(plans)))
    if _cli(repo, "apply", "--plan", str(plan_path)) != 0:
        raise UsageError(f"plan application failed for version {version}")


def _plan_outcomes(plan: TaskPlan, version_id: str) -> tuple[dict, dict]:
    """Task model and outcome declaration the oracle consumes."""
    artifacts = plan.artifact_paths()
    task_model = {
        "task_id": plan.task_id,
        "rq_id": plan.rq_id,
        "version_id": version_id,
        "claims": list(plan.claims),
        "claim_gates": {
            claim_id: [f"G{claim_id[1:]}"] for claim_id in plan.claims
        },
        "valid": True,
        "chain_ok": True,
    }
    outcomes: dict = {"disposition": "succeeded", "report_written": True}
    if plan.outcome == "succeed":
        outcomes["artifacts_written"] = artifacts
    elif plan.outcome == "fail":
        outcomes["disposition"] = "failed"
        outcomes["artifacts_written"] = []
    elif plan.outcome == "contradict":
        outcomes["artifacts_written"] = artifacts
    elif plan.outcome == "out_of_contract":
        outcomes["artifacts_written"] = artifacts
        outcomes["extra_writes"] = [f"experiments/stray_{plan.task_id}.txt"]
    if plan.outcome in ("succeed", "contradict"):
        gate_outcomes = {}
        contradictions = {}
        for gate_id in sorted(plan.gates):
            if plan.outcome == "contradict":
                gate_outcomes[gate_id] = "failed"
                contradictions[gate_id] = True
            else:
                gate_outcomes[gate_id] = "passed"
        outcomes["gate_outcomes"] = gate_outcomes
        outcomes["gate_contradictions"] = contradictions
    return task_model, outcomes


def run_scenario(spec: ScenarioSpec, workdir: Path) -> ScenarioResult:
    spec.validate()
    rng = random.Random(spec.rng_seed)
    repo = Path(workdir) / "repo"
    if _cli(repo, "init", "--big-rq", "synthetic trajectory exercise") != 0:
        raise UsageError("repository initialization failed")
    if spec.use_git:
        init_git(repo)
        commit_all(repo, "initialize scaffold\n\nAuthorized-By: harness-operator")

    snapshot = initial_snapshot()
    admitted_artifacts: dict[str, list[str]] = {}
    mismatches = []
    summary = {
        "versions": 0,
        "tasks_run": 0,
        "succeeded": 0,
        "blocked_tasks": 0,
        "admitted": 0,
        "contradicted": 0,
        "blocked_claims": 0,
    }
    claim_budget = spec.max_claims

    for v in range(spec.versions):
        version_id = f"V{v}"
        summary["versions"] += 1
        plans = plan_version(spec, rng, v, claim_budget)
        claim_budget -= sum(len(p.claims) for p in plans)
        _register_plans(repo, workdir, v, plans)
        for plan in plans:
            snapshot["tasks"][plan.task_id] = "queued"
            for claim_id in plan.claims:
                snapshot["claims"][claim_id] = "planned"
        if spec.use_git:
            commit_all(repo, f"register {version_id} research items")

        # FIFO projection: every plan's RQ is runnable and its contract
        # valid, so queue order is registration order
        for plan in plans:
            worker_rel = _write_worker(repo, plan)
            _cli(
                repo,
                "run",
                plan.task_id,
                "--worker-cmd",
                f"/bin/sh {worker_rel}",
            )
            summary["tasks_run"] += 1
            task_model, outcomes = _plan_outcomes(plan, version_id)
            expected = oracle_step(snapshot, task_model, outcomes)
            actual = snapshot_from_repo(repo)
            if actual != expected:
                mismatches.append(
                    {"task": plan.task_id, "expected": expected, "actual": actual}
                )
            snapshot = expected
            for claim_id in plan.claims:
                status = snapshot["claims"].get(claim_id)
                if status == "admitted":
                    # only the paths the gate actually examined back the chain
                    gate_id = f"G{claim_id[1:]}"
                    checked = plan.gates[gate_id]["check_count"]
                    admitted_artifacts[claim_id] = plan.artifact_paths()[:checked]
            if spec.use_git:
                commit_all(repo, f"execute {plan.task_id} under contract")

        for plan in plans:
            if snapshot["tasks"][plan.task_id] == "done":
                summary["succeeded"] += 1
            elif snapshot["tasks"][plan.task_id] == "blocked":
                summary["blocked_tasks"] += 1

        is_last = v == spec.versions - 1
        if not is_last or spec.close_final_version:
            _close_version(repo, spec)
            if spec.use_git:
                commit_all(repo, f"close {version_id}")
            if not is_last:
                if _cli(repo, "open", f"V{v + 1}", "--seed") != 0:
                    raise UsageError(f"failed to open V{v + 1}")
                snapshot = oracle_open_version(snapshot, admitted_artifacts)
                actual = snapshot_from_repo(repo)
                if actual != snapshot:
                    mismatches.append(
                        {
                            "task": f"open V{v + 1}",
                            "expected": snapshot,
                            "actual": actual,
                        }
                    )
                if spec.use_git:
                    commit_all(repo, f"open V{v + 1} from closeout")

    for status in snapshot["claims"].values():
        if status in ("admitted", "admitted_limited"):
            summary["admitted"] += 1
        elif status == "contradicted":
            summary["contradicted"] += 1
        elif status == "blocked":
            summary["blocked_claims"] += 1
    summary["final_snapshot"] = snapshot

    return ScenarioResult(repo=repo, summary=summary, mismatches=mismatches)


def _close_version(repo: Path, spec: ScenarioSpec) -> None:
    """Simulate the human half of closing: decide stale gates, assign
    consequences, pick the terminal status."""
    state = state_ops.load_state(repo)
    for gate_id in sorted(state.gates):
        if not state.gates[gate_id].decision_log and state.gates[gate_id].status in (
            None,
            "pending",
        ):
            _cli(
                repo,
                "decide",
                gate_id,
                "--outcome",
                "failed",
                "--reviewer",
                "harness-operator",
                "--scope",
                "undecided at closeout",
            )
    if _cli(repo, "closeout", "collect") != 0:
        raise UsageError("closeout collect failed")
    drafts = (
        yamlio.load_mapping((repo / ".egret-insight-drafts.yaml").read_bytes())
        if (repo / ".egret-insight-drafts.yaml").is_file()
        else {"insights": []}
    )
    for item in drafts.get("insights", []):
        _cli(
            repo,
            "closeout",
            "assign",
            item["insight_id"],
            "--consequence",
            "escalate_human",
        )
    if _cli(repo, "closeout", "finalize", "--status", "closed_stable", "--yes") != 0:
        raise UsageError("closeout finalize failed")


def write_summary(result: ScenarioResult, path: Path) -> None:
    doc = {
        "repo": str(result.repo),
        "oracle_mismatches": len(result.mismatches),
        "summary": result.summary,
    }
    Path(path).write_bytes(yamlio.dump(doc))
