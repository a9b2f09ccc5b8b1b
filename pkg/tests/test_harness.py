"""Scenario determinism, oracle equivalence, and post-scenario invariants."""

import pytest

from egret.errors import UsageError
from egret.harness import (
    ScenarioSpec,
    initial_snapshot,
    load_scenario_spec,
    oracle_step,
    run_scenario,
    write_summary,
)
from egret.model import Verdict
from egret.verify import verify_all
from egret import yamlio


class TestSpec:
    def test_mix_must_sum_to_one(self):
        spec = ScenarioSpec(rng_seed=1)
        spec.worker_outcome_mix = {"succeed": 0.5, "fail": 0.2}
        with pytest.raises(UsageError):
            spec.validate()

    def test_spec_file_round_trip(self, tmp_path):
        path = tmp_path / "scenario.yaml"
        path.write_bytes(
            yamlio.dump(
                {
                    "rng_seed": 42,
                    "versions": 2,
                    "tasks_per_version": [1, 2],
                    "worker_outcome_mix": {
                        "succeed": 1.0,
                        "fail": 0.0,
                        "contradict": 0.0,
                        "out_of_contract": 0.0,
                    },
                    "use_git": True,
                }
            )
        )
        spec = load_scenario_spec(path)
        assert spec.rng_seed == 42
        assert spec.versions == 2
        assert spec.use_git is True


class TestOracleStep:
    def base_task(self):
        return {
            "task_id": "T00_00",
            "rq_id": "RQ00_00",
            "version_id": "V0",
            "claims": ["C00_00_0"],
            "claim_gates": {"C00_00_0": ["G00_00_0"]},
            "valid": True,
            "chain_ok": True,
        }

    def test_invalid_contract_only_rejects(self):
        snap = initial_snapshot()
        snap["tasks"]["T00_00"] = "queued"
        snap["claims"]["C00_00_0"] = "planned"
        task = self.base_task()
        task["valid"] = False
        out = oracle_step(snap, task, {"disposition": "succeeded"})
        assert out["tasks"]["T00_00"] == "rejected"
        assert out["claims"] == snap["claims"]
        assert out["evidence_paths"] == []

    def test_empty_claim_task_is_evidence_only(self):
        snap = initial_snapshot()
        snap["tasks"]["T00_00"] = "queued"
        task = self.base_task()
        task["claims"] = []
        task["claim_gates"] = {}
        out = oracle_step(
            snap,
            task,
            {
                "disposition": "succeeded",
                "artifacts_written": ["runs/T00_00/art_0.yaml"],
                "report_written": True,
            },
        )
        assert out["tasks"]["T00_00"] == "done"
        assert "runs/T00_00/art_0.yaml" in out["evidence_paths"]
        assert out["claims"] == {}


class TestScenarios:
    def test_seeded_scenario_is_reproducible(self, tmp_path):
        spec = ScenarioSpec(rng_seed=7, versions=1, tasks_per_version=(2, 3))
        first = run_scenario(spec, tmp_path / "a")
        second = run_scenario(spec, tmp_path / "b")
        assert first.summary == second.summary
        assert first.ok() and second.ok()

    def test_all_fail_mix_admits_nothing(self, tmp_path):
        spec = ScenarioSpec(rng_seed=3, versions=1, tasks_per_version=(2, 3))
        spec.worker_outcome_mix = {
            "succeed": 0.0,
            "fail": 1.0,
            "contradict": 0.0,
            "out_of_contract": 0.0,
        }
        result = run_scenario(spec, tmp_path)
        assert result.ok()
        assert result.summary["admitted"] == 0
        assert result.summary["blocked_tasks"] == result.summary["tasks_run"]

    def test_mixed_scenario_matches_oracle(self, tmp_path):
        for seed in range(5):
            spec = ScenarioSpec(rng_seed=seed, versions=1, tasks_per_version=(1, 3))
            result = run_scenario(spec, tmp_path / f"s{seed}")
            assert result.ok(), result.mismatches

    def test_multi_version_with_git_passes_invariants(self, tmp_path):
        spec = ScenarioSpec(
            rng_seed=11, versions=3, tasks_per_version=(1, 2), use_git=True
        )
        result = run_scenario(spec, tmp_path)
        assert result.ok(), result.mismatches
        assert result.summary["versions"] == 3
        reports = verify_all(result.repo)
        assert all(r.verdict is Verdict.PASS for r in reports), [
            (r.invariant, r.violations) for r in reports
        ]

    def test_summary_report_written(self, tmp_path):
        spec = ScenarioSpec(rng_seed=1, versions=1, tasks_per_version=(1, 1))
        result = run_scenario(spec, tmp_path)
        out = tmp_path / "summary.yaml"
        write_summary(result, out)
        doc = yamlio.load_mapping(out.read_bytes())
        assert doc["oracle_mismatches"] == 0
        assert doc["summary"]["tasks_run"] >= 1
