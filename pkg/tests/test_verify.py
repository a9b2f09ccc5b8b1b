"""Independent invariant verifiers and the package checker."""

import pytest

from egret import layout, schemas, state as state_ops, yamlio
from egret.closeout import collect_insights, produce_closeout, seed_next_version
from egret.errors import UsageError
from egret.fsops import sha256_file
from egret.githist import GitHistory, commit_all, init_git
from egret.model import (
    Blocker,
    BlockerKind,
    InsightConsequence,
    InvariantKind,
    Verdict,
    VersionStatus,
)
from egret.verify import (
    verify_admission,
    verify_blocker_conservation,
    verify_direction_lock,
    verify_monotonicity,
    verify_package,
)

from repo_fixtures import admit_design_claim, base_repo, write


def git_repo(tmp_path):
    repo = base_repo(tmp_path)
    init_git(repo)
    commit_all(repo, "initialize research scaffold\n\nAuthorized-By: maintainer")
    return repo


class TestDirectionLock:
    def test_marked_edits_pass(self, tmp_path):
        repo = git_repo(tmp_path)
        path = layout.direction_path(repo)
        path.write_text(path.read_text() + "\nrefined.\n")
        commit_all(repo, "refine direction\n\nAuthorized-By: maintainer")
        report = verify_direction_lock(GitHistory(repo))
        assert report.verdict is Verdict.PASS

    def test_unmarked_edit_fails_naming_revision(self, tmp_path):
        repo = git_repo(tmp_path)
        path = layout.direction_path(repo)
        path.write_text(path.read_text() + "\nsneaky change.\n")
        rev = commit_all(repo, "tweak wording")
        report = verify_direction_lock(GitHistory(repo))
        assert report.verdict is Verdict.FAIL
        assert report.violations[0][0] == rev

    def test_no_direction_edits_vacuous_pass(self, tmp_path):
        repo = git_repo(tmp_path)
        write(repo, "runs/r1.txt", "evidence")
        commit_all(repo, "add run evidence")
        report = verify_direction_lock(GitHistory(repo))
        assert report.verdict is Verdict.PASS

    def test_unreadable_history_indeterminate(self, tmp_path):
        report = verify_direction_lock(GitHistory(tmp_path / "nowhere"))
        assert report.verdict is Verdict.INDETERMINATE


class TestMonotonicity:
    def test_append_only_history_passes(self, tmp_path):
        repo = git_repo(tmp_path)
        write(repo, "runs/r1/manifest.json", "{}")
        commit_all(repo, "add manifest")
        write(repo, "runs/r2/manifest.json", "{}")
        commit_all(repo, "add second manifest")
        report = verify_monotonicity(GitHistory(repo))
        assert report.verdict is Verdict.PASS

    def test_rewrite_fails_with_path_and_revision(self, tmp_path):
        repo = git_repo(tmp_path)
        write(repo, "runs/x/manifest.json", '{"v": 1}')
        commit_all(repo, "add manifest")
        write(repo, "runs/x/manifest.json", '{"v": 2}')
        rev = commit_all(repo, "adjust manifest")
        report = verify_monotonicity(GitHistory(repo))
        assert report.verdict is Verdict.FAIL
        assert report.violations == [(rev, "runs/x/manifest.json rewritten")]

    def test_deletion_fails(self, tmp_path):
        repo = git_repo(tmp_path)
        target = write(repo, "runs/x/report.txt", "data")
        commit_all(repo, "add report")
        target.unlink()
        commit_all(repo, "drop report")
        report = verify_monotonicity(GitHistory(repo))
        assert report.verdict is Verdict.FAIL

    def test_invalidation_by_new_object_passes(self, tmp_path):
        repo = git_repo(tmp_path)
        write(repo, "runs/measurement_v1.txt", "estimate: 10")
        commit_all(repo, "first measurement")
        write(repo, "runs/measurement_v2.txt", "estimate: 12 (supersedes v1)")
        commit_all(repo, "remeasure; new object invalidates v1")
        report = verify_monotonicity(GitHistory(repo))
        assert report.verdict is Verdict.PASS

    def test_state_file_updates_are_exempt(self, tmp_path):
        repo = git_repo(tmp_path)
        state = state_ops.load_state(repo)
        state.notes.append("progress note")
        state_ops.save_state(repo, state)
        commit_all(repo, "update status")
        report = verify_monotonicity(GitHistory(repo))
        assert report.verdict is Verdict.PASS


class TestAdmission:
    def test_intact_admitted_claim_passes(self, tmp_path):
        repo = base_repo(tmp_path)
        admit_design_claim(repo)
        report = verify_admission(repo)
        assert report.verdict is Verdict.PASS

    def test_missing_gate_file_fails(self, tmp_path):
        repo = base_repo(tmp_path)
        admit_design_claim(repo)
        layout.gates_path(repo, "V0").unlink()
        report = verify_admission(repo)
        assert report.verdict is Verdict.FAIL
        assert any("not registered" in v for _, v in report.violations)

    def test_drifted_tree_fails_with_detail(self, tmp_path):
        repo = base_repo(tmp_path)
        admit_design_claim(repo)
        (repo / "ledger/claims.yaml").write_text("claims: []\n")
        report = verify_admission(repo)
        assert report.verdict is Verdict.FAIL
        assert any("re-evaluates failed" in v for _, v in report.violations)

    def test_no_admitted_claims_vacuous_pass(self, tmp_path):
        repo = base_repo(tmp_path)
        report = verify_admission(repo)
        assert report.verdict is Verdict.PASS


def close_with_blockers(repo, blocker_count, resolve=()):
    state = admit_design_claim(repo)
    for i in range(blocker_count):
        state.blockers.append(
            Blocker(
                blocker_id=f"B{i:02d}",
                kind=BlockerKind.UNAUDITED_EVIDENCE,
                description=f"needs audit {i}",
            )
        )
    for blocker_id in resolve:
        state_ops.resolve_blocker(state, blocker_id, "audited and cleared")
    state_ops.save_state(repo, state)
    state = state_ops.load_state(repo)
    insights = collect_insights(state)
    for insight in insights:
        insight.consequence = InsightConsequence.STRENGTHEN_AUDIT_RUBRIC
    closeout = produce_closeout(repo, state, insights, VersionStatus.CLOSED_STABLE)
    return state, closeout


class TestBlockerConservation:
    def test_carried_chain_passes(self, tmp_path):
        repo = base_repo(tmp_path)
        state, closeout = close_with_blockers(repo, 3)
        state_ops.open_version(
            repo, "V1", state.direction, seed=seed_next_version(closeout)
        )
        report = verify_blocker_conservation(repo)
        assert report.verdict is Verdict.PASS

    def test_blocker_dropped_from_closeout_fails(self, tmp_path):
        repo = base_repo(tmp_path)
        state, closeout = close_with_blockers(repo, 3)
        state_ops.open_version(
            repo, "V1", state.direction, seed=seed_next_version(closeout)
        )
        # simulate a broken writer: the persisted closeout loses one blocker
        path = layout.closeout_yaml_path(repo, "V0")
        tampered = closeout.__class__(
            version_id=closeout.version_id,
            final_status=closeout.final_status,
            evidence_summary=closeout.evidence_summary,
            unresolved_blockers=closeout.unresolved_blockers[1:],
            insights=closeout.insights,
            claim_dispositions=closeout.claim_dispositions,
            irrelevance_notes=closeout.irrelevance_notes,
            seed=closeout.seed,
        )
        path.write_bytes(schemas.serialize_closeout(tampered))
        report = verify_blocker_conservation(repo)
        assert report.verdict is Verdict.FAIL
        assert any("absent from V0 closeout" in v for _, v in report.violations)

    def test_resolved_blocker_absent_from_successor_passes(self, tmp_path):
        repo = base_repo(tmp_path)
        state, closeout = close_with_blockers(repo, 2, resolve=("B00",))
        seed = seed_next_version(closeout)
        assert [b.blocker_id for b in seed.carried_blockers] == ["B01"]
        state_ops.open_version(repo, "V1", state.direction, seed=seed)
        report = verify_blocker_conservation(repo)
        assert report.verdict is Verdict.PASS


class TestPackageVerifier:
    def manifest_for(self, repo, paths):
        entries = [
            {"path": rel, "sha256": sha256_file(repo / rel)} for rel in paths
        ]
        manifest = repo / "PACKAGE_MANIFEST.yaml"
        manifest.write_bytes(
            yamlio.dump({"schema_version": "package_manifest_v1", "files": entries})
        )
        return manifest

    def package(self, tmp_path):
        repo = base_repo(tmp_path)
        admit_design_claim(repo)
        write(repo, "runs/e1/manifest.json", '{"run": "e1"}')
        manifest = self.manifest_for(
            repo,
            [
                "protocol/claim_admission.yaml",
                "ledger/claims.yaml",
                "runs/e1/manifest.json",
            ],
        )
        return repo, manifest

    def test_intact_package_all_categories_pass(self, tmp_path):
        repo, manifest = self.package(tmp_path)
        results = verify_package(repo, manifest)
        assert [r.category for r in results] == [
            "checksums",
            "state",
            "claim_ledger_binding",
            "manifests",
        ]
        assert all(r.ok() for r in results)
        by_cat = {r.category: r for r in results}
        assert by_cat["checksums"].checks_run == 3
        assert by_cat["manifests"].checks_run == 1
        assert by_cat["state"].checks_run >= 6

    def test_single_flipped_byte_fails_only_checksums(self, tmp_path):
        repo, manifest = self.package(tmp_path)
        target = repo / "protocol/claim_admission.yaml"
        data = bytearray(target.read_bytes())
        data[0] ^= 0x01
        target.write_bytes(bytes(data))
        results = verify_package(repo, manifest)
        by_cat = {r.category: r for r in results}
        assert len(by_cat["checksums"].failures) == 1
        assert "protocol/claim_admission.yaml" in by_cat["checksums"].failures[0]
        assert [r.category for r in results if not r.ok()] == ["checksums"]

    def test_empty_manifest_vacuous_pass_with_warning(self, tmp_path):
        repo = base_repo(tmp_path)
        manifest = repo / "PACKAGE_MANIFEST.yaml"
        manifest.write_bytes(
            yamlio.dump(
                {
                    "schema_version": "package_manifest_v1",
                    "files": [],
                    "categories": ["checksums"],
                }
            )
        )
        results = verify_package(repo, manifest)
        assert results[0].checks_run == 0
        assert results[0].ok()
        assert results[0].warnings

    def test_unreadable_manifest_usage_error(self, tmp_path):
        with pytest.raises(UsageError):
            verify_package(tmp_path, tmp_path / "missing.yaml")

    def test_unknown_category_warned(self, tmp_path):
        repo, manifest = self.package(tmp_path)
        manifest.write_bytes(
            yamlio.dump(
                {
                    "schema_version": "package_manifest_v1",
                    "files": [],
                    "categories": ["pdf_metadata_anonymity"],
                }
            )
        )
        results = verify_package(repo, manifest)
        assert results[0].checks_run == 0
        assert results[0].warnings
