"""Version lifecycle, persistence round-trips, delta atomicity, scheduling."""

import copy

import pytest
from hypothesis import given, settings, strategies as st

from egret import layout, state as state_ops
from egret.errors import (
    AdmissionError,
    IntegrityError,
    LifecycleError,
    UsageError,
)
from egret.fsops import snapshot_tree
from egret.model import (
    AuthorityRef,
    Blocker,
    BlockerKind,
    ClaimStatus,
    ClaimTransition,
    CloseoutSeed,
    EvidenceKind,
    RqNode,
    StateDelta,
    TaskContract,
    TaskStatus,
    TaskStatusUpdate,
    VersionStatus,
    ClaimClass,
)

from egret.model import QueueEntry
from repo_fixtures import base_repo, evidence_for, write


class TestInitAndLoad:
    def test_init_materializes_layout(self, tmp_path):
        repo = tmp_path / "repo"
        state = state_ops.init_repo(repo)
        assert layout.read_current(repo) == "V0"
        assert state.status is VersionStatus.ACTIVE
        for rel in ("docs/research", "runs", "experiments", "protocol", "ledger"):
            assert (repo / rel).is_dir()
        for sub in ("insights", "wiki", "rqs"):
            assert (layout.version_dir(repo, "V0") / sub).is_dir()

    def test_reinit_refused(self, tmp_path):
        repo = tmp_path / "repo"
        state_ops.init_repo(repo)
        with pytest.raises(LifecycleError):
            state_ops.init_repo(repo)

    def test_init_then_load_round_trip(self, tmp_path):
        repo = tmp_path / "repo"
        state_ops.init_repo(repo)
        loaded = state_ops.load_state(repo)
        assert loaded.version_id == "V0"
        assert loaded.status is VersionStatus.ACTIVE
        assert loaded.direction.content_digest

    def test_load_fully_linked_fixture(self, tmp_path):
        repo = base_repo(tmp_path)
        state = state_ops.load_state(repo)
        assert state.spine.rq_ids() == {"RQ01"}
        assert "G_DESIGN_001" in state.gates
        assert state.ledger.by_id("C_DES_001").status is ClaimStatus.PLANNED

    def test_dangling_task_rq_is_integrity_error(self, tmp_path):
        repo = base_repo(tmp_path)
        state = state_ops.load_state(repo)
        state.contracts["T99"] = TaskContract(task_id="T99", rq_id="RQ99")
        state.spine.task_queue.append(QueueEntry("T99"))
        state_ops.save_state(repo, state)
        with pytest.raises(IntegrityError) as err:
            state_ops.load_state(repo)
        assert "RQ99" in str(err.value)

    def test_save_load_is_semantic_identity(self, tmp_path):
        repo = base_repo(tmp_path)
        state = state_ops.load_state(repo)
        state_ops.save_state(repo, state)
        again = state_ops.load_state(repo)
        assert again == state


class TestOpenVersion:
    def close(self, repo, status=VersionStatus.CLOSED_STABLE):
        state = state_ops.load_state(repo)
        state.status = status
        state_ops.save_state(repo, state)
        return state

    def test_seed_carries_unresolved_blockers(self, tmp_path):
        repo = base_repo(tmp_path)
        state = state_ops.load_state(repo)
        for i in range(7):
            state.blockers.append(
                Blocker(
                    blocker_id=f"B{i:02d}",
                    kind=BlockerKind.MISSING_ARTIFACT,
                    description=f"missing artifact {i}",
                )
            )
        state_ops.save_state(repo, state)
        self.close(repo)
        seed = CloseoutSeed(from_version="V0", carried_blockers=state.blockers)
        v1 = state_ops.open_version(repo, "V1", state.direction, seed=seed)
        assert len(v1.blockers) == 7
        assert layout.read_current(repo) == "V1"

    def test_open_without_seed_is_empty(self, tmp_path):
        repo = base_repo(tmp_path)
        self.close(repo)
        direction = state_ops.load_direction(repo)
        v1 = state_ops.open_version(repo, "V1", direction)
        assert v1.spine.rqs == []
        assert v1.spine.task_queue == []
        assert v1.status is VersionStatus.ACTIVE

    def test_open_from_active_predecessor_refused(self, tmp_path):
        repo = base_repo(tmp_path)
        direction = state_ops.load_direction(repo)
        seed = CloseoutSeed(from_version="V0")
        with pytest.raises(LifecycleError):
            state_ops.open_version(repo, "V1", direction, seed=seed)

    def test_digest_mismatch_refused(self, tmp_path):
        repo = base_repo(tmp_path)
        self.close(repo)
        direction = state_ops.load_direction(repo)
        direction.content_digest = "0" * 64
        with pytest.raises(Exception) as err:
            state_ops.open_version(repo, "V1", direction)
        assert "digest" in str(err.value)

    def test_carried_claims_bring_their_rqs(self, tmp_path):
        repo = base_repo(tmp_path)
        state = self.close(repo)
        seed = CloseoutSeed(
            from_version="V0",
            carried_claims=[("C_DES_001", ClaimStatus.PLANNED)],
        )
        v1 = state_ops.open_version(repo, "V1", state.direction, seed=seed)
        assert v1.spine.rq_ids() == {"RQ01"}
        # the shared ledger still loads and cross-validates
        assert state_ops.load_state(repo, "V1").ledger.by_id("C_DES_001")


class TestApplyDelta:
    def task(self, rq="RQ01", task_id="T04"):
        return TaskContract(
            task_id=task_id,
            rq_id=rq,
            claim_class=ClaimClass.DESIGN,
            allowed_files=["runs/**"],
            expected_artifacts=["runs/report_*.txt"],
        )

    def test_evidence_append_and_task_done(self, tmp_path):
        repo = base_repo(tmp_path)
        state = state_ops.load_state(repo)
        state_ops.register_task(state, self.task())
        state_ops.save_state(repo, state)
        state = state_ops.load_state(repo)
        write(repo, "runs/report_t04.txt", "all good")
        delta = StateDelta(
            appended_evidence=[evidence_for(repo, "runs/report_t04.txt", task="T04")],
            task_status_updates=[
                TaskStatusUpdate("T04", TaskStatus.DONE, result_ref="runs/report_t04.txt")
            ],
        )
        new_state = state_ops.apply_delta(repo, state, delta)
        assert len(new_state.evidence.objects) == len(state.evidence.objects) + 1
        assert new_state.contracts["T04"].result_ref == "runs/report_t04.txt"
        assert new_state.last_completed_task == "T04"

    def test_admission_without_gate_ref_rejected_and_state_unchanged(self, tmp_path):
        repo = base_repo(tmp_path)
        state = state_ops.load_state(repo)
        before = snapshot_tree(repo)
        delta = StateDelta(
            claim_transitions=[
                ClaimTransition(
                    "C_DES_001",
                    ClaimStatus.PLANNED,
                    ClaimStatus.ADMITTED,
                    AuthorityRef("human", "reviewer-1"),
                )
            ]
        )
        with pytest.raises(AdmissionError):
            state_ops.apply_delta(repo, state, delta)
        assert snapshot_tree(repo) == before
        assert state_ops.load_state(repo).ledger.by_id("C_DES_001").status is ClaimStatus.PLANNED

    def test_failed_delta_is_atomic(self, tmp_path):
        repo = base_repo(tmp_path)
        state = state_ops.load_state(repo)
        write(repo, "runs/present.txt", "here")
        before = snapshot_tree(repo)
        delta = StateDelta(
            appended_evidence=[
                evidence_for(repo, "runs/present.txt"),
                evidence_for(repo, "runs/never_written.txt"),
            ]
        )
        with pytest.raises(UsageError):
            state_ops.apply_delta(repo, state, delta)
        assert snapshot_tree(repo) == before

    def test_direction_is_untouchable(self, tmp_path):
        repo = base_repo(tmp_path)
        state = state_ops.load_state(repo)
        delta = StateDelta(
            appended_evidence=[
                evidence_for(repo, "docs/research/RESEARCH_DIRECTION.md")
            ]
        )
        with pytest.raises(UsageError):
            state_ops.apply_delta(repo, state, delta)

    def test_direction_digest_constant_across_deltas(self, tmp_path):
        repo = base_repo(tmp_path)
        state = state_ops.load_state(repo)
        digest = state.direction.content_digest
        for i in range(3):
            write(repo, f"runs/r{i}.txt", f"content {i}")
            state = state_ops.apply_delta(
                repo,
                state,
                StateDelta(appended_evidence=[evidence_for(repo, f"runs/r{i}.txt")]),
            )
            assert state.direction.content_digest == digest
        assert state_ops.load_state(repo).direction.content_digest == digest

    def test_terminal_version_rejects_mutation(self, tmp_path):
        repo = base_repo(tmp_path)
        state = state_ops.load_state(repo)
        state.status = VersionStatus.CLOSED_NEGATIVE
        state_ops.save_state(repo, state)
        state = state_ops.load_state(repo)
        with pytest.raises(LifecycleError):
            state_ops.apply_delta(repo, state, StateDelta())


class TestNextRunnable:
    def setup_tasks(self, repo, specs):
        state = state_ops.load_state(repo)
        for rq_id in {rq for _, rq, _ in specs} - state.spine.rq_ids():
            state_ops.register_rq(state, RqNode(rq_id=rq_id))
        for task_id, rq_id, status in specs:
            contract = TaskContract(
                task_id=task_id,
                rq_id=rq_id,
                claim_class=ClaimClass.PROCESS,
                status=status,
                allowed_files=["runs/**"],
                expected_artifacts=["runs/**"],
                blocker_reason="stuck" if status is TaskStatus.BLOCKED else None,
            )
            state.contracts[contract.task_id] = contract
            state.spine.task_queue.append(QueueEntry(task_id, status))
        state_ops.save_state(repo, state)
        return state_ops.load_state(repo)

    def test_first_runnable_wins(self, tmp_path):
        repo = base_repo(tmp_path)
        state = self.setup_tasks(
            repo,
            [("T1", "RQ01", TaskStatus.BLOCKED), ("T2", "RQ01", TaskStatus.QUEUED)],
        )
        assert state_ops.next_runnable_task(state).task_id == "T2"

    def test_exhausted_queue_returns_none(self, tmp_path):
        repo = base_repo(tmp_path)
        state = state_ops.load_state(repo)
        contract = TaskContract(
            task_id="T1",
            rq_id="RQ01",
            claim_class=ClaimClass.PROCESS,
            status=TaskStatus.DONE,
            allowed_files=["runs/**"],
            expected_artifacts=["runs/**"],
            result_ref="runs/done.txt",
        )
        state.contracts["T1"] = contract
        state.spine.task_queue.append(QueueEntry("T1", TaskStatus.DONE))
        assert state_ops.next_runnable_task(state) is None

    def test_blocked_rq_skipped_all_orders(self, tmp_path):
        """Hand-checked on a 3-task fixture: queued tasks on a blocked RQ are
        skipped and the first queued task on a runnable RQ wins, whatever the
        queue order."""
        import itertools

        repo = base_repo(tmp_path)
        state = self.setup_tasks(
            repo,
            [
                ("TA", "RQ_BLOCKED", TaskStatus.QUEUED),
                ("TB", "RQ01", TaskStatus.QUEUED),
                ("TC", "RQ01", TaskStatus.QUEUED),
            ],
        )
        state.runnable_rqs = ["RQ01"]
        state.blocked_rqs = ["RQ_BLOCKED"]
        base_queue = list(state.spine.task_queue)
        for perm in itertools.permutations(base_queue):
            state.spine.task_queue = list(perm)
            expected = next(t.task_id for t in perm if t.task_id in ("TB", "TC"))
            picked = state_ops.next_runnable_task(state)
            assert picked is not None and picked.task_id == expected

    def test_determinism(self, tmp_path):
        repo = base_repo(tmp_path)
        state = self.setup_tasks(
            repo,
            [("T1", "RQ01", TaskStatus.QUEUED), ("T2", "RQ01", TaskStatus.QUEUED)],
        )
        picks = {state_ops.next_runnable_task(state).task_id for _ in range(10)}
        assert picks == {"T1"}


class TestBlockers:
    def test_resolution_only_adds_fields(self, tmp_path):
        repo = base_repo(tmp_path)
        state = state_ops.load_state(repo)
        state.blockers.append(
            Blocker("B01", BlockerKind.HUMAN_DECISION_GAP, "needs scope ruling")
        )
        state_ops.save_state(repo, state)
        state = state_ops.load_state(repo)
        blocker = state_ops.resolve_blocker(state, "B01", "ruled narrow scope")
        assert blocker.resolution.audit_note == "ruled narrow scope"
        with pytest.raises(UsageError):
            state_ops.resolve_blocker(state, "B01", "again")

    def test_block_and_reactivate(self, tmp_path):
        repo = base_repo(tmp_path)
        state = state_ops.load_state(repo)
        state.blockers.append(
            Blocker("B01", BlockerKind.HUMAN_DECISION_GAP, "awaiting decision")
        )
        state_ops.block_version(state, "B01")
        assert state.status is VersionStatus.BLOCKED
        with pytest.raises(LifecycleError):
            state_ops.reactivate_version(state)
        state_ops.resolve_blocker(state, "B01", "decided")
        state_ops.reactivate_version(state)
        assert state.status is VersionStatus.ACTIVE


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=2), min_size=1, max_size=8))
def test_evidence_sequences_strictly_increase(tmp_path_factory, kinds):
    repo = base_repo(tmp_path_factory.mktemp("fuzz"))
    state = state_ops.load_state(repo)
    kind_cycle = [EvidenceKind.RUN_REPORT, EvidenceKind.LOG, EvidenceKind.MANIFEST]
    for i, k in enumerate(kinds):
        write(repo, f"runs/fz{i}.txt", f"payload {i} {k}")
        state = state_ops.apply_delta(
            repo,
            state,
            StateDelta(
                appended_evidence=[
                    evidence_for(repo, f"runs/fz{i}.txt", kind_cycle[k])
                ]
            ),
        )
    seqs = [o.registered_at for o in state.evidence.objects]
    assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
    assert set(state.evidence.ids()) >= {f"EV{seq:05d}" for seq in seqs}
