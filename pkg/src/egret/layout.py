"""Repository layout: one place that knows where every state file lives."""

from __future__ import annotations

from pathlib import Path

RESEARCH_ROOT = "docs/research"
DIRECTION_FILE = "RESEARCH_DIRECTION.md"
CURRENT_FILE = "CURRENT"
LEDGER_FILE = "ledger/PAPER_CLAIM_LEDGER.yaml"

TOP_LEVEL_DIRS = ("docs/research", "runs", "experiments", "protocol", "ledger")


def research_root(repo_root: Path) -> Path:
    return Path(repo_root) / RESEARCH_ROOT


def direction_path(repo_root: Path) -> Path:
    return research_root(repo_root) / DIRECTION_FILE


def current_path(repo_root: Path) -> Path:
    return research_root(repo_root) / CURRENT_FILE


def ledger_path(repo_root: Path) -> Path:
    return Path(repo_root) / LEDGER_FILE


def version_dir(repo_root: Path, version_id: str) -> Path:
    return research_root(repo_root) / version_id


def status_path(repo_root: Path, version_id: str) -> Path:
    return version_dir(repo_root, version_id) / "STATUS.yaml"


def spine_path(repo_root: Path, version_id: str) -> Path:
    return version_dir(repo_root, version_id) / "RESEARCH_SPINE.yaml"


def calibration_path(repo_root: Path, version_id: str) -> Path:
    return version_dir(repo_root, version_id) / "RQ_CALIBRATION.yaml"


def tasks_path(repo_root: Path, version_id: str) -> Path:
    return version_dir(repo_root, version_id) / "TASKS.yaml"


def gates_path(repo_root: Path, version_id: str) -> Path:
    return version_dir(repo_root, version_id) / "EVIDENCE_GATE.yaml"


def evidence_log_path(repo_root: Path, version_id: str) -> Path:
    return version_dir(repo_root, version_id) / "EVIDENCE_LOG.yaml"


def closeout_yaml_path(repo_root: Path, version_id: str) -> Path:
    return version_dir(repo_root, version_id) / "CLOSEOUT.yaml"


def closeout_md_path(repo_root: Path, version_id: str) -> Path:
    return version_dir(repo_root, version_id) / "closeout.md"


def insights_dir(repo_root: Path, version_id: str) -> Path:
    return version_dir(repo_root, version_id) / "insights"


def wiki_dir(repo_root: Path, version_id: str) -> Path:
    return version_dir(repo_root, version_id) / "wiki"


def rqs_dir(repo_root: Path, version_id: str) -> Path:
    return version_dir(repo_root, version_id) / "rqs"


def decisions_dir(repo_root: Path, version_id: str) -> Path:
    return version_dir(repo_root, version_id) / "decisions"


def decision_file(repo_root: Path, version_id: str, gate_id: str, ordinal: int) -> Path:
    return decisions_dir(repo_root, version_id) / f"{gate_id}.d{ordinal:03d}.yaml"


def rel(repo_root: Path, path: Path) -> str:
    return Path(path).relative_to(Path(repo_root)).as_posix()


def read_current(repo_root: Path) -> str:
    return current_path(repo_root).read_text(encoding="utf-8").strip()
