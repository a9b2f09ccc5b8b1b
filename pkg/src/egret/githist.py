"""Version-control history access behind a small provider interface.

The verifiers only need three things per revision: its id, its message,
and which paths it added, modified, or deleted. Anything Git-compatible
can implement this; the default implementation shells out to git.
"""

from __future__ import annotations

import subprocess
from dataclasses import dataclass, field
from pathlib import Path


class HistoryUnavailable(Exception):
    """History cannot be read; verifiers report an indeterminate verdict."""


@dataclass
class PathChange:
    op: str  # "A" | "M" | "D"
    path: str


@dataclass
class Revision:
    rev_id: str
    message: str
    changes: list[PathChange] = field(default_factory=list)

    def touched(self, path: str) -> bool:
        return any(change.path == path for change in self.changes)


class GitHistory:
    """Reads the revision DAG of a working tree's checked-out branch."""

    def __init__(self, repo_root: Path):
        self.repo_root = Path(repo_root)

    def _git(self, *args: str) -> str:
        try:
            completed = subprocess.run(
                ["git", *args],
                cwd=self.repo_root,
                capture_output=True,
                text=True,
                check=True,
            )
        except (OSError, subprocess.CalledProcessError) as exc:
            detail = getattr(exc, "stderr", "") or str(exc)
            raise HistoryUnavailable(f"git {' '.join(args)}: {detail.strip()}") from exc
        return completed.stdout

    def revisions(self) -> list[Revision]:
        """All revisions on HEAD, oldest first, renames shown as delete+add."""
        out = self._git("rev-list", "--reverse", "HEAD")
        revs = []
        for rev_id in out.split():
            message = self._git("log", "-1", "--format=%B", rev_id)
            changes = []
            diff = self._git(
                "diff-tree", "--root", "--no-commit-id", "--no-renames",
                "--name-status", "-r", rev_id,
            )
            for line in diff.splitlines():
                if not line.strip():
                    continue
                op, _, path = line.partition("\t")
                changes.append(PathChange(op=op.strip()[:1], path=path.strip()))
            revs.append(Revision(rev_id=rev_id, message=message, changes=changes))
        return revs


def commit_all(repo_root: Path, message: str) -> str:
    """Test and harness helper: stage everything and commit."""
    subprocess.run(["git", "add", "-A"], cwd=repo_root, check=True, capture_output=True)
    subprocess.run(
        ["git", "commit", "-q", "--allow-empty", "-m", message],
        cwd=repo_root,
        check=True,
        capture_output=True,
    )
    out = subprocess.run(
        ["git", "rev-parse", "HEAD"],
        cwd=repo_root,
        check=True,
        capture_output=True,
        text=True,
    )
    return out.stdout.strip()


def init_git(repo_root: Path) -> None:
    repo_root = Path(repo_root)
    subprocess.run(["git", "init", "-q"], cwd=repo_root, check=True, capture_output=True)
    subprocess.run(
        ["git", "config", "user.email", "controller@localhost"],
        cwd=repo_root,
        check=True,
    )
    subprocess.run(
        ["git", "config", "user.name", "controller"], cwd=repo_root, check=True
    )
