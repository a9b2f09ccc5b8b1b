"""File-system primitives: hashing, path-glob matching, atomic writes, locking.

All paths handled here are repo-relative POSIX strings unless a function
says otherwise. The glob dialect is deliberately small: ``*`` matches within
one path segment, ``**`` matches across segments, and there is no brace
expansion. A pattern with a trailing ``/`` matches directories only; a
pattern without one matches files and directories alike.
"""

from __future__ import annotations

import fcntl
import hashlib
import os
import re
from contextlib import contextmanager
from pathlib import Path

from .errors import LockError

# Control-plane files the runtime itself rewrites; everything else under the
# evidence roots is append-only.
STATE_FILE_NAMES = frozenset(
    {
        "STATUS.yaml",
        "RESEARCH_SPINE.yaml",
        "RQ_CALIBRATION.yaml",
        "TASKS.yaml",
        "EVIDENCE_GATE.yaml",
        "EVIDENCE_LOG.yaml",
        "PAPER_CLAIM_LEDGER.yaml",
        "CURRENT",
    }
)

LOCK_FILE_NAME = ".egret.lock"
STAGING_DIR_NAME = ".egret-staging"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def digest_pairs(pairs) -> str:
    """SHA-256 over a sorted list of (path, digest) pairs.

    Canonical encoding: one ``path NUL digest NL`` record per pair, sorted
    by path, so the digest is independent of discovery order.
    """
    h = hashlib.sha256()
    for path, digest in sorted(pairs):
        h.update(path.encode("utf-8"))
        h.update(b"\x00")
        h.update(digest.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def compile_glob(pattern: str) -> tuple[re.Pattern, bool]:
    """Compile the restricted glob dialect to (regex over POSIX paths, dir_only)."""
    dir_only = pattern.endswith("/")
    pattern = pattern.rstrip("/")
    parts = pattern.split("/")
    out = []
    for i, part in enumerate(parts):
        if part == "**":
            # zero or more whole segments; carries its own trailing separator
            if i == len(parts) - 1:
                out.append(r"(?:.+)?")
            else:
                out.append(r"(?:[^/]+/)*")
            continue
        seg = "".join(
            r"[^/]*" if ch == "*" else re.escape(ch) for ch in part
        )
        out.append(seg)
        if i != len(parts) - 1:
            out.append("/")
    regex = "".join(out)
    return re.compile(rf"^{regex}$"), dir_only


def glob_match(pattern: str, rel_path: str, is_dir: bool = False) -> bool:
    regex, dir_only = compile_glob(pattern)
    if dir_only and not is_dir:
        return False
    return regex.match(rel_path) is not None


def iter_repo_files(repo_root: Path, skip_state_files: bool = False):
    """Yield (rel_posix_path, absolute Path) for every regular file.

    Skips ``.git``, the staging area, and the lock file. With
    ``skip_state_files`` the runtime's own control-plane files are
    excluded, which is what worker-write confinement wants.
    """
    repo_root = Path(repo_root)
    for dirpath, dirnames, filenames in os.walk(repo_root):
        dirnames[:] = sorted(
            d for d in dirnames if d not in (".git", STAGING_DIR_NAME)
        )
        for name in sorted(filenames):
            if name == LOCK_FILE_NAME:
                continue
            if skip_state_files and name in STATE_FILE_NAMES:
                continue
            abs_path = Path(dirpath) / name
            rel = abs_path.relative_to(repo_root).as_posix()
            yield rel, abs_path


def snapshot_tree(repo_root: Path, skip_state_files: bool = False) -> dict:
    """Map rel path -> content digest for the whole working tree."""
    return {
        rel: sha256_file(abs_path)
        for rel, abs_path in iter_repo_files(repo_root, skip_state_files)
    }


def stat_tree(repo_root: Path, skip_state_files: bool = False) -> dict:
    """Map rel path -> (size, mtime_ns); cheap change candidate detection."""
    out = {}
    for rel, abs_path in iter_repo_files(repo_root, skip_state_files):
        st = abs_path.stat()
        out[rel] = (st.st_size, st.st_mtime_ns)
    return out


def match_tree(repo_root: Path, pattern: str) -> list[str]:
    """All paths (files and directories) under repo_root matching pattern.

    Directories are reported with their plain relative path; a match on a
    directory satisfies existence checks.
    """
    repo_root = Path(repo_root)
    regex, dir_only = compile_glob(pattern)
    hits = []
    for dirpath, dirnames, filenames in os.walk(repo_root):
        dirnames[:] = sorted(
            d for d in dirnames if d not in (".git", STAGING_DIR_NAME)
        )
        for d in dirnames:
            rel = (Path(dirpath) / d).relative_to(repo_root).as_posix()
            if regex.match(rel):
                hits.append(rel)
        if dir_only:
            continue
        for name in sorted(filenames):
            if name == LOCK_FILE_NAME:
                continue
            rel = (Path(dirpath) / name).relative_to(repo_root).as_posix()
            if regex.match(rel):
                hits.append(rel)
    return sorted(hits)


def write_file_atomic(path: Path, data: bytes) -> None:
    """Write one file via a temp sibling + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def commit_files(repo_root: Path, files: dict) -> None:
    """Persist a batch of files: stage everything, then rename into place.

    ``files`` maps repo-relative POSIX paths to bytes. Staging all content
    before the first rename means a crash mid-batch leaves either the old
    files or a staging directory to sweep, never a half-written state file.
    """
    repo_root = Path(repo_root)
    staging = repo_root / STAGING_DIR_NAME
    staged = []
    for rel, data in sorted(files.items()):
        final_path = repo_root / rel
        try:
            st = final_path.stat()
            # unchanged files need no replace; sizes differ far more often
            # than same-size contents, so stat first
            if st.st_size == len(data) and final_path.read_bytes() == data:
                continue
        except OSError:
            pass
        stage_path = staging / rel
        stage_path.parent.mkdir(parents=True, exist_ok=True)
        with open(stage_path, "wb") as fh:
            fh.write(data)
        staged.append((stage_path, final_path))
    for stage_path, final_path in staged:
        final_path.parent.mkdir(parents=True, exist_ok=True)
        os.replace(stage_path, final_path)
    # best-effort sweep of the now-empty staging tree
    for dirpath, dirnames, filenames in os.walk(staging, topdown=False):
        if not dirnames and not filenames:
            try:
                os.rmdir(dirpath)
            except OSError:
                pass


@contextmanager
def repo_write_lock(repo_root: Path, timeout: float = 10.0):
    """Advisory single-writer lock at the repo root.

    flock-based, so the lock dies with the process. Readers do not take it.
    """
    repo_root = Path(repo_root)
    repo_root.mkdir(parents=True, exist_ok=True)
    lock_path = repo_root / LOCK_FILE_NAME
    fh = open(lock_path, "a+")
    try:
        try:
            fcntl.flock(fh.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError as exc:
            raise LockError(
                f"repository is locked by another writer: {lock_path}"
            ) from exc
        yield
    finally:
        try:
            fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
        finally:
            fh.close()
