"""Independent enforcement of the four safety invariants, plus package checks.

Nothing here trusts runtime objects: every verifier reassembles its view
from files and version-control history, so it can audit a repository
produced by any writer, including a broken one. Verdicts are pass, fail
(with every violation listed), or indeterminate when history is
unreadable.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from . import layout, schemas, yamlio
from .errors import SchemaError, UsageError
from .fsops import STATE_FILE_NAMES, match_tree, sha256_file
from .gates import effective_decisions, evaluate_gate
from .githist import GitHistory, HistoryUnavailable
from .ledger import validate_chain
from .model import (
    EvidenceBase,
    GateOutcome,
    InvariantKind,
    InvariantReport,
    PackageCheckResult,
    Verdict,
    VersionState,
    ADMITTED_STATUSES,
)

AUTHORIZATION_TRAILER = "Authorized-By:"

_DIRECTION_REL = f"{layout.RESEARCH_ROOT}/{layout.DIRECTION_FILE}"
_VERSION_DIR_RE = re.compile(rf"^{layout.RESEARCH_ROOT}/V[^/]+/")


def audit_state(repo_root: Path, version_id: str) -> VersionState:
    """Assemble a version's state directly from files, tolerating gaps.

    Unlike the runtime loader this performs no cross-validation and no
    direction-digest enforcement; the verifiers judge those themselves.
    """
    repo_root = Path(repo_root)

    def read_or(path: Path, parser, default):
        if not path.is_file():
            return default
        return parser(path.read_bytes(), layout.rel(repo_root, path))

    header = schemas.parse_status(
        layout.status_path(repo_root, version_id).read_bytes(),
        layout.rel(repo_root, layout.status_path(repo_root, version_id)),
    )
    spine = read_or(
        layout.spine_path(repo_root, version_id), schemas.parse_spine, schemas.parse_spine(b"")
    )
    tasks = read_or(layout.tasks_path(repo_root, version_id), schemas.parse_tasks, [])
    gates = read_or(layout.gates_path(repo_root, version_id), schemas.parse_gate_file, [])
    evidence = read_or(
        layout.evidence_log_path(repo_root, version_id),
        schemas.parse_evidence_log,
        EvidenceBase(),
    )
    ledger = read_or(
        layout.ledger_path(repo_root), schemas.parse_ledger, schemas.parse_ledger(b"claims: []\n")
    )
    return VersionState(
        version_id=header.version,
        status=header.status,
        epoch_role=header.epoch_role,
        spine=spine,
        contracts={t.task_id: t for t in tasks},
        evidence=evidence,
        ledger=ledger,
        blockers=header.blockers,
        gates={g.gate_id: g for g in gates},
        runnable_rqs=header.runnable_rqs,
        blocked_rqs=header.blocked_rqs,
        completed_rqs=header.completed_rqs,
        notes=header.notes,
    )


def version_chain(repo_root: Path) -> list[str]:
    """Version ids under the research root, ordered by numeric suffix."""
    root = layout.research_root(repo_root)
    if not root.is_dir():
        return []
    ids = []
    for child in root.iterdir():
        if child.is_dir() and re.fullmatch(r"V\d+", child.name):
            ids.append(child.name)
    return sorted(ids, key=lambda v: int(v[1:]))


# ---------------------------------------------------------------------------
# Invariant 1: direction lock
# ---------------------------------------------------------------------------


def verify_direction_lock(history, direction_path: str = _DIRECTION_REL) -> InvariantReport:
    """Every revision touching the direction carries the authorization trailer."""
    try:
        revisions = history.revisions()
    except HistoryUnavailable as exc:
        return InvariantReport(
            invariant=InvariantKind.DIRECTION_LOCK,
            verdict=Verdict.INDETERMINATE,
            violations=[("history", str(exc))],
        )
    violations = []
    for rev in revisions:
        if rev.touched(direction_path) and AUTHORIZATION_TRAILER not in rev.message:
            violations.append(
                (rev.rev_id, f"direction edited without {AUTHORIZATION_TRAILER} trailer")
            )
    return InvariantReport(
        invariant=InvariantKind.DIRECTION_LOCK,
        verdict=Verdict.FAIL if violations else Verdict.PASS,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# Invariant 2: evidence monotonicity
# ---------------------------------------------------------------------------


def _is_evidence_path(path: str, evidence_roots) -> bool:
    if any(path.startswith(root) for root in evidence_roots):
        return True
    return bool(_VERSION_DIR_RE.match(path))


def verify_monotonicity(history, evidence_roots=("runs/",)) -> InvariantReport:
    """Evidence files may be added, never rewritten or deleted.

    Control-plane state files (STATUS, TASKS, the ledger, ...) are runtime
    state, not evidence; they are updated in place by design and are
    exempt. Everything else under runs/ and the version directories is
    append-only; superseding happens through new objects, not edits.
    """
    try:
        revisions = history.revisions()
    except HistoryUnavailable as exc:
        return InvariantReport(
            invariant=InvariantKind.EVIDENCE_MONOTONICITY,
            verdict=Verdict.INDETERMINATE,
            violations=[("history", str(exc))],
        )
    violations = []
    for rev in revisions:
        for change in rev.changes:
            if change.op not in ("M", "D"):
                continue
            if not _is_evidence_path(change.path, evidence_roots):
                continue
            if change.path.rsplit("/", 1)[-1] in STATE_FILE_NAMES:
                continue
            verb = "rewritten" if change.op == "M" else "deleted"
            violations.append((rev.rev_id, f"{change.path} {verb}"))
    return InvariantReport(
        invariant=InvariantKind.EVIDENCE_MONOTONICITY,
        verdict=Verdict.FAIL if violations else Verdict.PASS,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# Invariant 3: gate-bounded admission
# ---------------------------------------------------------------------------


def verify_admission(repo_root: Path, version_id: str | None = None) -> InvariantReport:
    """Admitted claims must hold a resolvable, re-checkable gate chain.

    Mechanical decisions are re-evaluated against the current tree and
    must agree with what was recorded; a drifted tree fails with detail.
    Human decisions stand as recorded accountability.
    """
    repo_root = Path(repo_root)
    if version_id is None:
        version_id = layout.read_current(repo_root)
    try:
        state = audit_state(repo_root, version_id)
    except (SchemaError, OSError) as exc:
        return InvariantReport(
            invariant=InvariantKind.GATE_BOUNDED_ADMISSION,
            verdict=Verdict.FAIL,
            violations=[("state", str(exc))],
        )
    violations = []
    for claim in state.ledger.claims:
        if claim.status not in ADMITTED_STATUSES:
            continue
        _, chain_violations = validate_chain(state.ledger, claim.claim_id, state)
        for violation in chain_violations:
            violations.append((claim.claim_id, violation))
        for requirement in claim.required_evidence:
            gate = state.gates.get(requirement.gate_id)
            if gate is None:
                continue
            for decision in effective_decisions(gate):
                if decision.decided_by.startswith("human"):
                    continue
                recomputed = evaluate_gate(gate, repo_root, evidence=state.evidence)
                if recomputed.outcome is not decision.outcome:
                    violations.append(
                        (
                            claim.claim_id,
                            f"gate {gate.gate_id} recorded {decision.outcome.value} but "
                            f"re-evaluates {recomputed.outcome.value} "
                            f"(inputs {decision.inputs_digest[:12]} -> "
                            f"{recomputed.inputs_digest[:12]})",
                        )
                    )
    return InvariantReport(
        invariant=InvariantKind.GATE_BOUNDED_ADMISSION,
        verdict=Verdict.FAIL if violations else Verdict.PASS,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# Invariant 4: blocker conservation
# ---------------------------------------------------------------------------


def verify_blocker_conservation(repo_root: Path, versions=None) -> InvariantReport:
    """Every blocker survives: into its version's closeout and, unless
    resolved with an audit note, into the successor's blocker set."""
    repo_root = Path(repo_root)
    if versions is None:
        versions = version_chain(repo_root)
    violations = []
    for i, version_id in enumerate(versions):
        try:
            state = audit_state(repo_root, version_id)
        except (SchemaError, OSError) as exc:
            violations.append((version_id, f"state unreadable: {exc}"))
            continue
        closeout_path = layout.closeout_yaml_path(repo_root, version_id)
        closeout = None
        if closeout_path.is_file():
            closeout = schemas.parse_closeout(
                closeout_path.read_bytes(), layout.rel(repo_root, closeout_path)
            )
        successor = versions[i + 1] if i + 1 < len(versions) else None
        successor_blockers: set[str] = set()
        if successor is not None:
            try:
                successor_blockers = {
                    b.blocker_id for b in audit_state(repo_root, successor).blockers
                }
            except (SchemaError, OSError) as exc:
                violations.append((successor, f"state unreadable: {exc}"))

        for blocker in state.blockers:
            if blocker.resolution is not None:
                continue  # resolved with an audit note: conservation satisfied
            if closeout is not None:
                in_closeout = any(
                    b.blocker_id == blocker.blocker_id
                    for b in closeout.unresolved_blockers
                )
                if not in_closeout:
                    violations.append(
                        (blocker.blocker_id, f"absent from {version_id} closeout")
                    )
                if successor is not None and blocker.blocker_id not in successor_blockers:
                    violations.append(
                        (
                            blocker.blocker_id,
                            f"unresolved in {version_id} but missing from {successor}",
                        )
                    )
    return InvariantReport(
        invariant=InvariantKind.BLOCKER_CONSERVATION,
        verdict=Verdict.FAIL if violations else Verdict.PASS,
        violations=violations,
    )


def verify_all(repo_root: Path, history=None) -> list[InvariantReport]:
    repo_root = Path(repo_root)
    if history is None:
        history = GitHistory(repo_root)
    return [
        verify_direction_lock(history),
        verify_monotonicity(history),
        verify_admission(repo_root),
        verify_blocker_conservation(repo_root),
    ]


# ---------------------------------------------------------------------------
# Package verifier
# ---------------------------------------------------------------------------

_KNOWN_CATEGORIES = ("checksums", "state", "claim_ledger_binding", "manifests")


def load_package_manifest(manifest_path: Path) -> dict:
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise UsageError(f"package manifest unreadable: {manifest_path}")
    doc = yamlio.load_mapping(manifest_path.read_bytes(), str(manifest_path))
    files = doc.get("files", []) or []
    if not isinstance(files, list):
        raise UsageError("package manifest 'files' must be a list")
    categories = doc.get("categories", list(_KNOWN_CATEGORIES)) or []
    return {"files": files, "categories": categories}


def _check_checksums(package_root: Path, files: list) -> PackageCheckResult:
    result = PackageCheckResult(category="checksums", checks_run=0, checks_passed=0)
    if not files:
        result.warnings.append("empty manifest: zero checksum checks")
        return result
    for entry in files:
        result.checks_run += 1
        path = entry.get("path", "")
        expected = entry.get("sha256", "")
        target = package_root / path
        if not target.is_file():
            result.failures.append(f"{path}: missing")
            continue
        actual = sha256_file(target)
        if actual != expected:
            result.failures.append(f"{path}: digest {actual} != {expected}")
            continue
        result.checks_passed += 1
    return result


def _check_state(package_root: Path) -> PackageCheckResult:
    result = PackageCheckResult(category="state", checks_run=0, checks_passed=0)
    current = layout.current_path(package_root)
    result.checks_run += 1
    if current.is_file() and current.read_text(encoding="utf-8").strip():
        result.checks_passed += 1
    else:
        result.failures.append("CURRENT pointer missing or empty")
    for version_id in version_chain(package_root):
        parsers = [
            (layout.status_path(package_root, version_id), schemas.parse_status),
            (layout.spine_path(package_root, version_id), schemas.parse_spine),
            (layout.tasks_path(package_root, version_id), schemas.parse_tasks),
            (layout.gates_path(package_root, version_id), schemas.parse_gate_file),
            (layout.evidence_log_path(package_root, version_id), schemas.parse_evidence_log),
        ]
        for path, parser in parsers:
            if not path.is_file():
                continue
            result.checks_run += 1
            try:
                parser(path.read_bytes(), layout.rel(package_root, path))
                result.checks_passed += 1
            except SchemaError as exc:
                result.failures.append(f"{layout.rel(package_root, path)}: {exc}")
    return result


def _check_ledger_binding(package_root: Path) -> PackageCheckResult:
    result = PackageCheckResult(
        category="claim_ledger_binding", checks_run=0, checks_passed=0
    )
    ledger_file = layout.ledger_path(package_root)
    result.checks_run += 1
    if not ledger_file.is_file():
        result.failures.append("claim ledger missing")
        return result
    try:
        ledger = schemas.parse_ledger(
            ledger_file.read_bytes(), layout.rel(package_root, ledger_file)
        )
        result.checks_passed += 1
    except SchemaError as exc:
        result.failures.append(str(exc))
        return result
    for claim in ledger.claims:
        if claim.status in ADMITTED_STATUSES:
            result.checks_run += 1
            if claim.required_evidence and all(r.gate_id for r in claim.required_evidence):
                result.checks_passed += 1
            else:
                result.failures.append(
                    f"{claim.claim_id}: admitted without a gate-backed evidence contract"
                )
    if ledger.paper_binding.allowed:
        for cid in ledger.paper_binding.admitted_claims:
            result.checks_run += 1
            claim = ledger.by_id(cid)
            if claim is not None and claim.status in ADMITTED_STATUSES:
                result.checks_passed += 1
            else:
                result.failures.append(f"paper binding lists non-admitted claim {cid}")
    return result


def _check_manifests(package_root: Path) -> PackageCheckResult:
    result = PackageCheckResult(category="manifests", checks_run=0, checks_passed=0)
    manifest_files = match_tree(package_root, "runs/**/manifest.json")
    if not manifest_files:
        result.warnings.append("no run manifests present")
        return result
    for rel in manifest_files:
        result.checks_run += 1
        try:
            json.loads((package_root / rel).read_text(encoding="utf-8"))
            result.checks_passed += 1
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            result.failures.append(f"{rel}: {exc}")
    return result


def verify_package(package_root: Path, manifest_path: Path) -> list[PackageCheckResult]:
    """Run every category the manifest asks for; one result per category."""
    package_root = Path(package_root)
    manifest = load_package_manifest(manifest_path)
    results = []
    for category in manifest["categories"]:
        if category == "checksums":
            results.append(_check_checksums(package_root, manifest["files"]))
        elif category == "state":
            results.append(_check_state(package_root))
        elif category == "claim_ledger_binding":
            results.append(_check_ledger_binding(package_root))
        elif category == "manifests":
            results.append(_check_manifests(package_root))
        else:
            results.append(
                PackageCheckResult(
                    category=category,
                    checks_run=0,
                    checks_passed=0,
                    warnings=[f"unknown category {category}: no checks defined"],
                )
            )
    return results
