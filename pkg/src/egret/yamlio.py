"""Strict YAML subset: plain maps, sequences, and scalars only.

State files never use anchors, aliases, or explicit tags, so the loader
rejects them up front instead of letting aliased structure sneak into
round-trips. Dumping is normalized: block style, stable key order is the
caller's responsibility (dicts are emitted in insertion order), LF line
endings, UTF-8.
"""

from __future__ import annotations

import re

import yaml

from .errors import SchemaError

# libyaml bindings when present; an order of magnitude faster and
# behaviorally identical for the subset these files use
_LOADER = getattr(yaml, "CSafeLoader", yaml.SafeLoader)
_DUMPER = getattr(yaml, "CSafeDumper", yaml.SafeDumper)

# anchors, aliases, and tags can only start a node: beginning of line or
# after whitespace / flow indicators. Quoted globs like "runs/*.yaml" never
# match, so most documents skip the event scan entirely; false positives
# merely trigger the scan, which stays authoritative.
_SUBSET_SUSPECT = re.compile(r"(?:^|[\s,\[{])[&*!]\S", re.MULTILINE)


class YamlSubsetError(Exception):
    """Input uses YAML features outside the supported subset."""


def _scan_events(text: str) -> None:
    if _SUBSET_SUSPECT.search(text) is None:
        return
    for event in yaml.parse(text, Loader=_LOADER):
        if isinstance(event, yaml.AliasEvent):
            raise YamlSubsetError("aliases are not supported")
        if getattr(event, "anchor", None):
            raise YamlSubsetError("anchors are not supported")
        if getattr(event, "tag", None):
            raise YamlSubsetError(f"explicit tags are not supported: {event.tag}")


def load_mapping(data: bytes, source: str = "<bytes>") -> dict:
    """Parse one document and require a mapping at the top level.

    Raises SchemaError with a single violation describing the parse
    problem; subset violations and YAML syntax errors both land here so
    callers only handle one error type.
    """
    from .model import SchemaViolation

    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SchemaError(
            [SchemaViolation(source, "", "UTF-8 text", f"decode error: {exc}")]
        ) from exc
    try:
        _scan_events(text)
        doc = yaml.load(text, Loader=_LOADER)
    except (yaml.YAMLError, YamlSubsetError) as exc:
        raise SchemaError(
            [SchemaViolation(source, "", "well-formed YAML subset", str(exc))]
        ) from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise SchemaError(
            [SchemaViolation(source, "", "mapping", type(doc).__name__)]
        )
    return doc


def dump(doc: dict) -> bytes:
    """Normalized serialization: pure function of the document value."""
    text = yaml.dump(
        doc,
        Dumper=_DUMPER,
        sort_keys=False,
        default_flow_style=False,
        allow_unicode=True,
        width=4096,
    )
    return text.encode("utf-8")
