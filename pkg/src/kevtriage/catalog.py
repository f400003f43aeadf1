"""Catalog ingestion: KEVC feed snapshots, CVE records, CVSS vectors.

The feed parser is tolerant by design: the catalog grows continuously
and a single malformed row must not block triage, so bad entries are
skipped with a recorded diagnostic and soft invariant violations ride
along as warnings on the entry itself.  CVSS base scores are read from
record metadata, never recomputed from metrics.
"""

import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import (
    MalformedFeedError,
    MissingMandatoryMetricError,
    UnknownVersionPrefixError,
)

logger = logging.getLogger(__name__)

CVE_ID_PATTERN = re.compile(r"^CVE-\d{4}-\d{4,}$")
CWE_ID_PATTERN = re.compile(r"^CWE-\d+$")


class RansomwareUse(str, Enum):
    KNOWN = "known"
    UNKNOWN = "unknown"


class CvssVersion(str, Enum):
    V2 = "2.0"
    V30 = "3.0"
    V31 = "3.1"
    V40 = "4.0"


class AttackVector(str, Enum):
    NETWORK = "network"
    ADJACENT = "adjacent"
    LOCAL = "local"
    PHYSICAL = "physical"


class AttackComplexity(str, Enum):
    LOW = "low"
    HIGH = "high"


class PrivilegesRequired(str, Enum):
    NONE = "none"
    LOW = "low"
    HIGH = "high"


class UserInteraction(str, Enum):
    NONE = "none"
    REQUIRED = "required"


class UiRequired(str, Enum):
    """Tri-state interaction flag on enriched entries."""

    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class KevcEntry:
    """One catalog row; `warnings` holds soft invariant violations."""

    cve_id: str
    vendor_project: str
    product: str
    vulnerability_name: str
    date_added: date
    short_description: str
    required_action: str
    due_date: date
    known_ransomware_use: RansomwareUse
    notes: str = ""
    cwe_ids: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class KevcFeed:
    """Parsed snapshot: entries in feed order plus collected diagnostics."""

    title: str
    catalog_version: str
    date_released: str
    declared_count: int | None
    entries: tuple[KevcEntry, ...]
    skipped: tuple[str, ...]
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class CvssVector:
    version: CvssVersion
    attack_vector: AttackVector
    attack_complexity: AttackComplexity
    privileges_required: PrivilegesRequired
    user_interaction: UserInteraction
    raw: str
    base_score: float | None = None

    def __post_init__(self):
        if self.base_score is not None and not 0.0 <= self.base_score <= 10.0:
            raise ValueError(f"base_score out of range: {self.base_score}")


@dataclass(frozen=True)
class CveRecord:
    cve_id: str
    description: str
    cvss: CvssVector | None
    references: tuple[str, ...]
    cwe_ids: tuple[str, ...]
    published: date | None


@dataclass(frozen=True)
class EnrichedEntry:
    kevc: KevcEntry
    record: CveRecord | None
    user_interaction_required: UiRequired


# --- KEVC feed ----------------------------------------------------------

_MANDATORY_FEED_FIELDS = (
    "cveID",
    "vendorProject",
    "product",
    "vulnerabilityName",
    "dateAdded",
    "shortDescription",
    "requiredAction",
    "dueDate",
)


def _parse_date(value: Any) -> date:
    # Time-of-day, when present, is discarded.
    return date.fromisoformat(str(value).strip()[:10])


def _entry_from_row(row: Mapping[str, Any]) -> KevcEntry:
    for name in _MANDATORY_FEED_FIELDS:
        if name not in row or row[name] in (None, ""):
            raise KeyError(name)
    date_added = _parse_date(row["dateAdded"])
    due_date = _parse_date(row["dueDate"])
    ransomware = (
        RansomwareUse.KNOWN
        if str(row.get("knownRansomwareCampaignUse", "")).strip().lower() == "known"
        else RansomwareUse.UNKNOWN
    )
    cve_id = str(row["cveID"]).strip()
    cwe_ids = tuple(str(c).strip() for c in row.get("cwes", []) or [])
    warnings = []
    if not CVE_ID_PATTERN.match(cve_id):
        warnings.append(f"cve_id does not match expected pattern: {cve_id!r}")
    if due_date < date_added:
        warnings.append(f"due_date {due_date} precedes date_added {date_added}")
    for cwe in cwe_ids:
        if not CWE_ID_PATTERN.match(cwe):
            warnings.append(f"cwe id does not match expected pattern: {cwe!r}")
    return KevcEntry(
        cve_id=cve_id,
        vendor_project=str(row["vendorProject"]).strip(),
        product=str(row["product"]).strip(),
        vulnerability_name=str(row["vulnerabilityName"]).strip(),
        date_added=date_added,
        short_description=str(row["shortDescription"]),
        required_action=str(row["requiredAction"]),
        due_date=due_date,
        known_ransomware_use=ransomware,
        notes=str(row.get("notes", "")),
        cwe_ids=cwe_ids,
        warnings=tuple(warnings),
    )


def parse_kevc_feed(feed: bytes | str | Mapping[str, Any]) -> KevcFeed:
    """Parse a catalog snapshot; bad rows are skipped, never fatal."""
    if isinstance(feed, (bytes, str)):
        try:
            document = json.loads(feed)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise MalformedFeedError(f"feed is not valid JSON: {exc}") from exc
    else:
        document = feed
    if not isinstance(document, dict) or not isinstance(
        document.get("vulnerabilities"), list
    ):
        raise MalformedFeedError("feed lacks a vulnerabilities array")

    entries: list[KevcEntry] = []
    skipped: list[str] = []
    for position, row in enumerate(document["vulnerabilities"]):
        if not isinstance(row, dict):
            skipped.append(f"row {position}: not an object")
            continue
        try:
            entries.append(_entry_from_row(row))
        except KeyError as exc:
            label = row.get("cveID", f"row {position}")
            skipped.append(f"{label}: missing field {exc.args[0]}")
        except (ValueError, TypeError) as exc:
            label = row.get("cveID", f"row {position}")
            skipped.append(f"{label}: {exc}")

    feed_warnings = []
    declared = document.get("count")
    if isinstance(declared, int) and declared != len(entries):
        feed_warnings.append(
            f"feed declares {declared} entries but {len(entries)} parsed"
        )
    for message in skipped:
        logger.warning("skipped catalog row: %s", message)
    for message in feed_warnings:
        logger.warning("%s", message)
    return KevcFeed(
        title=str(document.get("title", "")),
        catalog_version=str(document.get("catalogVersion", "")),
        date_released=str(document.get("dateReleased", "")),
        declared_count=declared if isinstance(declared, int) else None,
        entries=tuple(entries),
        skipped=tuple(skipped),
        warnings=tuple(feed_warnings),
    )


# --- CVSS vectors -------------------------------------------------------

_VERSION_PREFIXES = {
    "CVSS:3.0": CvssVersion.V30,
    "CVSS:3.1": CvssVersion.V31,
    "CVSS:4.0": CvssVersion.V40,
}

_AV_CODES = {
    "N": AttackVector.NETWORK,
    "A": AttackVector.ADJACENT,
    "L": AttackVector.LOCAL,
    "P": AttackVector.PHYSICAL,
}
_AC_CODES = {"L": AttackComplexity.LOW, "H": AttackComplexity.HIGH}
_PR_CODES = {
    "N": PrivilegesRequired.NONE,
    "L": PrivilegesRequired.LOW,
    "H": PrivilegesRequired.HIGH,
}
# v4.0 splits Required into Passive/Active; both demand a user.
_UI_CODES = {
    "N": UserInteraction.NONE,
    "R": UserInteraction.REQUIRED,
    "P": UserInteraction.REQUIRED,
    "A": UserInteraction.REQUIRED,
}

_MANDATORY_METRICS = ("AV", "AC", "PR", "UI")


def parse_cvss_vector(vector_text: str, base_score: float | None = None) -> CvssVector:
    """Extract the modeled metric subset from a v3.x/v4.0 vector string.

    Unrecognized metrics are ignored; v2 strings carry no version prefix
    and are rejected up front.
    """
    text = vector_text.strip()
    if not text:
        raise UnknownVersionPrefixError("empty vector text")
    prefix, _, remainder = text.partition("/")
    version = _VERSION_PREFIXES.get(prefix)
    if version is None:
        raise UnknownVersionPrefixError(f"unsupported vector prefix: {prefix!r}")
    metrics: dict[str, str] = {}
    for piece in remainder.split("/"):
        if not piece:
            continue
        name, sep, code = piece.partition(":")
        if sep and name not in metrics:
            metrics[name] = code
    for name in _MANDATORY_METRICS:
        if name not in metrics:
            raise MissingMandatoryMetricError(name)
    try:
        return CvssVector(
            version=version,
            attack_vector=_AV_CODES[metrics["AV"]],
            attack_complexity=_AC_CODES[metrics["AC"]],
            privileges_required=_PR_CODES[metrics["PR"]],
            user_interaction=_UI_CODES[metrics["UI"]],
            raw=text,
            base_score=base_score,
        )
    except KeyError as exc:
        raise MalformedFeedError(f"unrecognized metric value: {exc.args[0]!r}") from exc


_AV_OUT = {v: k for k, v in _AV_CODES.items()}
_AC_OUT = {v: k for k, v in _AC_CODES.items()}
_PR_OUT = {v: k for k, v in _PR_CODES.items()}
_UI_OUT = {UserInteraction.NONE: "N", UserInteraction.REQUIRED: "R"}


def serialize_cvss_vector(vector: CvssVector) -> str:
    """Canonical form of the modeled subset; parse(serialize(v)) == v."""
    return (
        f"CVSS:{vector.version.value}"
        f"/AV:{_AV_OUT[vector.attack_vector]}"
        f"/AC:{_AC_OUT[vector.attack_complexity]}"
        f"/PR:{_PR_OUT[vector.privileges_required]}"
        f"/UI:{_UI_OUT[vector.user_interaction]}"
    )


# --- CVE records --------------------------------------------------------

_METRIC_KEYS = (
    ("cvssV4_0", CvssVersion.V40),
    ("cvssV3_1", CvssVersion.V31),
    ("cvssV3_0", CvssVersion.V30),
)


def _candidate_vectors(record: Mapping[str, Any]) -> list[tuple[int, int, str, float | None]]:
    """Collect (version rank, container rank, raw, score) candidates."""
    containers = record.get("containers", {})
    sources = [(0, containers.get("cna", {}))]
    for adp in containers.get("adp", []) or []:
        sources.append((1, adp))
    found = []
    for container_rank, container in sources:
        for metric in container.get("metrics", []) or []:
            if not isinstance(metric, dict):
                continue
            for rank, (key, _version) in enumerate(_METRIC_KEYS):
                block = metric.get(key)
                if isinstance(block, dict) and block.get("vectorString"):
                    score = block.get("baseScore")
                    found.append(
                        (
                            rank,
                            container_rank,
                            str(block["vectorString"]),
                            float(score) if isinstance(score, (int, float)) else None,
                        )
                    )
    return found


def parse_cve_record(doc: bytes | str | Mapping[str, Any]) -> CveRecord:
    """Read the subset of a CVE JSON 5.x record this toolkit uses.

    When several vectors are present: newest version wins, then the CNA
    container over ADP, then lexicographic vector text.
    """
    if isinstance(doc, (bytes, str)):
        try:
            record = json.loads(doc)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise MalformedFeedError(f"record is not valid JSON: {exc}") from exc
    else:
        record = doc
    metadata = record.get("cveMetadata", {})
    cve_id = str(metadata.get("cveId", "")).strip()
    if not CVE_ID_PATTERN.match(cve_id):
        raise MalformedFeedError(f"record lacks a usable cveId: {cve_id!r}")
    cna = record.get("containers", {}).get("cna", {})
    description = ""
    for block in cna.get("descriptions", []) or []:
        if isinstance(block, dict) and block.get("lang", "").startswith("en"):
            description = str(block.get("value", ""))
            break
    references = tuple(
        str(ref["url"])
        for ref in cna.get("references", []) or []
        if isinstance(ref, dict) and ref.get("url")
    )
    cwe_ids = []
    for problem in cna.get("problemTypes", []) or []:
        for desc in problem.get("descriptions", []) or []:
            cwe = desc.get("cweId")
            if cwe and CWE_ID_PATTERN.match(str(cwe)) and cwe not in cwe_ids:
                cwe_ids.append(str(cwe))
    published = None
    if metadata.get("datePublished"):
        try:
            published = _parse_date(metadata["datePublished"])
        except ValueError:
            published = None
    cvss = None
    candidates = _candidate_vectors(record)
    if candidates:
        candidates.sort(key=lambda item: (item[0], item[1], item[2]))
        _, _, raw, score = candidates[0]
        try:
            cvss = parse_cvss_vector(raw, base_score=score)
        except (UnknownVersionPrefixError, MissingMandatoryMetricError) as exc:
            logger.warning("%s: unusable vector %r (%s)", cve_id, raw, exc)
    return CveRecord(
        cve_id=cve_id,
        description=description,
        cvss=cvss,
        references=references,
        cwe_ids=tuple(cwe_ids),
        published=published,
    )


def read_cve_records(directory: str | Path) -> dict[str, CveRecord]:
    """Load every *.json record under a directory, keyed by cve_id."""
    records: dict[str, CveRecord] = {}
    for path in sorted(Path(directory).glob("*.json")):
        try:
            record = parse_cve_record(path.read_text(encoding="utf-8"))
        except MalformedFeedError as exc:
            logger.warning("skipping record file %s: %s", path.name, exc)
            continue
        records[record.cve_id] = record
    return records


# --- enrichment ---------------------------------------------------------

def enrich(
    entries: Iterable[KevcEntry], records: Mapping[str, CveRecord]
) -> list[EnrichedEntry]:
    """Join catalog entries with their records; absent data stays Unknown."""
    enriched = []
    for entry in entries:
        record = records.get(entry.cve_id)
        if record is None or record.cvss is None:
            flag = UiRequired.UNKNOWN
        elif record.cvss.user_interaction is UserInteraction.REQUIRED:
            flag = UiRequired.YES
        else:
            flag = UiRequired.NO
        enriched.append(
            EnrichedEntry(kevc=entry, record=record, user_interaction_required=flag)
        )
    return enriched
