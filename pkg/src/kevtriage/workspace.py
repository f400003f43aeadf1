"""File-backed workspace shared by the CLI and the HTTP service.

A workspace is a directory of canonical JSON stage files plus an
append-only, checksummed event log for analyst decisions and labels.
There is no database: the directory is the state, diffable and
portable, and the content hash over it doubles as an optimistic
concurrency token.
"""

import hashlib
import json
import os
import zlib
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Any, Iterator, Mapping

from .advisories import (
    Advisory,
    AdvisoryFormat,
    Remediation,
    RemediationCategory,
    Specificity,
)
from .attack import MappingMethod, MitigationCandidate, Rating, TechniqueMapping
from .catalog import (
    CVE_ID_PATTERN,
    CveRecord,
    EnrichedEntry,
    KevcEntry,
    RansomwareUse,
    UiRequired,
    parse_cvss_vector,
)
from .errors import StageError, StaleVersionError, WorkspaceLockedError

STATE_DIR = "state"
REPORTS_DIR = "reports"
EVENT_LOG = "events.log"
LOCK_FILE = ".lock"

# Stage file name -> producing command, used to phrase StageError hints.
STAGE_PRODUCERS = {
    "provenance": "ingest",
    "catalog": "ingest",
    "records": "ingest",
    "entries": "enrich",
    "advisories": "advisories",
    "mappings": "map",
    "candidates": "map",
    "playbook": "score",
    "gaps": "score",
}

# Stages stored verbatim rather than as canonical JSON.
TEXT_STAGES = {"playbook"}


# --- review decisions ---------------------------------------------------

class DecisionKind(str, Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"
    NEEDS_EDIT = "NeedsEdit"


@dataclass(frozen=True)
class ReviewDecision:
    """An analyst's verdict on one proposed mitigation (or a whole entry)."""

    cve_id: str
    mitigation_id: str | None
    decision: DecisionKind
    note: str
    reviewer_id: str
    decided_at: str

    def __post_init__(self):
        if not CVE_ID_PATTERN.match(self.cve_id):
            raise ValueError(f"malformed cve_id: {self.cve_id!r}")
        if self.decision is DecisionKind.NEEDS_EDIT and not self.note.strip():
            raise ValueError("NeedsEdit decisions require a non-empty note")
        if not self.reviewer_id.strip():
            raise ValueError("reviewer_id must be non-empty")
        if not self.decided_at.strip():
            raise ValueError("decided_at must be non-empty")

    def to_dict(self) -> dict:
        return {
            "cve_id": self.cve_id,
            "mitigation_id": self.mitigation_id,
            "decision": self.decision.value,
            "note": self.note,
            "reviewer_id": self.reviewer_id,
            "decided_at": self.decided_at,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ReviewDecision":
        return cls(
            cve_id=str(data.get("cve_id", "")),
            mitigation_id=(
                str(data["mitigation_id"]) if data.get("mitigation_id") else None
            ),
            decision=DecisionKind(str(data.get("decision", ""))),
            note=str(data.get("note", "")),
            reviewer_id=str(data.get("reviewer_id", "")),
            decided_at=str(data.get("decided_at", "")),
        )


# --- serialization of domain objects ------------------------------------

def entry_to_dict(entry: KevcEntry) -> dict:
    return {
        "cve_id": entry.cve_id,
        "vendor_project": entry.vendor_project,
        "product": entry.product,
        "vulnerability_name": entry.vulnerability_name,
        "date_added": entry.date_added.isoformat(),
        "short_description": entry.short_description,
        "required_action": entry.required_action,
        "due_date": entry.due_date.isoformat(),
        "known_ransomware_use": entry.known_ransomware_use.value,
        "notes": entry.notes,
        "cwe_ids": list(entry.cwe_ids),
        "warnings": list(entry.warnings),
    }


def entry_from_dict(data: Mapping) -> KevcEntry:
    return KevcEntry(
        cve_id=data["cve_id"],
        vendor_project=data["vendor_project"],
        product=data["product"],
        vulnerability_name=data["vulnerability_name"],
        date_added=date.fromisoformat(data["date_added"]),
        short_description=data["short_description"],
        required_action=data["required_action"],
        due_date=date.fromisoformat(data["due_date"]),
        known_ransomware_use=RansomwareUse(data["known_ransomware_use"]),
        notes=data.get("notes", ""),
        cwe_ids=tuple(data.get("cwe_ids", ())),
        warnings=tuple(data.get("warnings", ())),
    )


def record_to_dict(record: CveRecord) -> dict:
    return {
        "cve_id": record.cve_id,
        "description": record.description,
        "cvss": (
            {"vector": record.cvss.raw, "base_score": record.cvss.base_score}
            if record.cvss
            else None
        ),
        "references": list(record.references),
        "cwe_ids": list(record.cwe_ids),
        "published": record.published.isoformat() if record.published else None,
    }


def record_from_dict(data: Mapping) -> CveRecord:
    cvss = None
    if data.get("cvss"):
        cvss = parse_cvss_vector(data["cvss"]["vector"], data["cvss"].get("base_score"))
    return CveRecord(
        cve_id=data["cve_id"],
        description=data.get("description", ""),
        cvss=cvss,
        references=tuple(data.get("references", ())),
        cwe_ids=tuple(data.get("cwe_ids", ())),
        published=(
            date.fromisoformat(data["published"]) if data.get("published") else None
        ),
    )


def advisory_to_dict(advisory: Advisory) -> dict:
    return {
        "advisory_id": advisory.advisory_id,
        "vendor": advisory.vendor,
        "format": advisory.format.value,
        "source_url": advisory.source_url,
        "last_updated": (
            advisory.last_updated.isoformat() if advisory.last_updated else None
        ),
        "remediations": [
            {
                "category": r.category.value,
                "details": r.details,
                "applies_to_products": list(r.applies_to_products),
                "specificity": r.specificity.value,
                "url": r.url,
            }
            for r in advisory.remediations
        ],
        "covered_cves": list(advisory.covered_cves),
    }


def advisory_from_dict(data: Mapping) -> Advisory:
    return Advisory(
        advisory_id=data.get("advisory_id", ""),
        vendor=data.get("vendor", ""),
        format=AdvisoryFormat(data["format"]),
        source_url=data.get("source_url", ""),
        last_updated=(
            date.fromisoformat(data["last_updated"])
            if data.get("last_updated")
            else None
        ),
        remediations=tuple(
            Remediation(
                category=RemediationCategory(r["category"]),
                details=r.get("details", ""),
                applies_to_products=tuple(r.get("applies_to_products", ())),
                specificity=Specificity(r["specificity"]),
                url=r.get("url"),
            )
            for r in data.get("remediations", ())
        ),
        product_statuses=(),
        covered_cves=tuple(data.get("covered_cves", ())),
    )


def mapping_to_dict(mapping: TechniqueMapping) -> dict:
    return {
        "cve_id": mapping.cve_id,
        "technique_id": mapping.technique_id,
        "method": mapping.method.value,
        "evidence": list(mapping.evidence),
        "confidence": mapping.confidence,
    }


def mapping_from_dict(data: Mapping) -> TechniqueMapping:
    return TechniqueMapping(
        cve_id=data["cve_id"],
        technique_id=data["technique_id"],
        method=MappingMethod(data["method"]),
        evidence=tuple(data.get("evidence", ())),
        confidence=data["confidence"],
    )


def candidate_to_dict(candidate: MitigationCandidate) -> dict:
    return {
        "cve_id": candidate.cve_id,
        "mitigation_id": candidate.mitigation_id,
        "via_techniques": list(candidate.via_techniques),
        "effectiveness": (
            candidate.effectiveness.value if candidate.effectiveness else None
        ),
        "ot_steps": list(candidate.ot_steps),
        "rationale": candidate.rationale,
    }


def candidate_from_dict(data: Mapping) -> MitigationCandidate:
    return MitigationCandidate(
        cve_id=data["cve_id"],
        mitigation_id=data["mitigation_id"],
        via_techniques=tuple(data.get("via_techniques", ())),
        effectiveness=(
            Rating(data["effectiveness"]) if data.get("effectiveness") else None
        ),
        ot_steps=tuple(data.get("ot_steps", ())),
        rationale=data.get("rationale", ""),
    )


def enriched_from_parts(
    entry_row: Mapping, record_row: Mapping | None, ui: str
) -> EnrichedEntry:
    return EnrichedEntry(
        kevc=entry_from_dict(entry_row),
        record=record_from_dict(record_row) if record_row else None,
        user_interaction_required=UiRequired(ui),
    )


# --- the store ----------------------------------------------------------

def _canonical_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _event_crc(seq: int, kind: str, payload: Mapping) -> int:
    body = json.dumps(
        {"seq": seq, "kind": kind, "payload": payload},
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return zlib.crc32(body.encode("utf-8"))


@dataclass
class _LogState:
    events: list[dict] = field(default_factory=list)
    good_bytes: int = 0
    next_seq: int = 1


class WorkspaceStore:
    """One triage workspace on disk.

    Stage files are written atomically (temp file + rename) in a
    canonical JSON form so identical state produces identical bytes.
    Decisions and labels go through the event log: appended and flushed
    to disk before the call returns, so an acknowledged write survives
    a crash.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.state_dir = self.root / STATE_DIR
        self.log_path = self.root / EVENT_LOG
        self._log: _LogState | None = None

    # -- locking ---------------------------------------------------------

    def acquire_lock(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / LOCK_FILE
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise WorkspaceLockedError(
                f"workspace {self.root} is locked by another process "
                f"(remove {path} if that process is gone)"
            )
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))

    def release_lock(self) -> None:
        try:
            (self.root / LOCK_FILE).unlink()
        except FileNotFoundError:
            pass

    def __enter__(self) -> "WorkspaceStore":
        self.acquire_lock()
        return self

    def __exit__(self, *exc_info) -> None:
        self.release_lock()

    # -- stage files -----------------------------------------------------

    def _stage_path(self, stage: str) -> Path:
        suffix = "txt" if stage in TEXT_STAGES else "json"
        return self.state_dir / f"{stage}.{suffix}"

    def has_stage(self, stage: str) -> bool:
        return self._stage_path(stage).exists()

    def require_stage(self, stage: str) -> None:
        if not self.has_stage(stage):
            producer = STAGE_PRODUCERS.get(stage)
            hint = f"run the {producer} command first" if producer else ""
            raise StageError(stage, hint)

    def read_stage(self, stage: str) -> Any:
        self.require_stage(stage)
        return json.loads(self._stage_path(stage).read_text(encoding="utf-8"))

    def write_stage(self, stage: str, payload: Any) -> None:
        self._write_atomic(self._stage_path(stage), _canonical_json(payload))

    def write_stage_text(self, stage: str, text: str) -> None:
        """For documents whose byte form is already canonical (the playbook)."""
        self._write_atomic(self._stage_path(stage), text)

    def read_stage_text(self, stage: str) -> str:
        self.require_stage(stage)
        return self._stage_path(stage).read_text(encoding="utf-8")

    def reports_dir(self) -> Path:
        path = self.state_dir / REPORTS_DIR
        path.mkdir(parents=True, exist_ok=True)
        return path

    def _write_atomic(self, path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)

    # -- versioning ------------------------------------------------------

    def version(self) -> str:
        """Content hash over state files and the event log."""
        digest = hashlib.sha256()
        if self.state_dir.exists():
            for path in sorted(self.state_dir.rglob("*")):
                if not path.is_file() or path.suffix == ".tmp":
                    continue
                digest.update(str(path.relative_to(self.state_dir)).encode())
                digest.update(b"\x00")
                digest.update(path.read_bytes())
                digest.update(b"\x00")
        digest.update(b"log:")
        log = self._load_log()
        digest.update(str(log.good_bytes).encode())
        for event in log.events:
            digest.update(str(event["crc"]).encode())
            digest.update(b"\x00")
        return digest.hexdigest()[:16]

    def check_version(self, expected: str | None) -> None:
        if expected is None:
            return
        actual = self.version()
        if expected != actual:
            raise StaleVersionError(expected, actual)

    # -- event log -------------------------------------------------------

    def _load_log(self) -> _LogState:
        if self._log is not None:
            return self._log
        state = _LogState()
        if self.log_path.exists():
            raw = self.log_path.read_bytes()
            offset = 0
            while offset < len(raw):
                newline = raw.find(b"\n", offset)
                if newline < 0:
                    break  # partial trailing record from an interrupted write
                line = raw[offset:newline]
                try:
                    event = json.loads(line.decode("utf-8"))
                    seq = int(event["seq"])
                    crc = int(event["crc"])
                    kind = str(event["kind"])
                    payload = event["payload"]
                except (ValueError, KeyError, TypeError, UnicodeDecodeError):
                    break
                if crc != _event_crc(seq, kind, payload) or seq != state.next_seq:
                    break
                state.events.append(
                    {"seq": seq, "kind": kind, "payload": payload, "crc": crc}
                )
                state.next_seq = seq + 1
                offset = newline + 1
                state.good_bytes = offset
        self._log = state
        return state

    def recover_log(self) -> int:
        """Drop any torn tail from the log file; returns surviving events."""
        state = self._load_log()
        if self.log_path.exists():
            actual = self.log_path.stat().st_size
            if actual > state.good_bytes:
                with open(self.log_path, "r+b") as fh:
                    fh.truncate(state.good_bytes)
        return len(state.events)

    def append_event(self, kind: str, payload: Mapping) -> int:
        """Durably append one event; the seq is only returned after fsync."""
        state = self._load_log()
        self.recover_log()
        seq = state.next_seq
        crc = _event_crc(seq, kind, payload)
        line = (
            json.dumps(
                {"seq": seq, "kind": kind, "payload": payload, "crc": crc},
                sort_keys=True,
                ensure_ascii=False,
                separators=(",", ":"),
            )
            + "\n"
        ).encode("utf-8")
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.log_path, "ab") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        state.events.append({"seq": seq, "kind": kind, "payload": payload, "crc": crc})
        state.next_seq = seq + 1
        state.good_bytes += len(line)
        return seq

    def events(self, kind: str | None = None) -> Iterator[dict]:
        for event in self._load_log().events:
            if kind is None or event["kind"] == kind:
                yield event

    def decisions(self) -> list[ReviewDecision]:
        return [
            ReviewDecision.from_dict(e["payload"]) for e in self.events("decision")
        ]

    def labels(self) -> list[dict]:
        return [e["payload"] for e in self.events("label")]

    def record_decision(
        self, decision: ReviewDecision, expected_version: str | None = None
    ) -> int:
        """Validate against current state, then durably log the decision."""
        self.check_version(expected_version)
        known = {row["cve_id"] for row in self.read_stage("entries")}
        if decision.cve_id not in known:
            raise KeyError(decision.cve_id)
        return self.append_event("decision", decision.to_dict())

    def record_labels(
        self, rows: list[Mapping], expected_version: str | None = None
    ) -> list[int]:
        self.check_version(expected_version)
        for row in rows:
            for column in ("item_id", "rater_id", "attribute", "label"):
                value = str(row.get(column, "")).strip()
                if not value:
                    raise ValueError(f"label row missing {column}")
        return [
            self.append_event(
                "label",
                {
                    "item_id": str(row["item_id"]).strip(),
                    "rater_id": str(row["rater_id"]).strip(),
                    "attribute": str(row["attribute"]).strip(),
                    "label": str(row["label"]).strip(),
                },
            )
            for row in rows
        ]
