"""Effectiveness and change-risk scoring plus the playbook document format.

Neither score has an established calibration; the formulas here are
deliberate, documented choices and every emitted value carries a
formula_version so later recalibration cannot silently change outputs.

Effectiveness is a rating-weight mean: each mapped technique contributes
the weight of its best-rated mitigation candidate (High 0.9, Medium 0.5,
Low 0.2) or zero when nothing covers it.  Change risk is a weighted sum
of four ordinal factors (safety impact, downtime, vendor support
posture, test complexity), each 0..3, normalized into [0, 1].

An optional value_density multiplier exists on the effectiveness score
for callers that weight assets by consequence; no calibrated definition
exists yet, so the built-in pipeline always leaves it at the neutral
default of 1.0.
"""

import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Callable, Iterable, Mapping

import jsonschema

from .advisories import Remediation, RemediationCategory, Specificity
from .attack import (
    MitigationCandidate,
    Rating,
    TechniqueMapping,
    default_attack_index,
    default_mapping_rules,
    default_rating_rules,
    default_step_templates,
)
from .catalog import EnrichedEntry
from .errors import (
    NothingActionableError,
    SchemaViolationError,
    WeightSumViolationError,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0.0"
EFFECTIVENESS_FORMULA_VERSION = "rating-weight-mean/1"
CHANGE_RISK_FORMULA_VERSION = "weighted-ordinal/1"

RATING_WEIGHTS: Mapping[Rating, float] = {
    Rating.HIGH: 0.9,
    Rating.MEDIUM: 0.5,
    Rating.LOW: 0.2,
}

DEFAULT_CHANGE_RISK_WEIGHTS = (0.25, 0.25, 0.25, 0.25)
WEIGHT_SUM_TOLERANCE = 1e-9

CVE_ID_SHAPE = re.compile(r"^CVE-\d{4}-\d{4,}$")


class PlaybookSource(str, Enum):
    VENDOR_ADVISORY = "vendor_advisory"
    DERIVED_FROM_EXPLOIT_ANALYSIS = "derived_from_exploit_analysis"
    HYBRID = "hybrid"


class EvidenceStatus(str, Enum):
    PENDING = "pending"
    PASSED = "passed"
    FAILED = "failed"


@dataclass(frozen=True)
class ScoreComponent:
    """Per-technique contribution: best covering candidate and its weight."""

    technique_id: str
    mitigation_id: str | None
    weight: float


@dataclass(frozen=True)
class EffectivenessScore:
    value: float
    components: tuple[ScoreComponent, ...]
    formula_version: str

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"effectiveness out of range: {self.value}")
        if self.value > 0 and not self.components:
            raise ValueError("positive effectiveness needs components")


@dataclass(frozen=True)
class ChangeRiskFactors:
    safety_impact: int
    downtime: int
    vendor_support_posture: int
    test_complexity: int

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= 3:
                raise ValueError(f"factor {name} must be an integer in 0..3, got {value!r}")

    def as_dict(self) -> dict[str, int]:
        return {
            "safety_impact": self.safety_impact,
            "downtime": self.downtime,
            "vendor_support_posture": self.vendor_support_posture,
            "test_complexity": self.test_complexity,
        }

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (
            self.safety_impact,
            self.downtime,
            self.vendor_support_posture,
            self.test_complexity,
        )


@dataclass(frozen=True)
class ChangeRiskScore:
    value: float
    factors: ChangeRiskFactors
    weights: tuple[float, float, float, float]

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"change risk out of range: {self.value}")


@dataclass(frozen=True)
class EvidenceSlot:
    description: str
    status: EvidenceStatus = EvidenceStatus.PENDING

    def __post_init__(self):
        if not self.description:
            raise ValueError("evidence slot needs a description")


@dataclass(frozen=True)
class PlaybookEntry:
    cve_id: str
    source: PlaybookSource
    steps: tuple[str, ...]
    effectiveness: EffectivenessScore
    change_risk: ChangeRiskScore
    rationale: str
    validation_evidence: tuple[EvidenceSlot, ...] = ()
    provenance: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not CVE_ID_SHAPE.match(self.cve_id):
            raise ValueError(f"bad cve id: {self.cve_id!r}")
        if not self.steps or any(not step for step in self.steps):
            raise ValueError("steps must be non-empty texts")
        if not self.rationale:
            raise ValueError("rationale must be non-empty")
        if not self.provenance:
            raise ValueError("provenance must list the versions used")


# --- scoring ------------------------------------------------------------

def score_effectiveness(
    candidates: Iterable[MitigationCandidate],
    technique_ids: Iterable[str],
    value_density: float = 1.0,
) -> EffectivenessScore:
    """Mean best-candidate weight over the mapped techniques.

    Techniques no candidate covers contribute zero, so broad technique
    exposure with thin coverage scores low by construction.
    """
    rated = list(candidates)
    for candidate in rated:
        if candidate.effectiveness is None:
            raise ValueError(f"candidate {candidate.mitigation_id} is unrated")
    if value_density < 0:
        raise ValueError("value_density must be non-negative")

    techniques = sorted(set(technique_ids))
    components = []
    for technique_id in techniques:
        best_weight = 0.0
        best_mitigation: str | None = None
        for candidate in rated:
            if technique_id not in candidate.via_techniques:
                continue
            weight = RATING_WEIGHTS[candidate.effectiveness]
            if weight > best_weight or (
                weight == best_weight
                and best_mitigation is not None
                and candidate.mitigation_id < best_mitigation
            ):
                best_weight = weight
                best_mitigation = candidate.mitigation_id
        components.append(ScoreComponent(technique_id, best_mitigation, best_weight))

    if not components:
        return EffectivenessScore(0.0, (), EFFECTIVENESS_FORMULA_VERSION)
    mean = sum(c.weight for c in components) / len(components)
    value = min(1.0, max(0.0, mean * value_density))
    return EffectivenessScore(value, tuple(components), EFFECTIVENESS_FORMULA_VERSION)


def score_change_risk(
    factors: ChangeRiskFactors,
    weights: tuple[float, float, float, float] = DEFAULT_CHANGE_RISK_WEIGHTS,
) -> ChangeRiskScore:
    """Weighted normalized sum of the four ordinal factors."""
    weights = tuple(weights)
    if len(weights) != 4 or any(w < 0 for w in weights):
        raise ValueError("weights must be four non-negative numbers")
    total = sum(weights)
    if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise WeightSumViolationError(f"weights sum to {total!r}, expected 1")
    value = sum(w * f / 3.0 for w, f in zip(weights, factors.as_tuple()))
    # Weight sums inside the tolerance can still overshoot 1 by float dust.
    value = min(1.0, max(0.0, value))
    return ChangeRiskScore(value=value, factors=factors, weights=weights)


_BLOCKING_STEP = re.compile(r"\b(deny|block|disable|restrict|isolat)", re.IGNORECASE)

_ACTIONABLE_CATEGORIES = frozenset(
    {
        RemediationCategory.VENDOR_FIX,
        RemediationCategory.WORKAROUND,
        RemediationCategory.MITIGATION,
    }
)


def derive_change_risk_factors(
    remediations: Iterable[Remediation],
    steps: Iterable[str],
) -> ChangeRiskFactors:
    """Deterministic factor heuristic from the remediation mix.

    safety_impact rises when steps actively block or disable traffic,
    downtime when a vendor fix (restart) is on the table, support
    posture when the vendor has declared no fix, and test complexity
    with the sheer number of steps.
    """
    remediations = list(remediations)
    steps = list(steps)
    categories = {r.category for r in remediations}

    safety = 2 if any(_BLOCKING_STEP.search(step) for step in steps) else 1
    if RemediationCategory.VENDOR_FIX in categories:
        downtime = 2
    elif categories & _ACTIONABLE_CATEGORIES:
        downtime = 1
    else:
        downtime = 0
    if RemediationCategory.NO_FIX_PLANNED in categories:
        support = 3
    elif categories & _ACTIONABLE_CATEGORIES:
        support = 1
    else:
        support = 2
    if len(steps) <= 2:
        complexity = 1
    elif len(steps) <= 5:
        complexity = 2
    else:
        complexity = 3
    return ChangeRiskFactors(
        safety_impact=safety,
        downtime=downtime,
        vendor_support_posture=support,
        test_complexity=complexity,
    )


# --- entry construction -------------------------------------------------

@lru_cache(maxsize=1)
def default_provenance() -> Mapping[str, str]:
    mapping = default_mapping_rules()
    rating = default_rating_rules()
    return {
        "attack_dataset": default_attack_index().version,
        "technique_rules": mapping.version,
        "cwe_bridge": mapping.cwe_bridge_version,
        "rating_rules": rating.version,
        "mitigation_classes": rating.classes_version,
        "step_templates": default_step_templates().version,
        "effectiveness_formula": EFFECTIVENESS_FORMULA_VERSION,
        "change_risk_formula": CHANGE_RISK_FORMULA_VERSION,
    }


def build_playbook_entry(
    entry: EnrichedEntry,
    remediations: Iterable[Remediation],
    candidates: Iterable[MitigationCandidate],
    mappings: Iterable[TechniqueMapping] = (),
    change_risk_weights: tuple[float, float, float, float] = DEFAULT_CHANGE_RISK_WEIGHTS,
    value_density: float = 1.0,
    provenance: Mapping[str, str] | None = None,
) -> PlaybookEntry:
    """Assemble one playbook entry from vendor guidance and candidates.

    Vendor steps always precede derived steps.  Source semantics:
    a Detailed vendor workaround or mitigation makes the entry
    vendor-sourced (Hybrid when candidates also exist); candidates alone
    make it derived; generic-but-actionable vendor text alone still
    counts as vendor-sourced.  Nothing at all raises NothingActionable.
    """
    remediations = list(remediations)
    candidates = sorted(candidates, key=lambda c: c.mitigation_id)
    mappings = list(mappings)
    cve_id = entry.kevc.cve_id

    vendor_steps = [
        r.details
        for r in remediations
        if r.category in _ACTIONABLE_CATEGORIES and r.details
    ]
    has_detailed = any(
        r.category in (RemediationCategory.WORKAROUND, RemediationCategory.MITIGATION)
        and r.specificity is Specificity.DETAILED
        for r in remediations
    )
    derived_steps = [step for c in candidates for step in c.ot_steps]

    if has_detailed and derived_steps:
        source = PlaybookSource.HYBRID
        rationale = (
            "Detailed vendor guidance combined with "
            f"{len(candidates)} mitigation candidates from exploit-technique analysis."
        )
    elif has_detailed:
        source = PlaybookSource.VENDOR_ADVISORY
        rationale = "Vendor advisory provides a detailed workaround or mitigation."
    elif derived_steps:
        source = PlaybookSource.DERIVED_FROM_EXPLOIT_ANALYSIS
        rule_ids = sorted({c.rationale for c in candidates if c.rationale})
        rationale = (
            f"Derived from exploit-technique analysis via {len(candidates)} "
            f"mitigation candidates (rules: {', '.join(rule_ids)})."
        )
    elif vendor_steps:
        source = PlaybookSource.VENDOR_ADVISORY
        rationale = "Vendor advisory provides actionable but generic guidance."
    else:
        raise NothingActionableError(
            cve_id, "no advisory remediation and no mapped mitigation candidates"
        )

    steps = tuple(vendor_steps + derived_steps)
    technique_ids = (
        {m.technique_id for m in mappings}
        if mappings
        else {t for c in candidates for t in c.via_techniques}
    )
    effectiveness = score_effectiveness(candidates, technique_ids, value_density)
    factors = derive_change_risk_factors(remediations, steps)
    change_risk = score_change_risk(factors, change_risk_weights)
    evidence = tuple(
        EvidenceSlot(description=f"Verify after applying: {step}") for step in steps
    )
    return PlaybookEntry(
        cve_id=cve_id,
        source=source,
        steps=steps,
        effectiveness=effectiveness,
        change_risk=change_risk,
        rationale=rationale,
        validation_evidence=evidence,
        provenance=dict(provenance if provenance is not None else default_provenance()),
    )


# --- document emission --------------------------------------------------

Clock = Callable[[], datetime]


def _format_timestamp(moment: datetime) -> str:
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return moment.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _entry_to_dict(entry: PlaybookEntry) -> dict:
    return {
        "cve_id": entry.cve_id,
        "source": entry.source.value,
        "steps": list(entry.steps),
        "effectiveness": {
            "value": round(entry.effectiveness.value, 6),
            "components": [
                {
                    "technique_id": c.technique_id,
                    "mitigation_id": c.mitigation_id,
                    "weight": c.weight,
                }
                for c in entry.effectiveness.components
            ],
            "formula_version": entry.effectiveness.formula_version,
        },
        "change_risk": {
            "value": round(entry.change_risk.value, 6),
            "factors": entry.change_risk.factors.as_dict(),
            "weights": list(entry.change_risk.weights),
        },
        "rationale": entry.rationale,
        "validation_evidence": [
            {"description": slot.description, "status": slot.status.value}
            for slot in entry.validation_evidence
        ],
        "provenance": {k: entry.provenance[k] for k in sorted(entry.provenance)},
    }


@lru_cache(maxsize=1)
def playbook_schema() -> Mapping:
    text = resources.files("kevtriage.data").joinpath("playbook.schema.json").read_text("utf-8")
    return json.loads(text)


def validate_playbook(document: Mapping) -> None:
    """Schema plus the invariants JSON Schema cannot express."""
    validator = jsonschema.Draft202012Validator(playbook_schema())
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        path = "/" + "/".join(str(p) for p in first.absolute_path)
        raise SchemaViolationError(path, first.message)
    for i, entry in enumerate(document.get("entries", [])):
        risk = entry["change_risk"]
        weights = risk["weights"]
        if abs(sum(weights) - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise SchemaViolationError(
                f"/entries/{i}/change_risk/weights",
                f"weights sum to {sum(weights)!r}",
            )
        factors = risk["factors"]
        expected = sum(
            w * factors[name] / 3.0
            for w, name in zip(
                weights,
                ("safety_impact", "downtime", "vendor_support_posture", "test_complexity"),
            )
        )
        # Stored values are rounded to 6 decimals; allow that much slack.
        if abs(risk["value"] - expected) > 1e-5:
            raise SchemaViolationError(
                f"/entries/{i}/change_risk/value",
                f"value {risk['value']!r} does not match its factors",
            )


def emit_playbook(
    entries: Iterable[PlaybookEntry],
    clock: Clock,
    provenance: Mapping[str, str] | None = None,
) -> str:
    """Canonical playbook document text.

    Entries sort by cve_id, keys emit in a fixed order, and the
    timestamp comes from the injected clock, so the same inputs and
    clock produce byte-identical output.
    """
    document = {
        "schema_version": SCHEMA_VERSION,
        "generated_at": _format_timestamp(clock()),
        "provenance": dict(
            sorted((provenance if provenance is not None else default_provenance()).items())
        ),
        "entries": [
            _entry_to_dict(entry)
            for entry in sorted(entries, key=lambda e: e.cve_id)
        ],
    }
    validate_playbook(document)
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


def parse_playbook(text: str | bytes) -> tuple[dict, list[PlaybookEntry]]:
    """Validate a document and rebuild its typed entries.

    Returns (document metadata without entries, entries). Feeding the
    entries back through emit_playbook with the original timestamp
    reproduces the canonical form.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolationError("/", f"not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SchemaViolationError("/", "document must be an object")
    validate_playbook(document)
    entries = []
    for raw in document["entries"]:
        effectiveness = EffectivenessScore(
            value=float(raw["effectiveness"]["value"]),
            components=tuple(
                ScoreComponent(c["technique_id"], c["mitigation_id"], float(c["weight"]))
                for c in raw["effectiveness"]["components"]
            ),
            formula_version=raw["effectiveness"]["formula_version"],
        )
        change_risk = ChangeRiskScore(
            value=float(raw["change_risk"]["value"]),
            factors=ChangeRiskFactors(**raw["change_risk"]["factors"]),
            weights=tuple(float(w) for w in raw["change_risk"]["weights"]),
        )
        entries.append(
            PlaybookEntry(
                cve_id=raw["cve_id"],
                source=PlaybookSource(raw["source"]),
                steps=tuple(raw["steps"]),
                effectiveness=effectiveness,
                change_risk=change_risk,
                rationale=raw["rationale"],
                validation_evidence=tuple(
                    EvidenceSlot(e["description"], EvidenceStatus(e["status"]))
                    for e in raw["validation_evidence"]
                ),
                provenance=dict(raw["provenance"]),
            )
        )
    metadata = {k: v for k, v in document.items() if k != "entries"}
    return metadata, entries
