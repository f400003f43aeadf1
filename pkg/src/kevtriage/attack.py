"""Technique and mitigation mapping over an ATT&CK STIX bundle.

The CVE-to-technique step is an auditable rule table (keyword rules plus
a CWE bridge) rather than an opaque model, so every mapping carries the
evidence that produced it.  Ratings and step rendering are likewise
data-driven; all tables are versioned and their versions surface in
playbook provenance.
"""

import csv
import io
import json
import logging
import re
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .catalog import AttackVector, EnrichedEntry, UserInteraction
from .errors import EmptyDomainError, MalformedBundleError, UnknownTechniqueError

logger = logging.getLogger(__name__)

TECHNIQUE_ID_SHAPE = re.compile(r"^T\d{4}(\.\d{3})?$")
MITIGATION_ID_SHAPE = re.compile(r"^M\d{4}$")


class MappingMethod(str, Enum):
    KEYWORD_RULE = "keyword_rule"
    CWE_BRIDGE = "cwe_bridge"
    MANUAL = "manual"


class Rating(str, Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"


@dataclass(frozen=True)
class AttackTechnique:
    technique_id: str
    name: str
    tactics: tuple[str, ...]
    description: str = ""

    def __post_init__(self):
        if not TECHNIQUE_ID_SHAPE.match(self.technique_id):
            raise ValueError(f"bad technique id: {self.technique_id!r}")


@dataclass(frozen=True)
class AttackMitigation:
    mitigation_id: str
    name: str
    description: str = ""

    def __post_init__(self):
        if not MITIGATION_ID_SHAPE.match(self.mitigation_id):
            raise ValueError(f"bad mitigation id: {self.mitigation_id!r}")


@dataclass(frozen=True)
class TechniqueMapping:
    cve_id: str
    technique_id: str
    method: MappingMethod
    evidence: tuple[str, ...]
    confidence: float

    def __post_init__(self):
        if self.method is MappingMethod.KEYWORD_RULE and not self.evidence:
            raise ValueError("keyword-rule mappings must carry evidence")
        if not self.confidence > 0:
            raise ValueError("confidence must be positive")


@dataclass(frozen=True)
class MitigationCandidate:
    """Candidate mitigation for one CVE.

    Built unrated (effectiveness None, no steps); rate_effectiveness and
    render_ot_steps fill the remaining fields.
    """

    cve_id: str
    mitigation_id: str
    via_techniques: tuple[str, ...]
    effectiveness: Rating | None = None
    ot_steps: tuple[str, ...] = ()
    rationale: str = ""

    def __post_init__(self):
        if not self.via_techniques:
            raise ValueError("a candidate needs at least one technique")


# --- dataset loading ----------------------------------------------------

@dataclass(frozen=True)
class AttackIndex:
    """Immutable technique/mitigation index with mitigates edges."""

    version: str
    techniques: Mapping[str, AttackTechnique]
    mitigations: Mapping[str, AttackMitigation]
    technique_to_mitigations: Mapping[str, tuple[str, ...]]
    mitigation_to_techniques: Mapping[str, tuple[str, ...]]


def _external_id(obj: Mapping) -> str | None:
    for ref in obj.get("external_references", []) or []:
        if isinstance(ref, Mapping) and ref.get("source_name") == "mitre-attack":
            return str(ref.get("external_id") or "") or None
    return None


def _is_retired(obj: Mapping) -> bool:
    return bool(obj.get("revoked")) or bool(obj.get("x_mitre_deprecated"))


def load_attack_dataset(bundle: bytes | str | Mapping) -> AttackIndex:
    """Index a STIX 2.1 bundle; revoked and deprecated objects drop out."""
    if isinstance(bundle, (bytes, str)):
        try:
            data = json.loads(bundle)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise MalformedBundleError(f"bundle is not valid JSON: {exc}") from exc
    else:
        data = bundle
    if not isinstance(data, Mapping) or data.get("type") != "bundle":
        raise MalformedBundleError("document is not a STIX bundle")
    objects = data.get("objects")
    if not isinstance(objects, list):
        raise MalformedBundleError("bundle has no objects array")

    version = ""
    techniques: dict[str, AttackTechnique] = {}
    mitigations: dict[str, AttackMitigation] = {}
    stix_to_ext: dict[str, str] = {}
    for obj in objects:
        if not isinstance(obj, Mapping):
            continue
        kind = obj.get("type")
        if kind == "x-mitre-collection":
            version = str(obj.get("x_mitre_version", ""))
            continue
        if kind not in ("attack-pattern", "course-of-action"):
            continue
        if _is_retired(obj):
            continue
        ext_id = _external_id(obj)
        if not ext_id:
            continue
        if kind == "attack-pattern" and TECHNIQUE_ID_SHAPE.match(ext_id):
            tactics = tuple(
                phase.get("phase_name", "")
                for phase in obj.get("kill_chain_phases", []) or []
                if isinstance(phase, Mapping)
            )
            techniques[ext_id] = AttackTechnique(
                technique_id=ext_id,
                name=str(obj.get("name", "")),
                tactics=tactics,
                description=str(obj.get("description", "")),
            )
            stix_to_ext[str(obj.get("id"))] = ext_id
        elif kind == "course-of-action" and MITIGATION_ID_SHAPE.match(ext_id):
            mitigations[ext_id] = AttackMitigation(
                mitigation_id=ext_id,
                name=str(obj.get("name", "")),
                description=str(obj.get("description", "")),
            )
            stix_to_ext[str(obj.get("id"))] = ext_id

    if not techniques or not mitigations:
        raise EmptyDomainError(
            f"bundle yields {len(techniques)} techniques and {len(mitigations)} mitigations"
        )

    t_to_m: dict[str, list[str]] = {}
    m_to_t: dict[str, list[str]] = {}
    for obj in objects:
        if not isinstance(obj, Mapping) or obj.get("type") != "relationship":
            continue
        if obj.get("relationship_type") != "mitigates":
            continue
        source = stix_to_ext.get(str(obj.get("source_ref")))
        target = stix_to_ext.get(str(obj.get("target_ref")))
        # Edges touching filtered or unknown objects are dropped.
        if source not in mitigations or target not in techniques:
            continue
        if target not in m_to_t.setdefault(source, []):
            m_to_t[source].append(target)
        if source not in t_to_m.setdefault(target, []):
            t_to_m[target].append(source)

    return AttackIndex(
        version=version,
        techniques=techniques,
        mitigations=mitigations,
        technique_to_mitigations={t: tuple(sorted(v)) for t, v in t_to_m.items()},
        mitigation_to_techniques={m: tuple(sorted(v)) for m, v in m_to_t.items()},
    )


@lru_cache(maxsize=1)
def default_attack_index() -> AttackIndex:
    text = resources.files("kevtriage.data").joinpath("attack_bundle.json").read_text("utf-8")
    return load_attack_dataset(text)


# --- mapping rules ------------------------------------------------------

def _read_versioned_csv(text: str) -> tuple[str, list[dict]]:
    version = ""
    lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            stripped = line.lstrip("# ").strip()
            if stripped.startswith("version="):
                version = stripped.split("=", 1)[1]
            continue
        lines.append(line)
    return version, list(csv.DictReader(io.StringIO("\n".join(lines))))


@dataclass(frozen=True)
class KeywordRule:
    pattern: re.Pattern
    technique_id: str
    confidence: float
    require_av: frozenset[AttackVector]
    require_ui: frozenset[UserInteraction]


@dataclass(frozen=True)
class MappingRules:
    version: str
    keyword_rules: tuple[KeywordRule, ...]
    cwe_bridge_version: str
    cwe_bridge: Mapping[str, tuple[tuple[str, float], ...]]

    @classmethod
    def from_texts(cls, keyword_text: str, bridge_text: str) -> "MappingRules":
        version, rows = _read_versioned_csv(keyword_text)
        rules = []
        for row in rows:
            av_field = (row.get("require_av") or "").strip()
            ui_field = (row.get("require_ui") or "").strip()
            rules.append(
                KeywordRule(
                    pattern=re.compile(row["pattern"], re.IGNORECASE),
                    technique_id=row["technique_id"].strip(),
                    confidence=float(row["confidence"]),
                    require_av=frozenset(
                        AttackVector(v.strip()) for v in av_field.split(",") if v.strip()
                    ),
                    require_ui=frozenset(
                        UserInteraction(v.strip()) for v in ui_field.split(",") if v.strip()
                    ),
                )
            )
        bridge_version, bridge_rows = _read_versioned_csv(bridge_text)
        bridge: dict[str, list[tuple[str, float]]] = {}
        for row in bridge_rows:
            bridge.setdefault(row["cwe_id"].strip(), []).append(
                (row["technique_id"].strip(), float(row["confidence"]))
            )
        return cls(
            version=version,
            keyword_rules=tuple(rules),
            cwe_bridge_version=bridge_version,
            cwe_bridge={k: tuple(v) for k, v in bridge.items()},
        )

    @classmethod
    def from_files(cls, keyword_path: str | Path, bridge_path: str | Path) -> "MappingRules":
        return cls.from_texts(
            Path(keyword_path).read_text(encoding="utf-8"),
            Path(bridge_path).read_text(encoding="utf-8"),
        )


@lru_cache(maxsize=1)
def default_mapping_rules() -> MappingRules:
    data = resources.files("kevtriage.data")
    return MappingRules.from_texts(
        data.joinpath("technique_rules.csv").read_text("utf-8"),
        data.joinpath("cwe_bridge.csv").read_text("utf-8"),
    )


def map_cve_to_techniques(
    entry: EnrichedEntry, rules: MappingRules | None = None
) -> list[TechniqueMapping]:
    """Union of keyword and CWE-bridge matches, merged per technique.

    Duplicate hits keep the highest confidence; evidence accumulates.
    An empty result is a legitimate outcome, not an error.
    """
    rules = rules or default_mapping_rules()
    kevc = entry.kevc
    text_parts = [kevc.short_description, kevc.vulnerability_name, kevc.required_action]
    if entry.record is not None:
        text_parts.append(entry.record.description)
    text = "\n".join(part for part in text_parts if part)
    vector = entry.record.cvss if entry.record else None

    merged: dict[str, tuple[MappingMethod, set[str], float]] = {}

    def _add(technique_id: str, method: MappingMethod, evidence: str, confidence: float):
        if technique_id in merged:
            old_method, old_evidence, old_confidence = merged[technique_id]
            old_evidence.add(evidence)
            if confidence > old_confidence:
                merged[technique_id] = (method, old_evidence, confidence)
        else:
            merged[technique_id] = (method, {evidence}, confidence)

    for rule in rules.keyword_rules:
        if rule.require_av:
            if vector is None or vector.attack_vector not in rule.require_av:
                continue
        if rule.require_ui:
            if vector is None or vector.user_interaction not in rule.require_ui:
                continue
        match = rule.pattern.search(text)
        if match:
            _add(rule.technique_id, MappingMethod.KEYWORD_RULE, match.group(0), rule.confidence)

    cwe_ids = list(kevc.cwe_ids)
    if entry.record is not None:
        cwe_ids += [c for c in entry.record.cwe_ids if c not in cwe_ids]
    for cwe in cwe_ids:
        for technique_id, confidence in rules.cwe_bridge.get(cwe, ()):
            _add(technique_id, MappingMethod.CWE_BRIDGE, cwe, confidence)

    return [
        TechniqueMapping(
            cve_id=kevc.cve_id,
            technique_id=technique_id,
            method=method,
            evidence=tuple(sorted(evidence)),
            confidence=confidence,
        )
        for technique_id, (method, evidence, confidence) in sorted(merged.items())
    ]


# --- candidates ---------------------------------------------------------

def techniques_to_mitigations(
    index: AttackIndex, mappings: Iterable[TechniqueMapping]
) -> list[MitigationCandidate]:
    """Expand mapped techniques into unrated mitigation candidates."""
    grouped: dict[tuple[str, str], list[str]] = {}
    for mapping in mappings:
        if mapping.technique_id not in index.techniques:
            raise UnknownTechniqueError(mapping.technique_id)
        for mitigation_id in index.technique_to_mitigations.get(mapping.technique_id, ()):
            key = (mapping.cve_id, mitigation_id)
            grouped.setdefault(key, [])
            if mapping.technique_id not in grouped[key]:
                grouped[key].append(mapping.technique_id)
    return [
        MitigationCandidate(
            cve_id=cve_id,
            mitigation_id=mitigation_id,
            via_techniques=tuple(sorted(techniques)),
        )
        for (cve_id, mitigation_id), techniques in sorted(grouped.items())
    ]


# --- rating -------------------------------------------------------------

@dataclass(frozen=True)
class RatingRule:
    mitigation_class: str
    attack_vector: str  # enum value or "*"
    user_interaction: str  # enum value or "*"
    rating: Rating
    rule_id: str

    def specificity(self) -> int:
        return (self.attack_vector != "*") + (self.user_interaction != "*")


@dataclass(frozen=True)
class RatingRules:
    version: str
    classes_version: str
    rules: tuple[RatingRule, ...]
    mitigation_classes: Mapping[str, str]

    @classmethod
    def from_texts(cls, rules_text: str, classes_text: str) -> "RatingRules":
        version, rows = _read_versioned_csv(rules_text)
        rules = tuple(
            RatingRule(
                mitigation_class=row["mitigation_class"].strip(),
                attack_vector=row["attack_vector"].strip(),
                user_interaction=row["user_interaction"].strip(),
                rating=Rating(row["rating"].strip()),
                rule_id=row["rule_id"].strip(),
            )
            for row in rows
        )
        classes_version, class_rows = _read_versioned_csv(classes_text)
        classes = {
            row["mitigation_id"].strip(): row["mitigation_class"].strip()
            for row in class_rows
        }
        return cls(
            version=version,
            classes_version=classes_version,
            rules=rules,
            mitigation_classes=classes,
        )

    @classmethod
    def from_files(cls, rules_path: str | Path, classes_path: str | Path) -> "RatingRules":
        return cls.from_texts(
            Path(rules_path).read_text(encoding="utf-8"),
            Path(classes_path).read_text(encoding="utf-8"),
        )


@lru_cache(maxsize=1)
def default_rating_rules() -> RatingRules:
    data = resources.files("kevtriage.data")
    return RatingRules.from_texts(
        data.joinpath("rating_rules.csv").read_text("utf-8"),
        data.joinpath("mitigation_classes.csv").read_text("utf-8"),
    )


def rate_effectiveness(
    candidate: MitigationCandidate,
    entry: EnrichedEntry,
    rules: RatingRules | None = None,
) -> MitigationCandidate:
    """Attach a rating; unmatched candidates default to Medium."""
    rules = rules or default_rating_rules()
    mitigation_class = rules.mitigation_classes.get(candidate.mitigation_id)
    vector = entry.record.cvss if entry.record else None
    av = vector.attack_vector.value if vector else None
    ui = vector.user_interaction.value if vector else None

    best: RatingRule | None = None
    if mitigation_class is not None:
        for rule in rules.rules:
            if rule.mitigation_class != mitigation_class:
                continue
            if rule.attack_vector != "*" and rule.attack_vector != av:
                continue
            if rule.user_interaction != "*" and rule.user_interaction != ui:
                continue
            if best is None or rule.specificity() > best.specificity():
                best = rule
    if best is None:
        return replace(candidate, effectiveness=Rating.MEDIUM, rationale="default")
    return replace(candidate, effectiveness=best.rating, rationale=best.rule_id)


# --- step rendering -----------------------------------------------------

@dataclass(frozen=True)
class StepTemplates:
    version: str
    templates: Mapping[str, tuple[str, ...]]

    @classmethod
    def from_mapping(cls, data: Mapping) -> "StepTemplates":
        return cls(
            version=str(data["version"]),
            templates={
                mitigation_id: tuple(steps)
                for mitigation_id, steps in data["templates"].items()
            },
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "StepTemplates":
        return cls.from_mapping(json.loads(Path(path).read_text(encoding="utf-8")))


@lru_cache(maxsize=1)
def default_step_templates() -> StepTemplates:
    text = resources.files("kevtriage.data").joinpath("step_templates.json").read_text("utf-8")
    return StepTemplates.from_mapping(json.loads(text))


GENERIC_STEP_MARKER = "[generic]"

_PORT_MENTION = re.compile(r"\b(?:TCP|UDP)[/ ]\d{1,5}\b|\bports?\s+\d{1,5}\b", re.IGNORECASE)


def _extract_ports(entry: EnrichedEntry) -> str:
    text_parts = [entry.kevc.short_description, entry.kevc.required_action]
    if entry.record is not None:
        text_parts.append(entry.record.description)
    seen: list[str] = []
    for part in text_parts:
        for match in _PORT_MENTION.findall(part or ""):
            normalized = match.strip()
            if normalized not in seen:
                seen.append(normalized)
    return f" (observed: {', '.join(seen)})" if seen else ""


def render_ot_steps(
    candidate: MitigationCandidate,
    entry: EnrichedEntry,
    templates: StepTemplates | None = None,
    index: AttackIndex | None = None,
) -> MitigationCandidate:
    """Fill ot_steps from the mitigation's template.

    A mitigation without a template still yields one step, derived from
    its dataset description and marked generic.
    """
    templates = templates or default_step_templates()
    index = index or default_attack_index()
    substitutions = {
        "product": entry.kevc.product,
        "vendor": entry.kevc.vendor_project,
        "ports": _extract_ports(entry),
    }
    template_steps = templates.templates.get(candidate.mitigation_id)
    if template_steps:
        steps = tuple(step.format(**substitutions) for step in template_steps)
    else:
        mitigation = index.mitigations.get(candidate.mitigation_id)
        description = mitigation.description if mitigation else "Apply the mitigation"
        steps = (f"{GENERIC_STEP_MARKER} {description.strip()}",)
    return replace(candidate, ot_steps=steps)


def derive_candidates(
    entry: EnrichedEntry,
    index: AttackIndex | None = None,
    mapping_rules: MappingRules | None = None,
    rating_rules: RatingRules | None = None,
    templates: StepTemplates | None = None,
) -> tuple[list[TechniqueMapping], list[MitigationCandidate]]:
    """Full per-entry pipeline: map, expand, rate, render."""
    index = index or default_attack_index()
    mappings = map_cve_to_techniques(entry, mapping_rules)
    candidates = techniques_to_mitigations(index, mappings)
    finished = [
        render_ot_steps(
            rate_effectiveness(candidate, entry, rating_rules), entry, templates, index
        )
        for candidate in candidates
    ]
    return mappings, finished
