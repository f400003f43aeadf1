"""Vendor advisory ingestion: CSAF 2.0, a CVRF 1.2 subset, format
classification, and rule-based specificity grading.

HTML advisories are deliberately not scraped; they are recorded as
WebPage with remediations unknown, since free-form pages resist
automated mapping.  Specificity grading runs off a versioned phrase and
object table shipped as package data so graded outputs stay auditable.
"""

import json
import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from datetime import date
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .errors import (
    SchemaViolationError,
    UnresolvedProductReferenceError,
    UnsupportedRemediationTypeError,
)

logger = logging.getLogger(__name__)


class AdvisoryFormat(str, Enum):
    CSAF2 = "csaf2"
    CVRF = "cvrf"
    WEB_PAGE = "web_page"
    OTHER_STRUCTURED = "other_structured"
    NONE_FOUND = "none_found"


class RemediationCategory(str, Enum):
    VENDOR_FIX = "vendor_fix"
    WORKAROUND = "workaround"
    MITIGATION = "mitigation"
    NO_FIX_PLANNED = "no_fix_planned"
    NONE_AVAILABLE = "none_available"


class Specificity(str, Enum):
    DETAILED = "detailed"
    GENERIC = "generic"
    NONE = "none"


class ProductStatusKind(str, Enum):
    KNOWN_AFFECTED = "known_affected"
    KNOWN_NOT_AFFECTED = "known_not_affected"
    FIXED = "fixed"
    FIRST_FIXED = "first_fixed"
    UNDER_INVESTIGATION = "under_investigation"


@dataclass(frozen=True)
class Remediation:
    category: RemediationCategory
    details: str
    applies_to_products: tuple[str, ...]
    specificity: Specificity
    url: str | None = None

    def __post_init__(self):
        if self.specificity is Specificity.NONE:
            if self.details.strip() and self.category not in (
                RemediationCategory.NO_FIX_PLANNED,
                RemediationCategory.NONE_AVAILABLE,
            ):
                raise ValueError(
                    "specificity None requires empty details or a no-fix category"
                )


@dataclass(frozen=True)
class ProductStatus:
    product_id: str
    product_name: str
    status: ProductStatusKind
    version_expr: str = ""


@dataclass(frozen=True)
class Advisory:
    advisory_id: str
    vendor: str
    format: AdvisoryFormat
    source_url: str
    last_updated: date | None
    remediations: tuple[Remediation, ...]
    product_statuses: tuple[ProductStatus, ...]
    covered_cves: tuple[str, ...]

    def __post_init__(self):
        if self.format is AdvisoryFormat.NONE_FOUND and (
            self.remediations or self.product_statuses
        ):
            raise ValueError("a NoneFound advisory carries no parsed content")
        if self.format in (AdvisoryFormat.CSAF2, AdvisoryFormat.CVRF) and not self.covered_cves:
            raise ValueError("structured advisories must cover at least one CVE")


def none_found_advisory(cve_id: str = "") -> Advisory:
    """Placeholder advisory for entries with no advisory at all."""
    return Advisory(
        advisory_id="",
        vendor="",
        format=AdvisoryFormat.NONE_FOUND,
        source_url="",
        last_updated=None,
        remediations=(),
        product_statuses=(),
        covered_cves=(cve_id,) if cve_id else (),
    )


# --- specificity grading ------------------------------------------------

@dataclass(frozen=True)
class SpecificityRules:
    """Compiled grading table; `version` travels with graded output."""

    version: str
    imperative_verbs: frozenset[str]
    object_patterns: tuple[re.Pattern, ...]
    generic_phrases: tuple[str, ...]

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SpecificityRules":
        return cls(
            version=str(data["version"]),
            imperative_verbs=frozenset(v.lower() for v in data["imperative_verbs"]),
            # Case handling is per-pattern via inline (?i); identifier
            # shapes like CamelCase must stay case-sensitive.
            object_patterns=tuple(
                re.compile(p) for p in data["concrete_object_patterns"]
            ),
            generic_phrases=tuple(p.lower() for p in data["generic_phrases"]),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "SpecificityRules":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))


@lru_cache(maxsize=1)
def default_specificity_rules() -> SpecificityRules:
    data = resources.files("kevtriage.data").joinpath("specificity_rules.json")
    return SpecificityRules.from_mapping(json.loads(data.read_text(encoding="utf-8")))


_WORD = re.compile(r"[a-z][\w-]*")


def _grade(category: RemediationCategory, details: str, rules: SpecificityRules) -> Specificity:
    if category in (RemediationCategory.NO_FIX_PLANNED, RemediationCategory.NONE_AVAILABLE):
        return Specificity.NONE
    text = details.strip()
    if not text:
        return Specificity.NONE
    words = set(_WORD.findall(text.lower()))
    has_verb = bool(words & rules.imperative_verbs)
    has_object = any(p.search(text) for p in rules.object_patterns)
    if has_verb and has_object:
        return Specificity.DETAILED
    # Policy-level phrasing, or prose the table does not recognize at
    # all, both land on Generic; None is reserved for the empty cases.
    return Specificity.GENERIC


def grade_specificity(rem: Remediation, rules: SpecificityRules | None = None) -> Specificity:
    """Grade a remediation's guidance text against the rule table."""
    return _grade(rem.category, rem.details, rules or default_specificity_rules())


def build_remediation(
    category: RemediationCategory,
    details: str,
    applies_to_products: tuple[str, ...] = (),
    url: str | None = None,
    rules: SpecificityRules | None = None,
) -> Remediation:
    return Remediation(
        category=category,
        details=details,
        applies_to_products=applies_to_products,
        specificity=_grade(category, details, rules or default_specificity_rules()),
        url=url,
    )


# --- CSAF 2.0 -----------------------------------------------------------

def _require(doc: Mapping[str, Any], *path: str) -> Any:
    node: Any = doc
    walked = []
    for key in path:
        walked.append(key)
        if not isinstance(node, Mapping) or key not in node or node[key] in (None, ""):
            raise SchemaViolationError("/" + "/".join(walked))
        node = node[key]
    return node


def _walk_branches(
    branches: list, path_names: list[str], version_expr: str, out: dict[str, tuple[str, str]]
):
    for branch in branches or []:
        if not isinstance(branch, Mapping):
            continue
        name = str(branch.get("name", ""))
        category = str(branch.get("category", ""))
        next_version = name if category == "product_version" else version_expr
        product = branch.get("product")
        if isinstance(product, Mapping) and product.get("product_id"):
            full_name = str(product.get("name") or " ".join(path_names + [name]))
            out[str(product["product_id"])] = (full_name, next_version)
        _walk_branches(branch.get("branches", []), path_names + [name], next_version, out)


def _product_map(doc: Mapping[str, Any]) -> dict[str, tuple[str, str]]:
    """product_id -> (resolved full name, version expression)."""
    tree = doc.get("product_tree") or {}
    out: dict[str, tuple[str, str]] = {}
    _walk_branches(tree.get("branches", []), [], "", out)
    for fpn in tree.get("full_product_names", []) or []:
        if isinstance(fpn, Mapping) and fpn.get("product_id"):
            out[str(fpn["product_id"])] = (str(fpn.get("name", "")), "")
    return out


_CSAF_CATEGORIES = {c.value: c for c in RemediationCategory}

_STATUS_KEYS = (
    ("known_affected", ProductStatusKind.KNOWN_AFFECTED),
    ("known_not_affected", ProductStatusKind.KNOWN_NOT_AFFECTED),
    ("fixed", ProductStatusKind.FIXED),
    ("first_fixed", ProductStatusKind.FIRST_FIXED),
    ("under_investigation", ProductStatusKind.UNDER_INVESTIGATION),
)


def parse_csaf(
    doc: bytes | str | Mapping[str, Any],
    source_url: str = "",
    rules: SpecificityRules | None = None,
) -> Advisory:
    """Parse a CSAF 2.0 advisory into the common Advisory shape.

    Remediations and statuses from all vulnerability stanzas are
    flattened onto the advisory; the per-pair status invariants are
    enforced within each stanza before flattening.
    """
    if isinstance(doc, (bytes, str)):
        try:
            data = json.loads(doc)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise SchemaViolationError("/", f"not valid JSON: {exc}") from exc
    else:
        data = doc
    if not isinstance(data, Mapping):
        raise SchemaViolationError("/", "document root must be an object")
    _require(data, "document", "title")
    version = _require(data, "document", "csaf_version")
    if str(version) != "2.0":
        raise SchemaViolationError("/document/csaf_version", f"unsupported: {version}")
    advisory_id = str(_require(data, "document", "tracking", "id"))
    release = str(_require(data, "document", "tracking", "current_release_date"))
    vendor = str(_require(data, "document", "publisher", "name"))
    try:
        last_updated = date.fromisoformat(release[:10])
    except ValueError as exc:
        raise SchemaViolationError(
            "/document/tracking/current_release_date", str(exc)
        ) from exc

    vulnerabilities = data.get("vulnerabilities")
    if not isinstance(vulnerabilities, list) or not vulnerabilities:
        raise SchemaViolationError("/vulnerabilities")
    products = _product_map(data)
    rules = rules or default_specificity_rules()

    covered: list[str] = []
    remediations: list[Remediation] = []
    statuses: list[ProductStatus] = []
    for index, vuln in enumerate(vulnerabilities):
        if not isinstance(vuln, Mapping) or not vuln.get("cve"):
            raise SchemaViolationError(f"/vulnerabilities/{index}/cve")
        cve_id = str(vuln["cve"])
        if cve_id not in covered:
            covered.append(cve_id)

        status_block = vuln.get("product_status") or {}
        seen: dict[str, ProductStatusKind] = {}
        for key, kind in _STATUS_KEYS:
            for product_id in status_block.get(key, []) or []:
                product_id = str(product_id)
                if product_id not in products:
                    raise UnresolvedProductReferenceError(product_id)
                if product_id in seen:
                    raise SchemaViolationError(
                        f"/vulnerabilities/{index}/product_status/{key}",
                        f"{product_id} already holds status {seen[product_id].value}",
                    )
                seen[product_id] = kind
                name, version_expr = products[product_id]
                statuses.append(
                    ProductStatus(
                        product_id=product_id,
                        product_name=name,
                        status=kind,
                        version_expr=version_expr,
                    )
                )

        for rem_index, rem in enumerate(vuln.get("remediations", []) or []):
            if not isinstance(rem, Mapping):
                raise SchemaViolationError(f"/vulnerabilities/{index}/remediations/{rem_index}")
            category_text = str(rem.get("category", ""))
            category = _CSAF_CATEGORIES.get(category_text)
            if category is None:
                raise SchemaViolationError(
                    f"/vulnerabilities/{index}/remediations/{rem_index}/category",
                    f"unknown category {category_text!r}",
                )
            product_ids = tuple(str(p) for p in rem.get("product_ids", []) or [])
            for product_id in product_ids:
                if product_id not in products:
                    raise UnresolvedProductReferenceError(product_id)
            remediations.append(
                build_remediation(
                    category=category,
                    details=str(rem.get("details", "")),
                    applies_to_products=product_ids,
                    url=str(rem["url"]) if rem.get("url") else None,
                    rules=rules,
                )
            )

    return Advisory(
        advisory_id=advisory_id,
        vendor=vendor,
        format=AdvisoryFormat.CSAF2,
        source_url=source_url,
        last_updated=last_updated,
        remediations=tuple(remediations),
        product_statuses=tuple(statuses),
        covered_cves=tuple(covered),
    )


# --- CVRF 1.2 subset ----------------------------------------------------

_CVRF_REMEDIATION_TYPES = {
    "workaround": RemediationCategory.WORKAROUND,
    "mitigation": RemediationCategory.MITIGATION,
    "vendor fix": RemediationCategory.VENDOR_FIX,
    "official fix": RemediationCategory.VENDOR_FIX,
    "none available": RemediationCategory.NONE_AVAILABLE,
    "will not fix": RemediationCategory.NO_FIX_PLANNED,
}

_CVRF_STATUS_TYPES = {
    "known affected": ProductStatusKind.KNOWN_AFFECTED,
    "known not affected": ProductStatusKind.KNOWN_NOT_AFFECTED,
    "fixed": ProductStatusKind.FIXED,
    "first fixed": ProductStatusKind.FIRST_FIXED,
    "under investigation": ProductStatusKind.UNDER_INVESTIGATION,
}


def map_cvrf_remediation_type(type_text: str) -> RemediationCategory:
    category = _CVRF_REMEDIATION_TYPES.get(type_text.strip().lower())
    if category is None:
        raise UnsupportedRemediationTypeError(type_text)
    return category


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _find_text(element: ET.Element, name: str) -> str:
    for child in element.iter():
        if _local(child.tag) == name and child.text:
            return child.text.strip()
    return ""


def parse_cvrf(
    doc: bytes | str, source_url: str = "", rules: SpecificityRules | None = None
) -> Advisory:
    """Read the CVRF 1.2 subset needed to fill the Advisory shape.

    Namespace prefixes vary between emitters, so matching is done on
    local tag names.  Remediation types with no category mapping are
    logged and skipped rather than failing the document.
    """
    try:
        root = ET.fromstring(doc)
    except ET.ParseError as exc:
        raise SchemaViolationError("/", f"not well-formed XML: {exc}") from exc
    if _local(root.tag) != "cvrfdoc":
        raise SchemaViolationError("/", f"unexpected root element {_local(root.tag)!r}")

    advisory_id = ""
    vendor = ""
    last_updated = None
    for child in root.iter():
        name = _local(child.tag)
        if name == "Identification" and not advisory_id:
            advisory_id = _find_text(child, "ID")
        elif name == "DocumentPublisher" and not vendor:
            vendor = child.get("VendorID", "") or _find_text(child, "IssuingAuthority")
        elif name == "CurrentReleaseDate" and last_updated is None and child.text:
            try:
                last_updated = date.fromisoformat(child.text.strip()[:10])
            except ValueError:
                last_updated = None
    if not advisory_id:
        raise SchemaViolationError("/cvrfdoc/DocumentTracking/Identification/ID")

    products: dict[str, tuple[str, str]] = {}
    for element in root.iter():
        if _local(element.tag) == "FullProductName" and element.get("ProductID"):
            products[element.get("ProductID")] = ((element.text or "").strip(), "")

    rules = rules or default_specificity_rules()
    covered: list[str] = []
    remediations: list[Remediation] = []
    statuses: list[ProductStatus] = []
    for vuln in root.iter():
        if _local(vuln.tag) != "Vulnerability":
            continue
        cve_id = _find_text(vuln, "CVE")
        if not cve_id:
            raise SchemaViolationError("/cvrfdoc/Vulnerability/CVE")
        if cve_id not in covered:
            covered.append(cve_id)
        for element in vuln.iter():
            name = _local(element.tag)
            if name == "Status":
                kind = _CVRF_STATUS_TYPES.get(str(element.get("Type", "")).lower())
                if kind is None:
                    logger.warning("%s: skipping status type %r", advisory_id, element.get("Type"))
                    continue
                for pid_el in element:
                    if _local(pid_el.tag) == "ProductID" and pid_el.text:
                        product_id = pid_el.text.strip()
                        product_name, _ = products.get(product_id, (product_id, ""))
                        statuses.append(
                            ProductStatus(
                                product_id=product_id,
                                product_name=product_name,
                                status=kind,
                            )
                        )
            elif name == "Remediation":
                try:
                    category = map_cvrf_remediation_type(str(element.get("Type", "")))
                except UnsupportedRemediationTypeError as exc:
                    logger.warning("%s: %s (skipped)", advisory_id, exc)
                    continue
                product_ids = tuple(
                    pid.text.strip()
                    for pid in element
                    if _local(pid.tag) == "ProductID" and pid.text
                )
                url = _find_text(element, "URL")
                remediations.append(
                    build_remediation(
                        category=category,
                        details=_find_text(element, "Description"),
                        applies_to_products=product_ids,
                        url=url or None,
                        rules=rules,
                    )
                )
    if not covered:
        raise SchemaViolationError("/cvrfdoc/Vulnerability")

    return Advisory(
        advisory_id=advisory_id,
        vendor=vendor,
        format=AdvisoryFormat.CVRF,
        source_url=source_url,
        last_updated=last_updated,
        remediations=tuple(remediations),
        product_statuses=tuple(statuses),
        covered_cves=tuple(covered),
    )


# --- format classification ----------------------------------------------

_HTML_HINT = re.compile(rb"<(?:!doctype\s+html|html|head|body)[\s>]", re.IGNORECASE)


def classify_advisory_format(
    source_url: str = "", content_probe: bytes | str | None = None
) -> AdvisoryFormat:
    """Classify how an advisory is published.

    Pure function of its inputs: probing content is preferred, a bare
    URL with nothing to probe is assumed to serve a page, and no inputs
    at all means no advisory exists.
    """
    if content_probe is not None:
        payload = (
            content_probe.encode("utf-8", "replace")
            if isinstance(content_probe, str)
            else content_probe
        )
        if not payload.strip():
            return AdvisoryFormat.NONE_FOUND if not source_url else AdvisoryFormat.WEB_PAGE
        try:
            parse_csaf(payload)
            return AdvisoryFormat.CSAF2
        except Exception:
            pass
        try:
            parse_cvrf(payload)
            return AdvisoryFormat.CVRF
        except Exception:
            pass
        if _HTML_HINT.search(payload[:2048]):
            return AdvisoryFormat.WEB_PAGE
        try:
            json.loads(payload)
            return AdvisoryFormat.OTHER_STRUCTURED
        except (json.JSONDecodeError, UnicodeDecodeError):
            pass
        try:
            ET.fromstring(payload)
            return AdvisoryFormat.OTHER_STRUCTURED
        except ET.ParseError:
            pass
        return AdvisoryFormat.WEB_PAGE
    if source_url:
        return AdvisoryFormat.WEB_PAGE
    return AdvisoryFormat.NONE_FOUND


def conformance_corpus_dir() -> Path:
    """Directory of bundled CSAF conformance and edge-case documents."""
    return Path(str(resources.files("kevtriage.data").joinpath("csaf_corpus")))


# --- advisory manifests -------------------------------------------------

def parse_advisory_manifest(
    document: bytes | str | Mapping, rules: SpecificityRules | None = None
) -> dict[str, Advisory]:
    """Load a manifest of pre-fetched advisories, keyed by CVE.

    The manifest is this toolkit's input convention for advisory
    material gathered out of band: structured documents are embedded
    verbatim (and parsed here), while web-page findings carry
    analyst-transcribed remediation texts.
    """
    if isinstance(document, (bytes, str)):
        try:
            data = json.loads(document)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise SchemaViolationError("/", f"manifest is not valid JSON: {exc}") from exc
    else:
        data = document
    if not isinstance(data, Mapping) or not isinstance(data.get("advisories"), list):
        raise SchemaViolationError("/advisories", "manifest lacks an advisories array")

    result: dict[str, Advisory] = {}
    for position, item in enumerate(data["advisories"]):
        if not isinstance(item, Mapping) or not item.get("cve_id"):
            raise SchemaViolationError(f"/advisories/{position}", "entry needs a cve_id")
        cve_id = str(item["cve_id"])
        kind = str(item.get("kind", ""))
        if kind == "csaf":
            advisory = parse_csaf(
                item.get("document", {}), source_url=str(item.get("url", "")), rules=rules
            )
        elif kind == "cvrf":
            advisory = parse_cvrf(
                str(item.get("document_xml", "")),
                source_url=str(item.get("url", "")),
                rules=rules,
            )
        elif kind in ("web_page", "other_structured"):
            remediations = tuple(
                build_remediation(
                    RemediationCategory(rem["category"]),
                    str(rem.get("details", "")),
                    url=rem.get("url"),
                    rules=rules,
                )
                for rem in item.get("remediations", []) or []
            )
            last_updated = None
            if item.get("last_updated"):
                last_updated = date.fromisoformat(str(item["last_updated"])[:10])
            advisory = Advisory(
                advisory_id=str(item.get("advisory_id", "")),
                vendor=str(item.get("vendor", "")),
                format=(
                    AdvisoryFormat.WEB_PAGE
                    if kind == "web_page"
                    else AdvisoryFormat.OTHER_STRUCTURED
                ),
                source_url=str(item.get("url", "")),
                last_updated=last_updated,
                remediations=remediations,
                product_statuses=(),
                covered_cves=(cve_id,),
            )
        elif kind == "none_found":
            advisory = none_found_advisory(cve_id)
        else:
            raise SchemaViolationError(
                f"/advisories/{position}/kind", f"unknown kind {kind!r}"
            )
        if advisory.covered_cves and cve_id not in advisory.covered_cves:
            logger.warning(
                "manifest entry %s maps to an advisory covering %s",
                cve_id,
                ", ".join(advisory.covered_cves),
            )
        result[cve_id] = advisory
    return result
