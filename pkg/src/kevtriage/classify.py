"""Product classification: UNSPSC assignment, OT plausibility, and
small-category bucketing.

The default classifier is a deterministic keyword rule table shipped as
versioned CSV data; an external model endpoint is supported behind a
narrow request/response contract but never required.  OT plausibility is
likewise a reviewable data table, because the judgment criteria involved
are not reducible to the codes themselves.
"""

import csv
import io
import json
import logging
import re
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import (
    EmptyInputError,
    EndpointUnavailableError,
    InvalidCodeReturnedError,
    ResponseParseFailureError,
)

logger = logging.getLogger(__name__)

FALLBACK_CODE = "43230000"
FALLBACK_TITLE = "Software"
UNSPSC_CODE_SHAPE = re.compile(r"^\d{8}$")


class AssignmentSource(str, Enum):
    RULE_TABLE = "rule_table"
    EXTERNAL_MODEL = "external_model"
    MANUAL_OVERRIDE = "manual_override"


@dataclass(frozen=True)
class UnspscAssignment:
    code: str
    class_title: str
    rationale: str
    source: AssignmentSource
    confidence: float

    def __post_init__(self):
        if not UNSPSC_CODE_SHAPE.match(self.code):
            raise ValueError(f"UNSPSC code must be 8 digits, got {self.code!r}")
        if not self.class_title.strip():
            raise ValueError("class_title must be non-empty")
        if self.source is AssignmentSource.MANUAL_OVERRIDE and not self.rationale.strip():
            raise ValueError("manual overrides require a rationale")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")


@dataclass(frozen=True)
class OtRelevance:
    plausible_in_ot: bool
    basis: str
    category_title: str
    map_version: str


# --- versioned CSV plumbing --------------------------------------------

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
    rows = list(csv.DictReader(io.StringIO("\n".join(lines))))
    return version, rows


@dataclass(frozen=True)
class ClassifierRule:
    pattern: re.Pattern
    field: str
    code: str
    class_title: str
    priority: int


@dataclass(frozen=True)
class ClassifierRules:
    version: str
    rules: tuple[ClassifierRule, ...]

    @classmethod
    def from_text(cls, text: str) -> "ClassifierRules":
        version, rows = _read_versioned_csv(text)
        rules = []
        for row in rows:
            if row.get("field") not in ("product", "description"):
                raise ValueError(f"rule field must be product or description: {row}")
            rules.append(
                ClassifierRule(
                    pattern=re.compile(row["pattern"], re.IGNORECASE),
                    field=row["field"],
                    code=row["unspsc_code"].strip(),
                    class_title=row["class_title"].strip(),
                    priority=int(row["priority"]),
                )
            )
        return cls(version=version, rules=tuple(rules))

    @classmethod
    def from_file(cls, path: str | Path) -> "ClassifierRules":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


@lru_cache(maxsize=1)
def default_classifier_rules() -> ClassifierRules:
    text = resources.files("kevtriage.data").joinpath("unspsc_rules.csv").read_text("utf-8")
    return ClassifierRules.from_text(text)


@dataclass(frozen=True)
class OtRule:
    prefix: str
    plausible: bool
    rule_id: str
    rationale: str


@dataclass(frozen=True)
class OtRuleMap:
    version: str
    rules: tuple[OtRule, ...]

    @classmethod
    def from_text(cls, text: str) -> "OtRuleMap":
        version, rows = _read_versioned_csv(text)
        rules = tuple(
            OtRule(
                prefix=row["unspsc_prefix"].strip(),
                plausible=row["ot_plausible"].strip().lower() == "true",
                rule_id=row["rule_id"].strip(),
                rationale=row["rationale"].strip(),
            )
            for row in rows
        )
        return cls(version=version, rules=rules)

    @classmethod
    def from_file(cls, path: str | Path) -> "OtRuleMap":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


@lru_cache(maxsize=1)
def default_ot_rules() -> OtRuleMap:
    text = resources.files("kevtriage.data").joinpath("ot_rules.csv").read_text("utf-8")
    return OtRuleMap.from_text(text)


# --- rule-table classification ------------------------------------------

def classify_unspsc(
    product: str, description: str = "", rules: ClassifierRules | None = None
) -> UnspscAssignment:
    """Deterministic keyword classification with a labeled fallback.

    Highest-priority matching rule wins; ties resolve by table order.
    No match falls back to the generic Software family with low
    confidence rather than failing.
    """
    if not product.strip():
        raise ValueError("product must be non-empty")
    table = rules or default_classifier_rules()
    fields = {"product": product, "description": description or ""}
    best: ClassifierRule | None = None
    for rule in table.rules:
        if rule.pattern.search(fields[rule.field]):
            if best is None or rule.priority > best.priority:
                best = rule
    if best is None:
        return UnspscAssignment(
            code=FALLBACK_CODE,
            class_title=FALLBACK_TITLE,
            rationale=f"no rule matched (table {table.version})",
            source=AssignmentSource.RULE_TABLE,
            confidence=0.2,
        )
    confidence = 0.9 if best.field == "product" else 0.6
    return UnspscAssignment(
        code=best.code,
        class_title=best.class_title,
        rationale=(
            f"rule {best.pattern.pattern!r} matched {best.field} (table {table.version})"
        ),
        source=AssignmentSource.RULE_TABLE,
        confidence=confidence,
    )


# --- external classifier path -------------------------------------------

def load_prompt_template() -> str:
    text = resources.files("kevtriage.data").joinpath("prompt_template.txt").read_text("utf-8")
    return "\n".join(l for l in text.splitlines() if not l.startswith("#")).strip() + "\n"


Transport = Callable[[str, bytes, float], bytes]


def _urllib_transport(url: str, payload: bytes, timeout: float) -> bytes:
    request = urllib.request.Request(
        url, data=payload, headers={"Content-Type": "application/json"}, method="POST"
    )
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return response.read()


class ExternalClassifierClient:
    """Narrow client for an HTTP classification endpoint.

    The transport is injectable so tests never open sockets.  Responses
    must be JSON objects with string fields `code` and `rationale`; a
    malformed code is an error, never a silent fallback.
    """

    def __init__(
        self,
        endpoint_url: str,
        timeout: float = 10.0,
        transport: Transport | None = None,
        template: str | None = None,
    ):
        self.endpoint_url = endpoint_url
        self.timeout = timeout
        self._transport = transport or _urllib_transport
        self._template = template or load_prompt_template()

    def render_prompt(self, product: str, description: str) -> str:
        return self._template.format(product=product, description=description)

    def classify(self, product: str, description: str = "") -> UnspscAssignment:
        payload = json.dumps(
            {"prompt": self.render_prompt(product, description)}
        ).encode("utf-8")
        try:
            body = self._transport(self.endpoint_url, payload, self.timeout)
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            raise EndpointUnavailableError(f"classifier endpoint unreachable: {exc}") from exc
        try:
            parsed = json.loads(body)
            code = parsed["code"]
            rationale = parsed["rationale"]
        except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError) as exc:
            raise ResponseParseFailureError(f"unusable classifier response: {exc}") from exc
        if not isinstance(code, str) or not UNSPSC_CODE_SHAPE.match(code):
            raise InvalidCodeReturnedError(str(code))
        return UnspscAssignment(
            code=code,
            class_title=str(parsed.get("class_title") or FALLBACK_TITLE),
            rationale=str(rationale),
            source=AssignmentSource.EXTERNAL_MODEL,
            confidence=float(parsed.get("confidence", 0.5)),
        )

    def classify_many(
        self, items: Sequence[tuple[str, str]], max_in_flight: int = 4
    ) -> list[UnspscAssignment]:
        """Classify several products with bounded concurrent requests."""
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            return list(pool.map(lambda item: self.classify(*item), items))


# --- OT plausibility ----------------------------------------------------

def assess_ot_relevance(
    assignment: UnspscAssignment, rule_map: OtRuleMap | None = None
) -> OtRelevance:
    """Judge OT plausibility by longest matching code prefix."""
    table = rule_map or default_ot_rules()
    best: OtRule | None = None
    for rule in table.rules:
        if assignment.code.startswith(rule.prefix):
            if best is None or len(rule.prefix) > len(best.prefix):
                best = rule
    if best is None:
        return OtRelevance(
            plausible_in_ot=False,
            basis="no rule",
            category_title=assignment.class_title,
            map_version=table.version,
        )
    return OtRelevance(
        plausible_in_ot=best.plausible,
        basis=best.rule_id,
        category_title=assignment.class_title,
        map_version=table.version,
    )


# --- category bucketing -------------------------------------------------

@dataclass(frozen=True)
class CategoryBucket:
    title: str
    count: int
    share: float


OTHER_BUCKET = "Other"


def bucket_small_categories(
    assignments: Iterable[UnspscAssignment], threshold: float = 0.03
) -> list[CategoryBucket]:
    """Histogram by class title, folding sub-threshold categories into Other.

    Output is ordered by descending share (ties by title) with the Other
    bucket always last; shares are exact count fractions.
    """
    assignments = list(assignments)
    if not assignments:
        raise EmptyInputError("no assignments to bucket")
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    total = len(assignments)
    counts: dict[str, int] = {}
    for assignment in assignments:
        counts[assignment.class_title] = counts.get(assignment.class_title, 0) + 1
    kept: list[CategoryBucket] = []
    other_count = 0
    for title, count in counts.items():
        share = count / total
        if share < threshold:
            other_count += count
        else:
            kept.append(CategoryBucket(title=title, count=count, share=share))
    kept.sort(key=lambda b: (-b.share, b.title))
    if other_count:
        kept.append(CategoryBucket(title=OTHER_BUCKET, count=other_count, share=other_count / total))
    return kept
