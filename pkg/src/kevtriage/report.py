"""Statistical breakdowns over a labeled dataset, emitted as tables.

Every report is a pure function of its inputs.  Shares are stored at
full precision; display rounding to one decimal place happens only at
render time, which is why displayed percentages can sum to 100.1.

No plotting engine lives here.  The CLI layer renders figures from
these tables; other consumers chart them however they wish.

Stable CSV column names:
  breakdown           label,count,share,percent
  top mitigations     rank,mitigation_id,total,high,medium,low
  vendor table        vendor,entries,with_advisories,without_advisories
"""

import csv
import io
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .advisories import Advisory, AdvisoryFormat, RemediationCategory, Specificity
from .attack import MitigationCandidate, Rating
from .catalog import UiRequired
from .errors import EmptyInputError

SHARE_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class BreakdownRow:
    label: str
    count: int
    share: float

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be non-negative")
        if not 0.0 <= self.share <= 1.0:
            raise ValueError("share must lie in [0, 1]")


@dataclass(frozen=True)
class Breakdown:
    name: str
    total: int
    rows: tuple[BreakdownRow, ...]

    def __post_init__(self):
        if sum(r.count for r in self.rows) != self.total:
            raise ValueError("row counts must sum to the dataset size")
        share_sum = sum(r.share for r in self.rows)
        if abs(share_sum - 1.0) > SHARE_SUM_TOLERANCE:
            raise ValueError(f"shares sum to {share_sum!r}")

    def row(self, label: str) -> BreakdownRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


def display_percent(share: float) -> str:
    """One-decimal percentage for display; never mutates stored shares."""
    return f"{share * 100:.1f}"


def _breakdown(name: str, counts: Counter, order: list[str]) -> Breakdown:
    total = sum(counts.values())
    if total == 0:
        raise EmptyInputError(f"{name}: no entries to break down")
    rows = tuple(
        BreakdownRow(label=label, count=counts[label], share=counts[label] / total)
        for label in order
        if counts[label] > 0
    )
    return Breakdown(name=name, total=total, rows=rows)


# --- advisory format ----------------------------------------------------

_FORMAT_ORDER = [
    AdvisoryFormat.WEB_PAGE,
    AdvisoryFormat.CSAF2,
    AdvisoryFormat.CVRF,
    AdvisoryFormat.OTHER_STRUCTURED,
    AdvisoryFormat.NONE_FOUND,
]


def advisory_breakdown(formats: Iterable[AdvisoryFormat]) -> Breakdown:
    """Share of each advisory format; zero-count formats are dropped."""
    counts = Counter(f.value for f in formats)
    return _breakdown("advisory_format", counts, [f.value for f in _FORMAT_ORDER])


# --- remediation availability -------------------------------------------

class RemediationAvailability(str, Enum):
    NO_ADVISORY = "no_advisory"
    NO_WORKAROUND = "no_workaround"
    GENERIC = "generic"
    SPECIFIC = "specific"


_AVAILABILITY_ORDER = [
    RemediationAvailability.NO_ADVISORY,
    RemediationAvailability.NO_WORKAROUND,
    RemediationAvailability.GENERIC,
    RemediationAvailability.SPECIFIC,
]

_WORKAROUND_CATEGORIES = frozenset(
    {RemediationCategory.WORKAROUND, RemediationCategory.MITIGATION}
)


def label_remediation(advisory: Advisory) -> RemediationAvailability:
    """Collapse an advisory into the four availability labels.

    Vendor fixes alone do not count as workarounds: an advisory that
    only says "patch" still lands in NoWorkaround.
    """
    if advisory.format is AdvisoryFormat.NONE_FOUND:
        return RemediationAvailability.NO_ADVISORY
    workarounds = [
        r for r in advisory.remediations
        if r.category in _WORKAROUND_CATEGORIES and r.details
    ]
    if not workarounds:
        return RemediationAvailability.NO_WORKAROUND
    if any(r.specificity is Specificity.DETAILED for r in workarounds):
        return RemediationAvailability.SPECIFIC
    return RemediationAvailability.GENERIC


def alt_remediation_breakdown(
    labels: Iterable[RemediationAvailability],
) -> Breakdown:
    counts = Counter(label.value for label in labels)
    return _breakdown(
        "remediation_availability", counts, [a.value for a in _AVAILABILITY_ORDER]
    )


# --- OT shares ----------------------------------------------------------

OT_PLAUSIBLE = "ot_plausible"
NOT_OT_PLAUSIBLE = "not_ot_plausible"

_UI_ORDER = [UiRequired.NO, UiRequired.YES, UiRequired.UNKNOWN]


@dataclass(frozen=True)
class OtSharesReport:
    """OT plausibility over everything; interaction over both denominators.

    interaction_ot is None when no entry is OT-plausible: the share is
    undefined there, not zero.
    """

    plausible: Breakdown
    interaction_all: Breakdown
    interaction_ot: Breakdown | None


def ot_shares(items: Iterable[tuple[bool, UiRequired]]) -> OtSharesReport:
    items = list(items)
    if not items:
        raise EmptyInputError("ot_shares: no entries")
    plausible_counts = Counter(
        OT_PLAUSIBLE if plausible else NOT_OT_PLAUSIBLE for plausible, _ in items
    )
    plausible = _breakdown(
        "ot_plausibility", plausible_counts, [OT_PLAUSIBLE, NOT_OT_PLAUSIBLE]
    )
    ui_order = [u.value for u in _UI_ORDER]
    interaction_all = _breakdown(
        "user_interaction_all", Counter(ui.value for _, ui in items), ui_order
    )
    ot_subset = [ui for is_ot, ui in items if is_ot]
    interaction_ot = None
    if ot_subset:
        interaction_ot = _breakdown(
            "user_interaction_ot", Counter(ui.value for ui in ot_subset), ui_order
        )
    return OtSharesReport(
        plausible=plausible,
        interaction_all=interaction_all,
        interaction_ot=interaction_ot,
    )


# --- mitigation ranking -------------------------------------------------

@dataclass(frozen=True)
class MitigationRank:
    rank: int
    mitigation_id: str
    total: int
    high: int
    medium: int
    low: int


def top_mitigations(
    candidates: Iterable[MitigationCandidate], n: int = 15
) -> tuple[MitigationRank, ...]:
    """Mitigations by candidate count, ties to the lower id."""
    totals: Counter = Counter()
    by_rating: dict[str, Counter] = {}
    for candidate in candidates:
        if candidate.effectiveness is None:
            raise ValueError(f"candidate {candidate.mitigation_id} is unrated")
        totals[candidate.mitigation_id] += 1
        by_rating.setdefault(candidate.mitigation_id, Counter())[
            candidate.effectiveness
        ] += 1
    ranked = sorted(totals.items(), key=lambda item: (-item[1], item[0]))[:n]
    return tuple(
        MitigationRank(
            rank=i + 1,
            mitigation_id=mitigation_id,
            total=total,
            high=by_rating[mitigation_id][Rating.HIGH],
            medium=by_rating[mitigation_id][Rating.MEDIUM],
            low=by_rating[mitigation_id][Rating.LOW],
        )
        for i, (mitigation_id, total) in enumerate(ranked)
    )


# --- vendor advisory support --------------------------------------------

@dataclass(frozen=True)
class VendorAdvisoryRow:
    vendor: str
    entries: int
    with_advisories: int
    without_advisories: int


def vendor_advisory_table(
    pairs: Iterable[tuple[str, bool]], n: int | None = 15
) -> tuple[VendorAdvisoryRow, ...]:
    """Per-vendor advisory support, top n vendors by entry count."""
    entries: Counter = Counter()
    covered: Counter = Counter()
    for vendor, has_advisory in pairs:
        entries[vendor] += 1
        if has_advisory:
            covered[vendor] += 1
    ranked = sorted(entries.items(), key=lambda item: (-item[1], item[0]))
    if n is not None:
        ranked = ranked[:n]
    return tuple(
        VendorAdvisoryRow(
            vendor=vendor,
            entries=count,
            with_advisories=covered[vendor],
            without_advisories=count - covered[vendor],
        )
        for vendor, count in ranked
    )


# --- rendering ----------------------------------------------------------

def render_breakdown_csv(breakdown: Breakdown) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["label", "count", "share", "percent"])
    for row in breakdown.rows:
        writer.writerow([row.label, row.count, repr(row.share), display_percent(row.share)])
    return out.getvalue()


def render_mitigations_csv(rows: Iterable[MitigationRank]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["rank", "mitigation_id", "total", "high", "medium", "low"])
    for row in rows:
        writer.writerow([row.rank, row.mitigation_id, row.total, row.high, row.medium, row.low])
    return out.getvalue()


def render_vendor_table_csv(rows: Iterable[VendorAdvisoryRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["vendor", "entries", "with_advisories", "without_advisories"])
    for row in rows:
        writer.writerow([row.vendor, row.entries, row.with_advisories, row.without_advisories])
    return out.getvalue()


def breakdown_to_dict(breakdown: Breakdown) -> Mapping:
    return {
        "name": breakdown.name,
        "total": breakdown.total,
        "rows": [
            {
                "label": row.label,
                "count": row.count,
                "share": row.share,
                "percent": display_percent(row.share),
            }
            for row in breakdown.rows
        ],
    }


def ot_shares_to_dict(report: OtSharesReport) -> Mapping:
    return {
        "plausible": breakdown_to_dict(report.plausible),
        "interaction_all": breakdown_to_dict(report.interaction_all),
        "interaction_ot": (
            breakdown_to_dict(report.interaction_ot)
            if report.interaction_ot is not None
            else None
        ),
    }


def mitigations_to_dict(rows: Iterable[MitigationRank]) -> list[Mapping]:
    return [
        {
            "rank": row.rank,
            "mitigation_id": row.mitigation_id,
            "total": row.total,
            "high": row.high,
            "medium": row.medium,
            "low": row.low,
        }
        for row in rows
    ]


def vendor_table_to_dict(rows: Iterable[VendorAdvisoryRow]) -> list[Mapping]:
    return [
        {
            "vendor": row.vendor,
            "entries": row.entries,
            "with_advisories": row.with_advisories,
            "without_advisories": row.without_advisories,
        }
        for row in rows
    ]
