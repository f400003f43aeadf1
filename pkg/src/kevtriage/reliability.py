"""Inter-rater agreement for analyst label sets.

Implements the AC1 agreement coefficient over two-rater contingency
tables, with two chance-agreement normalizations:

* ``PAPER_EQ1``: chance agreement is ``sum_i p_i * (1 - p_i)`` with
  ``p_i = (n_i./N + n_.i/N) / 2``.
* ``GWET_STANDARD``: the same sum divided by ``k - 1``.

The two modes coincide for binary attributes (k = 2), which dominate the
label sets this toolkit handles.  Note that the un-normalized form can
drop below -1 for k >= 3 (e.g. a zero-diagonal cyclic table), while the
``k - 1`` form stays within [-1, 1]; callers who need the bounded
statistic for multi-category attributes should use ``GWET_STANDARD``.

Validation-sample selection uses a SplitMix64 generator (64-bit state)
so that sampled id sets are reproducible across platforms and Python
versions; the algorithm name is stamped into report provenance.
"""

import csv
import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DegeneratePeError, EmptyInputError, NoOverlapError

SAMPLING_ALGORITHM = "splitmix64"


class Ac1Mode(str, Enum):
    """Chance-agreement normalization variants."""

    PAPER_EQ1 = "paper_eq1"
    GWET_STANDARD = "gwet_standard"


@dataclass(frozen=True)
class RatingRecord:
    """One analyst label: (item, rater, attribute) -> category."""

    item_id: str
    rater_id: str
    attribute: str
    label: str


@dataclass(frozen=True)
class ContingencyTable:
    """k x k cross-tabulation of two raters' labels on common items.

    Rows index rater A's category, columns rater B's.  Row/column totals
    are derived on demand, never stored.
    """

    categories: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]
    n_items: int

    def __post_init__(self):
        k = len(self.categories)
        if k < 2:
            raise ValueError("contingency table needs at least 2 categories")
        if len(self.counts) != k or any(len(row) != k for row in self.counts):
            raise ValueError("counts must be a k x k matrix")
        if any(c < 0 for row in self.counts for c in row):
            raise ValueError("counts must be non-negative")
        total = sum(c for row in self.counts for c in row)
        if total != self.n_items:
            raise ValueError(f"counts sum {total} != declared N {self.n_items}")

    @property
    def k(self) -> int:
        return len(self.categories)

    def row_totals(self) -> list[int]:
        return [sum(row) for row in self.counts]

    def col_totals(self) -> list[int]:
        return [sum(self.counts[i][j] for i in range(self.k)) for j in range(self.k)]


def build_contingency(
    ratings: Iterable[RatingRecord],
    attribute: str,
    rater_a: str,
    rater_b: str,
) -> ContingencyTable:
    """Cross-tabulate two raters over the items both rated for an attribute.

    Items rated by only one rater are excluded.  Raises NoOverlapError
    when the raters share no items.
    """
    by_a: dict[str, str] = {}
    by_b: dict[str, str] = {}
    for rec in ratings:
        if rec.attribute != attribute:
            continue
        if rec.rater_id == rater_a:
            by_a[rec.item_id] = rec.label
        elif rec.rater_id == rater_b:
            by_b[rec.item_id] = rec.label
    common = sorted(set(by_a) & set(by_b))
    if not common:
        raise NoOverlapError(
            f"raters {rater_a!r} and {rater_b!r} share no items for {attribute!r}"
        )
    categories = sorted({by_a[i] for i in common} | {by_b[i] for i in common})
    if len(categories) < 2:
        # A single observed category still forms a valid (degenerate) 2x2
        # table; pad with a placeholder so the matrix shape holds.
        categories = categories + ["__other__"]
    index = {cat: i for i, cat in enumerate(categories)}
    k = len(categories)
    counts = [[0] * k for _ in range(k)]
    for item in common:
        counts[index[by_a[item]]][index[by_b[item]]] += 1
    return ContingencyTable(
        categories=tuple(categories),
        counts=tuple(tuple(row) for row in counts),
        n_items=len(common),
    )


def observed_agreement(table: ContingencyTable) -> float:
    """Fraction of common items on which both raters chose the same label."""
    if table.n_items <= 0:
        raise ValueError("observed agreement undefined for empty table")
    diagonal = sum(table.counts[i][i] for i in range(table.k))
    return diagonal / table.n_items
def chance_agreement(table: ContingencyTable, mode: Ac1Mode = Ac1Mode.PAPER_EQ1) -> float:
    """Chance-agreement term for the AC1 coefficient."""
    n = table.n_items
    rows = table.row_totals()
    cols = table.col_totals()
    total = 0.0
    for i in range(table.k):
        p_i = 0.5 * (rows[i] / n + cols[i] / n)
        total += p_i * (1.0 - p_i)
    if mode is Ac1Mode.GWET_STANDARD:
        total /= table.k - 1
    return total


def ac1(table: ContingencyTable, mode: Ac1Mode = Ac1Mode.PAPER_EQ1) -> float:
    """Chance-corrected agreement coefficient (AC1) for a two-rater table."""
    if table.n_items <= 0:
        raise ValueError("AC1 undefined for empty table")
    p_o = observed_agreement(table)
    p_e = chance_agreement(table, mode)
    if p_e >= 1.0:
        raise DegeneratePeError(f"chance agreement saturated (Pe={p_e})")
    return (p_o - p_e) / (1.0 - p_e)


class _SplitMix64:
    """Tiny deterministic generator with 64-bit state."""

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        # Rejection sampling keeps the draw unbiased.
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            value = self.next_u64()
            if value < limit:
                return value % bound


def sample_validation_set(item_ids: Sequence[str], fraction: float, seed: int) -> list[str]:
    """Draw ceil(fraction * len(items)) ids without replacement, sorted.

    Deterministic for a fixed seed; duplicates in the input are collapsed
    before drawing.
    """
    if not item_ids:
        raise EmptyInputError("no items to sample from")
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    pool = sorted(set(item_ids))
    take = math.ceil(fraction * len(pool))
    rng = _SplitMix64(seed)
    # Partial Fisher-Yates: the first `take` slots end up with the sample.
    for i in range(take):
        j = i + rng.below(len(pool) - i)
        pool[i], pool[j] = pool[j], pool[i]
    return sorted(pool[:take])


# --- label-set plumbing -------------------------------------------------

LABEL_COLUMNS = ("item_id", "rater_id", "attribute", "label")


def read_labels_csv(path: str | Path) -> list[RatingRecord]:
    """Load a label set from CSV with columns item_id, rater_id, attribute, label."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(LABEL_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"labels file missing columns: {sorted(missing)}")
        for row in reader:
            records.append(
                RatingRecord(
                    item_id=row["item_id"].strip(),
                    rater_id=row["rater_id"].strip(),
                    attribute=row["attribute"].strip(),
                    label=row["label"].strip(),
                )
            )
    return records


@dataclass(frozen=True)
class AgreementRow:
    """Per-rater-pair agreement summary for one attribute."""

    attribute: str
    rater_a: str
    rater_b: str
    n_items: int
    k: int
    p_o: float
    p_e: float
    ac1: float


@dataclass(frozen=True)
class AttributeReport:
    """Agreement rows for every rater pair plus their pooled mean.

    Pooling over more than two raters is the unweighted mean across all
    pairs; the choice is recorded so consumers can tell how the pooled
    figure was formed.
    """

    attribute: str
    mode: Ac1Mode
    rows: tuple[AgreementRow, ...]
    pooled_ac1: float
    pooling: str = "mean-over-pairs"
    sampling_algorithm: str = SAMPLING_ALGORITHM


def attribute_report(
    ratings: Iterable[RatingRecord],
    attribute: str,
    mode: Ac1Mode = Ac1Mode.PAPER_EQ1,
) -> AttributeReport:
    """Compute agreement for every rater pair that overlaps on an attribute."""
    ratings = list(ratings)
    raters = sorted({r.rater_id for r in ratings if r.attribute == attribute})
    if len(raters) < 2:
        raise NoOverlapError(f"need at least two raters for {attribute!r}")
    rows = []
    for rater_a, rater_b in combinations(raters, 2):
        try:
            table = build_contingency(ratings, attribute, rater_a, rater_b)
        except NoOverlapError:
            continue
        rows.append(
            AgreementRow(
                attribute=attribute,
                rater_a=rater_a,
                rater_b=rater_b,
                n_items=table.n_items,
                k=table.k,
                p_o=observed_agreement(table),
                p_e=chance_agreement(table, mode),
                ac1=ac1(table, mode),
            )
        )
    if not rows:
        raise NoOverlapError(f"no rater pair overlaps for {attribute!r}")
    pooled = sum(row.ac1 for row in rows) / len(rows)
    return AttributeReport(attribute=attribute, mode=mode, rows=tuple(rows), pooled_ac1=pooled)
