"""Agreement-statistic tests, anchored to an independent oracle.

The oracle below recomputes AC1 straight from the definition with its
own marginal bookkeeping, so any drift in the library implementation
shows up as a mismatch rather than a silently shared bug.
"""

import random
from itertools import permutations

import pytest

from kevtriage.errors import EmptyInputError, NoOverlapError
from kevtriage.reliability import (
    Ac1Mode,
    AgreementRow,
    ContingencyTable,
    RatingRecord,
    _SplitMix64,
    ac1,
    attribute_report,
    build_contingency,
    chance_agreement,
    observed_agreement,
    read_labels_csv,
    sample_validation_set,
)


def _oracle_ac1(counts, divide_by_k_minus_1):
    """Straight-from-definition recomputation, separate bookkeeping."""
    n = sum(sum(row) for row in counts)
    k = len(counts)
    po = sum(counts[i][i] for i in range(k)) / n
    pe = 0.0
    for i in range(k):
        row_mass = sum(counts[i])
        col_mass = sum(counts[r][i] for r in range(k))
        pi = (row_mass + col_mass) / (2.0 * n)
        pe += pi - pi * pi
    if divide_by_k_minus_1:
        pe = pe / (k - 1)
    return (po - pe) / (1.0 - pe)


def _table(counts, names=None):
    k = len(counts)
    names = names or tuple(f"c{i}" for i in range(k))
    return ContingencyTable(
        categories=tuple(names),
        counts=tuple(tuple(row) for row in counts),
        n_items=sum(sum(row) for row in counts),
    )


def _random_table(rng, k, max_cell=9):
    while True:
        counts = [[rng.randint(0, max_cell) for _ in range(k)] for _ in range(k)]
        if sum(sum(row) for row in counts) > 0:
            return counts


# --- worked example and definition checks -------------------------------


def test_worked_example_frozen_values():
    # 10 items, agreement on 9: known AC1 of 0.84.
    table = _table([[7, 1], [0, 2]], names=("yes", "no"))
    assert observed_agreement(table) == pytest.approx(0.9, abs=1e-15)
    assert chance_agreement(table, Ac1Mode.PAPER_EQ1) == pytest.approx(0.375, abs=1e-15)
    assert ac1(table, Ac1Mode.PAPER_EQ1) == pytest.approx(0.84, abs=1e-12)
    # Binary tables: both normalizations coincide.
    assert ac1(table, Ac1Mode.GWET_STANDARD) == pytest.approx(0.84, abs=1e-12)


def test_exhaustive_small_binary_tables_match_oracle():
    # Every 2x2 table with N <= 9, both modes.
    limit = 9
    checked = 0
    for a in range(limit + 1):
        for b in range(limit + 1 - a):
            for c in range(limit + 1 - a - b):
                for d in range(limit + 1 - a - b - c):
                    if a + b + c + d == 0:
                        continue
                    counts = [[a, b], [c, d]]
                    table = _table(counts)
                    for mode, divide in (
                        (Ac1Mode.PAPER_EQ1, False),
                        (Ac1Mode.GWET_STANDARD, True),
                    ):
                        expected = _oracle_ac1(counts, divide)
                        assert abs(ac1(table, mode) - expected) < 1e-12
                    checked += 1
    assert checked > 500


@pytest.mark.parametrize("k", [3, 4, 5])
def test_random_multicategory_tables_match_oracle(k):
    rng = random.Random(1000 + k)
    for _ in range(300):
        counts = _random_table(rng, k)
        table = _table(counts)
        assert ac1(table, Ac1Mode.PAPER_EQ1) == pytest.approx(
            _oracle_ac1(counts, False), abs=1e-12
        )
        assert ac1(table, Ac1Mode.GWET_STANDARD) == pytest.approx(
            _oracle_ac1(counts, True), abs=1e-12
        )


def test_mode_divergence_uniform_marginals_k3():
    # Uniform marginals at k=3: chance term 2/3 un-normalized, 1/3 divided.
    counts = [[2, 2, 2], [2, 2, 2], [2, 2, 2]]
    table = _table(counts)
    assert chance_agreement(table, Ac1Mode.PAPER_EQ1) == pytest.approx(2 / 3, abs=1e-15)
    assert chance_agreement(table, Ac1Mode.GWET_STANDARD) == pytest.approx(1 / 3, abs=1e-15)


def test_cyclic_zero_diagonal_table_escapes_minus_one_in_eq1_mode():
    # Zero diagonal with uniform marginals: the un-normalized form lands
    # at -2, the k-1 form stays at -0.5.  This is why the bounded-range
    # guarantee is per-mode for k >= 3.
    counts = [[0, 4, 0], [0, 0, 4], [4, 0, 0]]
    table = _table(counts)
    assert ac1(table, Ac1Mode.PAPER_EQ1) == pytest.approx(-2.0, abs=1e-12)
    assert ac1(table, Ac1Mode.GWET_STANDARD) == pytest.approx(-0.5, abs=1e-12)


# --- invariants ---------------------------------------------------------


def test_perfect_agreement_iff_unit_coefficient():
    rng = random.Random(77)
    for _ in range(400):
        k = rng.choice([2, 3, 4])
        counts = _random_table(rng, k)
        table = _table(counts)
        po = observed_agreement(table)
        for mode in Ac1Mode:
            value = ac1(table, mode)
            if po == 1.0:
                assert value == pytest.approx(1.0, abs=1e-12)
            else:
                assert value < 1.0 - 1e-15


def test_bounded_range_for_supported_modes():
    # Binary tables in either mode, any-k tables in the divided mode.
    rng = random.Random(78)
    for _ in range(400):
        counts2 = _random_table(rng, 2)
        for mode in Ac1Mode:
            assert -1.0 - 1e-12 <= ac1(_table(counts2), mode) <= 1.0 + 1e-12
        counts_k = _random_table(rng, rng.choice([3, 4, 5]))
        value = ac1(_table(counts_k), Ac1Mode.GWET_STANDARD)
        assert -1.0 - 1e-12 <= value <= 1.0 + 1e-12


def test_category_permutation_invariance():
    rng = random.Random(79)
    for _ in range(60):
        k = rng.choice([2, 3, 4])
        counts = _random_table(rng, k)
        base = {mode: ac1(_table(counts), mode) for mode in Ac1Mode}
        for perm in permutations(range(k)):
            shuffled = [[counts[perm[i]][perm[j]] for j in range(k)] for i in range(k)]
            for mode in Ac1Mode:
                assert ac1(_table(shuffled), mode) == pytest.approx(base[mode], abs=1e-12)


def test_rater_swap_invariance():
    rng = random.Random(80)
    for _ in range(200):
        k = rng.choice([2, 3, 4])
        counts = _random_table(rng, k)
        transposed = [[counts[j][i] for j in range(k)] for i in range(k)]
        for mode in Ac1Mode:
            assert ac1(_table(transposed), mode) == pytest.approx(
                ac1(_table(counts), mode), abs=1e-12
            )


def test_chance_agreement_never_saturates():
    # Marginal shares sum to one, so the chance term tops out at 1 - 1/k.
    rng = random.Random(81)
    for _ in range(300):
        k = rng.choice([2, 3, 4, 5])
        table = _table(_random_table(rng, k))
        assert chance_agreement(table, Ac1Mode.PAPER_EQ1) <= 1.0 - 1.0 / k + 1e-12


# --- table construction -------------------------------------------------


def test_table_shape_validation():
    with pytest.raises(ValueError):
        ContingencyTable(categories=("a",), counts=((1,),), n_items=1)
    with pytest.raises(ValueError):
        ContingencyTable(categories=("a", "b"), counts=((1, 0),), n_items=1)
    with pytest.raises(ValueError):
        ContingencyTable(categories=("a", "b"), counts=((1, 0), (0, -1)), n_items=0)
    with pytest.raises(ValueError):
        ContingencyTable(categories=("a", "b"), counts=((1, 0), (0, 1)), n_items=3)


def _ratings(rows):
    return [RatingRecord(*row) for row in rows]


def test_build_contingency_filters_and_orders():
    records = _ratings(
        [
            ("v1", "r1", "fmt", "yes"),
            ("v1", "r2", "fmt", "yes"),
            ("v2", "r1", "fmt", "no"),
            ("v2", "r2", "fmt", "yes"),
            ("v3", "r1", "fmt", "no"),  # only rater 1 saw v3
            ("v4", "r2", "fmt", "no"),  # only rater 2 saw v4
            ("v1", "r1", "other", "zzz"),  # different attribute
        ]
    )
    table = build_contingency(records, "fmt", "r1", "r2")
    assert table.categories == ("no", "yes")
    assert table.n_items == 2
    assert table.counts == ((0, 1), (0, 1))


def test_build_contingency_single_category_pads():
    records = _ratings([("v1", "r1", "fmt", "yes"), ("v1", "r2", "fmt", "yes")])
    table = build_contingency(records, "fmt", "r1", "r2")
    assert table.k == 2
    assert ac1(table) == pytest.approx(1.0, abs=1e-12)


def test_build_contingency_no_overlap():
    records = _ratings([("v1", "r1", "fmt", "yes"), ("v2", "r2", "fmt", "yes")])
    with pytest.raises(NoOverlapError):
        build_contingency(records, "fmt", "r1", "r2")


# --- sampling -----------------------------------------------------------


def test_splitmix64_reference_vectors():
    # Published outputs for a zero seed.
    rng = _SplitMix64(0)
    assert rng.next_u64() == 0xE220A8397B1DCDAF
    assert rng.next_u64() == 0x6E789E6AA1B965F4
    assert rng.next_u64() == 0x06C45D188009454F


def test_sample_is_deterministic_and_sorted():
    ids = [f"CVE-2024-{i:04d}" for i in range(100)]
    first = sample_validation_set(ids, 0.10, seed=42)
    second = sample_validation_set(ids, 0.10, seed=42)
    assert first == second
    assert first == sorted(first)
    assert len(first) == 10
    assert len(set(first)) == 10
    assert set(first) <= set(ids)


def test_sample_ceiling_and_full_fraction():
    ids = [f"id{i}" for i in range(7)]
    assert len(sample_validation_set(ids, 0.10, seed=1)) == 1
    assert sample_validation_set(ids, 1.0, seed=1) == sorted(ids)
    # 10% of 41 rounds up to 5.
    assert len(sample_validation_set([str(i) for i in range(41)], 0.10, seed=9)) == 5


def test_sample_seed_sensitivity_and_input_order_independence():
    ids = [f"id{i:03d}" for i in range(200)]
    base = sample_validation_set(ids, 0.10, seed=5)
    shuffled = list(ids)
    random.Random(0).shuffle(shuffled)
    assert sample_validation_set(shuffled, 0.10, seed=5) == base
    assert sample_validation_set(ids + ids, 0.10, seed=5) == base
    others = {tuple(sample_validation_set(ids, 0.10, seed=s)) for s in range(20)}
    assert len(others) > 1


def test_sample_rejects_bad_input():
    with pytest.raises(EmptyInputError):
        sample_validation_set([], 0.10, seed=1)
    with pytest.raises(ValueError):
        sample_validation_set(["a"], 0.0, seed=1)
    with pytest.raises(ValueError):
        sample_validation_set(["a"], 1.5, seed=1)


# --- label files and reports --------------------------------------------


def test_labels_csv_round_trip(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text(
        "item_id,rater_id,attribute,label\n"
        "CVE-2024-0001,r1,format,csaf2\n"
        "CVE-2024-0001,r2,format,csaf2\n",
        encoding="utf-8",
    )
    records = read_labels_csv(path)
    assert records == [
        RatingRecord("CVE-2024-0001", "r1", "format", "csaf2"),
        RatingRecord("CVE-2024-0001", "r2", "format", "csaf2"),
    ]


def test_labels_csv_missing_column(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text("item_id,rater_id,label\nx,r1,yes\n", encoding="utf-8")
    with pytest.raises(ValueError, match="attribute"):
        read_labels_csv(path)


def test_attribute_report_pools_mean_over_pairs():
    records = []
    # Three raters, ten items; r3 disagrees with the others on item 9.
    for i in range(10):
        records.append(RatingRecord(f"v{i}", "r1", "fmt", "yes" if i < 9 else "no"))
        records.append(RatingRecord(f"v{i}", "r2", "fmt", "yes" if i < 9 else "no"))
        records.append(RatingRecord(f"v{i}", "r3", "fmt", "yes"))
    report = attribute_report(records, "fmt")
    assert [(r.rater_a, r.rater_b) for r in report.rows] == [
        ("r1", "r2"),
        ("r1", "r3"),
        ("r2", "r3"),
    ]
    expected = sum(r.ac1 for r in report.rows) / 3
    assert report.pooled_ac1 == pytest.approx(expected, abs=1e-15)
    assert report.pooling == "mean-over-pairs"
    assert report.sampling_algorithm == "splitmix64"
    assert report.rows[0].ac1 == pytest.approx(1.0, abs=1e-12)


def test_attribute_report_requires_two_raters():
    records = _ratings([("v1", "r1", "fmt", "yes")])
    with pytest.raises(NoOverlapError):
        attribute_report(records, "fmt")


def test_attribute_report_skips_disjoint_pairs():
    records = _ratings(
        [
            ("v1", "r1", "fmt", "yes"),
            ("v1", "r2", "fmt", "yes"),
            ("v2", "r1", "fmt", "no"),
            ("v2", "r2", "fmt", "no"),
            ("v9", "r3", "fmt", "yes"),  # r3 overlaps nobody
        ]
    )
    report = attribute_report(records, "fmt")
    assert [(r.rater_a, r.rater_b) for r in report.rows] == [("r1", "r2")]
    assert isinstance(report.rows[0], AgreementRow)
