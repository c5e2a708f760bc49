import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorlens.data_table import (
    ACTIVE,
    SUPPLEMENTARY,
    ClusterScenario,
    RoleAssignment,
    TableError,
    column_profile,
    load_csv,
    finance_scenario,
    role_assignment_of,
    row_profile,
    save_csv,
    skipped_columns,
    synth_fixture,
)

from .conftest import make_table
from .oracles import fraction_profile


def write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# -- load_csv ------------------------------------------------------------------


def test_finance_fixture_shape(tmp_path, finance_table):
    p = tmp_path / "finance.csv"
    save_csv(finance_table, p)
    roles = RoleAssignment(supplementary=finance_table.supplementary_col_labels)
    t = load_csv(p, roles)
    assert t.shape == (155, 12)
    assert len(t.active_rows) == 155
    assert len(t.active_cols) == 8


def test_negative_active_value(tmp_path):
    p = write(tmp_path, "id,a,b\nx,1,2\ny,-5,3\nz,2,2\n")
    with pytest.raises(TableError, match="negative active value"):
        load_csv(p)


def test_negative_supplementary_value_is_allowed(tmp_path):
    p = write(tmp_path, "id,a,b,s\nx,1,2,-3\ny,5,3,4\nz,2,2,1\n")
    t = load_csv(p, RoleAssignment(supplementary=("s",)))
    assert t.values[0, 2] == -3


def test_all_zero_row_dropped_with_warning(tmp_path):
    p = write(tmp_path, "id,a,b\nx,1,2\nzero,0,0\ny,5,3\n")
    t = load_csv(p)
    assert t.short_labels == ("x", "y")
    assert any("zero" in w for w in t.warnings)


def test_missing_active_value_drops_row(tmp_path):
    p = write(tmp_path, "id,a,b\nx,1,2\ngap,,4\ny,5,3\nz,1,1\n")
    t = load_csv(p)
    assert "gap" not in t.short_labels
    assert any("missing active" in w for w in t.warnings)


def test_missing_supplementary_value_flags_column(tmp_path):
    p = write(tmp_path, "id,a,b,s\nx,1,2,NA\ny,5,3,4\nz,1,1,2\n")
    t = load_csv(p, RoleAssignment(supplementary=("s",)))
    assert t.shape == (3, 3)
    assert skipped_columns(t) == ("s",)
    assert any("projection skipped" in w for w in t.warnings)


@pytest.mark.parametrize(
    "text, msg",
    [
        ("id,a,b\nx,1,2\nx,3,4\ny,1,1\n", "duplicate entity"),
        ("id,a,b\nx,1,2\ny,3\n", "malformed"),
        ("id,a,b\nx,1,abc\ny,3,4\n", "malformed"),
        ("", "header"),
        ("id,a,b\nx,1,0\ny,3,0\n", "empty active column"),
        ("id,a,b\nx,1,2\n", "at least 2 active rows"),
    ],
)
def test_load_errors(tmp_path, text, msg):
    with pytest.raises(TableError, match=msg):
        load_csv(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(TableError):
        load_csv(tmp_path / "nope.csv")


def test_unknown_role_column(tmp_path):
    p = write(tmp_path, "id,a,b\nx,1,2\ny,3,4\n")
    with pytest.raises(TableError, match="unknown columns"):
        load_csv(p, RoleAssignment(supplementary=("zz",)))


def test_overlapping_roles_rejected():
    with pytest.raises(TableError, match="both active and supplementary"):
        RoleAssignment(active=("a", "b"), supplementary=("b",))


def test_full_names_and_active_subset(tmp_path):
    p = write(tmp_path, "id,name,a,b,c,d\nx,Ex Uni,1,2,9,1\ny,Why Uni,3,4,9,2\n")
    t = load_csv(p, RoleAssignment(active=("a", "b"), supplementary=("d",), full_names=True))
    assert t.entity_labels == (("x", "Ex Uni"), ("y", "Why Uni"))
    assert t.attribute_labels == ("a", "b", "d")
    assert t.attribute_roles == (ACTIVE, ACTIVE, SUPPLEMENTARY)


def test_supplementary_rows(tmp_path):
    p = write(tmp_path, "id,a,b\nx,1,2\ny,3,4\nz,2,2\n")
    t = load_csv(p, RoleAssignment(supplementary_rows=("z",)))
    assert t.supplementary_row_labels == ("z",)
    assert t.active_row_labels == ("x", "y")


def test_table_is_read_only(finance_table):
    with pytest.raises(ValueError):
        finance_table.values[0, 0] = 1.0


# -- profiles ------------------------------------------------------------------


def test_row_profile_simple():
    t = make_table([[2, 2, 4], [1, 1, 1]])
    pr = row_profile(t, 0)
    np.testing.assert_array_equal(pr.weights, [0.25, 0.25, 0.5])
    assert pr.parent_mass == pytest.approx(8 / 11, abs=1e-15)


def test_row_equal_to_margins_is_average_profile():
    t = make_table([[1, 2, 3], [2, 4, 6], [3, 1, 5]])
    c = t.values.sum(axis=0)
    t2 = make_table(np.vstack([t.values, c]))
    np.testing.assert_allclose(row_profile(t2, 3).weights, c / c.sum(), atol=1e-15)


def test_row_profile_matches_rational_oracle(finance_table):
    for i in (0, 77, 154):
        row = finance_table.values[i, finance_table.active_cols]
        exact = fraction_profile([int(v) for v in row])
        pr = row_profile(finance_table, i)
        for w, e in zip(pr.weights, exact):
            assert abs(Fraction(w) - e) < Fraction(1, 10**14)
        total = Fraction(int(finance_table.active_block.sum()))
        assert abs(Fraction(pr.parent_mass) - Fraction(int(row.sum())) / total) < Fraction(1, 10**15)


def test_column_profile_simple():
    t = make_table([[1, 5], [3, 5]])
    np.testing.assert_array_equal(column_profile(t, 0).weights, [0.25, 0.75])


def test_uniform_column():
    t = make_table([[1, 4], [1, 2], [1, 7], [1, 1]])
    np.testing.assert_allclose(column_profile(t, 0).weights, [0.25] * 4, atol=0)


def test_supplementary_column_profile_matches_oracle(finance_table):
    j = finance_table.attribute_index("Total borrowings as % of income")
    col = finance_table.values[:, j]
    exact = fraction_profile(col.tolist())
    pr = column_profile(finance_table, j)
    assert pr.parent_mass is None
    assert max(abs(Fraction(w) - e) for w, e in zip(pr.weights, exact)) < Fraction(1, 10**15)


def test_profile_errors():
    t = make_table([[1, 2], [3, 4]])
    with pytest.raises(IndexError):
        row_profile(t, 2)
    with pytest.raises(IndexError):
        column_profile(t, -1)


def test_profile_sums_and_masses(finance_table):
    t = finance_table
    for i in range(t.shape[0]):
        assert math.fsum(row_profile(t, i).weights) == pytest.approx(1, abs=1e-12)
    for j in t.active_cols:
        assert math.fsum(column_profile(t, j).weights) == pytest.approx(1, abs=1e-12)
    assert math.fsum(row_profile(t, i).parent_mass for i in range(t.shape[0])) == pytest.approx(1, abs=1e-12)
    assert math.fsum(column_profile(t, j).parent_mass for j in t.active_cols) == pytest.approx(1, abs=1e-12)


# -- round trip ---------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(
    st.integers(2, 8),
    st.integers(2, 5),
    st.integers(0, 2**31),
    st.booleans(),
)
def test_save_load_round_trip(tmp_path_factory, n, m, seed, with_supp):
    rng = np.random.default_rng(seed)
    vals = rng.uniform(0.1, 1e4, size=(n, m + 1))
    vals[:, -1] = rng.normal(size=n) * 1e3 if with_supp else vals[:, -1]
    roles = [ACTIVE] * m + [SUPPLEMENTARY if with_supp else ACTIVE]
    t = make_table(vals, col_roles=roles)
    p = tmp_path_factory.mktemp("rt") / "t.csv"
    save_csv(t, p, full_names=True)
    back = load_csv(p, role_assignment_of(t, full_names=True))
    assert back.same_as(t)


# -- synthetic fixtures ----------------------------------------------------------------


def test_synth_records_planted_labels():
    scenario = ClusterScenario(group_sizes=(50, 50, 50), noise=0.02, separation=10)
    t = synth_fixture(scenario, seed=3)
    assert t.shape == (150, 8)
    assert t.ground_truth == tuple([1] * 50 + [2] * 50 + [3] * 50)


def test_synth_deterministic(tmp_path):
    scenario = finance_scenario()
    a, b = synth_fixture(scenario, seed=11), synth_fixture(scenario, seed=11)
    save_csv(a, tmp_path / "a.csv")
    save_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert synth_fixture(scenario, seed=12).values.tolist() != a.values.tolist()


@pytest.mark.parametrize(
    "kwargs",
    [dict(group_sizes=()), dict(group_sizes=(5,), noise=-0.1), dict(group_sizes=(0, 4))],
)
def test_synth_rejects_bad_scenario(kwargs):
    with pytest.raises(ValueError):
        ClusterScenario(**kwargs)


def test_finance_fixture_layout(finance_table):
    t = finance_table
    assert t.shape == (155, 12)
    assert t.supplementary_col_labels[-1] == "Total borrowings as % of income"
    # net surplus can be negative for some entities but its total stays positive
    j = t.attribute_index("Net surplus as % of income")
    assert t.values[:, j].sum() > 0
