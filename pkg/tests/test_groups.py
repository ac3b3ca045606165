import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdouble.errors import GroupValidationError
from qdouble.groups import (
    FiniteGroup,
    anyon_labels,
    build_group,
    burnside_character_table,
    character_table,
    check_irrep,
    commuting_pair_orbits,
    count_anyons,
    count_torus_gsd,
    cyclic,
    fusion_rules,
    fusion_table,
    numerical_irreps,
    verify_orthogonality,
)

from conftest import BUILTINS, group


@pytest.mark.parametrize("name", BUILTINS)
def test_group_axioms(name):
    g = group(name)
    n = g.order
    m = g.mult
    assert np.all(m[0] == np.arange(n))
    assert np.all(m[:, 0] == np.arange(n))
    assert np.all(m[np.arange(n), g.inv] == 0)
    a, b, c = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    assert np.all(m[m[a, b], c] == m[a, m[b, c]])


@pytest.mark.parametrize("name", BUILTINS)
def test_class_equation(name):
    g = group(name)
    assert sum(c.size for c in g.classes) == g.order
    for c in g.classes:
        assert c.size * len(c.centralizer) == g.order
        for i, p in enumerate(c.transversal):
            assert g.conj(p, c.representative) == c.members[i]


@pytest.mark.parametrize("name", BUILTINS)
def test_irreps_are_unitary_homomorphisms(name):
    g = group(name)
    for rep in g.irreps:
        check_irrep(g, rep)
        mats = rep.matrices
        for a, b in itertools.product(range(g.order), repeat=2):
            assert np.allclose(mats[a] @ mats[b], mats[g.mul(a, b)], atol=1e-10)
        for a in range(g.order):
            assert np.allclose(mats[a] @ mats[a].conj().T, np.eye(rep.dim), atol=1e-10)


@pytest.mark.parametrize("name", ["Z2", "Z3", "S3", "D4", "Q8", "D5"])
def test_orthogonality(name):
    g = group(name)
    rep = verify_orthogonality(g)
    assert rep.ok
    assert max(rep.max_row_deviation, rep.max_column_deviation, rep.max_regular_deviation) <= 1e-10
    assert rep.sum_dim_squared == g.order
    # matrix-element form: sum_g D_ij(g) D'_kl(g)^* = |G|/d delta delta delta
    for a, ra in enumerate(g.irreps):
        for b, rb in enumerate(g.irreps):
            got = np.einsum("gij,gkl->ijkl", ra.matrices, rb.matrices.conj())
            want = np.zeros_like(got)
            if a == b:
                d = ra.dim
                want = np.einsum("ik,jl->ijkl", np.eye(d), np.eye(d)) * g.order / d
            assert np.abs(got - want).max() <= 1e-10


@pytest.mark.parametrize("name", ["S3", "D4", "Q8", "D5", "Z3"])
def test_character_table_matches_class_algebra_oracle(name):
    g = group(name)
    ours = character_table(g)
    oracle = burnside_character_table(g)
    # rows may come in a different order; compare as sets of rows
    for row in ours:
        assert min(np.abs(oracle - row).max(axis=1)) <= 1e-8


def test_numerical_irreps_agree_with_closed_forms():
    g = group("D4")
    num = numerical_irreps(g)
    assert sorted(r.dim for r in num) == [1, 1, 1, 1, 2]
    for rep in num:
        check_irrep(g, rep)


# [DERIVED: class algebra (Burnside) character table, independent of the closed-form irreps]
S3_CHARACTERS = {"1": [1, 1, 1], "s": [1, 1, -1], "pi": [2, -1, 0]}


def test_s3_character_table_frozen():
    g = group("S3")
    reps = {r.label: r for r in g.irreps}
    for label, chars in S3_CHARACTERS.items():
        got = [reps[label].character[c.representative].real for c in g.classes]
        assert np.allclose(got, chars)


@pytest.mark.parametrize("name,expected", [("Z1", 1), ("Z2", 4), ("Z3", 9), ("S3", 8), ("D4", 22), ("Q8", 22), ("D5", 16)])
def test_gsd_formula(name, expected):
    g = group(name)
    assert count_torus_gsd(g) == expected
    assert count_anyons(g) == expected
    assert len(anyon_labels(g)) == expected


def test_d4_ground_state_labels_from_text():
    """The 22 (a, b) holonomy labels listed for D4 are commuting and pairwise inequivalent."""
    g = group("D4")
    e, c, c2, c3, t, tc, tc2, tc3 = range(8)
    listed = [
        (e, e), (e, c), (e, c2), (e, t), (e, tc),
        (c, e), (c, c), (c, c2), (c, c3),
        (c2, e), (c2, c), (c2, c2), (c2, t), (c2, tc),
        (t, e), (t, t), (t, c2), (t, tc2),
        (tc, e), (tc, tc), (tc, tc3), (tc, c2),
    ]
    assert all(g.commute(a, b) for a, b in listed)
    orbit_of = {}
    for idx, (rep, _) in enumerate(commuting_pair_orbits(g)):
        for h in range(g.order):
            orbit_of[(g.conj(h, rep[0]), g.conj(h, rep[1]))] = idx
    assert len({orbit_of[p] for p in listed}) == 22


def test_fusion_s3():
    rules = fusion_rules(group("S3"))
    assert rules[("s", "s")] == ["1"]
    assert sorted(rules[("pi", "pi")]) == ["1", "pi", "s"]
    assert rules[("s", "pi")] == ["pi"]


def test_fusion_d4_one_dimensional_part_is_klein():
    rules = fusion_rules(group("D4"))
    for a in ("s1", "s2", "s3"):
        assert rules[(a, a)] == ["1"]
    assert sorted(rules[("pi", "pi")]) == ["1", "s1", "s2", "s3"]


@pytest.mark.parametrize("name", ["S3", "D4", "Q8", "Z3"])
def test_fusion_dimension_count(name):
    g = group(name)
    n = fusion_table(g)
    dims = np.array([r.dim for r in g.irreps])
    assert np.array_equal(np.einsum("abc,c->ab", n, dims), np.outer(dims, dims))
    assert np.array_equal(n, n.transpose(1, 0, 2))


def test_validation_reports_offending_entry():
    table = np.array([[0, 1], [1, 1]])
    with pytest.raises(GroupValidationError):
        FiniteGroup(table)
    with pytest.raises(GroupValidationError):
        build_group("D2")
    with pytest.raises(GroupValidationError):
        build_group({"order": 3, "table": [[0, 1], [1, 0]]})


def test_table_round_trip():
    g = group("S3")
    again = build_group(g.to_json())
    assert np.array_equal(again.mult, g.mult)
    assert count_torus_gsd(again) == 8


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=1, max_value=12))
def test_cyclic_gsd_is_n_squared(n):
    assert count_torus_gsd(cyclic(n)) == n * n


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=3, max_value=8))
def test_dihedral_sum_of_squares(n):
    g = build_group(f"D{n}")
    assert sum(r.dim**2 for r in g.irreps) == 2 * n
    assert len(g.irreps) == len(g.classes)
