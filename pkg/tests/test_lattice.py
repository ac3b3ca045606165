import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdouble.errors import LatticeError, PartitionError, RibbonError
from qdouble.lattice import (
    Region,
    Ribbon,
    TorusLattice,
    Tripartition,
    annulus_tripartition,
    block_region,
    canonical_regions,
    compose_ribbons,
    crossing_count,
    has_noncontractible_cycle,
    open_ribbon,
    plaquette_ribbon,
    ribbon_from_steps,
    row_tripartition,
    vertex_ribbon,
    winding,
    xi_x,
    xi_y,
)

sizes = st.tuples(st.integers(2, 5), st.integers(2, 5))


@settings(max_examples=20, deadline=None)
@given(sizes)
def test_counts_and_euler(size):
    lat = TorusLattice(*size)
    assert lat.n_edges == 2 * lat.n_vertices
    assert lat.n_plaquettes == lat.n_vertices
    assert lat.euler_characteristic() == 0
    # each edge borders two plaquette slots and every plaquette has four edge slots
    counts = np.bincount(lat.plaquette_table.ravel(), minlength=lat.n_edges)
    assert np.all(counts == 2)


@settings(max_examples=20, deadline=None)
@given(sizes)
def test_vertex_incidence(size):
    lat = TorusLattice(*size)
    deg = np.bincount(np.concatenate([lat.tails, lat.heads]), minlength=lat.n_vertices)
    assert np.all(deg == 4)
    for v in range(lat.n_vertices):
        assert all(lat.tail(e) == v for e in lat.outgoing(v))
        assert all(lat.head(e) == v for e in lat.incoming(v))


def test_rejects_tiny_torus():
    with pytest.raises(LatticeError):
        TorusLattice(1, 3)


@pytest.mark.parametrize("size", [(2, 2), (3, 3), (2, 3), (4, 3)])
def test_standard_ribbons(size):
    lat = TorusLattice(*size)
    for rib in (xi_x(lat), xi_y(lat), vertex_ribbon(lat, 0), plaquette_ribbon(lat, 0), plaquette_ribbon(lat, 0, True)):
        rib.check_connectivity()
        assert rib.closed
    assert abs(winding(lat, xi_x(lat))[0]) == 1
    assert abs(winding(lat, xi_y(lat))[1]) == 1
    assert winding(lat, plaquette_ribbon(lat, 0)) == (0, 0)
    assert crossing_count(xi_x(lat), xi_y(lat)) == 1
    assert crossing_count(xi_y(lat), xi_x(lat)) == 1
    assert len(vertex_ribbon(lat, 0).direct) == 0
    assert len(plaquette_ribbon(lat, 0).dual) == 0


def test_open_ribbon_endpoints_and_split():
    lat = TorusLattice(3, 3)
    rib = open_ribbon(lat, 0, lat.vertex(1, 1))
    rib.check_connectivity()
    assert not rib.closed
    assert rib.start[0] == 0 and rib.end[0] == lat.vertex(1, 1)
    for k in range(1, len(rib.triangles)):
        a, b = rib.split(k)
        assert compose_ribbons(a, b).triangles == rib.triangles
    assert open_ribbon(lat, 4, 4).trivial


def test_ribbon_json_round_trip():
    lat = TorusLattice(3, 2)
    rib = ribbon_from_steps(lat, 0, "ENE", side="left")
    again = Ribbon.from_json(rib.to_json())
    assert again == rib


def test_bad_step_string():
    with pytest.raises((RibbonError, LatticeError, KeyError, ValueError)):
        ribbon_from_steps(TorusLattice(3, 3), 0, "EQ")


def test_regions_and_winding_filter():
    lat3 = TorusLattice(3, 3)
    assert [len(r) for r in canonical_regions(lat3)] == [4, 7, 12]
    assert [r.name for r in canonical_regions(TorusLattice(2, 2))] == ["plaquette"]
    assert has_noncontractible_cycle(lat3, [lat3.right(x, 0) for x in range(3)])
    assert not has_noncontractible_cycle(lat3, block_region(lat3, 0, 0, 2, 2).edges)


@pytest.mark.parametrize("size", [(4, 4), (5, 5), (4, 5)])
def test_annulus_separates_a_from_c(size):
    lat = TorusLattice(*size)
    part = annulus_tripartition(lat, block_region(lat, 0, 0, 1, 1), 2)
    part.validate(lat)
    a, c = set(part.a.edges), set(part.c.edges)
    assert c
    for p in range(lat.n_plaquettes):
        es = set(lat.plaquette_edges(p))
        assert not (es & a and es & c)


def test_tripartition_validation():
    lat = TorusLattice(3, 3)
    with pytest.raises(PartitionError):
        Tripartition(Region((0, 1)), Region((1, 2)), Region((3,))).validate()
    with pytest.raises(PartitionError):
        Tripartition(Region((0,)), Region((1,)), Region((2,))).validate(lat)
    row_tripartition(TorusLattice(2, 6), (0, 1), 1).validate(TorusLattice(2, 6))
