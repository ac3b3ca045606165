"""Residuals of the ribbon-operator algebra on explicit states (shared by unit and acceptance tests)."""

import numpy as np

from qdouble.lattice import TorusLattice, open_ribbon, plaquette_ribbon, ribbon_from_steps, xi_x, xi_y
from qdouble.operators import Gauge, RibbonOp, ribbon_flux_projector, ribbon_op


def test_ribbons(lat: TorusLattice):
    return [
        xi_x(lat),
        xi_y(lat),
        open_ribbon(lat, 0, lat.vertex(1, 1)),
        open_ribbon(lat, 0, lat.vertex(0, 1), side="left"),
        plaquette_ribbon(lat, 0, outward=True),
    ]


test_ribbons.__test__ = False


def multiplication(g, rib, st, h1, g1, h2, g2):
    lhs = RibbonOp(g, rib, h1, g1).apply(RibbonOp(g, rib, h2, g2).apply(st))
    rhs = RibbonOp(g, rib, g.mul(h1, h2), g2).apply(st) if g1 == g2 else 0 * st
    return lhs.distance(rhs)


def comultiplication(g, rib, st, k_split, h, gg):
    r1, r2 = rib.split(k_split)
    lhs = RibbonOp(g, rib, h, gg).apply(st)
    rhs = 0 * st
    for k in range(g.order):
        ki = g.inv[k]
        rhs = rhs + ribbon_op(g, r1, h, k).apply(ribbon_op(g, r2, g.mul(ki, h, k), g.mul(ki, gg)).apply(st))
    return lhs.distance(rhs)


def vertex_relations(lat, g, rib, st, k, h, gg):
    """A^k at the start and end vertices against F^{h,g}."""
    f = RibbonOp(g, rib, h, gg)
    a0 = Gauge(lat, g, rib.start[0], k)
    e0 = a0.apply(f.apply(st)).distance(RibbonOp(g, rib, g.conj(k, h), g.mul(k, gg)).apply(a0.apply(st)))
    a1 = Gauge(lat, g, rib.end[0], k)
    e1 = a1.apply(f.apply(st)).distance(RibbonOp(g, rib, h, g.mul(gg, g.inv[k])).apply(a1.apply(st)))
    return max(e0, e1)


def flux_relations(lat, g, rib, st, k, h, gg):
    """B^k at the start and end sites against F^{h,g}."""
    f = RibbonOp(g, rib, h, gg)
    b0 = ribbon_flux_projector(lat, g, rib, "start", k)
    e0 = b0.apply(f.apply(st)).distance(f.apply(ribbon_flux_projector(lat, g, rib, "start", g.mul(k, h)).apply(st)))
    b1 = ribbon_flux_projector(lat, g, rib, "end", k)
    k_end = g.mul(g.inv[gg], g.inv[h], gg, k)
    e1 = b1.apply(f.apply(st)).distance(f.apply(ribbon_flux_projector(lat, g, rib, "end", k_end).apply(st)))
    return max(e0, e1)


def deformation(g, st, lat, h, gg):
    """Straight two-step ribbon against the two one-plaquette detours."""
    v0 = lat.vertex(0, 1)
    straight = ribbon_from_steps(lat, v0, "EE")
    worst = 0.0
    for det in ("NEES", "SEEN"):
        bent = ribbon_from_steps(lat, v0, det, enter="E", leave="E")
        worst = max(worst, RibbonOp(g, straight, h, gg).apply(st).distance(RibbonOp(g, bent, h, gg).apply(st)))
    return worst


def random_ground_space_state(sectors, rng):
    c = rng.normal(size=len(sectors)) + 1j * rng.normal(size=len(sectors))
    st = complex(c[0]) * sectors[0]
    for ci, s in zip(c[1:], sectors[1:]):
        st = st + complex(ci) * s
    return st.normalized()


def algebra_residual(g, lat, rng, n_states=20, n_configs=30):
    """Worst residual over multiplication, co-multiplication and A/B endpoint relations."""
    from qdouble.operators import random_state

    n = g.order
    worst = 0.0
    ribs = test_ribbons(lat)
    for _ in range(n_states):
        st = random_state(lat, g, n_configs, rng)
        for rib in ribs:
            h1, g1, h2, g2 = (int(x) for x in rng.integers(0, n, 4))
            worst = max(worst, multiplication(g, rib, st, h1, g1, h2, g2))
            worst = max(worst, multiplication(g, rib, st, h1, g2, h2, g2))
            k_split = int(rng.integers(1, len(rib.triangles)))
            h, gg = (int(x) for x in rng.integers(0, n, 2))
            worst = max(worst, comultiplication(g, rib, st, k_split, h, gg))
            if not rib.closed:
                k, h, gg = (int(x) for x in rng.integers(0, n, 3))
                worst = max(worst, vertex_relations(lat, g, rib, st, k, h, gg))
                worst = max(worst, flux_relations(lat, g, rib, st, k, h, gg))
    return worst
