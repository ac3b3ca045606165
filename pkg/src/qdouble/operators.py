"""Sparse states over edge configurations and the local/ribbon operators acting on them.

A configuration assigns a group-element index to every edge. Batches of configurations are
``(N, E)`` uint8 arrays; a state stores them as int64 keys (base-|G| digits, edge i at n**i)
together with complex amplitudes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CapacityError, QDoubleError, RibbonError, StateError
from .groups import ConjugacyClass, FiniteGroup, Irrep
from .lattice import Ribbon, TorusLattice, vertex_ribbon, xi_x, xi_y

PRUNE = 1e-14


def max_configs() -> int:
    return int(float(os.environ.get("QDOUBLE_MAX_CONFIGS", "1e7")))


# ----------------------------------------------------------------------------- encoding


@dataclass(frozen=True)
class Codec:
    """Base-n digit encoding of configurations restricted to a register of k sites."""

    n: int
    k: int

    def __post_init__(self) -> None:
        if self.n > 1 and self.k * np.log2(self.n) > 62:
            raise CapacityError(f"|G|^{self.k} does not fit in a 64-bit key")

    @cached_property
    def powers(self) -> np.ndarray:
        return self.n ** np.arange(self.k, dtype=np.int64)

    @property
    def dim(self) -> int:
        return self.n**self.k

    def encode(self, cfgs: np.ndarray) -> np.ndarray:
        return np.asarray(cfgs, dtype=np.int64) @ self.powers

    def decode(self, keys: np.ndarray) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        return ((keys[:, None] // self.powers[None, :]) % self.n).astype(np.uint8)


def merge(keys: np.ndarray, amps: np.ndarray, tags: np.ndarray | None = None, prune: float = PRUNE):
    """Sum amplitudes of equal (tag, key) pairs; drop near-zero entries. Output sorted."""
    if tags is None:
        uk, inv = np.unique(keys, return_inverse=True)
        ut = None
    else:
        pairs = np.stack([tags, keys], axis=1)
        upairs, inv = np.unique(pairs, axis=0, return_inverse=True)
        ut, uk = upairs[:, 0], upairs[:, 1]
    inv = inv.ravel()
    out = np.zeros(len(uk), dtype=complex)
    np.add.at(out, inv, amps)
    keep = np.abs(out) > prune
    if ut is None:
        return uk[keep], out[keep]
    return ut[keep], uk[keep], out[keep]


class QuantumState:
    """Sparse vector: sorted unique keys with complex amplitudes. Never renormalised implicitly."""

    def __init__(self, lat: TorusLattice, group: FiniteGroup, keys, amps, *, merged: bool = False):
        self.lat = lat
        self.group = group
        self.codec = Codec(group.order, lat.n_edges)
        keys = np.asarray(keys, dtype=np.int64)
        amps = np.asarray(amps, dtype=complex)
        if not merged:
            keys, amps = merge(keys, amps)
        self.keys = keys
        self.amps = amps

    @classmethod
    def from_configs(cls, lat, group, cfgs, amps=None) -> "QuantumState":
        cfgs = np.atleast_2d(np.asarray(cfgs))
        if amps is None:
            amps = np.ones(len(cfgs), dtype=complex)
        if cfgs.size and cfgs.max() >= group.order:
            raise StateError("configuration entry out of group range")
        return cls(lat, group, Codec(group.order, lat.n_edges).encode(cfgs), amps)

    @classmethod
    def basis(cls, lat, group, cfg) -> "QuantumState":
        return cls.from_configs(lat, group, [cfg])

    @classmethod
    def identity_config(cls, lat, group) -> "QuantumState":
        return cls.basis(lat, group, np.zeros(lat.n_edges, dtype=np.uint8))

    def configs(self) -> np.ndarray:
        return self.codec.decode(self.keys)

    def __len__(self) -> int:
        return len(self.keys)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def normalized(self) -> "QuantumState":
        nrm = self.norm()
        if nrm == 0:
            raise StateError("cannot normalise the zero state")
        return QuantumState(self.lat, self.group, self.keys, self.amps / nrm, merged=True)

    def inner(self, other: "QuantumState") -> complex:
        """<self|other>."""
        common, i, j = np.intersect1d(self.keys, other.keys, assume_unique=True, return_indices=True)
        return complex(np.vdot(self.amps[i], other.amps[j]))

    def __add__(self, other: "QuantumState") -> "QuantumState":
        return QuantumState(self.lat, self.group, np.concatenate([self.keys, other.keys]), np.concatenate([self.amps, other.amps]))

    def __sub__(self, other: "QuantumState") -> "QuantumState":
        return self + (-1.0) * other

    def __rmul__(self, c: complex) -> "QuantumState":
        return QuantumState(self.lat, self.group, self.keys, c * self.amps)

    def distance(self, other: "QuantumState") -> float:
        return (self - other).norm()

    def to_dense(self) -> np.ndarray:
        if self.codec.dim > 4096:
            raise CapacityError("dense vector above 4096 entries")
        vec = np.zeros(self.codec.dim, dtype=complex)
        vec[self.keys] = self.amps
        return vec

    def to_json(self) -> list:
        return [[cfg.tolist(), float(a.real), float(a.imag)] for cfg, a in zip(self.configs(), self.amps)]

    @classmethod
    def from_json(cls, lat, group, data) -> "QuantumState":
        if not data:
            return cls(lat, group, np.zeros(0, dtype=np.int64), np.zeros(0))
        cfgs = np.array([d[0] for d in data], dtype=np.uint8)
        amps = np.array([d[1] + 1j * d[2] for d in data])
        return cls.from_configs(lat, group, cfgs, amps)


# ----------------------------------------------------------------------------- operators


class Operator:
    """Linear map on configuration batches.

    ``act(cfgs, amps)`` returns ``(out_cfgs, out_amps, src)`` where ``src[i]`` is the input row
    that produced output row ``i``. Outputs are not merged.
    """

    def act(self, cfgs: np.ndarray, amps: np.ndarray):
        raise NotImplementedError

    def apply(self, st: QuantumState) -> QuantumState:
        out, amps, _ = self.act(st.configs(), st.amps)
        return QuantumState(st.lat, st.group, st.codec.encode(out), amps)

    def __call__(self, st: QuantumState) -> QuantumState:
        return self.apply(st)

    def __matmul__(self, other: "Operator") -> "Operator":
        return Product([self, other])

    def __add__(self, other: "Operator") -> "Operator":
        return Sum([self, other])

    def __rmul__(self, c: complex) -> "Operator":
        return Scaled(complex(c), self)

    def to_dense(self, lat: TorusLattice, group: FiniteGroup) -> np.ndarray:
        codec = Codec(group.order, lat.n_edges)
        if codec.dim > 4096:
            raise CapacityError("dense operator above 4096 dimensions")
        basis = codec.decode(np.arange(codec.dim))
        out, amps, src = self.act(basis, np.ones(codec.dim, dtype=complex))
        mat = np.zeros((codec.dim, codec.dim), dtype=complex)
        np.add.at(mat, (codec.encode(out), src), amps)
        return mat


class Product(Operator):
    def __init__(self, factors):
        self.factors = list(factors)

    def act(self, cfgs, amps):
        src = np.arange(len(cfgs))
        for op in reversed(self.factors):
            cfgs, amps, s = op.act(cfgs, amps)
            src = src[s]
        return cfgs, amps, src


class Sum(Operator):
    def __init__(self, terms):
        self.terms = list(terms)

    def act(self, cfgs, amps):
        outs = [op.act(cfgs, amps) for op in self.terms]
        if not outs:
            return cfgs[:0], amps[:0], np.zeros(0, dtype=np.int64)
        return (
            np.concatenate([o[0] for o in outs]),
            np.concatenate([o[1] for o in outs]),
            np.concatenate([o[2] for o in outs]),
        )


class Scaled(Operator):
    def __init__(self, c: complex, op: Operator):
        self.c, self.op = c, op

    def act(self, cfgs, amps):
        out, a, s = self.op.act(cfgs, amps)
        return out, self.c * a, s


class Identity(Operator):
    def act(self, cfgs, amps):
        return cfgs.copy(), amps.copy(), np.arange(len(cfgs))


def _keep(cfgs, amps, coeff):
    coeff = np.asarray(coeff)
    mask = coeff != 0
    idx = np.flatnonzero(mask)
    return cfgs[idx], (amps * coeff)[idx], idx


class Gauge(Operator):
    """A_v^g of the vertex term: outgoing edges x -> g x, incoming edges y -> y g^-1."""

    def __init__(self, lat: TorusLattice, group: FiniteGroup, v: int, g: int):
        self.lat, self.group, self.v, self.g = lat, group, v, g

    def act(self, cfgs, amps):
        m, inv = self.group.mult, self.group.inv
        out = cfgs.copy()
        for e in self.lat.outgoing(self.v):
            out[:, e] = m[self.g, out[:, e]]
        for e in self.lat.incoming(self.v):
            out[:, e] = m[out[:, e], inv[self.g]]
        return out, amps.copy(), np.arange(len(cfgs))


class LocalL(Operator):
    """L^+_h |g> = |h g> (``plus``) or L^-_h |g> = |g h^-1> on one edge."""

    def __init__(self, group: FiniteGroup, edge: int, h: int, plus: bool = True):
        self.group, self.edge, self.h, self.plus = group, edge, h, plus

    def act(self, cfgs, amps):
        m, inv = self.group.mult, self.group.inv
        out = cfgs.copy()
        col = out[:, self.edge]
        out[:, self.edge] = m[self.h, col] if self.plus else m[col, inv[self.h]]
        return out, amps.copy(), np.arange(len(cfgs))


class LocalZ(Operator):
    """Single matrix component Z_{Gamma, a b}: amplitude times Gamma(g)_{ab}. Not unitary."""

    def __init__(self, rep: Irrep, edge: int, a: int, b: int, dagger: bool = False):
        if not (0 <= a < rep.dim and 0 <= b < rep.dim):
            raise QDoubleError("irrep matrix index out of range")
        self.rep, self.edge, self.a, self.b, self.dagger = rep, edge, a, b, dagger

    def act(self, cfgs, amps):
        vals = self.rep.matrices[:, self.a, self.b]
        if self.dagger:
            vals = vals.conj()
        return _keep(cfgs, amps, vals[cfgs[:, self.edge]])


class Diagonal(Operator):
    """Multiplies each configuration by ``fn(cfgs)``."""

    def __init__(self, fn):
        self.fn = fn

    def act(self, cfgs, amps):
        return _keep(cfgs, amps, self.fn(cfgs))


def plaquette_holonomy(lat: TorusLattice, group: FiniteGroup, p: int, cfgs: np.ndarray) -> np.ndarray:
    """top . right . bottom^-1 . left^-1 read from the top-left corner."""
    m, inv = group.mult, group.inv
    t, r, b, l = lat.plaquette_edges(p)
    return m[m[m[cfgs[:, t], cfgs[:, r]], inv[cfgs[:, b]]], inv[cfgs[:, l]]]


def site_holonomy(lat: TorusLattice, group: FiniteGroup, site: tuple[int, int], cfgs: np.ndarray, reverse: bool = False) -> np.ndarray:
    """Plaquette holonomy based at the site's vertex, counterclockwise on screen (clockwise if ``reverse``)."""
    v, p = site
    m, inv = group.mult, group.inv
    t, r, b, l = lat.plaquette_edges(p)
    x, y = lat.coords(p)
    corners = [lat.vertex(x, y), lat.vertex(x + 1, y), lat.vertex(x + 1, y + 1), lat.vertex(x, y + 1)]
    # clockwise steps from each corner: top (fwd), right (fwd), bottom (back), left (back)
    steps = [(t, False), (r, False), (b, True), (l, True)]
    k = corners.index(v)
    hol = np.zeros(len(cfgs), dtype=np.int64)
    for i in range(4):
        e, back = steps[(k + i) % 4]
        val = inv[cfgs[:, e]] if back else cfgs[:, e]
        hol = m[hol, val]
    return hol if reverse else inv[hol]


def plaquette_op(lat, group, p) -> Operator:
    return Diagonal(lambda c: (plaquette_holonomy(lat, group, p, c) == 0).astype(float))


def plaquette_mpo_op(lat, group, p) -> Operator:
    """B_p from the irrep sum (1/|G|) sum_Gamma d_Gamma tr(Gamma(x1) Gamma(y2) Gamma(x2)^dag Gamma(y1)^dag)."""
    t, r, b, l = lat.plaquette_edges(p)

    def coeff(cfgs):
        total = np.zeros(len(cfgs), dtype=complex)
        for rep in group.irreps:
            mt = rep.matrices
            prod = np.einsum(
                "nij,njk,nlk,nml->nim",
                mt[cfgs[:, t]],
                mt[cfgs[:, r]],
                mt[cfgs[:, b]].conj(),
                mt[cfgs[:, l]].conj(),
            )
            total += rep.dim * np.trace(prod, axis1=1, axis2=2)
        total /= group.order
        return np.where(np.abs(total) < 1e-13, 0.0, total)

    return Diagonal(coeff)


def flux_projector(lat, group, site, k: int, reverse: bool = False) -> Operator:
    """B^k_s: projector onto site holonomy k.

    Right-strip ribbons obey the start/end flux algebra with the counterclockwise reading,
    left-strip (mirror) ribbons with the clockwise one.
    """
    return Diagonal(lambda c: (site_holonomy(lat, group, site, c, reverse) == k).astype(float))


def ribbon_flux_projector(lat, group, ribbon: Ribbon, which: str, k: int) -> Operator:
    site = ribbon.start if which == "start" else ribbon.end
    return flux_projector(lat, group, site, k, reverse=ribbon.side == "left")


def vertex_projector(lat, group, v) -> Operator:
    return (1.0 / group.order) * Sum([Gauge(lat, group, v, g) for g in range(group.order)])


class RibbonOp(Operator):
    """F^{h,g} on a ribbon.

    Triangles are processed in order keeping the running holonomy k of the direct path read
    along the direction of travel. A dual triangle at vertex v dresses its edge with
    k^-1 h k like the vertex term at v: left multiplication if v is the tail, right
    multiplication by the inverse if v is the head. The result is kept iff the final k is g.
    """

    def __init__(self, group: FiniteGroup, ribbon: Ribbon, h: int, g: int):
        self.group, self.ribbon, self.h, self.g = group, ribbon, int(h), int(g)

    def holonomy_and_dress(self, cfgs):
        m, inv = self.group.mult, self.group.inv
        out = cfgs.copy()
        k = np.zeros(len(cfgs), dtype=np.int64)
        for tri in self.ribbon.triangles:
            e = tri.edge
            if tri.kind == "direct":
                val = out[:, e] if tri.sign > 0 else inv[out[:, e]]
                k = m[k, val]
            elif self.h != 0:
                u = m[m[inv[k], self.h], k]
                out[:, e] = m[u, out[:, e]] if tri.sign > 0 else m[out[:, e], inv[u]]
        return out, k

    def act(self, cfgs, amps):
        out, k = self.holonomy_and_dress(cfgs)
        idx = np.flatnonzero(k == self.g)
        return out[idx], amps[idx], idx


def ribbon_holonomy(group: FiniteGroup, ribbon: Ribbon, cfgs: np.ndarray) -> np.ndarray:
    return RibbonOp(group, ribbon, 0, 0).holonomy_and_dress(cfgs)[1]


def ribbon_op(group, ribbon, h, g) -> Operator:
    if ribbon.trivial:
        return Identity() if g == 0 else 0.0 * Identity()
    return RibbonOp(group, ribbon, h, g)


def electric_op(group: FiniteGroup, ribbon: Ribbon, rep: Irrep) -> Operator:
    """F^Gamma = (d/|G|) sum_g chi(g^-1) F^{e,g}, assembled term by term."""
    inv = group.inv
    terms = [complex(rep.dim * rep.character[inv[g]] / group.order) * RibbonOp(group, ribbon, 0, g) for g in range(group.order)]
    return Sum([t for t in terms if abs(t.c) > 0])


def electric_diagonal(group: FiniteGroup, ribbon: Ribbon, rep: Irrep) -> Operator:
    """Same operator as :func:`electric_op`, evaluated through the holonomy in one pass."""
    coef = rep.dim * rep.character[group.inv] / group.order

    def fn(cfgs):
        return coef[ribbon_holonomy(group, ribbon, cfgs)]

    return Diagonal(fn)


def magnetic_component(group: FiniteGroup, ribbon: Ribbon, cls: ConjugacyClass, i: int, ip: int, transversal=None) -> Operator:
    """(F^C)_{i i'} = (1/|Z_C|) sum_{k in Z_C} F^{c_i^-1, p_i k p_{i'}^-1}."""
    if not (0 <= i < cls.size and 0 <= ip < cls.size):
        raise QDoubleError(f"class index out of range 0..{cls.size - 1}")
    p = cls.transversal if transversal is None else transversal
    m, inv = group.mult, group.inv
    h = inv[cls.members[i]]
    zc = len(cls.centralizer)
    terms = [(1.0 / zc) * ribbon_op(group, ribbon, h, m[m[p[i], k], inv[p[ip]]]) for k in cls.centralizer]
    return Sum(terms)


def magnetic_traced(group, ribbon, cls, transversal=None) -> Operator:
    return Sum([magnetic_component(group, ribbon, cls, i, i, transversal) for i in range(cls.size)])


def magnetic_family(group, ribbon, cls, transversal=None) -> list[Operator]:
    return [magnetic_component(group, ribbon, cls, i, ip, transversal) for i in range(cls.size) for ip in range(cls.size)]


def permuted_transversal(group: FiniteGroup, cls: ConjugacyClass, shift: int = 1) -> tuple[int, ...]:
    """Alternative transversal p_i z with z in Z_C, for transversal-independence checks."""
    z = cls.centralizer[shift % len(cls.centralizer)]
    return tuple(group.mul(p, z) for p in cls.transversal)


# ----------------------------------------------------------------------------- state-level API


def apply_gauge(st: QuantumState, v: int, g: int) -> QuantumState:
    return Gauge(st.lat, st.group, v, g).apply(st)


def apply_plaquette(st: QuantumState, p: int, method: str = "delta") -> QuantumState:
    op = plaquette_op(st.lat, st.group, p) if method == "delta" else plaquette_mpo_op(st.lat, st.group, p)
    return op.apply(st)


def apply_local(st: QuantumState, e: int, kind: str, h: int = 0, rep: Irrep | None = None, a: int = 0, b: int = 0) -> QuantumState:
    """kind is 'L+', 'L-' or 'Z'."""
    if kind == "L+":
        return LocalL(st.group, e, h, True).apply(st)
    if kind == "L-":
        return LocalL(st.group, e, h, False).apply(st)
    if kind == "Z":
        if rep is None:
            raise QDoubleError("Z component needs an irrep")
        return LocalZ(rep, e, a, b).apply(st)
    raise QDoubleError(f"unknown local operator {kind!r}")


def apply_ribbon(st: QuantumState, r: Ribbon, h: int, g: int) -> QuantumState:
    return ribbon_op(st.group, r, h, g).apply(st)


def ribbon_electric(st: QuantumState, r: Ribbon, rep: Irrep) -> QuantumState:
    return electric_op(st.group, r, rep).apply(st)


def ribbon_magnetic(st: QuantumState, r: Ribbon, cls: ConjugacyClass, i: int | None = None, ip: int | None = None) -> QuantumState:
    """Component (i, i') or, with both indices omitted, the traced form."""
    if i is None and ip is None:
        return magnetic_traced(st.group, r, cls).apply(st)
    return magnetic_component(st.group, r, cls, i, ip).apply(st)


def random_state(lat, group, n_configs: int, rng: np.random.Generator) -> QuantumState:
    cfgs = rng.integers(0, group.order, size=(n_configs, lat.n_edges), dtype=np.uint8)
    amps = rng.normal(size=n_configs) + 1j * rng.normal(size=n_configs)
    return QuantumState.from_configs(lat, group, cfgs, amps).normalized()


# ----------------------------------------------------------------------------- ground states


def standard_config(lat: TorusLattice, a: int, b: int) -> np.ndarray:
    """Identity everywhere except a on the wrap-around horizontal edges and b on the vertical ones."""
    cfg = np.zeros(lat.n_edges, dtype=np.uint8)
    for y in range(lat.ly):
        cfg[lat.right(lat.lx - 1, y)] = a
    for x in range(lat.lx):
        cfg[lat.down(x, lat.ly - 1)] = b
    return cfg


def sector_orbit(group: FiniteGroup, a: int, b: int) -> list[tuple[int, int]]:
    if not group.commute(a, b):
        raise StateError(f"holonomy pair ({a}, {b}) does not commute; ground states need ab = ba")
    return sorted({(group.conj(h, a), group.conj(h, b)) for h in range(group.order)})


def gauge_orbit_configs(lat: TorusLattice, group: FiniteGroup, cfg: np.ndarray) -> np.ndarray:
    """All gauge transforms of ``cfg`` with the gauge at vertex 0 fixed to e (distinct for flat cfg)."""
    n, nv = group.order, lat.n_vertices
    count = n ** (nv - 1)
    if count > max_configs():
        raise CapacityError(f"gauge orbit of {count} configurations exceeds the budget {max_configs()}")
    gam = np.zeros((count, nv), dtype=np.int64)
    gam[:, 1:] = Codec(n, nv - 1).decode(np.arange(count))
    m, inv = group.mult, group.inv
    # table[(a * n + x) * n + b] = a x b^-1, so each edge is one lookup
    table = m[m[:, :, None], inv[None, None, :]].astype(np.uint8).ravel()
    out = np.empty((count, lat.n_edges), dtype=np.uint8)
    for e in range(lat.n_edges):
        out[:, e] = table[(gam[:, lat.tail(e)] * n + int(cfg[e])) * n + gam[:, lat.head(e)]]
    return out


def sector_configs(lat: TorusLattice, group: FiniteGroup, a: int, b: int) -> np.ndarray:
    orbit = sector_orbit(group, a, b)
    total = len(orbit) * group.order ** (lat.n_vertices - 1)
    if total > max_configs():
        raise CapacityError(f"sector with {total} configurations exceeds the budget {max_configs()}")
    return np.concatenate([gauge_orbit_configs(lat, group, standard_config(lat, x, y)) for x, y in orbit])


def sector_keys(lat: TorusLattice, group: FiniteGroup, a: int, b: int) -> np.ndarray:
    codec = Codec(group.order, lat.n_edges)
    keys = []
    for x, y in sector_orbit(group, a, b):
        keys.append(codec.encode(gauge_orbit_configs(lat, group, standard_config(lat, x, y))))
    return np.sort(np.concatenate(keys))


def ground_state(lat: TorusLattice, group: FiniteGroup, holonomy: tuple[int, int] = (0, 0)) -> QuantumState:
    """Equal-weight superposition over the flat configurations of the sector of (a, b).

    The sector is the full gauge orbit of the standard configuration over the conjugation orbit
    of (a, b); this is what ``prod_v A_v`` produces from any one of its members.
    """
    keys = sector_keys(lat, group, *holonomy)
    amps = np.full(len(keys), 1.0 / np.sqrt(len(keys)), dtype=complex)
    return QuantumState(lat, group, keys, amps, merged=True)


def project_vertices(st: QuantumState) -> QuantumState:
    for v in range(st.lat.n_vertices):
        st = vertex_projector(st.lat, st.group, v).apply(st)
    return st


def ground_state_via_ribbons(lat: TorusLattice, group: FiniteGroup, holonomy: tuple[int, int]) -> QuantumState:
    """Literal construction: prod_v A_v F^{b, a}_{xi_x} F^{a^-1, e}_{xi_y} |all e>, normalised.

    F_{xi_y} threads holonomy a around the horizontal cycle, then F_{xi_x} projects onto it and
    threads b around the vertical cycle. Only practical on small lattices.
    """
    a, b = holonomy
    sector_orbit(group, a, b)
    st = QuantumState.identity_config(lat, group)
    st = RibbonOp(group, xi_y(lat), int(group.inv[a]), 0).apply(st)
    st = RibbonOp(group, xi_x(lat), b, a).apply(st)
    st = project_vertices(st)
    if st.norm() == 0:
        raise RibbonError("ribbon construction produced the zero state")
    return st.normalized()


def vertex_ribbon_gauge_check(lat, group, v, h, st: QuantumState) -> float:
    """Distance between F^{h,e} on the vertex ribbon and A_v^h on a state."""
    return RibbonOp(group, vertex_ribbon(lat, v), h, 0).apply(st).distance(Gauge(lat, group, v, h).apply(st))
