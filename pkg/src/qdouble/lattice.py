"""Oriented square lattice on a torus, ribbons built from direct/dual triangles, and regions."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import LatticeError, PartitionError, RibbonError

# step directions in screen coordinates: x to the right, y (row index) downward
STEPS = {"E": (1, 0), "S": (0, 1), "W": (-1, 0), "N": (0, -1)}
OPPOSITE = {"E": "W", "W": "E", "N": "S", "S": "N"}


@dataclass(frozen=True)
class TorusLattice:
    """Edge 2*v is the right edge of vertex v, edge 2*v+1 its down edge; v = y*lx + x."""

    lx: int
    ly: int

    def __post_init__(self) -> None:
        if self.lx < 2 or self.ly < 2:
            raise LatticeError("torus needs lx >= 2 and ly >= 2")

    @property
    def n_vertices(self) -> int:
        return self.lx * self.ly

    @property
    def n_edges(self) -> int:
        return 2 * self.lx * self.ly

    @property
    def n_plaquettes(self) -> int:
        return self.lx * self.ly

    def vertex(self, x: int, y: int) -> int:
        return (y % self.ly) * self.lx + (x % self.lx)

    def coords(self, v: int) -> tuple[int, int]:
        return v % self.lx, v // self.lx

    def right(self, x: int, y: int) -> int:
        return 2 * self.vertex(x, y)

    def down(self, x: int, y: int) -> int:
        return 2 * self.vertex(x, y) + 1

    def plaquette(self, x: int, y: int) -> int:
        """Plaquette whose top-left corner is vertex (x, y)."""
        return self.vertex(x, y)

    def tail(self, e: int) -> int:
        return e // 2

    def head(self, e: int) -> int:
        x, y = self.coords(e // 2)
        return self.vertex(x + 1, y) if e % 2 == 0 else self.vertex(x, y + 1)

    def is_horizontal(self, e: int) -> bool:
        return e % 2 == 0

    @cached_property
    def tails(self) -> np.ndarray:
        return np.arange(self.n_edges) // 2

    @cached_property
    def heads(self) -> np.ndarray:
        return np.array([self.head(e) for e in range(self.n_edges)])

    def plaquette_edges(self, p: int) -> tuple[int, int, int, int]:
        """(top, right, bottom, left); holonomy from the top-left corner is top.right.bottom^-1.left^-1."""
        x, y = self.coords(p)
        return self.right(x, y), self.down(x + 1, y), self.right(x, y + 1), self.down(x, y)

    @cached_property
    def plaquette_table(self) -> np.ndarray:
        return np.array([self.plaquette_edges(p) for p in range(self.n_plaquettes)])

    def vertex_edges(self, v: int) -> dict[str, int]:
        """The four edges at v keyed by compass direction."""
        x, y = self.coords(v)
        return {"E": self.right(x, y), "S": self.down(x, y), "W": self.right(x - 1, y), "N": self.down(x, y - 1)}

    def outgoing(self, v: int) -> tuple[int, int]:
        return 2 * v, 2 * v + 1

    def incoming(self, v: int) -> tuple[int, int]:
        x, y = self.coords(v)
        return self.right(x - 1, y), self.down(x, y - 1)

    def around_vertex(self, v: int) -> tuple[list[int], list[int]]:
        """Plaquettes NE, NW, SW, SE around v and the edges N, W, S, E separating consecutive ones."""
        x, y = self.coords(v)
        quads = [self.plaquette(x, y - 1), self.plaquette(x - 1, y - 1), self.plaquette(x - 1, y), self.plaquette(x, y)]
        ed = self.vertex_edges(v)
        return quads, [ed["N"], ed["W"], ed["S"], ed["E"]]

    def plaquettes_of_edge(self, e: int) -> tuple[int, int]:
        x, y = self.coords(e // 2)
        if e % 2 == 0:
            return self.plaquette(x, y - 1), self.plaquette(x, y)
        return self.plaquette(x - 1, y), self.plaquette(x, y)

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_plaquettes

    def step(self, v: int, d: str) -> int:
        x, y = self.coords(v)
        dx, dy = STEPS[d]
        return self.vertex(x + dx, y + dy)

    def step_edge(self, v: int, d: str) -> tuple[int, int]:
        """Edge used by a step from v in direction d and +1/-1 for agreement with its arrow."""
        x, y = self.coords(v)
        if d == "E":
            return self.right(x, y), 1
        if d == "S":
            return self.down(x, y), 1
        if d == "W":
            return self.right(x - 1, y), -1
        return self.down(x, y - 1), -1

    def strip_plaquette(self, v: int, d: str, side: str) -> int:
        """Plaquette adjacent to the step (v, d) on the given side of the direction of travel."""
        x, y = self.coords(v)
        right_side = {
            "E": (x, y),
            "S": (x - 1, y),
            "W": (x - 1, y - 1),
            "N": (x, y - 1),
        }
        left_side = {
            "E": (x, y - 1),
            "S": (x, y),
            "W": (x - 1, y),
            "N": (x - 1, y - 1),
        }
        px, py = (right_side if side == "right" else left_side)[d]
        return self.plaquette(px, py)

    def to_json(self) -> dict:
        return {"lx": self.lx, "ly": self.ly}


def build_torus(lx: int, ly: int) -> TorusLattice:
    return TorusLattice(int(lx), int(ly))


# ----------------------------------------------------------------------------- ribbons


@dataclass(frozen=True)
class Triangle:
    """One ribbon segment.

    direct: walks ``edge`` from ``vertex``; sign +1 when this agrees with the arrow.
    dual: crosses ``edge`` (incident to ``vertex``) between two plaquettes; sign +1 when
    ``vertex`` is the tail of the edge, so the dressing multiplies from the left.
    """

    kind: str
    edge: int
    vertex: int
    sign: int
    site_from: tuple[int, int]
    site_to: tuple[int, int]

    @property
    def orientation(self) -> str:
        return "delta" if self.sign > 0 else "nabla"

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "edge": self.edge,
            "vertex": self.vertex,
            "sign": self.sign,
            "from": list(self.site_from),
            "to": list(self.site_to),
        }


@dataclass(frozen=True)
class Ribbon:
    triangles: tuple[Triangle, ...]
    start: tuple[int, int]
    end: tuple[int, int]
    name: str = ""
    trivial: bool = False
    side: str = "right"

    @property
    def closed(self) -> bool:
        return self.start == self.end and not self.trivial

    @property
    def direct(self) -> tuple[Triangle, ...]:
        return tuple(t for t in self.triangles if t.kind == "direct")

    @property
    def dual(self) -> tuple[Triangle, ...]:
        return tuple(t for t in self.triangles if t.kind == "dual")

    def edges(self) -> set[int]:
        return {t.edge for t in self.triangles}

    def check_connectivity(self) -> None:
        site = self.start
        for t in self.triangles:
            if t.site_from != site:
                raise RibbonError(f"ribbon broken at triangle {t}")
            site = t.site_to
        if site != self.end:
            raise RibbonError("ribbon does not end at its end site")

    def split(self, k: int) -> tuple["Ribbon", "Ribbon"]:
        tri = self.triangles
        mid = tri[k - 1].site_to if k > 0 else self.start
        return (
            Ribbon(tri[:k], self.start, mid, trivial=k == 0, side=self.side),
            Ribbon(tri[k:], mid, self.end, trivial=k == len(tri), side=self.side),
        )

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "start": list(self.start),
            "end": list(self.end),
            "closed": self.closed,
            "side": self.side,
            "triangles": [t.to_json() for t in self.triangles],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Ribbon":
        tris = tuple(
            Triangle(t["kind"], t["edge"], t["vertex"], t["sign"], tuple(t["from"]), tuple(t["to"]))
            for t in data["triangles"]
        )
        return cls(tris, tuple(data["start"]), tuple(data["end"]), data.get("name", ""), not tris, data.get("side", "right"))


def compose_ribbons(r1: Ribbon, r2: Ribbon) -> Ribbon:
    if r1.trivial:
        return r2
    if r2.trivial:
        return r1
    if r1.end != r2.start:
        raise RibbonError(f"cannot compose: end site {r1.end} != start site {r2.start}")
    return Ribbon(r1.triangles + r2.triangles, r1.start, r2.end, side=r1.side)


def _dual_sweep(lat: TorusLattice, v: int, p_from: int, p_to: int, blocked: set[int]) -> list[Triangle]:
    quads, between = lat.around_vertex(v)
    i0, i1 = quads.index(p_from), quads.index(p_to)
    fwd = [between[(i0 + k) % 4] for k in range((i1 - i0) % 4)]
    bwd = [between[(i0 - 1 - k) % 4] for k in range((i0 - i1) % 4)]
    if not set(fwd) & blocked:
        crossed, stepdir = fwd, 1
    elif not set(bwd) & blocked:
        crossed, stepdir = bwd, -1
    else:
        raise RibbonError(f"no admissible dual sweep at vertex {v}")
    out = []
    i = i0
    for e in crossed:
        j = (i + stepdir) % 4
        out.append(Triangle("dual", e, v, 1 if lat.tail(e) == v else -1, (v, quads[i]), (v, quads[j])))
        i = j
    return out


def ribbon_from_steps(
    lat: TorusLattice,
    v0: int,
    dirs: str,
    side: str = "right",
    closed: bool = False,
    name: str = "",
    enter: str | None = None,
    leave: str | None = None,
) -> Ribbon:
    """Ribbon following compass steps (e.g. ``"EES"``) from ``v0``, dual strip on one side.

    Steps are given explicitly because on a width-2 torus two neighbours coincide. A closed
    ribbon must return to ``v0``. Open ribbons begin and end with a dual triangle, as if the
    path continued straight; ``enter``/``leave`` override those virtual directions, which fixes
    the end sites when comparing a detour with a straight ribbon.
    """
    if side not in ("left", "right"):
        raise RibbonError("side must be 'left' or 'right'")
    if not dirs or any(d not in STEPS for d in dirs):
        raise RibbonError(f"invalid step string {dirs!r}")
    path = [v0]
    for d in dirs:
        path.append(lat.step(path[-1], d))
    if closed and path[-1] != v0:
        raise RibbonError("closed ribbon path must return to its start")
    n = len(dirs)
    verts = path[:-1] if closed else path
    tris: list[Triangle] = []
    start = None
    for i, v in enumerate(verts):
        if closed:
            d_in, d_out = dirs[i - 1], dirs[i]
        else:
            d_in = dirs[i - 1] if i > 0 else (enter or dirs[0])
            d_out = dirs[i] if i < n else (leave or dirs[-1])
        if d_out == OPPOSITE[d_in]:
            raise RibbonError("path reverses on itself")
        prev_v = lat.step(v, OPPOSITE[d_in])
        p_prev = lat.strip_plaquette(prev_v, d_in, side)
        p_next = lat.strip_plaquette(v, d_out, side)
        blocked = {lat.step_edge(prev_v, d_in)[0], lat.step_edge(v, d_out)[0]}
        if i == 0:
            start = (v, p_prev)
        tris += _dual_sweep(lat, v, p_prev, p_next, blocked)
        if i < n:
            e, sgn = lat.step_edge(v, d_out)
            tris.append(Triangle("direct", e, v, sgn, (v, p_next), (lat.step(v, d_out), p_next)))
    end = start if closed else tris[-1].site_to
    rib = Ribbon(tuple(tris), start, end, name=name, side=side)
    rib.check_connectivity()
    return rib


def xi_x(lat: TorusLattice, row: int = 0) -> Ribbon:
    return ribbon_from_steps(lat, lat.vertex(0, row), "E" * lat.lx, closed=True, name=f"xi_x[{row}]")


def xi_y(lat: TorusLattice, col: int = 0) -> Ribbon:
    return ribbon_from_steps(lat, lat.vertex(col, 0), "S" * lat.ly, closed=True, name=f"xi_y[{col}]")


def vertex_ribbon(lat: TorusLattice, v: int) -> Ribbon:
    """Closed dual ribbon around v: NE -> NW -> SW -> SE -> NE (counterclockwise on screen)."""
    quads, between = lat.around_vertex(v)
    tris = tuple(
        Triangle("dual", between[i], v, 1 if lat.tail(between[i]) == v else -1, (v, quads[i]), (v, quads[(i + 1) % 4]))
        for i in range(4)
    )
    return Ribbon(tris, (v, quads[0]), (v, quads[0]), name=f"vertex[{v}]")


def plaquette_ribbon(lat: TorusLattice, p: int, outward: bool = False) -> Ribbon:
    """Closed ribbon around plaquette p from its top-left corner.

    Without ``outward`` this is the purely direct ribbon (4 direct triangles). With it, the
    dual strip lies outside the plaquette so the ribbon also dresses the outgoing legs.
    """
    # travelling E, S, W, N from the top-left corner, the plaquette lies on the right
    side = "left" if outward else "right"
    return ribbon_from_steps(lat, p, "ESWN", side=side, closed=True, name=f"plaquette[{p}]" + ("+out" if outward else ""))


def block_ribbon(lat: TorusLattice, x0: int, y0: int, w: int, h: int) -> Ribbon:
    """Purely direct closed ribbon along the boundary of a w x h block of plaquettes."""
    dirs = "E" * w + "S" * h + "W" * w + "N" * h
    return ribbon_from_steps(lat, lat.vertex(x0, y0), dirs, closed=True, name=f"block[{x0},{y0},{w}x{h}]")


def shortest_steps(lat: TorusLattice, v0: int, v1: int) -> str:
    """x steps first, then y steps; ties between directions resolve to the positive one."""
    (x0, y0), (x1, y1) = lat.coords(v0), lat.coords(v1)

    def signed(d: int, n: int) -> int:
        d %= n
        return d if d <= n - d else d - n

    dx, dy = signed(x1 - x0, lat.lx), signed(y1 - y0, lat.ly)
    return ("E" if dx > 0 else "W") * abs(dx) + ("S" if dy > 0 else "N") * abs(dy)


def open_ribbon(lat: TorusLattice, v0: int, v1: int, side: str = "right", name: str = "") -> Ribbon:
    """Open ribbon along the shortest vertex path; the end sites follow from the strip side.

    Identical endpoints give a trivial ribbon (``trivial`` flag set, no triangles).
    """
    if v0 == v1:
        return Ribbon((), (v0, v0), (v0, v0), name=name or "trivial", trivial=True)
    return ribbon_from_steps(lat, v0, shortest_steps(lat, v0, v1), side=side, name=name or f"open[{v0}->{v1}]")


def dual_path_ribbon(lat: TorusLattice, v: int, p_from: int, p_to: int, direction: int = 1) -> Ribbon:
    """Purely dual open ribbon rotating around v from one adjacent plaquette to another."""
    quads, between = lat.around_vertex(v)
    i = quads.index(p_from)
    tris = []
    while quads[i] != p_to or not tris:
        j = (i + direction) % 4
        e = between[i] if direction == 1 else between[j]
        tris.append(Triangle("dual", e, v, 1 if lat.tail(e) == v else -1, (v, quads[i]), (v, quads[j])))
        i = j
        if len(tris) > 4:
            raise RibbonError("plaquette not adjacent to vertex")
    return Ribbon(tuple(tris), (v, p_from), (v, p_to), name=f"dual[{v}]")


def standard_ribbons(lat: TorusLattice) -> dict[str, Ribbon]:
    return {
        "xi_x": xi_x(lat),
        "xi_y": xi_y(lat),
        "vertex": vertex_ribbon(lat, 0),
        "plaquette": plaquette_ribbon(lat, 0),
        "plaquette_outward": plaquette_ribbon(lat, 0, outward=True),
    }


def winding(lat: TorusLattice, rib: Ribbon) -> tuple[int, int]:
    """Signed crossings of the direct path with the cut lines x = lx-1|0 and y = ly-1|0."""
    wx = sum(t.sign for t in rib.direct if t.edge % 2 == 0 and lat.coords(t.edge // 2)[0] == lat.lx - 1)
    wy = sum(t.sign for t in rib.direct if t.edge % 2 == 1 and lat.coords(t.edge // 2)[1] == lat.ly - 1)
    return wx, wy


def crossing_count(r1: Ribbon, r2: Ribbon) -> int:
    """Number of edges on the direct path of r1 that the dual path of r2 crosses."""
    return len({t.edge for t in r1.direct} & {t.edge for t in r2.dual})


# ----------------------------------------------------------------------------- regions


@dataclass(frozen=True)
class Region:
    edges: tuple[int, ...]
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", tuple(sorted(set(int(e) for e in self.edges))))

    def __len__(self) -> int:
        return len(self.edges)

    def __or__(self, other: "Region") -> "Region":
        return Region(self.edges + other.edges, f"{self.name}{other.name}")


@dataclass(frozen=True)
class Tripartition:
    a: Region
    b: Region
    c: Region
    width: int = 0

    def validate(self, lat: TorusLattice | None = None) -> None:
        sa, sb, sc = set(self.a.edges), set(self.b.edges), set(self.c.edges)
        if sa & sb or sb & sc or sa & sc:
            raise PartitionError("regions A, B, C overlap")
        if lat is not None and len(sa | sb | sc) != lat.n_edges:
            raise PartitionError("regions A, B, C do not cover the lattice")


def block_region(lat: TorusLattice, x0: int, y0: int, w: int, h: int, name: str = "") -> Region:
    edges = set()
    for i in range(w):
        for j in range(h):
            edges.update(lat.plaquette_edges(lat.plaquette(x0 + i, y0 + j)))
    return Region(tuple(edges), name or f"block[{x0},{y0},{w}x{h}]")


def has_noncontractible_cycle(lat: TorusLattice, edges) -> bool:
    """True if the edge subgraph contains a cycle winding around the torus."""
    adj: dict[int, list[tuple[int, int, int]]] = {}
    for e in edges:
        t, h = lat.tail(e), lat.head(e)
        dx, dy = (1, 0) if e % 2 == 0 else (0, 1)
        adj.setdefault(t, []).append((h, dx, dy))
        adj.setdefault(h, []).append((t, -dx, -dy))
    lift: dict[int, tuple[int, int]] = {}
    for root in adj:
        if root in lift:
            continue
        x, y = lat.coords(root)
        lift[root] = (x, y)
        queue = deque([root])
        while queue:
            u = queue.popleft()
            ux, uy = lift[u]
            for w, dx, dy in adj[u]:
                pos = (ux + dx, uy + dy)
                if w not in lift:
                    lift[w] = pos
                    queue.append(w)
                elif lift[w] != pos:
                    return True
    return False


def canonical_regions(lat: TorusLattice, x0: int = 0, y0: int = 0, all_regions: bool = False) -> list[Region]:
    """Single plaquette, 1x2 strip and 2x2 block; by default only those free of winding cycles."""
    regs = [
        block_region(lat, x0, y0, 1, 1, "plaquette"),
        block_region(lat, x0, y0, 2, 1, "strip1x2"),
        block_region(lat, x0, y0, 2, 2, "block2x2"),
    ]
    return regs if all_regions else [r for r in regs if not has_noncontractible_cycle(lat, r.edges)]


def annulus_tripartition(lat: TorusLattice, seed: Region, width: int) -> Tripartition:
    """A = seed, B = ``width`` layers grown around it, C = the rest.

    Each layer adds every edge touching the current vertex set and then their endpoints, so a
    width of at least 2 leaves no plaquette meeting both A and C.
    """
    if width < 1:
        raise PartitionError("buffer width must be at least 1")
    taken = set(seed.edges)
    verts = {lat.tail(e) for e in taken} | {lat.head(e) for e in taken}
    buffer: set[int] = set()
    for _ in range(width):
        layer = {e for e in range(lat.n_edges) if e not in taken and (lat.tail(e) in verts or lat.head(e) in verts)}
        buffer |= layer
        taken |= layer
        verts |= {lat.tail(e) for e in layer} | {lat.head(e) for e in layer}
    rest = [e for e in range(lat.n_edges) if e not in taken]
    part = Tripartition(seed, Region(tuple(buffer), "B"), Region(tuple(rest), "C"), width)
    part.validate(lat)
    return part


def row_tripartition(lat: TorusLattice, a_rows: tuple[int, int], width: int) -> Tripartition:
    """Band tripartition from full plaquette rows: A rows [r0, r1), B ``width`` rows on each side."""
    r0, r1 = a_rows

    def rows_edges(rows) -> set[int]:
        out = set()
        for r in rows:
            for x in range(lat.lx):
                out.update(lat.plaquette_edges(lat.plaquette(x, r)))
        return out

    a = rows_edges(range(r0, r1))
    b = rows_edges(list(range(r0 - width, r0)) + list(range(r1, r1 + width))) - a
    c = set(range(lat.n_edges)) - a - b
    part = Tripartition(Region(tuple(a), "A"), Region(tuple(b), "B"), Region(tuple(c), "C"), width)
    part.validate(lat)
    return part
