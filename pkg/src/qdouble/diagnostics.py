"""Symmetry verdicts, anomaly phase, SWSSB fidelity, S-matrix, GSD oracle and extremal-point analysis."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse

from .errors import CapacityError, DegenerateError, QDoubleError, RibbonError, StateError
from .groups import AnyonLabel, ConjugacyClass, FiniteGroup, Irrep, anyon_labels, commuting_pair_orbits, count_torus_gsd
from .lattice import Region, Ribbon, TorusLattice, Tripartition, annulus_tripartition, block_region, canonical_regions
from .operators import (
    QuantumState,
    Codec,
    Operator,
    electric_diagonal,
    ground_state,
    magnetic_family,
    magnetic_traced,
    max_configs,
    plaquette_holonomy,
)
from .states import ClassicalDiagonal, DensityState, DenseState, PureEnsemble, cmi, fidelity, mixture, overlap

STRONG_TOL = 1e-9


# ----------------------------------------------------------------------------- sparse matrices


@dataclass
class SparseMatrix:
    """COO matrix over full-lattice configuration keys. Entries are merged (unique row/col pairs)."""

    codec: Codec
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    @classmethod
    def build(cls, codec: Codec, rows, cols, vals, prune: float = 1e-15) -> "SparseMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=complex)
        if len(rows):
            # compress keys to a dense index so each (row, col) pair is one int64
            support, inv = np.unique(np.concatenate([rows, cols]), return_inverse=True)
            inv = inv.ravel()
            pair = inv[: len(rows)] * len(support) + inv[len(rows) :]
            upair, where = np.unique(pair, return_inverse=True)
            where = where.ravel()
            re = np.bincount(where, weights=vals.real, minlength=len(upair))
            im = np.bincount(where, weights=vals.imag, minlength=len(upair))
            vals = re + 1j * im
            rows, cols = support[upair // len(support)], support[upair % len(support)]
            keep = np.abs(vals) > prune
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
        return cls(codec, rows, cols, vals)

    @classmethod
    def from_state(cls, rho: DensityState) -> "SparseMatrix":
        codec = Codec(rho.group.order, len(rho.edges))
        if isinstance(rho, ClassicalDiagonal):
            return cls(codec, rho.keys.copy(), rho.keys.copy(), rho.probs.astype(complex))
        if isinstance(rho, PureEnsemble):
            rows, cols, vals = [], [], []
            for w, psi in zip(rho.weights, rho.members):
                r, c = np.meshgrid(psi.keys, psi.keys, indexing="ij")
                rows.append(r.ravel())
                cols.append(c.ravel())
                vals.append((w * np.outer(psi.amps, psi.amps.conj())).ravel())
            return cls.build(codec, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
        if isinstance(rho, DenseState):
            if rho.edges != tuple(range(len(rho.edges))):
                raise StateError("symmetry checks need a dense state on the full lattice register")
            r, c = np.nonzero(np.abs(rho.matrix) > 1e-15)
            return cls(codec, r.astype(np.int64), c.astype(np.int64), rho.matrix[r, c])
        raise StateError(f"unsupported state type {type(rho).__name__}")

    def left(self, op: Operator) -> "SparseMatrix":
        """op @ self."""
        if not len(self.rows):
            return self
        out, amps, src = op.act(self.codec.decode(self.rows), self.vals)
        return SparseMatrix.build(self.codec, self.codec.encode(out), self.cols[src], amps)

    def dagger(self) -> "SparseMatrix":
        return SparseMatrix.build(self.codec, self.cols, self.rows, self.vals.conj())

    def right(self, op: Operator) -> "SparseMatrix":
        """self @ op^dagger."""
        return self.dagger().left(op).dagger()

    def sandwich(self, op: Operator) -> "SparseMatrix":
        """op @ self @ op^dagger."""
        return self.left(op).right(op)

    def sparse(self) -> "SparseMatrix":
        return self

    def __add__(self, other: "SparseMatrix") -> "SparseMatrix":
        return SparseMatrix.build(
            self.codec,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
            np.concatenate([self.vals, other.vals]),
        )

    def scaled(self, c: complex) -> "SparseMatrix":
        return SparseMatrix(self.codec, self.rows, self.cols, self.vals * c)

    def trace(self) -> complex:
        return complex(self.vals[self.rows == self.cols].sum())

    def l1(self) -> float:
        return float(np.abs(self.vals).sum())

    def is_diagonal(self, tol: float = 1e-14) -> bool:
        return bool(np.all(np.abs(self.vals[self.rows != self.cols]) <= tol))

    def to_state(self, group: FiniteGroup) -> DensityState:
        edges = tuple(range(self.codec.k))
        if self.codec.dim > 4096 and not self.is_diagonal():
            raise CapacityError("non-diagonal matrix above 4096 dimensions cannot be densified")
        if self.is_diagonal():
            d = self.rows == self.cols
            return ClassicalDiagonal.from_keys(group, edges, self.rows[d], self.vals[d].real)
        dim = self.codec.dim
        mat = np.zeros((dim, dim), dtype=complex)
        np.add.at(mat, (self.rows, self.cols), self.vals)
        return DenseState(group, edges, mat)


@dataclass
class OuterSum:
    """sum_j w_j |a_j><b_j|; operators act on the member vectors before any matrix is formed."""

    codec: Codec
    terms: list[tuple[complex, QuantumState, QuantumState]]

    @classmethod
    def from_ensemble(cls, rho: PureEnsemble) -> "OuterSum":
        codec = Codec(rho.group.order, len(rho.edges))
        return cls(codec, [(complex(w), m, m) for w, m in zip(rho.weights, rho.members)])

    def left(self, op: Operator) -> "OuterSum":
        return OuterSum(self.codec, [(w, op.apply(a), b) for w, a, b in self.terms])

    def right(self, op: Operator) -> "OuterSum":
        return OuterSum(self.codec, [(w, a, op.apply(b)) for w, a, b in self.terms])

    def sandwich(self, op: Operator) -> "OuterSum":
        return OuterSum(self.codec, [(w, op.apply(a), op.apply(b)) for w, a, b in self.terms])

    def dagger(self) -> "OuterSum":
        return OuterSum(self.codec, [(np.conj(w), b, a) for w, a, b in self.terms])

    def __add__(self, other: "OuterSum") -> "OuterSum":
        return OuterSum(self.codec, self.terms + other.terms)

    def scaled(self, c: complex) -> "OuterSum":
        return OuterSum(self.codec, [(w * c, a, b) for w, a, b in self.terms])

    def trace(self) -> complex:
        return complex(sum(w * b.inner(a) for w, a, b in self.terms))

    def _product(self):
        """(support keys, scipy matrix) for sum_j w_j a_j b_j^dag via one sparse product."""
        terms = [(w, a, b) for w, a, b in self.terms if len(a) and len(b) and w != 0]
        if not terms:
            return np.zeros(0, dtype=np.int64), None
        support, inv = np.unique(np.concatenate([x.keys for _, a, b in terms for x in (a, b)]), return_inverse=True)
        inv = inv.ravel()
        a_rows, b_rows, a_cols, b_cols, a_vals, b_vals = [], [], [], [], [], []
        pos = 0
        for j, (w, a, b) in enumerate(terms):
            a_rows.append(inv[pos : pos + len(a)])
            pos += len(a)
            b_rows.append(inv[pos : pos + len(b)])
            pos += len(b)
            a_cols.append(np.full(len(a), j))
            b_cols.append(np.full(len(b), j))
            a_vals.append(w * a.amps)
            b_vals.append(b.amps.conj())
        shape = (len(support), len(terms))
        am = sparse.csr_matrix((np.concatenate(a_vals), (np.concatenate(a_rows), np.concatenate(a_cols))), shape=shape)
        bm = sparse.csr_matrix((np.concatenate(b_vals), (np.concatenate(b_rows), np.concatenate(b_cols))), shape=shape)
        return support, (am @ bm.T).tocoo()

    def sparse(self) -> SparseMatrix:
        support, mat = self._product()
        if mat is None:
            return SparseMatrix(self.codec, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=complex))
        keep = np.abs(mat.data) > 1e-15
        return SparseMatrix(self.codec, support[mat.row[keep]], support[mat.col[keep]], mat.data[keep])

    def l1(self) -> float:
        _, mat = self._product()
        return 0.0 if mat is None else float(np.abs(mat.data).sum())

    def to_state(self, group: FiniteGroup) -> DensityState:
        return self.sparse().to_state(group)


def lift(rho: DensityState):
    """Matrix view used by the diagnostics: OuterSum for ensembles, SparseMatrix otherwise."""
    if isinstance(rho, PureEnsemble):
        return OuterSum.from_ensemble(rho)
    return SparseMatrix.from_state(rho)


def _sum(mats):
    if isinstance(mats[0], OuterSum):
        return OuterSum(mats[0].codec, [t for m in mats for t in m.terms])
    codec = mats[0].codec
    return SparseMatrix.build(
        codec,
        np.concatenate([m.rows for m in mats]),
        np.concatenate([m.cols for m in mats]),
        np.concatenate([m.vals for m in mats]),
    )


# ----------------------------------------------------------------------------- verdicts


@dataclass
class SymmetryVerdict:
    operator: str
    verdict: str
    scalar: complex
    residual: float
    tolerance: float
    strong_residual: float | None = None

    def to_json(self) -> dict:
        out = asdict(self)
        out["scalar"] = [float(np.real(self.scalar)), float(np.imag(self.scalar))]
        return out


def _proportionality(rho_m, o_rho, tr_rho: float) -> tuple[complex, float]:
    c = o_rho.trace() / tr_rho
    diff = o_rho + rho_m.scaled(-c)
    return c, diff.l1() / rho_m.l1()


def _require_closed(ribbon: Ribbon) -> None:
    if not ribbon.closed:
        raise RibbonError(f"ribbon {ribbon.name or '?'} is open; symmetry checks need a closed ribbon")


def check_strong(rho: DensityState, op: Operator, ribbon: Ribbon, name: str = "", tol: float = STRONG_TOL) -> SymmetryVerdict:
    """O rho = c rho with c = tr(O rho)/tr(rho), residual in the entrywise 1-norm."""
    _require_closed(ribbon)
    m = lift(rho)
    c, res = _proportionality(m, m.left(op), rho.trace())
    return SymmetryVerdict(name, "strong" if res <= tol else "broken", c, res, tol, res)


def check_weak(
    rho: DensityState,
    family: list[Operator],
    traced: Operator,
    ribbon: Ribbon,
    cls: ConjugacyClass | None = None,
    name: str = "",
    tol: float = STRONG_TOL,
) -> SymmetryVerdict:
    """sum_{ii'} F rho F^dag against rho; weak only when the traced operator is not strong."""
    _require_closed(ribbon)
    if cls is not None and len(family) != cls.size**2:
        raise QDoubleError(f"component family has {len(family)} members, expected {cls.size ** 2}")
    m = lift(rho)
    strong = check_strong(rho, traced, ribbon, name, tol)
    if strong.verdict == "strong":
        return strong
    dressed = _sum([m.sandwich(f) for f in family])
    c, res = _proportionality(m, dressed, rho.trace())
    return SymmetryVerdict(name, "weak" if res <= tol else "broken", c, res, tol, strong.residual)


def electric_verdict(rho, group, ribbon, rep: Irrep, tol=STRONG_TOL) -> SymmetryVerdict:
    return check_strong(rho, electric_diagonal(group, ribbon, rep), ribbon, f"F^{rep.label}[{ribbon.name}]", tol)


def magnetic_verdict(rho, group, ribbon, cls: ConjugacyClass, transversal=None, tol=STRONG_TOL) -> SymmetryVerdict:
    name = f"F^C{cls.representative}[{ribbon.name}]"
    traced = magnetic_traced(group, ribbon, cls, transversal)
    return check_weak(rho, magnetic_family(group, ribbon, cls, transversal), traced, ribbon, cls, name, tol)


def symmetry_audit(
    rho: DensityState,
    group: FiniteGroup,
    electric_ribbons: list[Ribbon],
    magnetic_ribbons: list[Ribbon],
    tol: float = STRONG_TOL,
    transversal_shift: int = 0,
) -> list[SymmetryVerdict]:
    """F^Gamma on every ribbon in ``electric_ribbons``; traced F^C families on ``magnetic_ribbons``."""
    from .operators import permuted_transversal

    out = []
    for rib in electric_ribbons:
        for rep in group.irreps:
            out.append(electric_verdict(rho, group, rib, rep, tol))
    for rib in magnetic_ribbons:
        for cls in group.classes:
            tv = permuted_transversal(group, cls, transversal_shift) if transversal_shift else None
            out.append(magnetic_verdict(rho, group, rib, cls, tv, tol))
    return out


# ----------------------------------------------------------------------------- anomaly and SWSSB


@dataclass
class AnomalyResult:
    ratio: complex
    trace_l: complex
    trace_r: complex
    dim: int
    expected_character: complex

    @property
    def scaled(self) -> complex:
        """d_Gamma * tr(L)/tr(R); equals chi_Gamma(r_C)."""
        return self.dim * self.ratio

    def to_json(self) -> dict:
        def c(z):
            return [float(np.real(z)), float(np.imag(z))]

        return {
            "ratio": c(self.ratio),
            "trace_l": c(self.trace_l),
            "trace_r": c(self.trace_r),
            "dim": self.dim,
            "scaled_ratio": c(self.scaled),
            "character_at_representative": c(self.expected_character),
        }


def anomaly_phase(
    rho: DensityState,
    group: FiniteGroup,
    rep: Irrep,
    cls: ConjugacyClass,
    closed: Ribbon,
    open_: Ribbon,
    transversal=None,
) -> AnomalyResult:
    """tr(L)/tr(R) with L = F^G F^C rho F^C^dag and R = F^C F^G rho F^C^dag."""
    _require_closed(closed)
    if open_.closed:
        raise RibbonError("the magnetic ribbon must be open")
    fg = electric_diagonal(group, closed, rep)
    fc = magnetic_traced(group, open_, cls, transversal)
    m = lift(rho)
    tr_l = m.sandwich(fc).left(fg).trace()
    tr_r = m.left(fg).left(fc).right(fc).trace()
    if abs(tr_r) < 1e-12:
        raise DegenerateError(f"tr(R) = {abs(tr_r):.3e}; ribbon placement gives a degenerate configuration")
    return AnomalyResult(tr_l / tr_r, tr_l, tr_r, rep.dim, complex(rep.character[cls.representative]))


def dressed_state(rho: DensityState, group: FiniteGroup, cls: ConjugacyClass, ribbon: Ribbon, transversal=None):
    """(1/|C|) sum_{ii'} F^C_{ii'} rho F^C_{ii'}^dag."""
    m = lift(rho)
    fam = magnetic_family(group, ribbon, cls, transversal)
    return _sum([m.sandwich(f) for f in fam]).scaled(1.0 / cls.size)


def swssb_fidelity(rho: DensityState, group: FiniteGroup, cls: ConjugacyClass, ribbon: Ribbon, transversal=None) -> float:
    """Uhlmann fidelity between rho and its normalized magnetic-dressed counterpart."""
    dressed = dressed_state(rho, group, cls, ribbon, transversal)
    tr = dressed.trace().real
    if tr < 1e-12:
        raise DegenerateError("dressed state has zero trace")
    dressed = dressed.scaled(1.0 / tr)
    if isinstance(rho, PureEnsemble) and len(rho.members) == 1:
        psi = rho.members[0]
        if isinstance(dressed, OuterSum):
            val = sum(w * psi.inner(a) * b.inner(psi) for w, a, b in dressed.terms)
            return float(np.real(val) * rho.weights[0])
    sigma = dressed.to_state(group)
    if isinstance(sigma, DenseState) and not isinstance(rho, PureEnsemble):
        rho = rho.to_dense()
    return fidelity(rho, sigma)


# ----------------------------------------------------------------------------- modular data


@dataclass
class ModularData:
    labels: list[AnyonLabel]
    s: np.ndarray
    unitarity_deviation: float
    symmetry_deviation: float
    electric_magnetic_deviation: float

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.labels]

    def to_json(self) -> dict:
        return {
            "labels": self.names,
            "s_real": np.round(self.s.real, 12).tolist(),
            "s_imag": np.round(self.s.imag, 12).tolist(),
            "unitarity_deviation": self.unitarity_deviation,
            "symmetry_deviation": self.symmetry_deviation,
            "electric_magnetic_deviation": self.electric_magnetic_deviation,
        }


def s_matrix(group: FiniteGroup, tol: float = 1e-8) -> ModularData:
    labels = anyon_labels(group)
    m, inv = group.mult, group.inv
    n = len(labels)
    s = np.zeros((n, n), dtype=complex)
    for i, a in enumerate(labels):
        g, zg = a.flux.representative, set(a.flux.centralizer)
        for j, b in enumerate(labels):
            gp, zgp = b.flux.representative, set(b.flux.centralizer)
            total = 0j
            for h in range(group.order):
                x = m[m[h, inv[gp]], inv[h]]
                if x not in zg:
                    continue
                y = m[m[inv[h], inv[g]], h]
                if y not in zgp:
                    raise QDoubleError("centralizer condition is not symmetric")
                total += a.chi(x) * b.chi(y)
            s[i, j] = total / (len(zg) * len(zgp))
    unit = float(np.abs(s @ s.conj().T - np.eye(n)).max())
    sym = float(np.abs(s - s.T).max())
    em = 0.0
    for i, a in enumerate(labels):
        if a.flux.representative != 0:
            continue
        for j, b in enumerate(labels):
            if b.charge.dim == 1 and np.allclose(b.charge.character, 1.0):
                expect = b.flux.size / group.order * a.charge.character[inv[b.flux.representative]]
                em = max(em, abs(s[i, j] - expect))
    if unit > tol:
        raise QDoubleError(f"S-matrix is not unitary (max deviation {unit:.3e})")
    return ModularData(labels, s, unit, sym, float(em))


# ----------------------------------------------------------------------------- GSD oracle


def spanning_tree(lat: TorusLattice) -> list[int]:
    """BFS tree edges from vertex 0."""
    seen = {0}
    queue = [0]
    tree = []
    while queue:
        v = queue.pop(0)
        for e in lat.vertex_edges(v).values():
            w = lat.head(e) if lat.tail(e) == v else lat.tail(e)
            if w not in seen:
                seen.add(w)
                tree.append(e)
                queue.append(w)
    return tree


def brute_force_gsd(group: FiniteGroup, lat: TorusLattice, chunk: int = 1 << 18) -> int:
    """Gauge orbits of flat connections by direct enumeration.

    Tree edges are fixed to the identity; the leftover gauge freedom is a global
    conjugation, so orbits of flat configurations under it are counted.
    """
    tree = set(spanning_tree(lat))
    free = [e for e in range(lat.n_edges) if e not in tree]
    n = group.order
    total = n ** len(free)
    if total > max_configs():
        raise CapacityError(f"{total} gauge-fixed configurations exceed the budget {max_configs()}")
    codec = Codec(n, lat.n_edges)
    canon = []
    m, inv = group.mult, group.inv
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        cfgs = np.zeros((len(idx), lat.n_edges), dtype=np.uint8)
        for i, e in enumerate(free):
            cfgs[:, e] = (idx // n**i) % n
        flat = np.ones(len(idx), dtype=bool)
        for p in range(lat.n_plaquettes):
            flat &= plaquette_holonomy(lat, group, p, cfgs) == 0
        cfgs = cfgs[flat]
        best = codec.encode(cfgs)
        for h in range(1, n):
            conj = m[m[h][cfgs], inv[h]].astype(np.uint8)
            best = np.minimum(best, codec.encode(conj))
        canon.append(best)
    return int(len(np.unique(np.concatenate(canon)))) if canon else 0


# ----------------------------------------------------------------------------- extremal points


@dataclass
class ExtremalReport:
    sectors: list[tuple[int, int]]
    overlap: np.ndarray
    overlap_deviation: float
    marginal_deviation: dict[str, float]
    cmi: list[float] = field(default_factory=list)
    mixture_checks: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def n_extremal(self) -> int:
        return len(self.sectors)

    def to_json(self) -> dict:
        return {
            "n_extremal": self.n_extremal,
            "sectors": [list(s) for s in self.sectors],
            "overlap": np.round(self.overlap, 12).tolist(),
            "overlap_deviation": self.overlap_deviation,
            "marginal_deviation": self.marginal_deviation,
            "cmi": self.cmi,
            "mixture_checks": self.mixture_checks,
            "notes": self.notes,
        }


def decohered_sector(lat: TorusLattice, group: FiniteGroup, sector: tuple[int, int]) -> ClassicalDiagonal:
    return PureEnsemble.pure(ground_state(lat, group, sector)).dephased()


def marginal_distance(r1: ClassicalDiagonal, r2: ClassicalDiagonal) -> float:
    keys = np.union1d(r1.keys, r2.keys)
    p1 = np.zeros(len(keys))
    p2 = np.zeros(len(keys))
    p1[np.searchsorted(keys, r1.keys)] = r1.probs
    p2[np.searchsorted(keys, r2.keys)] = r2.probs
    return float(np.abs(p1 - p2).max()) if len(keys) else 0.0


def default_tripartition(lat: TorusLattice, width: int = 2) -> Tripartition | None:
    """Annulus around one plaquette, or around one edge when the torus is too small."""
    for seed in (block_region(lat, 0, 0, 1, 1, "plaquette"), Region((0,), "edge")):
        try:
            part = annulus_tripartition(lat, seed, width)
        except QDoubleError:
            continue
        if part.c.edges:
            return part
    return None


def extremal_analysis(
    group: FiniteGroup,
    lat: TorusLattice,
    width: int = 2,
    mixture_weights=(0.1, 0.5, 0.9),
    regions: list[Region] | None = None,
    part: Tripartition | None = None,
    with_cmi: bool = True,
) -> ExtremalReport:
    sectors = [pair for pair, _ in commuting_pair_orbits(group)]
    states = [decohered_sector(lat, group, s) for s in sectors]
    k = len(states)
    ov = np.eye(k)
    for i in range(k):
        for j in range(i, k):
            ov[i, j] = ov[j, i] = overlap(states[i], states[j]).normalized
    dev = float(np.abs(ov - np.eye(k)).max())
    regions = canonical_regions(lat) if regions is None else regions
    marg = {}
    for reg in regions:
        ref = states[0].reduce(reg)
        marg[reg.name] = max((marginal_distance(ref, s.reduce(reg)) for s in states[1:]), default=0.0)
    report = ExtremalReport(sectors, ov, dev, marg)
    if not with_cmi:
        return report
    part = default_tripartition(lat, width) if part is None else part
    if part is None:
        report.notes.append("torus too small for an annulus with non-empty C; CMI skipped")
        return report
    report.cmi = [cmi(s, part) for s in states]
    if k >= 2:
        for p in mixture_weights:
            mix = mixture([states[0], states[1]], [p, 1 - p])
            val = cmi(mix, part)
            bound = p * report.cmi[0] + (1 - p) * report.cmi[1]
            report.mixture_checks.append({"p": p, "cmi": val, "bound": bound, "ok": bool(val <= bound + 1e-9)})
    return report


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, int(round((time.perf_counter() - t0) * 1000))


__all__ = [
    "SparseMatrix",
    "SymmetryVerdict",
    "check_strong",
    "check_weak",
    "symmetry_audit",
    "AnomalyResult",
    "anomaly_phase",
    "swssb_fidelity",
    "ModularData",
    "s_matrix",
    "brute_force_gsd",
    "count_torus_gsd",
    "extremal_analysis",
]
