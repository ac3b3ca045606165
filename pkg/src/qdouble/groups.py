"""Finite groups, conjugacy data, unitary irreps, fusion rules and torus GSD counting."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np

from .errors import GroupValidationError, IrrepError

TOL = 1e-10
INT_TOL = 1e-8
IRREP_SEED = 20240607


@dataclass(eq=False)
class FiniteGroup:
    """A finite group given by its multiplication table; element 0 is the identity."""

    mult: np.ndarray
    name: str = "G"
    labels: tuple[str, ...] | None = None
    inv: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.mult = np.asarray(self.mult, dtype=np.int64)
        self.mult.setflags(write=False)
        _validate_table(self.mult)
        n = self.order
        inv = np.argmax(self.mult == 0, axis=1)
        self.inv = inv.astype(np.int64)
        self.inv.setflags(write=False)
        if self.labels is None:
            self.labels = tuple(f"g{i}" for i in range(n))

    @property
    def order(self) -> int:
        return int(self.mult.shape[0])

    def mul(self, *elems: int) -> int:
        out = 0
        for x in elems:
            out = int(self.mult[out, x])
        return out

    def conj(self, g: int, x: int) -> int:
        """g x g^-1."""
        return int(self.mult[self.mult[g, x], self.inv[g]])

    def commute(self, a: int, b: int) -> bool:
        return self.mult[a, b] == self.mult[b, a]

    @cached_property
    def classes(self) -> list["ConjugacyClass"]:
        return conjugacy_data(self)

    @cached_property
    def class_of(self) -> np.ndarray:
        out = np.empty(self.order, dtype=np.int64)
        for k, cls in enumerate(self.classes):
            out[list(cls.members)] = k
        return out

    @cached_property
    def irreps(self) -> list["Irrep"]:
        return irreps(self)

    def centralizer(self, x: int) -> tuple[int, ...]:
        return tuple(int(g) for g in range(self.order) if self.commute(g, x))

    def label(self, g: int) -> str:
        return self.labels[g]

    def to_json(self) -> dict:
        return {"name": self.name, "order": self.order, "table": self.mult.tolist()}


def _validate_table(m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise GroupValidationError("multiplication table must be a non-empty square array")
    n = m.shape[0]
    if m.min() < 0 or m.max() >= n:
        raise GroupValidationError("table entries must lie in 0..order-1")
    idx = np.arange(n)
    if not (np.array_equal(m[0], idx) and np.array_equal(m[:, 0], idx)):
        bad = next(g for g in range(n) if m[0, g] != g or m[g, 0] != g)
        raise GroupValidationError(f"element 0 is not the identity: offending triple (0, {bad}, {m[0, bad]})")
    for g in range(n):
        if not np.any(m[g] == 0) or not np.any(m[:, g] == 0):
            raise GroupValidationError(f"element {g} has no inverse: offending triple ({g}, *, 0)")
    # associativity for all triples at once
    lhs = m[m[:, :, None], idx[None, None, :]]  # (a b) c
    rhs = m[idx[:, None, None], m[None, :, :]]  # a (b c)
    bad = np.argwhere(lhs != rhs)
    if bad.size:
        a, b, c = (int(v) for v in bad[0])
        raise GroupValidationError(f"table is not associative: offending triple ({a}, {b}, {c})")


# ----------------------------------------------------------------------------- builtins


def cyclic(n: int) -> FiniteGroup:
    idx = np.arange(n)
    labels = tuple("e" if k == 0 else (f"x^{k}" if n > 2 else "x") for k in range(n))
    return FiniteGroup((idx[:, None] + idx[None, :]) % n, name=f"Z{n}", labels=labels)


def dihedral(n: int, name: str | None = None) -> FiniteGroup:
    """Elements t^a c^b stored at index a*n + b, with c^n = t^2 = e and t c t = c^-1."""
    m = np.empty((2 * n, 2 * n), dtype=np.int64)
    for a, b, a2, b2 in product(range(2), range(n), range(2), range(n)):
        bb = ((-b if a2 else b) + b2) % n
        m[a * n + b, a2 * n + b2] = ((a + a2) % 2) * n + bb
    labels = []
    for a, b in product(range(2), range(n)):
        s = ("t" if a else "") + ("" if b == 0 else ("c" if b == 1 else f"c{b}"))
        labels.append(s or "e")
    return FiniteGroup(m, name=name or f"D{n}", labels=tuple(labels))


def quaternion() -> FiniteGroup:
    one = np.eye(2, dtype=complex)
    qi = np.diag([1j, -1j])
    qj = np.array([[0, 1], [-1, 0]], dtype=complex)
    qk = qi @ qj
    mats = [one, -one, qi, -qi, qj, -qj, qk, -qk]
    labels = ("1", "-1", "i", "-i", "j", "-j", "k", "-k")
    m = np.empty((8, 8), dtype=np.int64)
    for a, b in product(range(8), repeat=2):
        prod_ab = mats[a] @ mats[b]
        m[a, b] = next(k for k in range(8) if np.allclose(mats[k], prod_ab))
    return FiniteGroup(m, name="Q8", labels=labels)


def build_group(spec) -> FiniteGroup:
    """Build a group from a builtin name, a ``{"builtin": ...}`` dict or ``{"order", "table"}``."""
    if isinstance(spec, FiniteGroup):
        return spec
    if isinstance(spec, dict):
        if "builtin" in spec:
            return build_group(spec["builtin"])
        if "table" in spec:
            table = np.asarray(spec["table"])
            if "order" in spec and table.shape[0] != int(spec["order"]):
                raise GroupValidationError("declared order does not match table size")
            return FiniteGroup(table, name=spec.get("name", "G"))
        raise GroupValidationError("group spec needs 'builtin' or 'table'")
    if not isinstance(spec, str):
        raise GroupValidationError(f"unrecognised group spec {spec!r}")
    key = spec.strip().upper()
    if key == "S3":
        return dihedral(3, name="S3")
    if key == "Q8":
        return quaternion()
    if mt := re.fullmatch(r"Z(\d+)", key):
        n = int(mt.group(1))
        if n < 1:
            raise GroupValidationError("cyclic order must be positive")
        return cyclic(n)
    if mt := re.fullmatch(r"D(\d+)", key):
        n = int(mt.group(1))
        if n < 3:
            raise GroupValidationError("dihedral D_n needs n >= 3")
        return dihedral(n)
    raise GroupValidationError(f"unknown builtin group {spec!r}")


# ----------------------------------------------------------------------------- conjugacy


@dataclass(frozen=True)
class ConjugacyClass:
    index: int
    representative: int
    members: tuple[int, ...]
    centralizer: tuple[int, ...]
    transversal: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.members)


def conjugacy_data(g: FiniteGroup) -> list[ConjugacyClass]:
    n = g.order
    seen = np.zeros(n, dtype=bool)
    out: list[ConjugacyClass] = []
    for r in range(n):
        if seen[r]:
            continue
        orbit = sorted({g.conj(h, r) for h in range(n)})
        seen[orbit] = True
        transversal = tuple(next(h for h in range(n) if g.conj(h, r) == c) for c in orbit)
        out.append(ConjugacyClass(len(out), r, tuple(orbit), g.centralizer(r), transversal))
    return out


def subgroup(g: FiniteGroup, elements) -> tuple[FiniteGroup, tuple[int, ...]]:
    """Return a subgroup as a standalone group plus the embedding (local index -> parent index)."""
    elems = tuple(sorted(int(x) for x in elements))
    if elems[0] != 0:
        raise GroupValidationError("subgroup must contain the identity")
    pos = {x: i for i, x in enumerate(elems)}
    try:
        table = [[pos[g.mul(a, b)] for b in elems] for a in elems]
    except KeyError as exc:
        raise GroupValidationError("element set is not closed under multiplication") from exc
    labels = tuple(g.labels[x] for x in elems)
    return FiniteGroup(np.array(table), name=f"sub({g.name})", labels=labels), elems


# ----------------------------------------------------------------------------- irreps


@dataclass(eq=False)
class Irrep:
    label: str
    matrices: np.ndarray  # (|G|, d, d)

    @property
    def dim(self) -> int:
        return int(self.matrices.shape[1])

    @cached_property
    def character(self) -> np.ndarray:
        """Per-element character."""
        return np.trace(self.matrices, axis1=1, axis2=2)

    def class_character(self, g: FiniteGroup) -> np.ndarray:
        return np.array([self.character[c.representative] for c in g.classes])

    def __repr__(self) -> str:
        return f"Irrep({self.label!r}, dim={self.dim})"


def _irreps_cyclic(n: int) -> list[Irrep]:
    idx = np.arange(n)
    out = []
    for k in range(n):
        m = np.exp(2j * np.pi * k * idx / n).reshape(n, 1, 1)
        out.append(Irrep("1" if k == 0 else (f"chi{k}" if n > 2 else "sign"), m))
    return out


def _irreps_s3() -> list[Irrep]:
    w = np.exp(2j * np.pi / 3)
    C = np.diag([np.conj(w), w])
    T = np.array([[0, 1], [1, 0]], dtype=complex)
    pi = [np.linalg.matrix_power(T, a) @ np.linalg.matrix_power(C, b) for a in range(2) for b in range(3)]
    sign = [(-1) ** a for a in range(2) for _ in range(3)]
    return [
        Irrep("1", np.ones((6, 1, 1), dtype=complex)),
        Irrep("s", np.array(sign, dtype=complex).reshape(6, 1, 1)),
        Irrep("pi", np.array(pi)),
    ]


def _irreps_d4() -> list[Irrep]:
    C = np.diag([1j, -1j])
    T = np.array([[0, 1], [1, 0]], dtype=complex)
    pi = [np.linalg.matrix_power(T, a) @ np.linalg.matrix_power(C, b) for a in range(2) for b in range(4)]
    out = [Irrep("1", np.ones((8, 1, 1), dtype=complex))]
    for label, (sc, st) in (("s1", (1, -1)), ("s2", (-1, 1)), ("s3", (-1, -1))):
        vals = [st**a * sc**b for a in range(2) for b in range(4)]
        out.append(Irrep(label, np.array(vals, dtype=complex).reshape(8, 1, 1)))
    out.append(Irrep("pi", np.array(pi)))
    return out


def _irreps_q8() -> list[Irrep]:
    # element order: 1, -1, i, -i, j, -j, k, -k
    one = np.eye(2, dtype=complex)
    qi = np.diag([1j, -1j])
    qj = np.array([[0, 1], [-1, 0]], dtype=complex)
    qk = qi @ qj
    two = np.array([one, -one, qi, -qi, qj, -qj, qk, -qk])
    out = [Irrep("1", np.ones((8, 1, 1), dtype=complex))]
    # 1-dim irreps factor through Q8/{±1} = Z2 x Z2; sign on (i, j)
    for label, (si, sj) in (("s_i", (1, -1)), ("s_j", (-1, 1)), ("s_k", (-1, -1))):
        sk = si * sj
        vals = [1, 1, si, si, sj, sj, sk, sk]
        out.append(Irrep(label, np.array(vals, dtype=complex).reshape(8, 1, 1)))
    out.append(Irrep("rho", two))
    return out


def regular_representation(g: FiniteGroup) -> np.ndarray:
    n = g.order
    reg = np.zeros((n, n, n))
    for x in range(n):
        reg[x, g.mult[x], np.arange(n)] = 1.0
    return reg


def numerical_irreps(g: FiniteGroup, seed: int = IRREP_SEED, attempts: int = 5) -> list[Irrep]:
    """Split the regular representation with a random element of its commutant."""
    n = g.order
    reg = regular_representation(g)
    k = len(g.classes)
    last_residual = np.inf
    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        h = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        h = h + h.conj().T
        m = np.einsum("gij,jk,glk->il", reg, h, reg) / n
        vals, vecs = np.linalg.eigh(m)
        # cluster eigenvalues
        groups: list[list[int]] = [[0]]
        scale = max(1.0, float(np.abs(vals).max()))
        for i in range(1, n):
            if vals[i] - vals[groups[-1][-1]] < 1e-7 * scale:
                groups[-1].append(i)
            else:
                groups.append([i])
        found: list[Irrep] = []
        residual = 0.0
        ok = True
        for grp in groups:
            v = vecs[:, grp]
            mats = np.einsum("ia,gij,jb->gab", v.conj(), reg, v)
            inv_res = np.abs(np.einsum("gij,ja->gia", reg, v) - np.einsum("ia,gab->gib", v, mats)).max()
            residual = max(residual, inv_res)
            chi = np.trace(mats, axis1=1, axis2=2)
            if inv_res > 1e-8 or abs(np.vdot(chi, chi).real / n - 1) > 1e-8:
                ok = False
                break
            if any(np.allclose(chi, f.character, atol=1e-8) for f in found):
                continue
            found.append(Irrep("", mats))
        if ok and len(found) == k and sum(f.dim**2 for f in found) == n:
            return _order_irreps(found)
        last_residual = residual
    raise IrrepError(f"isotypic decomposition did not converge (residual {last_residual:.3e})")


def _order_irreps(found: list[Irrep]) -> list[Irrep]:
    def key(rep: Irrep):
        triv = 0 if np.allclose(rep.character, 1.0) else 1
        chi = np.round(rep.character, 8)
        return (triv, rep.dim, tuple((-c.real, -c.imag) for c in chi))

    ordered = sorted(found, key=key)
    for i, rep in enumerate(ordered):
        rep.label = "1" if i == 0 else f"rep{i}"
    return ordered


def irreps(g: FiniteGroup) -> list[Irrep]:
    """Complete list of unitary irreps, trivial first."""
    builtin = {"S3": _irreps_s3, "D4": _irreps_d4, "Q8": _irreps_q8}
    if g.name in builtin and g.order == {"S3": 6, "D4": 8, "Q8": 8}[g.name]:
        reps = builtin[g.name]()
    elif re.fullmatch(r"Z\d+", g.name) and g.order == int(g.name[1:]):
        reps = _irreps_cyclic(g.order)
    else:
        reps = numerical_irreps(g)
    return reps


def irrep_by_label(g: FiniteGroup, label: str) -> Irrep:
    for rep in g.irreps:
        if rep.label == label:
            return rep
    raise IrrepError(f"group {g.name} has no irrep labelled {label!r}")


def check_irrep(g: FiniteGroup, rep: Irrep, tol: float = TOL) -> float:
    """Largest deviation from the homomorphism and unitarity identities."""
    m = rep.matrices
    hom = np.abs(np.einsum("aij,bjk->abik", m, m) - m[g.mult]).max()
    eye = np.eye(rep.dim)
    uni = np.abs(np.einsum("aij,akj->aik", m, m.conj()) - eye).max()
    return float(max(hom, uni))


# ----------------------------------------------------------------------------- characters


def character_table(g: FiniteGroup, reps: list[Irrep] | None = None) -> np.ndarray:
    """Rows irreps, columns classes."""
    reps = g.irreps if reps is None else reps
    return np.array([r.class_character(g) for r in reps])


def burnside_character_table(g: FiniteGroup, seed: int = 7) -> np.ndarray:
    """Character table via simultaneous diagonalisation of class-sum structure constants.

    Independent of any representation matrices; rows are returned in arbitrary order.
    """
    classes = g.classes
    k = len(classes)
    cls_of = g.class_of
    # a[j, l, m]: number of ways x y = z_m with x in C_j, y in C_l, z_m the representative of C_m
    a = np.zeros((k, k, k))
    for m_idx, cm in enumerate(classes):
        z = cm.representative
        for x in range(g.order):
            y = g.mul(int(g.inv[x]), z)
            a[cls_of[x], cls_of[y], m_idx] += 1
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=k)
    # M acting on class index l: (M_j)_{l m} = a[j, l, m]; eigenvectors of the transpose give omega
    mat = np.einsum("j,jlm->ml", coeffs, a)
    vals, vecs = np.linalg.eig(mat.T)
    sizes = np.array([c.size for c in classes], dtype=float)
    rows = []
    for col in range(k):
        w = vecs[:, col] / vecs[0, col]
        d = np.sqrt(g.order / np.sum(np.abs(w) ** 2 / sizes))
        rows.append(d * w / sizes)
    return np.array(rows)


@dataclass
class OrthogonalityReport:
    ok: bool
    sum_dim_squared: int
    max_row_deviation: float
    max_column_deviation: float
    max_regular_deviation: float
    failures: list[tuple[int, int, float]]

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "sum_dim_squared": self.sum_dim_squared,
            "max_row_deviation": self.max_row_deviation,
            "max_column_deviation": self.max_column_deviation,
            "max_regular_deviation": self.max_regular_deviation,
            "failures": [list(f) for f in self.failures],
        }


def verify_orthogonality(g: FiniteGroup, reps: list[Irrep] | None = None, tol: float = TOL) -> OrthogonalityReport:
    reps = g.irreps if reps is None else reps
    n = g.order
    chi = np.array([r.character for r in reps])  # (irreps, elements)
    dims = np.array([r.dim for r in reps])
    sizes = np.array([g.classes[c].size for c in g.class_of])
    # column relation: (1/|G|) sum_Gamma chi*(g_i) chi(g_j) = delta_{C(g_i) C(g_j)} / |C(g_i)|
    col = chi.conj().T @ chi / n
    same = g.class_of[:, None] == g.class_of[None, :]
    target = np.where(same, 1.0 / sizes[:, None], 0.0)
    dev = np.abs(col - target)
    failures = [(int(i), int(j), float(dev[i, j])) for i, j in np.argwhere(dev > tol)]
    # row relation: (1/|G|) sum_g chi_a*(g) chi_b(g) = delta_ab
    row = chi.conj() @ chi.T / n
    row_dev = float(np.abs(row - np.eye(len(reps))).max())
    regular = (dims @ chi) / n
    reg_dev = float(np.abs(regular - np.eye(n)[0]).max())
    sdim2 = int(np.sum(dims**2))
    ok = not failures and row_dev <= tol and reg_dev <= tol and sdim2 == n and len(reps) == len(g.classes)
    return OrthogonalityReport(ok, sdim2, row_dev, float(dev.max()), reg_dev, failures)


def fusion_table(g: FiniteGroup, reps: list[Irrep] | None = None) -> np.ndarray:
    """Integer tensor N[a, b, c] with a x b = sum_c N[a,b,c] c."""
    reps = g.irreps if reps is None else reps
    chi = np.array([r.character for r in reps])
    raw = np.einsum("ag,bg,cg->abc", chi, chi, chi.conj()) / g.order
    out = np.rint(raw.real)
    if np.abs(raw - out).max() >= INT_TOL:
        raise IrrepError("fusion coefficients are not integral: irrep set incomplete")
    return out.astype(np.int64)


def fusion_rules(g: FiniteGroup, reps: list[Irrep] | None = None) -> dict[tuple[str, str], list[str]]:
    """Readable table: (a, b) -> list of labels appearing (with multiplicity)."""
    reps = g.irreps if reps is None else reps
    n_abc = fusion_table(g, reps)
    out = {}
    for a, b in product(range(len(reps)), repeat=2):
        out[(reps[a].label, reps[b].label)] = [
            reps[c].label for c in range(len(reps)) for _ in range(n_abc[a, b, c])
        ]
    return out


# ----------------------------------------------------------------------------- anyons and GSD


def commuting_pair_orbits(g: FiniteGroup) -> list[tuple[tuple[int, int], int]]:
    """Orbits of commuting pairs under simultaneous conjugation: (lowest pair, orbit size)."""
    n = g.order
    seen = set()
    out = []
    for a, b in product(range(n), repeat=2):
        if not g.commute(a, b) or (a, b) in seen:
            continue
        orbit = {(g.conj(h, a), g.conj(h, b)) for h in range(n)}
        seen |= orbit
        out.append((min(orbit), len(orbit)))
    return out


def count_torus_gsd(g: FiniteGroup) -> int:
    return len(commuting_pair_orbits(g))


def count_anyons(g: FiniteGroup) -> int:
    return sum(len(subgroup(g, c.centralizer)[0].classes) for c in g.classes)


@dataclass(eq=False)
class AnyonLabel:
    flux: ConjugacyClass
    charge: Irrep
    centralizer: FiniteGroup
    embedding: tuple[int, ...]

    @property
    def name(self) -> str:
        return f"({self.flux.representative}|{self.charge.label})"

    def chi(self, x: int) -> complex:
        """Character of the charge at a parent-group element lying in the centralizer."""
        return complex(self.charge.character[self.embedding.index(int(x))])


def anyon_labels(g: FiniteGroup) -> list[AnyonLabel]:
    out = []
    for cls in g.classes:
        sub, emb = subgroup(g, cls.centralizer)
        for rep in irreps(sub) if sub.order != g.order else g.irreps:
            out.append(AnyonLabel(cls, rep, sub, emb))
    return out
