"""Z-type (irrep) and X-type (left multiplication) decoherence channels."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import CapacityError, ConfigError, StateError
from .groups import FiniteGroup
from .operators import Codec, QuantumState, max_configs
from .states import ClassicalDiagonal, DensityState, DenseState, PureEnsemble


def z_kraus(group: FiniteGroup) -> list[tuple[float, np.ndarray]]:
    """Single-edge Kraus list (weight, diagonal of Z_{Gamma,ab}) in irrep, a, b order."""
    out = []
    for rep in group.irreps:
        for a, b in product(range(rep.dim), repeat=2):
            out.append((rep.dim / group.order, rep.matrices[:, a, b].copy()))
    return out


def x_kraus(group: FiniteGroup) -> list[tuple[float, np.ndarray]]:
    """Single-edge Kraus list (weight, permutation g -> h g) for every h."""
    return [(1.0 / group.order, group.mult[h].copy()) for h in range(group.order)]


def kraus_matrices(group: FiniteGroup, kind: str) -> list[tuple[float, np.ndarray]]:
    n = group.order
    mats = []
    if kind == "z":
        for w, diag in z_kraus(group):
            mats.append((w, np.diag(diag)))
    else:
        for w, perm in x_kraus(group):
            m = np.zeros((n, n))
            m[perm, np.arange(n)] = 1.0
            mats.append((w, m))
    return mats


def cptp_defect(group: FiniteGroup, kind: str) -> float:
    """max |sum_k w_k K_k^dag K_k - 1|; zero for a trace-preserving channel."""
    total = sum(w * k.conj().T @ k for w, k in kraus_matrices(group, kind))
    return float(np.abs(total - np.eye(group.order)).max())


def apply_kraus_dense_register(group: FiniteGroup, matrix: np.ndarray, n_sites: int, site: int, kind: str) -> np.ndarray:
    """Explicit Kraus sum on one site of a dense register (digit ``site``)."""
    n = group.order
    out = np.zeros_like(matrix, dtype=complex)
    eye_lo, eye_hi = np.eye(n**site), np.eye(n ** (n_sites - site - 1))
    for w, k in kraus_matrices(group, kind):
        full = np.kron(np.kron(eye_hi, k), eye_lo)
        out += w * full @ matrix @ full.conj().T
    return out


def _dense_digit(codec: Codec, pos: int) -> np.ndarray:
    return (np.arange(codec.dim) // codec.powers[pos]) % codec.n


@dataclass(frozen=True)
class Channel:
    kind: str
    edges: tuple[int, ...] | str = "all"
    method: str = "fast"
    strength: float = 1.0
    stages: tuple["Channel", ...] = field(default=())

    def __post_init__(self) -> None:
        if self.kind not in ("z", "x", "compose"):
            raise ConfigError(f"unknown channel kind {self.kind!r}")
        if self.method not in ("fast", "kraus"):
            raise ConfigError(f"unknown channel method {self.method!r}")
        if not 0.0 <= self.strength <= 1.0:
            raise ConfigError("channel strength must lie in [0, 1]")

    @classmethod
    def from_json(cls, data: dict) -> "Channel":
        edges = data.get("edges", "all")
        if edges != "all":
            edges = tuple(int(e) for e in edges)
        return cls(data.get("kind", "z"), edges, data.get("method", "fast"), float(data.get("strength", 1.0)))

    def to_json(self) -> dict:
        if self.kind == "compose":
            return {"kind": "compose", "stages": [s.to_json() for s in self.stages]}
        return {"kind": self.kind, "edges": self.edges if self.edges == "all" else list(self.edges), "method": self.method, "strength": self.strength}

    def edge_list(self, rho: DensityState) -> tuple[int, ...]:
        return tuple(rho.edges) if self.edges == "all" else tuple(self.edges)

    def kraus(self, group: FiniteGroup):
        return z_kraus(group) if self.kind == "z" else x_kraus(group)

    def __call__(self, rho: DensityState) -> DensityState:
        return self.apply(rho)

    def apply(self, rho: DensityState) -> DensityState:
        if self.kind == "compose":
            for st in self.stages:
                rho = st.apply(rho)
            return rho
        edges = self.edge_list(rho)
        if not edges:
            return rho
        if self.strength < 1.0:
            return _mix(rho, Channel(self.kind, self.edges, self.method).apply(rho), self.strength)
        if self.kind == "z":
            return apply_z_channel(rho, edges, self.method)
        return apply_x_channel(rho, edges)


def compose(c1: Channel, c2: Channel) -> Channel:
    """Apply c2 first, then c1."""
    stages = (c2.stages if c2.kind == "compose" else (c2,)) + (c1.stages if c1.kind == "compose" else (c1,))
    return Channel("compose", "all", "fast", 1.0, stages)


def _mix(rho: DensityState, out: DensityState, p: float) -> DensityState:
    from .states import mixture

    if type(rho) is not type(out):
        rho, out = rho.to_dense(), out.to_dense()
    return mixture([rho, out], [1 - p, p])


# ----------------------------------------------------------------------------- Z channel


def apply_z_channel(rho: DensityState, edges, method: str = "fast") -> DensityState:
    """Maximal Z-type decoherence on ``edges``.

    ``fast`` uses the dephasing identity (coherences between configurations differing on the
    edges are removed); ``kraus`` sums the irrep Kraus branches explicitly.
    """
    edges = tuple(edges)
    if isinstance(rho, ClassicalDiagonal):
        return rho
    if isinstance(rho, DenseState):
        return _z_dense(rho, edges, method)
    if isinstance(rho, PureEnsemble):
        if method == "kraus":
            return _z_ensemble_kraus(rho, edges)
        return _z_ensemble_fast(rho, edges)
    raise StateError(f"unsupported state type {type(rho).__name__}")


def _z_dense(rho: DenseState, edges, method: str) -> DenseState:
    codec = rho.codec
    pos = [rho.edges.index(e) for e in edges]
    mat = rho.matrix.copy()
    if method == "fast":
        for p in pos:
            d = _dense_digit(codec, p)
            mat = mat * (d[:, None] == d[None, :])
        return DenseState(rho.group, rho.edges, mat)
    for p in pos:
        d = _dense_digit(codec, p)
        new = np.zeros_like(mat)
        for w, diag in z_kraus(rho.group):
            k = diag[d]
            new += w * (k[:, None] * mat * k.conj()[None, :])
        mat = new
    return DenseState(rho.group, rho.edges, mat)


def _z_ensemble_fast(rho: PureEnsemble, edges) -> DensityState:
    if set(edges) >= set(rho.edges):
        return rho.dephased()
    weights, members = [], []
    for w, psi in zip(rho.weights, rho.members):
        cfgs = psi.configs()
        sub = np.zeros(len(cfgs), dtype=np.int64)
        for i, e in enumerate(edges):
            sub += cfgs[:, e].astype(np.int64) * (rho.group.order**i)
        for val in np.unique(sub):
            mask = sub == val
            part = QuantumState(psi.lat, psi.group, psi.keys[mask], psi.amps[mask], merged=True)
            nrm = part.norm()
            if nrm > 0:
                weights.append(w * nrm**2)
                members.append(part.normalized())
    return PureEnsemble(rho.lat, rho.group, np.array(weights), members)


def _z_ensemble_kraus(rho: PureEnsemble, edges) -> PureEnsemble:
    branches = len(rho.members) * rho.group.order ** len(edges)
    if branches > max_configs():
        raise CapacityError(f"{branches} Kraus branches exceed the budget")
    weights, members = list(rho.weights), list(rho.members)
    for e in edges:
        new_w, new_m = [], []
        for w, psi in zip(weights, members):
            cfgs = psi.configs()
            for kw, diag in z_kraus(rho.group):
                amps = psi.amps * diag[cfgs[:, e]]
                branch = QuantumState(psi.lat, psi.group, psi.keys, amps)
                nrm = branch.norm()
                if nrm > 1e-14:
                    new_w.append(w * kw * nrm**2)
                    new_m.append(branch.normalized())
        weights, members = new_w, new_m
    return PureEnsemble(rho.lat, rho.group, np.array(weights), members)


# ----------------------------------------------------------------------------- X channel


def apply_x_channel(rho: DensityState, edges) -> DensityState:
    """N'_e[rho] = (1/|G|) sum_g L+_g rho L+_g^dag on each edge."""
    edges = tuple(edges)
    group = rho.group
    n = group.order
    if isinstance(rho, DenseState):
        codec = rho.codec
        mat = rho.matrix
        for e in edges:
            p = rho.edges.index(e)
            d = _dense_digit(codec, p)
            base = np.arange(codec.dim) - d * codec.powers[p]
            new = np.zeros_like(mat)
            for h in range(n):
                perm = base + group.mult[h][d] * codec.powers[p]
                tmp = np.zeros_like(mat)
                tmp[np.ix_(perm, perm)] = mat
                new += tmp / n
            mat = new
        return DenseState(group, rho.edges, mat)
    if isinstance(rho, ClassicalDiagonal):
        # a permutation of basis states keeps diagonal states diagonal
        keys, probs = [rho.keys], [rho.probs]
        for e in edges:
            p = rho.edges.index(e)
            cur_cfgs = rho.codec.decode(np.concatenate(keys))
            cur_probs = np.concatenate(probs)
            keys, probs = [], []
            for h in range(n):
                moved = cur_cfgs.copy()
                moved[:, p] = group.mult[h][moved[:, p]]
                keys.append(rho.codec.encode(moved))
                probs.append(cur_probs / n)
            merged = ClassicalDiagonal.from_keys(group, rho.edges, np.concatenate(keys), np.concatenate(probs))
            keys, probs = [merged.keys], [merged.probs]
        return ClassicalDiagonal(group, rho.edges, keys[0], probs[0])
    if isinstance(rho, PureEnsemble):
        branches = len(rho.members) * n ** len(edges)
        if branches > max_configs():
            raise CapacityError(f"{branches} ensemble members exceed the budget")
        weights, members = list(rho.weights), list(rho.members)
        for e in edges:
            new_w, new_m = [], []
            for w, psi in zip(weights, members):
                cfgs = psi.configs()
                for h in range(n):
                    moved = cfgs.copy()
                    moved[:, e] = group.mult[h][moved[:, e]]
                    new_w.append(w / n)
                    new_m.append(QuantumState.from_configs(psi.lat, group, moved, psi.amps))
            weights, members = new_w, new_m
        return PureEnsemble(rho.lat, group, np.array(weights), members)
    raise StateError(f"unsupported state type {type(rho).__name__}")
