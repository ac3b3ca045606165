"""Density matrices in three representations, partial traces, entropies, CMI, fidelity, overlap."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import CapacityError, PartitionError, StateError
from .groups import FiniteGroup
from .lattice import Region, TorusLattice, Tripartition
from .operators import Codec, QuantumState, merge

DENSE_MAX = 4096
EIG_FLOOR = 1e-12


def _positions(edges: tuple[int, ...], sub) -> list[int]:
    index = {e: i for i, e in enumerate(edges)}
    try:
        return [index[e] for e in sub]
    except KeyError as exc:
        raise PartitionError(f"edge {exc.args[0]} is not part of this state's register") from exc


def _subkeys(codec: Codec, keys: np.ndarray, positions: list[int]) -> np.ndarray:
    """Keys of the digits at ``positions`` (new digit i = old digit positions[i])."""
    out = np.zeros(len(keys), dtype=np.int64)
    n = codec.n
    for i, pos in enumerate(positions):
        out += ((keys // codec.powers[pos]) % n) * (n**i)
    return out


class DensityState:
    group: FiniteGroup
    edges: tuple[int, ...]
    kind = "abstract"

    @property
    def codec(self) -> Codec:
        return Codec(self.group.order, len(self.edges))

    def trace(self) -> float:
        raise NotImplementedError

    def reduce(self, region: Region | tuple[int, ...]) -> "DensityState":
        raise NotImplementedError

    def entropy(self) -> float:
        raise NotImplementedError

    def purity(self) -> float:
        raise NotImplementedError

    def to_dense(self) -> "DenseState":
        raise NotImplementedError

    def _check_trace(self) -> None:
        if abs(self.trace() - 1.0) > 1e-8:
            raise StateError(f"state is not normalised (trace {self.trace():.12f})")


@dataclass(eq=False)
class DenseState(DensityState):
    """Full matrix on the register ``edges`` (digit i of an index is edge ``edges[i]``)."""

    group: FiniteGroup
    edges: tuple[int, ...]
    matrix: np.ndarray
    kind = "dense"

    def __post_init__(self) -> None:
        self.edges = tuple(self.edges)
        dim = self.group.order ** len(self.edges)
        if dim > DENSE_MAX:
            raise CapacityError(f"dense state of dimension {dim} exceeds {DENSE_MAX}")
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (dim, dim):
            raise StateError("matrix shape does not match the register")

    @classmethod
    def from_pure(cls, psi: QuantumState) -> "DenseState":
        vec = psi.to_dense()
        return cls(psi.group, tuple(range(psi.lat.n_edges)), np.outer(vec, vec.conj()))

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalized(self) -> "DenseState":
        return DenseState(self.group, self.edges, self.matrix / self.trace())

    def check(self, tol: float = 1e-10) -> None:
        if np.abs(self.matrix - self.matrix.conj().T).max() > tol:
            raise StateError("dense state is not Hermitian")
        if np.linalg.eigvalsh(self.matrix).min() < -1e-9:
            raise StateError("dense state is not positive semidefinite")

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh((self.matrix + self.matrix.conj().T) / 2)

    def reduce(self, region) -> "DenseState":
        sub = region.edges if isinstance(region, Region) else tuple(sorted(region))
        keep = _positions(self.edges, sub)
        k, n = len(self.edges), self.group.order
        tensor = self.matrix.reshape([n] * (2 * k))
        row = list(range(k))
        col = [k + d if d in keep else d for d in range(k)]
        # axis j of the row block holds digit k-1-j
        in_labels = [row[k - 1 - j] for j in range(k)] + [col[k - 1 - j] for j in range(k)]
        out_labels = [keep[len(keep) - 1 - j] for j in range(len(keep))]
        out_labels += [k + keep[len(keep) - 1 - j] for j in range(len(keep))]
        red = np.einsum(tensor, in_labels, out_labels)
        dim = n ** len(keep)
        return DenseState(self.group, tuple(sub), red.reshape(dim, dim))

    def entropy(self) -> float:
        self._check_trace()
        ev = self.eigenvalues()
        ev = ev[ev > EIG_FLOOR]
        return float(-np.sum(ev * np.log(ev)))

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def to_dense(self) -> "DenseState":
        return self


@dataclass(eq=False)
class ClassicalDiagonal(DensityState):
    """Diagonal density matrix: sorted unique keys with probabilities."""

    group: FiniteGroup
    edges: tuple[int, ...]
    keys: np.ndarray
    probs: np.ndarray
    kind = "classical"

    def __post_init__(self) -> None:
        self.edges = tuple(self.edges)
        self.keys = np.asarray(self.keys, dtype=np.int64)
        self.probs = np.asarray(self.probs, dtype=float)
        if len(self.probs) and self.probs.min() < 0:
            raise StateError("negative probability")

    @classmethod
    def from_keys(cls, group, edges, keys, probs) -> "ClassicalDiagonal":
        uk, up = merge(np.asarray(keys, dtype=np.int64), np.asarray(probs, dtype=complex), prune=0.0)
        return cls(group, edges, uk, up.real)

    @classmethod
    def uniform(cls, group, edges, keys) -> "ClassicalDiagonal":
        keys = np.unique(np.asarray(keys, dtype=np.int64))
        return cls(group, edges, keys, np.full(len(keys), 1.0 / len(keys)))

    def trace(self) -> float:
        return float(self.probs.sum())

    def normalized(self) -> "ClassicalDiagonal":
        return ClassicalDiagonal(self.group, self.edges, self.keys, self.probs / self.trace())

    def configs(self) -> np.ndarray:
        return self.codec.decode(self.keys)

    def reduce(self, region) -> "ClassicalDiagonal":
        sub = region.edges if isinstance(region, Region) else tuple(sorted(region))
        keep = _positions(self.edges, sub)
        Codec(self.group.order, len(sub))  # capacity check
        new = _subkeys(self.codec, self.keys, keep)
        uk, inv = np.unique(new, return_inverse=True)
        probs = np.bincount(inv.ravel(), weights=self.probs, minlength=len(uk))
        return ClassicalDiagonal(self.group, tuple(sub), uk, probs)

    def entropy(self) -> float:
        self._check_trace()
        p = self.probs[self.probs > EIG_FLOOR]
        return float(-np.sum(p * np.log(p)))

    def purity(self) -> float:
        return float(np.sum(self.probs**2))

    def to_dense(self) -> DenseState:
        dim = self.codec.dim
        if dim > DENSE_MAX:
            raise CapacityError(f"dense conversion of dimension {dim} exceeds {DENSE_MAX}")
        mat = np.zeros((dim, dim), dtype=complex)
        mat[self.keys, self.keys] = self.probs
        return DenseState(self.group, self.edges, mat)

    def permuted(self, order: list[int]) -> "ClassicalDiagonal":
        """Same state with the register relabelled so that new digit i is old digit order[i]."""
        new = _subkeys(self.codec, self.keys, list(order))
        idx = np.argsort(new)
        return ClassicalDiagonal(self.group, tuple(self.edges[o] for o in order), new[idx], self.probs[idx])


@dataclass(eq=False)
class PureEnsemble(DensityState):
    """sum_j w_j |psi_j><psi_j| over full-lattice states (members need not be orthogonal)."""

    lat: TorusLattice
    group: FiniteGroup
    weights: np.ndarray
    members: list[QuantumState]
    kind = "ensemble"

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.weights) != len(self.members):
            raise StateError("weights and members differ in length")
        if len(self.weights) and self.weights.min() < 0:
            raise StateError("negative ensemble weight")
        self.edges = tuple(range(self.lat.n_edges))

    @classmethod
    def pure(cls, psi: QuantumState) -> "PureEnsemble":
        return cls(psi.lat, psi.group, np.array([1.0]), [psi.normalized()])

    def trace(self) -> float:
        return float(sum(w * m.norm() ** 2 for w, m in zip(self.weights, self.members)))

    def normalized(self) -> "PureEnsemble":
        t = self.trace()
        return PureEnsemble(self.lat, self.group, self.weights / t, self.members)

    def gram(self) -> np.ndarray:
        k = len(self.members)
        out = np.zeros((k, k), dtype=complex)
        sw = np.sqrt(self.weights)
        for i in range(k):
            for j in range(i, k):
                val = sw[i] * sw[j] * self.members[i].inner(self.members[j])
                out[i, j], out[j, i] = val, np.conj(val)
        return out

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.gram())

    def entropy(self) -> float:
        self._check_trace()
        ev = self.eigenvalues()
        ev = ev[ev > EIG_FLOOR]
        return float(-np.sum(ev * np.log(ev)))

    def purity(self) -> float:
        g = self.gram()
        return float(np.real(np.vdot(g, g)))

    def reduce(self, region) -> DenseState:
        sub = region.edges if isinstance(region, Region) else tuple(sorted(region))
        keep = _positions(self.edges, sub)
        dim = self.group.order ** len(sub)
        if dim > DENSE_MAX:
            raise CapacityError(
                f"reduced dimension {dim} exceeds {DENSE_MAX}; dephase to a ClassicalDiagonal state first"
            )
        rest = [i for i in range(len(self.edges)) if i not in keep]
        out = np.zeros((dim, dim), dtype=complex)
        codec = Codec(self.group.order, len(self.edges))
        for w, psi in zip(self.weights, self.members):
            if len(psi) == 0:
                continue
            rows = _subkeys(codec, psi.keys, keep)
            env = _subkeys(codec, psi.keys, rest) if rest else np.zeros(len(psi.keys), dtype=np.int64)
            _, cols = np.unique(env, return_inverse=True)
            mat = sparse.csr_matrix((psi.amps, (rows, cols.ravel())), shape=(dim, int(cols.max()) + 1))
            out += w * (mat @ mat.conj().T).toarray()
        return DenseState(self.group, tuple(sub), out)

    def to_dense(self) -> DenseState:
        dim = self.group.order ** len(self.edges)
        if dim > DENSE_MAX:
            raise CapacityError(f"dense conversion of dimension {dim} exceeds {DENSE_MAX}")
        mat = np.zeros((dim, dim), dtype=complex)
        for w, psi in zip(self.weights, self.members):
            vec = psi.to_dense()
            mat += w * np.outer(vec, vec.conj())
        return DenseState(self.group, self.edges, mat)

    def dephased(self) -> ClassicalDiagonal:
        keys = np.concatenate([m.keys for m in self.members]) if self.members else np.zeros(0, dtype=np.int64)
        probs = np.concatenate([w * np.abs(m.amps) ** 2 for w, m in zip(self.weights, self.members)]) if self.members else np.zeros(0)
        return ClassicalDiagonal.from_keys(self.group, self.edges, keys, probs)


# ----------------------------------------------------------------------------- functions


def reduce(rho: DensityState, region) -> DensityState:
    return rho.reduce(region)


def entropy(rho: DensityState) -> float:
    return rho.entropy()


def cmi(rho: DensityState, part: Tripartition) -> float:
    """I(A:C|B) = S(AB) + S(BC) - S(B) - S(ABC), in nats."""
    part.validate()
    a, b, c = part.a.edges, part.b.edges, part.c.edges
    if not set(a) | set(b) | set(c) <= set(rho.edges):
        raise PartitionError("tripartition refers to edges outside the state")
    s_ab = rho.reduce(tuple(sorted(a + b))).entropy()
    s_bc = rho.reduce(tuple(sorted(b + c))).entropy()
    s_b = rho.reduce(b).entropy() if b else 0.0
    abc = tuple(sorted(a + b + c))
    s_abc = rho.entropy() if abc == tuple(rho.edges) else rho.reduce(abc).entropy()
    return s_ab + s_bc - s_b - s_abc


def mixture(states: list[DensityState], weights) -> DensityState:
    weights = np.asarray(weights, dtype=float)
    first = states[0]
    if all(isinstance(s, ClassicalDiagonal) for s in states):
        keys = np.concatenate([s.keys for s in states])
        probs = np.concatenate([w * s.probs for w, s in zip(weights, states)])
        return ClassicalDiagonal.from_keys(first.group, first.edges, keys, probs)
    if all(isinstance(s, PureEnsemble) for s in states):
        return PureEnsemble(
            first.lat,
            first.group,
            np.concatenate([w * s.weights for w, s in zip(weights, states)]),
            [m for s in states for m in s.members],
        )
    mats = [s.to_dense().matrix for s in states]
    return DenseState(first.group, first.edges, sum(w * m for w, m in zip(weights, mats)))


def _classical_pair(rho: ClassicalDiagonal, sigma: ClassicalDiagonal):
    if rho.edges != sigma.edges:
        raise StateError("states live on different registers")
    # keys are sorted and unique, so a binary search finds the common support
    idx = np.searchsorted(sigma.keys, rho.keys).clip(0, max(len(sigma.keys) - 1, 0))
    hit = sigma.keys[idx] == rho.keys if len(sigma.keys) else np.zeros(len(rho.keys), dtype=bool)
    return rho.probs[hit], sigma.probs[idx[hit]]


def _pure_weight(psi: QuantumState, sigma: DensityState) -> float:
    """<psi|sigma|psi>."""
    if isinstance(sigma, ClassicalDiagonal):
        _, i, j = np.intersect1d(psi.keys, sigma.keys, assume_unique=True, return_indices=True)
        return float(np.sum(np.abs(psi.amps[i]) ** 2 * sigma.probs[j]))
    if isinstance(sigma, PureEnsemble):
        return float(sum(w * abs(m.inner(psi)) ** 2 for w, m in zip(sigma.weights, sigma.members)))
    vec = psi.to_dense()
    return float(np.real(np.vdot(vec, sigma.to_dense().matrix @ vec)))


def fidelity(rho: DensityState, sigma: DensityState) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if isinstance(rho, ClassicalDiagonal) and isinstance(sigma, ClassicalDiagonal):
        p, q = _classical_pair(rho, sigma)
        return float(np.sum(np.sqrt(p * q)) ** 2)
    for a, b in ((rho, sigma), (sigma, rho)):
        if isinstance(a, PureEnsemble) and len(a.members) == 1:
            psi = a.members[0]
            return float(a.weights[0] * _pure_weight(psi, b))
    r, s = rho.to_dense().matrix, sigma.to_dense().matrix
    ev, vec = np.linalg.eigh((r + r.conj().T) / 2)
    root = (vec * np.sqrt(np.clip(ev, 0, None))) @ vec.conj().T
    inner = root @ s @ root
    lam = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    return float(np.sum(np.sqrt(np.clip(lam, 0, None))) ** 2)


@dataclass
class Overlap:
    raw: float
    normalized: float


def overlap(rho: DensityState, sigma: DensityState) -> Overlap:
    if isinstance(rho, ClassicalDiagonal) and isinstance(sigma, ClassicalDiagonal):
        p, q = _classical_pair(rho, sigma)
        raw = float(np.sum(p * q))
    elif isinstance(rho, PureEnsemble):
        raw = float(sum(w * _pure_weight(m, sigma) for w, m in zip(rho.weights, rho.members)))
    elif isinstance(sigma, PureEnsemble):
        raw = float(sum(w * _pure_weight(m, rho) for w, m in zip(sigma.weights, sigma.members)))
    else:
        raw = float(np.real(np.trace(rho.to_dense().matrix @ sigma.to_dense().matrix)))
    return Overlap(raw, raw / np.sqrt(rho.purity() * sigma.purity()))
