"""Canonical classical extension: probability measures over pure states.

A classical state is a finite atomic measure ``sum_k w_k delta(omega_k)`` on
the pure states of C^n. The reduction map sends it to the density operator
``sum_k w_k |omega_k><omega_k|``; a quantum effect E induces the classical
effect ``omega -> <omega|E|omega>`` with the same statistics on every
preimage.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

import numpy as np

from .qcore import (
    TOL_PSD,
    DensityOperator,
    DimensionMismatch,
    DiscretePOVM,
    Effect,
    FuzzyQMError,
    PureState,
    ValidationError,
    _rng,
    born_probability,
    eigh_sorted,
    fix_phases,
    haar_random_vectors,
)

WEIGHT_PRUNE = 1e-14
TOL_WEIGHT_SUM = 1e-12
TOL_FUZZY_SUM = 1e-10


class AtomMismatch(FuzzyQMError):
    """A tabulated effect was evaluated on atoms it was not built for."""


def atom_fingerprint(vectors: np.ndarray) -> str:
    v = np.ascontiguousarray(np.asarray(vectors, dtype=complex))
    return hashlib.sha1(repr(v.shape).encode() + v.tobytes()).hexdigest()


class ClassicalState:
    """Finite atomic probability measure over pure states.

    Weights below ``WEIGHT_PRUNE`` are dropped and the rest renormalized.
    """

    __slots__ = ("weights", "vectors", "_fingerprint")

    def __init__(self, weights, vectors) -> None:
        w = np.asarray(weights, dtype=float).reshape(-1)
        v = np.asarray(vectors, dtype=complex)
        if v.ndim != 2 or v.shape[0] != w.shape[0]:
            raise ValidationError(f"need one vector per weight, got {v.shape} for {w.shape[0]} weights")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("atom weights must be non-negative")
        if abs(w.sum() - 1.0) > TOL_WEIGHT_SUM:
            raise ValidationError(f"atom weights sum to {w.sum()!r}")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise ValidationError("atom vectors must be unit vectors")
        keep = w >= WEIGHT_PRUNE
        w, v = w[keep], fix_phases(v[keep])
        if w.size == 0:
            raise ValidationError("classical state has no atoms")
        w = w / w.sum()
        w.setflags(write=False)
        v.setflags(write=False)
        self.weights = w
        self.vectors = v
        self._fingerprint = None

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple[float, PureState]]) -> ClassicalState:
        atoms = list(atoms)
        dims = {psi.dim for _, psi in atoms}
        if len(dims) > 1:
            raise DimensionMismatch("atoms live in different dimensions")
        return cls([w for w, _ in atoms], np.array([psi.vector for _, psi in atoms]))

    @classmethod
    def delta(cls, psi: PureState) -> ClassicalState:
        return cls([1.0], psi.vector[None, :])

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def atoms(self) -> list[tuple[float, PureState]]:
        return [(float(w), PureState(v)) for w, v in zip(self.weights, self.vectors)]

    @property
    def fingerprint(self) -> str:
        if self._fingerprint is None:
            self._fingerprint = atom_fingerprint(self.vectors)
        return self._fingerprint

    def __len__(self) -> int:
        return self.weights.shape[0]

    def mix(self, other: ClassicalState, lam: float) -> ClassicalState:
        """Convex combination ``lam * self + (1 - lam) * other`` by atom concatenation."""
        if other.dim != self.dim:
            raise DimensionMismatch("cannot mix states of different dimension")
        w = np.concatenate([lam * self.weights, (1.0 - lam) * other.weights])
        return ClassicalState(w, np.vstack([self.vectors, other.vectors]))

    def __repr__(self) -> str:
        return f"ClassicalState(dim={self.dim}, atoms={len(self)})"


class ClassicalEffect:
    """Function from pure states to [0, 1], evaluated row-wise on ``(k, n)`` arrays."""

    dim: int

    def evaluate(self, vectors: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, omega: PureState) -> float:
        return float(self.evaluate(omega.vector[None, :])[0])


class InducedEffect(ClassicalEffect):
    """``e(omega) = <omega|E|omega>`` for a quantum effect E."""

    def __init__(self, effect: Effect) -> None:
        self.effect = effect if isinstance(effect, Effect) else Effect(effect)
        self.dim = self.effect.dim

    def evaluate(self, vectors: np.ndarray) -> np.ndarray:
        v = np.asarray(vectors, dtype=complex)
        if v.shape[1] != self.dim:
            raise DimensionMismatch(f"effect dim {self.dim} vs vectors {v.shape}")
        return np.einsum("ki,ij,kj->k", v.conj(), self.effect.matrix, v).real


class TabulatedEffect(ClassicalEffect):
    """Values given on a fixed atom list; only valid against those exact atoms."""

    def __init__(self, vectors, values) -> None:
        v = np.array(vectors, dtype=complex)
        c = np.array(values, dtype=float).reshape(-1)
        if v.ndim != 2 or v.shape[0] != c.shape[0]:
            raise ValidationError("need one value per atom")
        if np.any(c < -TOL_PSD) or np.any(c > 1.0 + TOL_PSD):
            raise ValidationError("tabulated effect values must lie in [0, 1]")
        v.setflags(write=False)
        c.setflags(write=False)
        self.vectors = v
        self.values = c
        self.dim = v.shape[1]
        self.fingerprint = atom_fingerprint(v)

    @classmethod
    def on(cls, state: ClassicalState, values) -> TabulatedEffect:
        return cls(state.vectors, values)

    def evaluate(self, vectors: np.ndarray) -> np.ndarray:
        if atom_fingerprint(vectors) != self.fingerprint:
            raise AtomMismatch("tabulated effect evaluated on a different atom set")
        return self.values.copy()

    def __call__(self, omega: PureState) -> float:
        hits = np.flatnonzero(np.all(np.isclose(self.vectors, omega.vector, atol=1e-12), axis=1))
        if hits.size == 0:
            raise AtomMismatch("state is not one of the tabulated atoms")
        return float(self.values[hits[0]])


class ProductEffect(ClassicalEffect):
    """Pointwise product of two classical effects."""

    def __init__(self, first: ClassicalEffect, second: ClassicalEffect) -> None:
        if first.dim != second.dim:
            raise DimensionMismatch("product of effects on different dimensions")
        self.first = first
        self.second = second
        self.dim = first.dim

    def evaluate(self, vectors: np.ndarray) -> np.ndarray:
        return self.first.evaluate(vectors) * self.second.evaluate(vectors)

    def __call__(self, omega: PureState) -> float:
        return self.first(omega) * self.second(omega)


def _sample_points(effects: Sequence[ClassicalEffect]) -> np.ndarray:
    def tables(e):
        if isinstance(e, TabulatedEffect):
            yield e
        elif isinstance(e, ProductEffect):
            yield from tables(e.first)
            yield from tables(e.second)

    for e in effects:
        for t in tables(e):
            return t.vectors
    return haar_random_vectors(effects[0].dim, 16, seed=20030101)


class FuzzyObservable:
    """Classical effect-valued measure on a finite outcome set.

    ``values`` are optional real outcome values used for moments. ``shape``
    records the factor sizes of a product outcome set (set by
    :func:`joint_observable`); it is ``(len(effects),)`` otherwise.
    """

    def __init__(self, effects: Sequence[ClassicalEffect], values=None, *, shape=None) -> None:
        effs = tuple(effects)
        if not effs:
            raise ValidationError("observable needs at least one effect")
        if any(e.dim != effs[0].dim for e in effs):
            raise DimensionMismatch("observable effects have different dimensions")
        if values is not None:
            values = tuple(float(x) for x in values)
            if len(values) != len(effs):
                raise ValidationError("need one outcome value per effect")
        self.effects = effs
        self.values = values
        self.shape = tuple(shape) if shape is not None else (len(effs),)
        if int(np.prod(self.shape)) != len(effs):
            raise ValidationError(f"shape {self.shape} does not match {len(effs)} effects")
        pts = _sample_points(effs)
        total = self.evaluate(pts).sum(axis=1)
        if np.max(np.abs(total - 1.0)) > TOL_FUZZY_SUM:
            raise ValidationError("observable effects do not sum to 1")

    @classmethod
    def c_representative(cls, povm: DiscretePOVM, values=None) -> FuzzyObservable:
        """Induced classical observable of a quantum POVM."""
        return cls([InducedEffect(e) for e in povm], values)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    def __len__(self) -> int:
        return len(self.effects)

    def evaluate(self, vectors: np.ndarray) -> np.ndarray:
        """``(k, D)`` table of effect values at each point."""
        return np.stack([e.evaluate(vectors) for e in self.effects], axis=1)

    def distribution(self, p: ClassicalState) -> np.ndarray:
        return p.weights @ self.evaluate(p.vectors)


def reduce(p: ClassicalState) -> DensityOperator:
    """Reduction map to the density operator sum_k w_k |omega_k><omega_k|."""
    v = p.vectors
    return DensityOperator((v.T * p.weights) @ v.conj())


def induced_effect(effect: Effect) -> InducedEffect:
    return InducedEffect(effect)


def classical_expectation(p: ClassicalState, e: ClassicalEffect) -> float:
    if e.dim != p.dim:
        raise DimensionMismatch(f"state dim {p.dim} vs effect dim {e.dim}")
    return float(p.weights @ e.evaluate(p.vectors))


def statistics_gap(p: ClassicalState, effect: Effect) -> float:
    """|tr(R(p) E) - sum_k w_k <omega_k|E|omega_k>|."""
    quantum = born_probability(reduce(p), effect)
    classical = classical_expectation(p, InducedEffect(effect))
    return abs(quantum - classical)


def eigen_decomposition_state(rho: DensityOperator) -> ClassicalState:
    """The spectral preimage of rho: atoms are eigenvectors, weights eigenvalues."""
    vals, vecs = eigh_sorted(rho.matrix)
    keep = vals > WEIGHT_PRUNE
    w = vals[keep]
    return ClassicalState(w / w.sum(), vecs[:, keep].T)


def random_decomposition(rho: DensityOperator, m: int, seed=None) -> ClassicalState:
    """A random m-atom preimage of rho.

    The square-root-weighted eigenvectors are mixed through an ``m x rank``
    isometry (orthonormalized complex Gaussian columns). With ``m == rank``
    the isometry is a diagonal phase matrix, which returns the spectral
    decomposition itself.
    """
    vals, vecs = eigh_sorted(rho.matrix)
    keep = vals > WEIGHT_PRUNE
    r = int(keep.sum())
    if m < r:
        raise ValidationError(f"need at least rank(rho) = {r} atoms, got {m}")
    psi = vecs[:, keep].T * np.sqrt(vals[keep])[:, None]
    rng = _rng(seed)
    if m == r:
        u = np.diag(np.exp(2j * np.pi * rng.uniform(size=r)))
    else:
        g = rng.standard_normal((m, r)) + 1j * rng.standard_normal((m, r))
        u, _ = np.linalg.qr(g)
    phi = u @ psi
    w = np.sum(np.abs(phi) ** 2, axis=1)
    keep = w > WEIGHT_PRUNE
    w, phi = w[keep], phi[keep]
    return ClassicalState(w / w.sum(), phi / np.sqrt(w)[:, None])


def joint_observable(a: FuzzyObservable, b: FuzzyObservable) -> FuzzyObservable:
    """Product joint observable g_{d,d'} = e_d * f_{d'}; outcome (d, d') at index d*len(b)+d'.

    Outcome values, when both factors carry them, are the products x_d * y_d'.
    """
    if a.dim != b.dim:
        raise DimensionMismatch("joint observable of different dimensions")
    effects = [ProductEffect(e, f) for e in a.effects for f in b.effects]
    values = None
    if a.values is not None and b.values is not None:
        values = [x * y for x in a.values for y in b.values]
    return FuzzyObservable(effects, values, shape=(len(a), len(b)))


def marginal_evaluations(joint: FuzzyObservable, vectors: np.ndarray, axis: int) -> np.ndarray:
    """Marginal effect values of a two-factor joint observable.

    ``axis=0`` sums out the second factor (giving the first observable's
    effects), ``axis=1`` sums out the first.
    """
    if len(joint.shape) != 2:
        raise ValidationError("not a two-factor joint observable")
    table = joint.evaluate(vectors).reshape(-1, *joint.shape)
    return table.sum(axis=2 - axis)


def dispersion(p: ClassicalState, obs: FuzzyObservable) -> float:
    """Variance of the outcome values under the distribution q_d = E_p[e_d]."""
    if obs.values is None:
        raise ValidationError("dispersion needs outcome values")
    q = obs.distribution(p)
    x = np.asarray(obs.values)
    return max(float(q @ x**2 - (q @ x) ** 2), 0.0)


def state_to_json(p: ClassicalState) -> dict:
    return {
        "dim": p.dim,
        "atoms": [
            {"w": float(w), "re": v.real.tolist(), "im": v.imag.tolist()}
            for w, v in zip(p.weights, p.vectors)
        ],
    }


def state_from_json(obj: dict) -> ClassicalState:
    atoms = obj["atoms"]
    vecs = np.array([np.asarray(a["re"]) + 1j * np.asarray(a["im"]) for a in atoms], dtype=complex)
    if vecs.shape[1] != obj["dim"]:
        raise ValidationError("atom vectors do not match dim")
    return ClassicalState([a["w"] for a in atoms], vecs)
