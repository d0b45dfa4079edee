"""Matrices, quantum states, effects and the decompositions everything else uses.

All value types hold read-only numpy arrays and are validated once, at
construction. Functions that consume them assume the invariants hold.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

TOL_HERM = 1e-10
TOL_TRACE = 1e-10
TOL_NORM = 1e-10
TOL_PSD = 1e-10
TOL_POVM = 1e-9
TOL_ZERO = 1e-12
TOL_RECON = 1e-10

# below this magnitude an amplitude is not used to fix the global phase
_PHASE_TOL = 1e-10
_RANK_TOL = 1e-10


class FuzzyQMError(ValueError):
    """Base class for all library errors."""


class DimensionMismatch(FuzzyQMError):
    pass


class ValidationError(FuzzyQMError):
    """An object failed its construction-time invariants."""


class ZeroProbabilityOutcome(FuzzyQMError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _as_array(m) -> np.ndarray:
    if isinstance(m, (DensityOperator, Effect)):
        return m.matrix
    if isinstance(m, PureState):
        return m.vector
    return np.asarray(m, dtype=complex)


def _check_square(m: np.ndarray, name: str = "matrix") -> int:
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    return m.shape[0]


def is_hermitian(m: np.ndarray, atol: float = TOL_HERM) -> bool:
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= atol)


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so its first non-negligible entry is real and positive."""
    v = np.asarray(v, dtype=complex)
    nz = np.flatnonzero(np.abs(v) > _PHASE_TOL)
    if nz.size == 0:
        return v.copy()
    z = v[nz[0]]
    out = v * (abs(z) / z)
    out[nz[0]] = abs(z)
    return out


def fix_phases(vs: np.ndarray) -> np.ndarray:
    """Row-wise :func:`fix_phase` for a ``(k, n)`` stack of vectors."""
    vs = np.asarray(vs, dtype=complex)
    mask = np.abs(vs) > _PHASE_TOL
    first = np.argmax(mask, axis=1)
    z = vs[np.arange(vs.shape[0]), first]
    z = np.where(mask.any(axis=1), z, 1.0)
    out = vs * (np.abs(z) / z)[:, None]
    rows = np.arange(vs.shape[0])
    out[rows, first] = np.where(mask.any(axis=1), np.abs(z), out[rows, first])
    return out


def eigh_sorted(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix in a deterministic order.

    Eigenvalues come out descending; eigenvectors (columns) have their phase
    fixed, and exact ties are broken by the lexicographic order of the
    eigenvector entries, compared as (real, imag) pairs.
    """
    m = hermitize(_as_array(m))
    vals, vecs = np.linalg.eigh(m)
    vecs = fix_phases(vecs.T)
    keys = []
    for lam, v in zip(vals, vecs):
        entries = tuple(x for z in np.round(v, 12) for x in (z.real, z.imag))
        keys.append((-round(float(lam), 12), entries))
    order = sorted(range(len(vals)), key=lambda i: keys[i])
    return vals[order], vecs[order].T


class PureState:
    """Unit vector in C^n with its global phase fixed."""

    __slots__ = ("vector",)

    def __init__(self, amplitudes, *, atol: float = TOL_NORM) -> None:
        v = np.asarray(amplitudes, dtype=complex)
        if v.ndim != 1 or v.size < 1:
            raise ValidationError(f"amplitudes must be a non-empty vector, got shape {v.shape}")
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > atol:
            raise ValidationError(f"state norm {norm!r} differs from 1")
        self.vector = _frozen(fix_phase(v))

    @classmethod
    def normalized(cls, amplitudes) -> PureState:
        v = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(v)
        if norm <= TOL_ZERO:
            raise ValidationError("cannot normalize the zero vector")
        return cls(v / norm)

    @classmethod
    def basis(cls, n: int, k: int) -> PureState:
        v = np.zeros(n, dtype=complex)
        v[k] = 1.0
        return cls(v)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def projector(self) -> np.ndarray:
        return np.outer(self.vector, self.vector.conj())

    def overlap(self, other: PureState) -> float:
        """|<self|other>|^2."""
        return float(abs(np.vdot(self.vector, other.vector)) ** 2)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PureState):
            return NotImplemented
        return self.dim == other.dim and np.allclose(self.vector, other.vector, atol=TOL_NORM)

    __hash__ = None

    def __repr__(self) -> str:
        return f"PureState({np.array2string(self.vector, precision=4)})"


class DensityOperator:
    """Positive, unit-trace Hermitian matrix."""

    __slots__ = ("matrix",)

    def __init__(self, matrix, *, atol: float = TOL_PSD) -> None:
        m = np.asarray(_as_array(matrix), dtype=complex)
        _check_square(m, "density operator")
        if not is_hermitian(m, max(atol, TOL_HERM)):
            raise ValidationError("density operator is not Hermitian")
        m = hermitize(m)
        tr = np.trace(m).real
        if abs(tr - 1.0) > max(atol, TOL_TRACE):
            raise ValidationError(f"density operator has trace {tr!r}")
        lo = np.linalg.eigvalsh(m)[0]
        if lo < -atol:
            raise ValidationError(f"density operator has eigenvalue {lo!r} < 0")
        self.matrix = _frozen(m)

    @classmethod
    def from_state(cls, psi: PureState) -> DensityOperator:
        return cls(psi.projector())

    @classmethod
    def maximally_mixed(cls, n: int) -> DensityOperator:
        return cls(np.eye(n) / n)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def __repr__(self) -> str:
        return f"DensityOperator(dim={self.dim})"


class Effect:
    """Hermitian operator with spectrum in [0, 1]."""

    __slots__ = ("matrix",)

    def __init__(self, matrix, *, atol: float = TOL_PSD) -> None:
        m = np.asarray(_as_array(matrix), dtype=complex)
        _check_square(m, "effect")
        if not is_hermitian(m, max(atol, TOL_HERM)):
            raise ValidationError("effect is not Hermitian")
        m = hermitize(m)
        spec = np.linalg.eigvalsh(m)
        if spec[0] < -atol or spec[-1] > 1.0 + atol:
            raise ValidationError(f"effect spectrum [{spec[0]!r}, {spec[-1]!r}] leaves [0, 1]")
        self.matrix = _frozen(m)

    @classmethod
    def identity(cls, n: int) -> Effect:
        return cls(np.eye(n))

    @classmethod
    def projector(cls, psi: PureState) -> Effect:
        return cls(psi.projector())

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def complement(self) -> Effect:
        return Effect(np.eye(self.dim) - self.matrix)

    def __repr__(self) -> str:
        return f"Effect(dim={self.dim})"


class DiscretePOVM:
    """Outcome-indexed effects summing to the identity."""

    __slots__ = ("effects",)

    def __init__(self, effects: Sequence, *, atol: float = TOL_POVM) -> None:
        effs = tuple(e if isinstance(e, Effect) else Effect(e) for e in effects)
        if not effs:
            raise ValidationError("a POVM needs at least one effect")
        n = effs[0].dim
        if any(e.dim != n for e in effs):
            raise DimensionMismatch("POVM effects have different dimensions")
        total = sum(e.matrix for e in effs)
        if np.max(np.abs(total - np.eye(n))) > atol:
            raise ValidationError("POVM effects do not sum to the identity")
        self.effects = effs

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    def __len__(self) -> int:
        return len(self.effects)

    def __iter__(self):
        return iter(self.effects)

    def __getitem__(self, d: int) -> Effect:
        return self.effects[d]


class KrausOperation:
    """Outcome-indexed operators A_d with sum_d A_d* A_d = identity."""

    __slots__ = ("operators",)

    def __init__(self, operators: Sequence, *, atol: float = TOL_POVM) -> None:
        ops = tuple(_frozen(_as_array(a)) for a in operators)
        if not ops:
            raise ValidationError("an operation needs at least one Kraus operator")
        n = _check_square(ops[0], "Kraus operator")
        for a in ops:
            if a.shape != (n, n):
                raise DimensionMismatch("Kraus operators have different shapes")
        total = sum(a.conj().T @ a for a in ops)
        if np.max(np.abs(total - np.eye(n))) > atol:
            raise ValidationError("Kraus operators are not trace preserving")
        self.operators = ops

    @classmethod
    def lueders(cls, povm: DiscretePOVM) -> KrausOperation:
        """Square-root operations A_d = E_d^{1/2}."""
        return cls([matrix_sqrt(e.matrix) for e in povm])

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def povm(self) -> DiscretePOVM:
        return DiscretePOVM([hermitize(a.conj().T @ a) for a in self.operators])

    def __len__(self) -> int:
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators)

    def __getitem__(self, d: int) -> np.ndarray:
        return self.operators[d]


def _check_dims(*ms: np.ndarray) -> None:
    n = ms[0].shape[0]
    if any(m.shape[0] != n for m in ms):
        raise DimensionMismatch(f"dimension mismatch: {[m.shape for m in ms]}")


def born_probability(rho, effect) -> float:
    """tr(rho E), with round-off negatives clamped to zero."""
    r, e = _as_array(rho), _as_array(effect)
    _check_dims(r, e)
    p = float(np.real(np.einsum("ij,ji->", r, e)))
    if -TOL_PSD <= p < 0.0:
        p = 0.0
    return p


def matrix_sqrt(m) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix via its spectrum."""
    m = _as_array(m)
    _check_square(m)
    if not is_hermitian(m):
        raise ValidationError("matrix_sqrt needs a Hermitian matrix")
    vals, vecs = eigh_sorted(m)
    if vals.size and vals.min() < -TOL_PSD:
        raise ValidationError(f"matrix has eigenvalue {vals.min()!r} < 0")
    root = np.sqrt(np.clip(vals, 0.0, None))
    return hermitize((vecs * root) @ vecs.conj().T)


def _complete_basis(cols: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis of the complement of span(cols), by Gram-Schmidt on e_0, e_1, ..."""
    basis = [c for c in cols.T]
    extra = []
    for k in range(n):
        if len(basis) == n:
            break
        v = np.zeros(n, dtype=complex)
        v[k] = 1.0
        for _ in range(2):
            for b in basis:
                v = v - np.vdot(b, v) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            v = v / nv
            basis.append(v)
            extra.append(v)
    return np.array(extra, dtype=complex).reshape(len(extra), n).T


def polar_decompose(m, *, complete: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Polar decomposition ``m = V @ P`` with ``P = (m* m)^{1/2}``.

    ``V`` is the partial isometry mapping range(P) onto range(m), so ``V* V``
    projects onto range(P). With ``complete=True`` it is extended to a unitary
    by sending the Gram-Schmidt completion of range(P) (built from standard
    basis vectors) to the Gram-Schmidt completion of range(m).
    """
    m = _as_array(m)
    n = _check_square(m)
    w, s, vh = np.linalg.svd(m)
    rank = int(np.sum(s > _RANK_TOL * max(1.0, s[0] if s.size else 0.0)))
    p = hermitize((vh.conj().T * s) @ vh)
    v = w[:, :rank] @ vh[:rank]
    if complete and rank < n:
        q_in = _complete_basis(vh[:rank].conj().T, n)
        q_out = _complete_basis(w[:, :rank], n)
        v = v + q_out @ q_in.conj().T
    return v, p


def apply_operation(rho, a) -> tuple[DensityOperator, float]:
    """Post-measurement state A rho A* / tr(A rho A*) and its probability."""
    r, a = _as_array(rho), _as_array(a)
    _check_dims(r, a)
    out = a @ r @ a.conj().T
    prob = float(np.real(np.trace(out)))
    if prob <= TOL_ZERO:
        raise ZeroProbabilityOutcome(f"outcome probability {prob!r} is zero")
    return DensityOperator(out / prob), prob


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_random_vectors(n: int, count: int, seed=None) -> np.ndarray:
    """``(count, n)`` array of Haar-distributed unit vectors, phases fixed."""
    rng = _rng(seed)
    g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return fix_phases(g)


def haar_random_state(n: int, seed=None) -> PureState:
    if n < 2:
        raise ValidationError("dimension must be at least 2")
    return PureState(haar_random_vectors(n, 1, seed)[0])


def haar_random_unitary(n: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density(n: int, seed=None) -> DensityOperator:
    """G G* / tr(G G*) for a complex Gaussian G (full rank almost surely)."""
    if n < 2:
        raise ValidationError("dimension must be at least 2")
    rng = _rng(seed)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m).real)


def random_effect(n: int, seed=None) -> Effect:
    """Random effect with eigenvalues uniform in [0, 1] and Haar eigenbasis."""
    rng = _rng(seed)
    u = haar_random_unitary(n, rng)
    lam = rng.uniform(0.0, 1.0, n)
    return Effect((u * lam) @ u.conj().T)


def random_kraus(n: int, outcomes: int, seed=None, *, kind: str = "general") -> KrausOperation:
    """Random ``outcomes``-element operation on C^n.

    ``kind`` selects the operators: ``"general"`` normalizes Gaussian matrices
    G_d by (sum G_d* G_d)^{-1/2}; ``"lueders"`` takes square roots of the
    resulting effects; ``"unitary-twirl"`` prepends a Haar unitary to each
    square root.
    """
    rng = _rng(seed)
    gs = rng.standard_normal((outcomes, n, n)) + 1j * rng.standard_normal((outcomes, n, n))
    s = sum(g.conj().T @ g for g in gs)
    vals, vecs = np.linalg.eigh(s)
    s_inv_half = (vecs / np.sqrt(vals)) @ vecs.conj().T
    ops = [g @ s_inv_half for g in gs]
    if kind == "general":
        return KrausOperation(ops)
    roots = [matrix_sqrt(hermitize(a.conj().T @ a)) for a in ops]
    if kind == "lueders":
        return KrausOperation(roots)
    if kind == "unitary-twirl":
        return KrausOperation([haar_random_unitary(n, rng) @ r for r in roots])
    raise ValueError(f"unknown Kraus kind {kind!r}")


def random_povm(n: int, outcomes: int, seed=None) -> DiscretePOVM:
    return random_kraus(n, outcomes, seed).povm()


def matrix_to_json(m) -> dict:
    m = _as_array(m)
    return {"dim": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(obj: dict) -> np.ndarray:
    m = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    if m.shape != (obj["dim"], obj["dim"]):
        raise ValidationError(f"matrix shape {m.shape} does not match dim {obj['dim']}")
    return m
