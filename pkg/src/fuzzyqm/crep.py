"""Classical representations: informationally complete frames of pure states.

A minimal IC-POVM has n^2 rank-one effects ``E_i = w_i |omega_i><omega_i|``
that span the Hermitian matrices. A state is represented either by its
outcome probabilities ``tr(rho E_i)`` or by the (possibly negative)
expansion coefficients of ``rho = sum_i c_i E_i``; the two are related by
the Gram matrix ``G_ij = tr(E_i E_j)``.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np

from .cext import ClassicalState, reduce
from .qcore import (
    TOL_POVM,
    DensityOperator,
    DimensionMismatch,
    Effect,
    FuzzyQMError,
    PureState,
    ValidationError,
    _as_array,
    _rng,
    hermitize,
    haar_random_vectors,
)

log = logging.getLogger(__name__)

MAX_CONDITION = 1e12
RANDOM_FRAME_CONDITION = 1e8
RANDOM_FRAME_RETRIES = 100
NEGATIVE_THRESHOLD = -1e-10
TOL_STATE_LOOSE = 1e-8

SIC_QUBIT_BLOCH = np.array(
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
) / np.sqrt(3.0)


class FrameDegenerate(FuzzyQMError):
    pass


class GramSingular(FuzzyQMError):
    pass


class NotAState(FuzzyQMError):
    pass


def bloch_state(r) -> PureState:
    """Pure qubit state with unit Bloch vector ``r``."""
    x, y, z = np.asarray(r, dtype=float) / np.linalg.norm(r)
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.arctan2(y, x)
    return PureState([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


class MinimalICPOVM:
    """n^2 weighted rank-one effects summing to the identity.

    ``weights[i]`` is the scale of ``E_i``; for equal-weight frames it is
    ``1/Omega`` with ``Omega = N/n``.
    """

    def __init__(self, vectors, weights=None) -> None:
        v = np.array(vectors, dtype=complex)
        if v.ndim != 2:
            raise ValidationError("frame vectors must be a (N, n) array")
        big_n, n = v.shape
        if big_n != n * n:
            raise ValidationError(f"a minimal IC frame on C^{n} needs {n * n} vectors, got {big_n}")
        if np.any(np.abs(np.linalg.norm(v, axis=1) - 1.0) > 1e-10):
            raise ValidationError("frame vectors must be normalized")
        w = np.full(big_n, n / big_n) if weights is None else np.array(weights, dtype=float)
        if w.shape != (big_n,) or np.any(w <= 0):
            raise ValidationError("frame weights must be positive, one per vector")
        v.setflags(write=False)
        w.setflags(write=False)
        self.vectors = v
        self.weights = w
        self.effects = w[:, None, None] * np.einsum("ki,kj->kij", v, v.conj())
        self.effects.setflags(write=False)
        total = self.effects.sum(axis=0)
        if np.max(np.abs(total - np.eye(n))) > TOL_POVM:
            raise ValidationError("frame effects do not sum to the identity")
        overlaps = np.abs(v.conj() @ v.T) ** 2
        self.gram = np.outer(w, w) * overlaps
        self.gram.setflags(write=False)
        self.condition = float(np.linalg.cond(self.gram))
        if not np.isfinite(self.condition) or self.condition >= MAX_CONDITION:
            raise GramSingular(f"Gram matrix condition number {self.condition:.3g}")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def omega(self) -> float:
        """Equal-weight scale N/n (exact for SIC frames)."""
        return self.size / self.dim

    def states(self) -> list[PureState]:
        return [PureState(x) for x in self.vectors]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``G c = rhs``."""
        try:
            return np.linalg.solve(self.gram, rhs)
        except np.linalg.LinAlgError as exc:
            raise GramSingular(str(exc)) from exc

    def combine(self, coefficients) -> np.ndarray:
        """``sum_i c_i E_i``."""
        return np.tensordot(np.asarray(coefficients, dtype=float), self.effects, axes=1)


def sic_qubit() -> MinimalICPOVM:
    """Tetrahedral qubit SIC with Omega = 2."""
    vecs = np.array([bloch_state(r).vector for r in SIC_QUBIT_BLOCH])
    return MinimalICPOVM(vecs, np.full(4, 0.5))


def _tight_frame(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = raw.shape[1]
    s = (raw.T @ raw.conj()) * (n / raw.shape[0])
    vals, vecs = np.linalg.eigh(s)
    s_inv_half = (vecs / np.sqrt(vals)) @ vecs.conj().T
    mapped = raw @ s_inv_half.T
    norms2 = np.sum(np.abs(mapped) ** 2, axis=1)
    return mapped / np.sqrt(norms2)[:, None], norms2 * (n / raw.shape[0])


def random_ic_povm(n: int, seed=None) -> MinimalICPOVM:
    """Random minimal IC frame built from n^2 Haar vectors.

    The raw vectors ``x_i`` are mapped through ``S^{-1/2}``, with ``S`` the
    frame operator ``(1/Omega) sum_i |x_i><x_i|``. The images are renormalized
    and their squared norms become the effect weights, so the effects sum to
    the identity exactly and stay positive. Draws are repeated until the Gram
    matrix condition number is below 1e8.
    """
    if n < 2:
        raise ValidationError("dimension must be at least 2")
    rng = _rng(seed)
    for _ in range(RANDOM_FRAME_RETRIES):
        raw = haar_random_vectors(n, n * n, rng)
        vecs, weights = _tight_frame(raw)
        try:
            frame = MinimalICPOVM(vecs, weights)
        except (GramSingular, ValidationError):
            continue
        if frame.condition < RANDOM_FRAME_CONDITION:
            return frame
    raise FrameDegenerate(f"no well-conditioned frame for n={n} after {RANDOM_FRAME_RETRIES} draws")


def _check_dim(rho, frame: MinimalICPOVM) -> np.ndarray:
    m = _as_array(rho)
    if m.shape[0] != frame.dim:
        raise DimensionMismatch(f"operator dim {m.shape[0]} vs frame dim {frame.dim}")
    return m


def frame_probabilities(m, frame: MinimalICPOVM) -> np.ndarray:
    """``tr(M E_i)`` for every frame effect."""
    m = _check_dim(m, frame)
    return np.einsum("ij,kji->k", m, frame.effects).real


def representation_probabilities(rho: DensityOperator, frame: MinimalICPOVM) -> np.ndarray:
    p = frame_probabilities(rho, frame)
    return np.clip(p, 0.0, None)


def reconstruct(p, frame: MinimalICPOVM) -> DensityOperator:
    """Density operator whose frame probabilities are ``p``."""
    p = np.asarray(p, dtype=float)
    if p.shape != (frame.size,):
        raise ValidationError(f"expected {frame.size} probabilities, got shape {p.shape}")
    m = hermitize(frame.combine(frame.solve(p)))
    tr = np.trace(m).real
    lo = np.linalg.eigvalsh(m)[0]
    worst = max(abs(tr - 1.0), -lo, 0.0)
    if worst > TOL_STATE_LOOSE:
        raise NotAState(f"reconstruction is not a state (trace {tr:.3g}, min eigenvalue {lo:.3g})")
    if worst > 1e-10:
        log.warning("reconstructed state violates state constraints by %.3g", worst)
    return DensityOperator(m, atol=TOL_STATE_LOOSE)


@dataclass(frozen=True)
class PseudoDistribution:
    """Expansion coefficients ``c`` of ``rho = sum_i c_i E_i``."""

    coefficients: np.ndarray
    traces: np.ndarray

    @property
    def min_value(self) -> float:
        return float(self.coefficients.min())

    @property
    def has_negative(self) -> bool:
        return self.min_value < NEGATIVE_THRESHOLD

    def total(self) -> float:
        """``sum_i c_i tr(E_i)``; equals 1 for a state."""
        return float(self.coefficients @ self.traces)


def pseudo_distribution(rho: DensityOperator, frame: MinimalICPOVM) -> PseudoDistribution:
    c = frame.solve(frame_probabilities(rho, frame))
    c.setflags(write=False)
    return PseudoDistribution(c, frame.weights.copy())


def effect_expansion(effect: Effect, frame: MinimalICPOVM) -> np.ndarray:
    """Unique coefficients ``e^i`` with ``E = sum_i e^i E_i``; generally not in [0, 1]."""
    return frame.solve(frame_probabilities(effect, frame))


@dataclass(frozen=True)
class UniformPOVMSample:
    """N Haar atoms, each carrying the effect ``(n/N)|omega_j><omega_j|``."""

    vectors: np.ndarray
    deviation: float

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def weight(self) -> float:
        return self.dim / self.size

    def effect_sum(self) -> np.ndarray:
        v = self.vectors
        return self.weight * (v.T @ v.conj())


def uniform_povm_sample(n: int, count: int, seed=None) -> UniformPOVMSample:
    if count < 1:
        raise ValidationError("sample count must be positive")
    vecs = haar_random_vectors(n, count, seed)
    vecs.setflags(write=False)
    total = (n / count) * (vecs.T @ vecs.conj())
    return UniformPOVMSample(vecs, float(np.linalg.norm(total - np.eye(n))))


def uniform_density(rho: DensityOperator, omega: PureState) -> float:
    """``<omega|rho|omega>``, the density of rho's uniform representation."""
    if omega.dim != rho.dim:
        raise DimensionMismatch("state and operator dimensions differ")
    v = omega.vector
    return float(np.real(np.vdot(v, rho.matrix @ v)))


def smearing_kernel(omega: PureState, other: PureState) -> float:
    if omega.dim != other.dim:
        raise DimensionMismatch("states of different dimension")
    return omega.overlap(other)


def _points(test_points) -> np.ndarray:
    if isinstance(test_points, np.ndarray):
        return test_points
    return np.array([t.vector for t in test_points])


def smearing_check(p: ClassicalState, test_points) -> float:
    """Max over test points of ``|<t|R(p)|t> - sum_k w_k |<omega_k|t>|^2|``."""
    t = _points(test_points)
    if t.shape[1] != p.dim:
        raise DimensionMismatch("test points and state have different dimension")
    rho = reduce(p).matrix
    lhs = np.einsum("ki,ij,kj->k", t.conj(), rho, t).real
    kernel = np.abs(t.conj() @ p.vectors.T) ** 2
    rhs = kernel @ p.weights
    return float(np.max(np.abs(lhs - rhs)))


def frame_to_json(frame: MinimalICPOVM) -> dict:
    return {
        "dim": frame.dim,
        "vectors": [{"re": v.real.tolist(), "im": v.imag.tolist()} for v in frame.vectors],
        "weights": frame.weights.tolist(),
        "condition": frame.condition,
    }


def frame_from_json(obj: dict) -> MinimalICPOVM:
    vecs = [np.asarray(v["re"]) + 1j * np.asarray(v["im"]) for v in obj["vectors"]]
    return MinimalICPOVM(np.array(vecs), obj["weights"])


def pseudo_to_json(pd: PseudoDistribution) -> dict:
    return {
        "coefficients": pd.coefficients.tolist(),
        "traces": pd.traces.tolist(),
        "min_value": pd.min_value,
        "has_negative": pd.has_negative,
    }


def pseudo_from_json(obj: dict) -> PseudoDistribution:
    c = np.array(obj["coefficients"], dtype=float)
    c.setflags(write=False)
    return PseudoDistribution(c, np.array(obj["traces"], dtype=float))


def to_csv(rows, header=("index", "weight", "value")) -> str:
    """CSV text with a header row; ``rows`` yields ``(index, weight, value)``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def pseudo_to_csv(pd: PseudoDistribution) -> str:
    return to_csv(zip(range(len(pd.coefficients)), map(float, pd.traces), map(float, pd.coefficients)))
