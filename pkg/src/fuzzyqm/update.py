"""Measurement collapse as selection, Bayesian updating and disturbance.

Three readings of ``rho -> A rho A* / tr(A rho A*)`` are implemented and
checked against the plain quantum update:

* selection of ``rho^{1/2} E rho^{1/2}`` from the resolution
  ``sum_d rho^{1/2} E_d rho^{1/2} = rho`` followed by a readjustment by the
  polar factor of ``A rho^{1/2}``;
* in the uniform representation, Bayes with the eigen-expansion of E followed
  by smearing with ``|<t|sigma(v)>|^2``;
* in the classical extension, Bayes on the atoms of any preimage of rho
  with likelihood ``<omega|E|omega>``, then moving each atom by
  ``omega -> A omega / |A omega|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cext import (
    ClassicalEffect,
    ClassicalState,
    InducedEffect,
    reduce,
    state_to_json,
)
from .crep import MinimalICPOVM, frame_probabilities
from .qcore import (
    TOL_ZERO,
    DensityOperator,
    DimensionMismatch,
    Effect,
    FuzzyQMError,
    KrausOperation,
    PureState,
    ZeroProbabilityOutcome,
    _as_array,
    apply_operation,
    eigh_sorted,
    fix_phases,
    hermitize,
    matrix_sqrt,
    matrix_to_json,
    polar_decompose,
)

TOL_RESOLUTION = 1e-12
TOL_TRANSPORT = 1e-10


class ZeroEvidence(FuzzyQMError):
    pass


@dataclass(frozen=True)
class BayesComponent:
    """Unnormalized selected term ``rho^{1/2} E_d rho^{1/2}`` of outcome d."""

    outcome: int
    matrix: np.ndarray
    weight: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def posterior(self) -> DensityOperator:
        if self.weight <= TOL_ZERO:
            raise ZeroProbabilityOutcome(f"outcome {self.outcome} has zero probability")
        return DensityOperator(self.matrix / self.weight)


def bayes_component(rho: DensityOperator, effect, outcome: int = 0) -> BayesComponent:
    e = _as_array(effect)
    if e.shape != rho.matrix.shape:
        raise DimensionMismatch("state and effect dimensions differ")
    root = matrix_sqrt(rho.matrix)
    m = hermitize(root @ e @ root)
    m.setflags(write=False)
    return BayesComponent(outcome, m, float(np.trace(m).real))


@dataclass(frozen=True)
class Readjustment:
    """Partial isometry V with ``V rho~ V* = A rho A*`` and the achieved residual."""

    isometry: np.ndarray
    residual: float

    @property
    def ok(self) -> bool:
        return self.residual <= TOL_TRANSPORT


def readjustment(rho: DensityOperator, a, *, complete: bool = False) -> Readjustment:
    """Polar factor of ``A rho^{1/2}``, checked by transporting the Bayes component."""
    a = _as_array(a)
    if a.shape != rho.matrix.shape:
        raise DimensionMismatch("state and Kraus operator dimensions differ")
    root = matrix_sqrt(rho.matrix)
    v, _ = polar_decompose(a @ root, complete=complete)
    selected = root @ (a.conj().T @ a) @ root
    target = a @ rho.matrix @ a.conj().T
    resid = float(np.linalg.norm(v @ selected @ v.conj().T - target))
    return Readjustment(v, resid)


def classical_bayes_update(p: ClassicalState, e: ClassicalEffect) -> tuple[ClassicalState, float]:
    """Posterior weights ``w_k e(omega_k) / evidence`` on unchanged atoms."""
    like = np.clip(e.evaluate(p.vectors), 0.0, None)
    joint = p.weights * like
    evidence = float(joint.sum())
    if evidence <= TOL_ZERO:
        raise ZeroEvidence(f"evidence {evidence!r} is zero")
    return ClassicalState(joint / evidence, p.vectors), evidence


def _disturb(a: np.ndarray, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    images = vectors @ a.T
    norms2 = np.sum(np.abs(images) ** 2, axis=1)
    alive = norms2 > TOL_ZERO
    out = np.zeros_like(images)
    out[alive] = images[alive] / np.sqrt(norms2[alive])[:, None]
    return fix_phases(out), alive


def disturbance_map(a, omega: PureState) -> PureState | None:
    """``A omega / |A omega|``, or None when A annihilates omega."""
    a = _as_array(a)
    if a.shape[1] != omega.dim:
        raise DimensionMismatch("operator and state dimensions differ")
    out, alive = _disturb(a, omega.vector[None, :])
    return PureState(out[0]) if alive[0] else None


@dataclass(frozen=True)
class UpdateReport:
    outcome: int
    prior: ClassicalState
    posterior: ClassicalState
    disturbed: ClassicalState
    target: DensityOperator
    evidence: float
    residual: float

    def to_json(self) -> dict:
        return {
            "outcome": self.outcome,
            "evidence": self.evidence,
            "residual": self.residual,
            "prior": state_to_json(self.prior),
            "posterior": state_to_json(self.posterior),
            "disturbed": state_to_json(self.disturbed),
            "target": matrix_to_json(self.target.matrix),
        }


def extension_update(p: ClassicalState, a, outcome: int = 0) -> UpdateReport:
    """Bayes with the induced likelihood, then the atom disturbance by A.

    ``residual`` is the Frobenius distance between the reduced disturbed
    state and the quantum post-measurement state of ``R(p)``.
    """
    a = _as_array(a)
    if a.shape != (p.dim, p.dim):
        raise DimensionMismatch("state and Kraus operator dimensions differ")
    effect = Effect(hermitize(a.conj().T @ a))
    posterior, evidence = classical_bayes_update(p, InducedEffect(effect))
    moved, alive = _disturb(a, posterior.vectors)
    w = posterior.weights[alive]
    disturbed = ClassicalState(w / w.sum(), moved[alive])
    target, _ = apply_operation(reduce(p), a)
    resid = float(np.linalg.norm(reduce(disturbed).matrix - target.matrix))
    return UpdateReport(outcome, p, posterior, disturbed, target, evidence, resid)


@dataclass(frozen=True)
class EffectEigenExpansion:
    """``E = sum_k c_k |v_k><v_k|`` with ``c_k`` the eigenvalues of E."""

    effect: Effect
    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.vectors
        return (v.T * self.values) @ v.conj()


def effect_eigen_expansion(effect: Effect) -> EffectEigenExpansion:
    vals, vecs = eigh_sorted(effect.matrix)
    c = np.clip(vals, 0.0, None)
    v = vecs.T.copy()
    c.setflags(write=False)
    v.setflags(write=False)
    return EffectEigenExpansion(effect, c, v)


def _sigma(root: np.ndarray, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    images = vectors @ root.T
    dens = np.sum(np.abs(images) ** 2, axis=1)
    alive = dens > TOL_ZERO
    out = np.zeros_like(images)
    out[alive] = images[alive] / np.sqrt(dens[alive])[:, None]
    return fix_phases(out), dens, alive


def sigma_map(rho: DensityOperator, omega: PureState) -> PureState | None:
    """``rho^{1/2} omega / |rho^{1/2} omega|``, or None when it vanishes."""
    if omega.dim != rho.dim:
        raise DimensionMismatch("state and operator dimensions differ")
    out, _, alive = _sigma(matrix_sqrt(rho.matrix), omega.vector[None, :])
    return PureState(out[0]) if alive[0] else None


def representation_update(rho: DensityOperator, effect: Effect, test_points) -> float:
    """Max deviation between the two sides of the Bayes-then-smear identity.

    Left: ``<t|rho^{1/2} E rho^{1/2}|t>``. Right:
    ``sum_k c_k rho(v_k) |<t|sigma(v_k)>|^2`` over the eigen-expansion of E.
    """
    t = test_points if isinstance(test_points, np.ndarray) else np.array([x.vector for x in test_points])
    if t.shape[1] != rho.dim or effect.dim != rho.dim:
        raise DimensionMismatch("dimensions differ")
    root = matrix_sqrt(rho.matrix)
    lhs_op = root @ effect.matrix @ root
    lhs = np.einsum("ki,ij,kj->k", t.conj(), lhs_op, t).real
    exp = effect_eigen_expansion(effect)
    sig, dens, alive = _sigma(root, exp.vectors)
    kernel = np.abs(t.conj() @ sig.T) ** 2
    rhs = kernel @ np.where(alive, exp.values * dens, 0.0)
    return float(np.max(np.abs(lhs - rhs)))


@dataclass
class OutcomeReport:
    outcome: int
    probability: float
    skipped: bool = False
    selection: np.ndarray | None = None
    posterior: np.ndarray | None = None
    isometry: np.ndarray | None = None
    post_state: np.ndarray | None = None
    transport_residual: float = 0.0
    passive_residual: float | None = None

    def to_json(self) -> dict:
        out = {
            "outcome": self.outcome,
            "probability": self.probability,
            "skipped": self.skipped,
            "transport_residual": self.transport_residual,
        }
        if self.passive_residual is not None:
            out["passive_residual"] = self.passive_residual
        for name in ("selection", "posterior", "isometry", "post_state"):
            m = getattr(self, name)
            if m is not None:
                out[name] = matrix_to_json(m)
        return out


@dataclass
class CollapseReport:
    outcomes: list[OutcomeReport] = field(default_factory=list)
    mixture_residual: float = 0.0

    @property
    def max_transport_residual(self) -> float:
        return max((o.transport_residual for o in self.outcomes if not o.skipped), default=0.0)

    @property
    def ok(self) -> bool:
        return self.mixture_residual <= TOL_RESOLUTION and self.max_transport_residual <= TOL_TRANSPORT

    def to_json(self) -> dict:
        return {
            "mixture_residual": self.mixture_residual,
            "max_transport_residual": self.max_transport_residual,
            "ok": self.ok,
            "outcomes": [o.to_json() for o in self.outcomes],
        }


def full_collapse_decomposition(
    rho: DensityOperator, op: KrausOperation, frame: MinimalICPOVM | None = None
) -> CollapseReport:
    """Per-outcome selection, posterior, readjustment and final state.

    With a ``frame`` the passive reading is also checked: the frame
    probabilities of the final state equal those of the selected posterior
    taken against the readjusted effects ``V* E_i V``.
    """
    if op.dim != rho.dim:
        raise DimensionMismatch("state and operation dimensions differ")
    if frame is not None and frame.dim != rho.dim:
        raise DimensionMismatch("frame dimension differs")
    report = CollapseReport()
    mixture = np.zeros_like(rho.matrix)
    for d, a in enumerate(op):
        comp = bayes_component(rho, a.conj().T @ a, outcome=d)
        mixture = mixture + comp.matrix
        if comp.weight <= TOL_ZERO:
            report.outcomes.append(OutcomeReport(d, comp.weight, skipped=True))
            continue
        adj = readjustment(rho, a)
        v = adj.isometry
        post, prob = apply_operation(rho, a)
        posterior = comp.matrix / comp.weight
        entry = OutcomeReport(
            d,
            prob,
            selection=comp.matrix,
            posterior=posterior,
            isometry=v,
            post_state=post.matrix,
            transport_residual=adj.residual,
        )
        if frame is not None:
            moved = np.einsum("ji,kjl,lm->kim", v.conj(), frame.effects, v)
            passive = np.einsum("ij,kji->k", posterior, moved).real
            entry.passive_residual = float(
                np.max(np.abs(frame_probabilities(post.matrix, frame) - passive))
            )
        report.outcomes.append(entry)
    report.mixture_residual = float(np.linalg.norm(mixture - rho.matrix))
    return report


def check_resolution(rho: DensityOperator, effects) -> float:
    """``|sum_d rho^{1/2} E_d rho^{1/2} - rho|_F``."""
    total = sum(bayes_component(rho, e).matrix for e in effects)
    return float(np.linalg.norm(total - rho.matrix))
