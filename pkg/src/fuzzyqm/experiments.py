"""CHSH, dispersion and joint-observable demonstrations.

The Bell value is computed twice: from Born probabilities on the two-qubit
state, and as classical expectations of induced effects over a preimage of
that state in the classical extension. The two agree because every induced
effect reproduces the Born statistics on every preimage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cext import (
    ClassicalState,
    FuzzyObservable,
    InducedEffect,
    classical_expectation,
    dispersion,
    eigen_decomposition_state,
    joint_observable,
    marginal_evaluations,
    reduce,
)
from .qcore import (
    DensityOperator,
    DiscretePOVM,
    Effect,
    PureState,
    ValidationError,
    born_probability,
    haar_random_vectors,
    matrix_from_json,
    matrix_to_json,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# Alice at 0 and 90 degrees, Bob at 45 and -45 degrees in the x-z Bloch plane;
# optimal for S = E00 + E01 + E10 - E11 on the singlet.
OPTIMAL_ANGLES = (0.0, 90.0, 45.0, 315.0)
CORRELATORS = ("A0B0", "A0B1", "A1B0", "A1B1")
CLASSICAL_BOUND = 2.0


def singlet() -> DensityOperator:
    psi = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)
    return DensityOperator.from_state(PureState(psi))


def product_state() -> DensityOperator:
    return DensityOperator.from_state(PureState.basis(4, 0))


def tensor_effect(e: Effect, f: Effect) -> Effect:
    return Effect(np.kron(e.matrix, f.matrix))


def spin_effect(angle_deg: float) -> Effect:
    """+1 effect of the spin along angle ``angle_deg`` in the x-z Bloch plane."""
    t = np.deg2rad(angle_deg)
    return Effect(0.5 * (np.eye(2) + np.cos(t) * SIGMA_Z + np.sin(t) * SIGMA_X))


def partial_trace(rho: DensityOperator, keep: int, dims=(2, 2)) -> np.ndarray:
    m = rho.matrix.reshape(dims[0], dims[1], dims[0], dims[1])
    return np.einsum("ijkj->ik", m) if keep == 0 else np.einsum("ijil->jl", m)


@dataclass(frozen=True)
class CHSHScenario:
    """Two-qubit state and the +1 effects of Alice's and Bob's settings."""

    state: DensityOperator
    a0: Effect
    a1: Effect
    b0: Effect
    b1: Effect

    def __post_init__(self):
        if self.state.dim != 4:
            raise ValidationError("CHSH scenario needs a two-qubit state")
        for e in (self.a0, self.a1, self.b0, self.b1):
            if e.dim != 2:
                raise ValidationError("CHSH settings act on single qubits")

    @classmethod
    def from_angles(cls, state: DensityOperator, angles=OPTIMAL_ANGLES) -> CHSHScenario:
        if len(angles) != 4:
            raise ValidationError("need four angles: a0, a1, b0, b1")
        return cls(state, *(spin_effect(a) for a in angles))

    def settings(self) -> dict[str, tuple[Effect, Effect]]:
        return {
            "A0B0": (self.a0, self.b0),
            "A0B1": (self.a0, self.b1),
            "A1B0": (self.a1, self.b0),
            "A1B1": (self.a1, self.b1),
        }

    def to_json(self) -> dict:
        return {
            "state": matrix_to_json(self.state.matrix),
            "effects": {k: matrix_to_json(getattr(self, k.lower()).matrix) for k in ("A0", "A1", "B0", "B1")},
        }

    @classmethod
    def from_json(cls, obj: dict) -> CHSHScenario:
        eff = obj["effects"]
        return cls(
            DensityOperator(matrix_from_json(obj["state"])),
            *(Effect(matrix_from_json(eff[k])) for k in ("A0", "A1", "B0", "B1")),
        )


def _joint_effects(e: Effect, f: Effect) -> list[tuple[float, Effect]]:
    """(value, effect) pairs of the product of two dichotomic observables."""
    eb, fb = e.complement(), f.complement()
    return [
        (1.0, tensor_effect(e, f)),
        (-1.0, tensor_effect(e, fb)),
        (-1.0, tensor_effect(eb, f)),
        (1.0, tensor_effect(eb, fb)),
    ]


def correlations(s: CHSHScenario, path: str = "quantum", preimage: ClassicalState | None = None) -> dict[str, float]:
    """Correlators E(AB) per setting pair along the chosen path."""
    if path == "quantum":
        expect = lambda eff: born_probability(s.state, eff)
    elif path == "classical_extension":
        p = preimage if preimage is not None else eigen_decomposition_state(s.state)
        expect = lambda eff: classical_expectation(p, InducedEffect(eff))
    else:
        raise ValueError(f"unknown path {path!r}")
    return {
        name: sum(x * expect(eff) for x, eff in _joint_effects(a, b))
        for name, (a, b) in s.settings().items()
    }


def chsh_value(s: CHSHScenario, path: str = "quantum", preimage: ClassicalState | None = None) -> float:
    """S = E(A0B0) + E(A0B1) + E(A1B0) - E(A1B1)."""
    c = correlations(s, path, preimage)
    return c["A0B0"] + c["A0B1"] + c["A1B0"] - c["A1B1"]


def induced_values_in_unit_interval(s: CHSHScenario, p: ClassicalState) -> bool:
    """All induced-effect evaluations on the atoms of ``p`` lie in [0, 1]."""
    for a, b in s.settings().values():
        for _, eff in _joint_effects(a, b):
            vals = InducedEffect(eff).evaluate(p.vectors)
            if vals.min() < -1e-12 or vals.max() > 1 + 1e-12:
                return False
    return True


def chsh_report(s: CHSHScenario) -> dict:
    p = eigen_decomposition_state(s.state)
    q = correlations(s, "quantum")
    c = correlations(s, "classical_extension", p)
    s_q = q["A0B0"] + q["A0B1"] + q["A1B0"] - q["A1B1"]
    s_c = c["A0B0"] + c["A0B1"] + c["A1B0"] - c["A1B1"]
    return {
        "S_quantum": s_q,
        "S_classical_extension": s_c,
        "path_gap": abs(s_q - s_c),
        "margin": abs(s_q) - CLASSICAL_BOUND,
        "preimage_atoms": len(p),
        "induced_effects_classical": induced_values_in_unit_interval(s, p),
        "correlators": [{"pair": k, "quantum": q[k], "classical_extension": c[k]} for k in CORRELATORS],
    }


def pauli_pvm(pauli: np.ndarray) -> DiscretePOVM:
    """Spectral projectors of a Pauli matrix for outcomes +1, -1."""
    return DiscretePOVM([0.5 * (np.eye(2) + pauli), 0.5 * (np.eye(2) - pauli)])


def dispersion_showcase(p: ClassicalState) -> dict:
    """Variances of the c-representatives of sigma_z and sigma_x in ``p``.

    Compared against the quantum variances in ``R(p)`` and the uncertainty
    bound ``Var(Z) Var(X) >= <Y>^2``.
    """
    if p.dim != 2:
        raise ValidationError("dispersion showcase is for qubits")
    rho = reduce(p).matrix
    out = {}
    for name, pauli in (("z", SIGMA_Z), ("x", SIGMA_X)):
        obs = FuzzyObservable.c_representative(pauli_pvm(pauli), values=(1.0, -1.0))
        mean = np.trace(rho @ pauli).real
        out[f"var_{name}_classical"] = dispersion(p, obs)
        out[f"var_{name}_quantum"] = float(1.0 - mean**2)
    out["bound"] = float(np.trace(rho @ SIGMA_Y).real ** 2)
    out["product_classical"] = out["var_z_classical"] * out["var_x_classical"]
    return out


def joint_observable_showcase(points: int = 100, seed=0) -> dict:
    """Joint c-observable of the sigma_z and sigma_x c-representatives, with marginal errors."""
    a = FuzzyObservable.c_representative(pauli_pvm(SIGMA_Z), values=(1.0, -1.0))
    b = FuzzyObservable.c_representative(pauli_pvm(SIGMA_X), values=(1.0, -1.0))
    joint = joint_observable(a, b)
    pts = haar_random_vectors(2, points, seed)
    err_a = np.max(np.abs(marginal_evaluations(joint, pts, 0) - a.evaluate(pts)))
    err_b = np.max(np.abs(marginal_evaluations(joint, pts, 1) - b.evaluate(pts)))
    return {"marginal_error_first": float(err_a), "marginal_error_second": float(err_b), "outcomes": len(joint)}
