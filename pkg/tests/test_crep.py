import json

import numpy as np
import pytest

from fuzzyqm.cext import ClassicalState, eigen_decomposition_state, reduce
from fuzzyqm.crep import (
    SIC_QUBIT_BLOCH,
    GramSingular,
    MinimalICPOVM,
    NotAState,
    effect_expansion,
    frame_from_json,
    frame_to_json,
    pseudo_distribution,
    pseudo_from_json,
    pseudo_to_csv,
    pseudo_to_json,
    random_ic_povm,
    reconstruct,
    representation_probabilities,
    sic_qubit,
    smearing_check,
    smearing_kernel,
    uniform_density,
    uniform_povm_sample,
)
from fuzzyqm.qcore import (
    DensityOperator,
    Effect,
    PureState,
    ValidationError,
    haar_random_state,
    haar_random_vectors,
    random_density,
    random_effect,
)

SIGMA = [
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]]),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


@pytest.fixture(scope="module")
def sic():
    return sic_qubit()


def aligned(sic, k=0):
    return DensityOperator.from_state(sic.states()[k])


def antipodal(sic, k=0):
    v = sic.vectors[k]
    return DensityOperator.from_state(PureState([-np.conj(v[1]), np.conj(v[0])]))


def gram_oracle(frame, rho):
    """Coefficients from a least-squares fit of rho in the span of the effects."""
    a = frame.effects.reshape(frame.size, -1).T
    c, *_ = np.linalg.lstsq(a, rho.reshape(-1), rcond=None)
    return c.real


class TestSIC:
    def test_bloch_vectors(self, sic):
        for v, r in zip(sic.vectors, SIC_QUBIT_BLOCH):
            proj = np.outer(v, v.conj())
            bloch = [np.trace(proj @ s).real for s in SIGMA]
            np.testing.assert_allclose(bloch, r, atol=1e-14)

    def test_pairwise_overlaps(self, sic):
        ov = np.abs(sic.vectors.conj() @ sic.vectors.T) ** 2
        off = ov[~np.eye(4, dtype=bool)]
        np.testing.assert_allclose(off, 1 / 3, atol=1e-14)

    def test_sums_to_identity(self, sic):
        np.testing.assert_allclose(sic.effects.sum(axis=0), np.eye(2), atol=1e-14)
        assert sic.omega == 2

    def test_gram(self, sic):
        expected = np.full((4, 4), 1 / 12) + np.eye(4) * (1 / 4 - 1 / 12)
        np.testing.assert_allclose(sic.gram, expected, atol=1e-14)

    def test_smearing_is_strict(self, sic):
        assert np.all(sic.gram[~np.eye(4, dtype=bool)] > 0)


class TestRepresentation:
    def test_mixed(self, sic):
        p = representation_probabilities(DensityOperator.maximally_mixed(2), sic)
        np.testing.assert_allclose(p, [0.25] * 4, atol=1e-15)

    def test_aligned(self, sic):
        p = representation_probabilities(aligned(sic), sic)
        np.testing.assert_allclose(p, [1 / 2, 1 / 6, 1 / 6, 1 / 6], atol=1e-14)

    def test_antipodal(self, sic):
        p = representation_probabilities(antipodal(sic), sic)
        np.testing.assert_allclose(p, [0, 1 / 3, 1 / 3, 1 / 3], atol=1e-14)

    def test_reconstruct_golden(self, sic):
        np.testing.assert_allclose(reconstruct([0.25] * 4, sic).matrix, np.eye(2) / 2, atol=1e-14)
        np.testing.assert_allclose(
            reconstruct([1 / 2, 1 / 6, 1 / 6, 1 / 6], sic).matrix, aligned(sic).matrix, atol=1e-14
        )

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_roundtrip(self, n):
        rng = np.random.default_rng(n)
        frame = random_ic_povm(n, rng)
        for _ in range(50):
            rho = random_density(n, rng)
            back = reconstruct(representation_probabilities(rho, frame), frame)
            assert np.linalg.norm(back.matrix - rho.matrix) <= 1e-10

    def test_not_a_state(self, sic):
        with pytest.raises(NotAState):
            reconstruct([1.0, 0.0, 0.0, 0.0], sic)

    def test_wrong_length(self, sic):
        with pytest.raises(ValidationError):
            reconstruct([0.5, 0.5], sic)


class TestRandomFrame:
    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_properties(self, n):
        frame = random_ic_povm(n, seed=n)
        assert frame.size == n * n
        np.testing.assert_allclose(frame.effects.sum(axis=0), np.eye(n), atol=1e-10)
        assert np.linalg.matrix_rank(frame.gram, tol=1e-12) == n * n
        assert frame.condition < 1e8
        assert np.all(frame.weights > 0)

    def test_deterministic(self):
        np.testing.assert_array_equal(random_ic_povm(3, seed=4).vectors, random_ic_povm(3, seed=4).vectors)

    def test_degenerate_frame_rejected(self):
        vecs = np.array([[1, 0], [0, 1], [1, 0], [0, 1]], dtype=complex)
        with pytest.raises(GramSingular):
            MinimalICPOVM(vecs, [0.5] * 4)

    def test_wrong_size(self):
        with pytest.raises(ValidationError):
            MinimalICPOVM(np.eye(2), [1.0, 1.0])

    def test_json_roundtrip(self):
        frame = random_ic_povm(3, seed=1)
        back = frame_from_json(json.loads(json.dumps(frame_to_json(frame))))
        np.testing.assert_array_equal(back.vectors, frame.vectors)
        np.testing.assert_array_equal(back.weights, frame.weights)


class TestPseudoDistribution:
    def test_mixed(self, sic):
        pd = pseudo_distribution(DensityOperator.maximally_mixed(2), sic)
        np.testing.assert_allclose(pd.coefficients, [0.5] * 4, atol=1e-12)
        assert not pd.has_negative

    def test_aligned(self, sic):
        rho = aligned(sic)
        pd = pseudo_distribution(rho, sic)
        np.testing.assert_allclose(pd.coefficients, [2, 0, 0, 0], atol=1e-12)
        np.testing.assert_allclose(gram_oracle(sic, rho.matrix), [2, 0, 0, 0], atol=1e-12)

    def test_antipodal(self, sic):
        rho = antipodal(sic)
        pd = pseudo_distribution(rho, sic)
        np.testing.assert_allclose(pd.coefficients, [-1, 1, 1, 1], atol=1e-12)
        assert pd.has_negative
        assert pd.min_value == pytest.approx(-1, abs=1e-12)

    def test_closed_form(self, sic, rng):
        for _ in range(20):
            rho = random_density(2, rng)
            p = representation_probabilities(rho, sic)
            np.testing.assert_allclose(pseudo_distribution(rho, sic).coefficients, 6 * p - 1, atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_consistency_with_probabilities(self, n):
        rng = np.random.default_rng(10 + n)
        frame = random_ic_povm(n, rng)
        for _ in range(10):
            rho = random_density(n, rng)
            pd = pseudo_distribution(rho, frame)
            p = representation_probabilities(rho, frame)
            assert np.max(np.abs(frame.gram @ pd.coefficients - p)) <= 1e-12
            assert pd.total() == pytest.approx(1.0, abs=1e-10)
            np.testing.assert_allclose(frame.combine(pd.coefficients), rho.matrix, atol=1e-10)

    def test_negativity_occurs(self, sic):
        vecs = haar_random_vectors(2, 1000, seed=3)
        mins = [pseudo_distribution(DensityOperator.from_state(PureState(v)), sic).min_value for v in vecs]
        assert np.mean(np.array(mins) < -1e-10) > 0

    def test_json_and_csv(self, sic):
        pd = pseudo_distribution(antipodal(sic), sic)
        back = pseudo_from_json(json.loads(json.dumps(pseudo_to_json(pd))))
        np.testing.assert_array_equal(back.coefficients, pd.coefficients)
        lines = pseudo_to_csv(pd).splitlines()
        assert lines[0] == "index,weight,value"
        assert len(lines) == 5


def test_image_of_frame_map_has_no_other_pure_states(sic):
    """Mixtures of frame projectors are pure only at the frame vectors."""
    rng = np.random.default_rng(0)
    ov = np.abs(sic.vectors.conj() @ sic.vectors.T) ** 2
    q = rng.dirichlet(np.full(4, 0.2), size=100_000)
    purity = np.einsum("ki,ij,kj->k", q, ov, q)
    assert purity.max() < 1.0
    np.testing.assert_allclose(np.diag(ov), 1.0)


class TestEffectExpansion:
    def test_identity(self, sic):
        np.testing.assert_allclose(effect_expansion(Effect.identity(2), sic), [1] * 4, atol=1e-12)

    def test_aligned_projector(self, sic):
        e = effect_expansion(Effect.projector(sic.states()[0]), sic)
        np.testing.assert_allclose(e, [2, 0, 0, 0], atol=1e-12)
        assert e.max() > 1

    def test_antipodal_projector(self, sic):
        e = effect_expansion(Effect(antipodal(sic).matrix), sic)
        np.testing.assert_allclose(e, [-1, 1, 1, 1], atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3])
    def test_reproduces_born_rule(self, n):
        rng = np.random.default_rng(n)
        frame = random_ic_povm(n, rng)
        effect = random_effect(n, rng)
        coeffs = effect_expansion(effect, frame)
        for _ in range(20):
            rho = random_density(n, rng)
            p = representation_probabilities(rho, frame)
            assert coeffs @ p == pytest.approx(np.trace(rho.matrix @ effect.matrix).real, abs=1e-10)


class TestUniform:
    def test_identity_deviation(self):
        s = uniform_povm_sample(2, 100_000, seed=1)
        assert s.deviation <= 0.05
        assert np.trace(s.effect_sum()).real == pytest.approx(2.0, abs=1e-12)
        assert s.weight == 2 / 100_000

    def test_reproducible(self):
        a = uniform_povm_sample(3, 50, seed=2)
        b = uniform_povm_sample(3, 50, seed=2)
        assert a.vectors.tobytes() == b.vectors.tobytes()

    def test_uniform_density(self, rng):
        mixed = DensityOperator.maximally_mixed(2)
        psi = haar_random_state(2, rng)
        for _ in range(5):
            omega = haar_random_state(2, rng)
            assert uniform_density(mixed, omega) == pytest.approx(0.5, abs=1e-15)
            assert uniform_density(DensityOperator.from_state(psi), omega) == pytest.approx(
                psi.overlap(omega), abs=1e-15
            )

    def test_density_never_sharp(self, rng):
        rho = random_density(3, rng)
        vals = [uniform_density(rho, haar_random_state(3, rng)) for _ in range(50)]
        assert all(0 < v < 1 for v in vals)

    def test_kernel(self):
        zero, one = PureState([1, 0]), PureState([0, 1])
        assert smearing_kernel(zero, zero) == 1.0
        assert smearing_kernel(zero, one) == 0.0
        for theta in np.linspace(0, np.pi, 5):
            t = PureState([np.cos(theta / 2), np.sin(theta / 2)])
            assert smearing_kernel(zero, t) == pytest.approx(np.cos(theta / 2) ** 2, abs=1e-15)

    def test_smearing_exact_on_atoms(self, rng):
        rho = random_density(3, rng)
        pts = haar_random_vectors(3, 100, rng)
        assert smearing_check(eigen_decomposition_state(rho), pts) <= 1e-12

    def test_smearing_single_atom(self, rng):
        psi = haar_random_state(2, rng)
        pts = [haar_random_state(2, rng) for _ in range(10)]
        assert smearing_check(ClassicalState.delta(psi), pts) <= 1e-15

    def test_smearing_uniform_like(self):
        n, count = 2, 10_000
        p = ClassicalState(np.full(count, 1 / count), haar_random_vectors(n, count, seed=8))
        pts = haar_random_vectors(n, 20, seed=9)
        assert smearing_check(p, pts) <= 1e-12
        kernel = np.abs(pts.conj() @ p.vectors.T) ** 2 @ p.weights
        assert np.max(np.abs(kernel - 1 / n)) <= 3 / np.sqrt(count)
        assert np.max(np.abs(reduce(p).matrix - np.eye(n) / n)) <= 3 / np.sqrt(count)
