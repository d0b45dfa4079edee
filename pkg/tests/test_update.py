import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzyqm.cext import (
    ClassicalState,
    InducedEffect,
    eigen_decomposition_state,
    random_decomposition,
    reduce,
)
from fuzzyqm.crep import effect_expansion, random_ic_povm, sic_qubit
from fuzzyqm.qcore import (
    DensityOperator,
    DiscretePOVM,
    Effect,
    KrausOperation,
    PureState,
    apply_operation,
    born_probability,
    haar_random_state,
    haar_random_unitary,
    haar_random_vectors,
    matrix_sqrt,
    random_density,
    random_effect,
    random_kraus,
)
from fuzzyqm.update import (
    ZeroEvidence,
    bayes_component,
    check_resolution,
    classical_bayes_update,
    disturbance_map,
    effect_eigen_expansion,
    extension_update,
    full_collapse_decomposition,
    readjustment,
    representation_update,
    sigma_map,
)

from conftest import ket

seeds = st.integers(min_value=0, max_value=2**32 - 1)
KET0, KET1, PLUS = PureState([1, 0]), PureState([0, 1]), PureState(ket(1, 1))
P0 = KET0.projector()


class TestBayesComponent:
    def test_identity_effect(self, rng):
        rho = random_density(3, rng)
        comp = bayes_component(rho, np.eye(3))
        np.testing.assert_allclose(comp.matrix, rho.matrix, atol=1e-14)
        assert comp.weight == pytest.approx(1.0)

    def test_commuting_case(self, rng):
        effect = random_effect(3, rng)
        comp = bayes_component(DensityOperator.maximally_mixed(3), effect)
        np.testing.assert_allclose(comp.matrix, effect.matrix / 3, atol=1e-14)

    def test_weight_is_born_probability(self, rng):
        rho, effect = random_density(4, rng), random_effect(4, rng)
        comp = bayes_component(rho, effect)
        assert comp.weight == pytest.approx(born_probability(rho, effect), abs=1e-14)
        np.testing.assert_allclose(np.trace(comp.posterior().matrix).real, 1.0)

    @given(seed=seeds, n=st.integers(2, 5), k=st.integers(1, 6))
    @settings(max_examples=50, deadline=None)
    def test_resolution_of_state(self, seed, n, k):
        rng = np.random.default_rng(seed)
        rho = random_density(n, rng)
        povm = random_kraus(n, k, rng).povm()
        assert check_resolution(rho, povm) <= 1e-12


class TestReadjustment:
    def test_commuting_square_root(self):
        a = matrix_sqrt(np.diag([0.5, 0.25, 0.1]))
        adj = readjustment(DensityOperator.maximally_mixed(3), a)
        np.testing.assert_allclose(adj.isometry, np.eye(3), atol=1e-12)
        assert adj.ok

    def test_unitary(self, rng):
        u = haar_random_unitary(3, rng)
        adj = readjustment(random_density(3, rng), u)
        np.testing.assert_allclose(adj.isometry, u, atol=1e-10)

    @given(seed=seeds, n=st.integers(2, 5), k=st.integers(1, 6))
    @settings(max_examples=50, deadline=None)
    def test_transport(self, seed, n, k):
        rng = np.random.default_rng(seed)
        rho = random_density(n, rng)
        for a in random_kraus(n, k, rng):
            adj = readjustment(rho, a)
            v = adj.isometry
            selected = bayes_component(rho, a.conj().T @ a).matrix
            assert np.linalg.norm(v @ selected @ v.conj().T - a @ rho.matrix @ a.conj().T) <= 1e-10
            assert adj.residual <= 1e-10

    def test_singular_state_on_support(self, rng):
        psi = haar_random_state(3, rng)
        rho = DensityOperator.from_state(psi)
        a = random_kraus(3, 2, rng)[0]
        assert readjustment(rho, a).residual <= 1e-10
        full = readjustment(rho, a, complete=True).isometry
        np.testing.assert_allclose(full.conj().T @ full, np.eye(3), atol=1e-10)


class TestClassicalBayes:
    def test_unit_likelihood(self, rng):
        p = ClassicalState(rng.dirichlet(np.ones(4)), haar_random_vectors(2, 4, rng))
        post, ev = classical_bayes_update(p, InducedEffect(Effect.identity(2)))
        np.testing.assert_allclose(post.weights, p.weights, atol=1e-15)
        assert ev == pytest.approx(1.0)

    def test_indicator_like(self):
        p = ClassicalState.from_atoms([(0.5, KET0), (0.5, KET1)])
        post, ev = classical_bayes_update(p, InducedEffect(Effect(P0)))
        assert ev == 0.5
        assert len(post) == 1
        assert post.atoms[0][1] == KET0

    def test_evidence_matches_born(self, rng):
        for _ in range(20):
            p = ClassicalState(rng.dirichlet(np.ones(6)), haar_random_vectors(3, 6, rng))
            effect = random_effect(3, rng)
            _, ev = classical_bayes_update(p, InducedEffect(effect))
            assert ev == pytest.approx(born_probability(reduce(p), effect), abs=1e-12)

    def test_zero_evidence(self):
        with pytest.raises(ZeroEvidence):
            classical_bayes_update(ClassicalState.delta(KET1), InducedEffect(Effect(P0)))


class TestDisturbance:
    def test_unitary_relabels(self, rng):
        u = haar_random_unitary(3, rng)
        omega = haar_random_state(3, rng)
        assert disturbance_map(u, omega) == PureState.normalized(u @ omega.vector)

    def test_annihilated(self):
        assert disturbance_map(P0, KET1) is None

    def test_projection(self):
        assert disturbance_map(P0, PLUS) == KET0

    def test_prior_independent(self, rng):
        a = random_kraus(3, 3, rng, kind="unitary-twirl")[1]
        rho = random_density(3, rng)
        p1 = random_decomposition(rho, 6, rng)
        p2 = random_decomposition(random_density(3, rng), 5, rng)
        shared = PureState(p1.vectors[2])
        p2 = ClassicalState(np.r_[0.5 * p2.weights, 0.5], np.vstack([p2.vectors, shared.vector]))
        r1 = extension_update(p1, a)
        r2 = extension_update(p2, a)
        # the image of the shared atom is the same in both disturbed states
        expected = disturbance_map(a, shared).vector
        for rep in (r1, r2):
            assert np.any(np.all(np.abs(rep.disturbed.vectors - expected) < 1e-12, axis=1))


class TestExtensionUpdate:
    def test_pure_prior(self, rng):
        psi = haar_random_state(3, rng)
        a = random_kraus(3, 2, rng)[0]
        rep = extension_update(ClassicalState.delta(psi), a)
        assert len(rep.disturbed) == 1
        assert rep.disturbed.atoms[0][1] == PureState.normalized(a @ psi.vector)
        assert rep.residual <= 1e-14

    def test_eigen_prior(self, rng):
        rho = random_density(3, rng)
        for a in KrausOperation.lueders(random_kraus(3, 3, rng).povm()):
            assert extension_update(eigen_decomposition_state(rho), a).residual <= 1e-10

    def test_decomposition_independent(self, rng):
        rho = random_density(3, rng)
        a = random_kraus(3, 4, rng, kind="unitary-twirl")[0]
        r_eig = extension_update(eigen_decomposition_state(rho), a)
        r_rand = extension_update(random_decomposition(rho, 7, rng), a)
        assert r_eig.residual <= 1e-10
        assert r_rand.residual <= 1e-10
        np.testing.assert_allclose(reduce(r_eig.disturbed).matrix, reduce(r_rand.disturbed).matrix, atol=1e-10)

    def test_annihilated_atoms_dropped(self):
        p = ClassicalState.from_atoms([(0.5, KET1), (0.5, PLUS)])
        rep = extension_update(p, P0)
        # a single operator suffices; P0 need not belong to a full operation here
        assert len(rep.disturbed) == 1
        assert rep.residual <= 1e-14
        assert rep.evidence == pytest.approx(0.25)

    def test_report_json(self, rng):
        rho = random_density(2, rng)
        rep = extension_update(eigen_decomposition_state(rho), random_kraus(2, 2, rng)[0])
        obj = json.loads(json.dumps(rep.to_json()))
        assert obj["residual"] == rep.residual
        assert set(obj) >= {"prior", "posterior", "disturbed", "target", "evidence"}

    @given(seed=seeds, n=st.integers(2, 5), extra=st.integers(0, 5))
    @settings(max_examples=40, deadline=None)
    def test_master_property(self, seed, n, extra):
        rng = np.random.default_rng(seed)
        rho = random_density(n, rng)
        op = random_kraus(n, 3, rng, kind="general")
        for p in (eigen_decomposition_state(rho), random_decomposition(rho, n + extra, rng)):
            for a in op:
                post, _ = apply_operation(reduce(p), a)
                rep = extension_update(p, a)
                assert np.linalg.norm(reduce(rep.disturbed).matrix - post.matrix) <= 1e-10


class TestEigenExpansion:
    def test_projector(self):
        exp = effect_eigen_expansion(Effect(P0))
        np.testing.assert_allclose(exp.values, [1, 0], atol=1e-15)
        assert PureState(exp.vectors[0]) == KET0

    def test_diagonal(self):
        exp = effect_eigen_expansion(Effect(np.diag([0.5, 0.25])))
        np.testing.assert_allclose(exp.values, [0.5, 0.25])
        np.testing.assert_allclose(exp.vectors, np.eye(2))

    def test_reconstruction(self, rng):
        effect = random_effect(4, rng)
        exp = effect_eigen_expansion(effect)
        assert np.max(np.abs(exp.reconstruct() - effect.matrix)) <= 1e-12
        assert np.all((exp.values >= 0) & (exp.values <= 1 + 1e-10))


class TestSigma:
    def test_mixed(self, rng):
        omega = haar_random_state(3, rng)
        assert sigma_map(DensityOperator.maximally_mixed(3), omega) == omega

    def test_projects(self):
        rho = DensityOperator.from_state(KET0)
        assert sigma_map(rho, PLUS) == KET0
        assert sigma_map(rho, KET1) is None


class TestRepresentationUpdate:
    def test_identity_effect(self, rng):
        rho = random_density(3, rng)
        assert representation_update(rho, Effect.identity(3), haar_random_vectors(3, 50, rng)) <= 1e-12

    def test_mixed_state(self, rng):
        effect = random_effect(3, rng)
        pts = haar_random_vectors(3, 50, rng)
        assert representation_update(DensityOperator.maximally_mixed(3), effect, pts) <= 1e-12

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_random(self, n):
        rng = np.random.default_rng(n)
        for _ in range(10):
            rho, effect = random_density(n, rng), random_effect(n, rng)
            assert representation_update(rho, effect, haar_random_vectors(n, 100, rng)) <= 1e-10

    def test_singular_state(self, rng):
        psi = haar_random_state(3, rng)
        rho = DensityOperator.from_state(psi)
        assert representation_update(rho, random_effect(3, rng), haar_random_vectors(3, 30, rng)) <= 1e-10


class TestCollapse:
    def test_unitary_operation(self, rng):
        rho = random_density(3, rng)
        u = haar_random_unitary(3, rng)
        rep = full_collapse_decomposition(rho, KrausOperation([u]))
        out = rep.outcomes[0]
        np.testing.assert_allclose(out.posterior, rho.matrix, atol=1e-12)
        np.testing.assert_allclose(out.isometry, u, atol=1e-10)
        assert rep.ok

    def test_commuting_qubit(self):
        povm = DiscretePOVM([np.diag([0.5, 0.25]), np.diag([0.5, 0.75])])
        rep = full_collapse_decomposition(DensityOperator.maximally_mixed(2), KrausOperation.lueders(povm))
        assert rep.mixture_residual <= 1e-15
        for out in rep.outcomes:
            np.testing.assert_allclose(out.isometry, np.eye(2), atol=1e-12)
        assert [o.probability for o in rep.outcomes] == pytest.approx([0.375, 0.625])

    def test_random_with_frame(self, rng):
        rho = random_density(4, rng)
        op = random_kraus(4, 3, rng, kind="unitary-twirl")
        rep = full_collapse_decomposition(rho, op, frame=random_ic_povm(4, rng))
        assert rep.ok
        for out in rep.outcomes:
            assert out.passive_residual <= 1e-10
        json.dumps(rep.to_json())

    def test_zero_outcome_skipped(self):
        rho = DensityOperator.from_state(KET0)
        op = KrausOperation([P0, KET1.projector()])
        rep = full_collapse_decomposition(rho, op)
        assert rep.outcomes[1].skipped
        assert not rep.outcomes[0].skipped
        assert rep.ok


def test_minimal_frame_likelihood_is_not_classical():
    sic = sic_qubit()
    v = sic.vectors[0]
    anti = Effect(PureState([-np.conj(v[1]), np.conj(v[0])]).projector())
    assert effect_expansion(anti, sic).min() < -1e-10
