"""
Tests for model loading, equilibrium classification and node tensors
"""
import json
import math

import numpy as np
import pytest

from errors import Degenerate, Indefinite, ModelValidationError, NotCritical, ParseError
from model import (ALPHA, BETA, BRANCH_NEGATIVE, BRANCH_POSITIVE, Frequency, check_equilibrium, derivative_tensor,
                   diophantine_margin, estimate_c0, load_model, reference_document)

GOLDEN = 0.61803398874989484820458683436563811772


class TestLoadModel:
    def test_reference_model(self, ref1):
        assert (ref1.r, ref1.s, ref1.d, ref1.nf) == (2, 1, 3, 2)
        assert set(ref1.perturbation.support) == {(0, 0), (1, 0), (-1, 0), (1, 1), (-1, -1)}
        assert ref1.equilibrium.branch == BRANCH_POSITIVE
        assert ref1.equilibrium.sign == 1
        np.testing.assert_allclose(ref1.equilibrium.hessian, [[-1.0]], atol=1e-15)

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "ref1.json"
        path.write_text(json.dumps(reference_document()))
        model = load_model(str(path))
        assert model.name == 'ref1'
        assert model.frequency.omega_text[1].startswith('0.6180339887')

    def test_positive_hessian_gives_negative_branch(self):
        model = load_model(reference_document(beta0=math.pi))
        assert model.equilibrium.branch == BRANCH_NEGATIVE
        assert model.equilibrium.sign == -1

    def test_not_critical(self):
        with pytest.raises(NotCritical) as info:
            load_model(reference_document(beta0=0.3))
        assert info.value.gradient_norm > 0.1

    def test_degenerate_without_averaged_terms(self):
        doc = reference_document()
        doc['terms'] = [{'nu': [1, 0], 'mu': [0], 're': 0.5, 'im': 0}]
        with pytest.raises(Degenerate):
            load_model(doc)

    def test_indefinite(self):
        doc = {
            'r': 2, 's': 2, 'omega': ['1', str(GOLDEN)], 'tau': 1, 'C0': '0.38', 'beta0': [0, 0],
            'symmetrize': True,
            'terms': [
                {'nu': [0, 0], 'mu': [1, 0], 're': 0.5, 'im': 0},
                {'nu': [0, 0], 'mu': [0, 1], 're': -0.5, 'im': 0},
            ],
        }
        with pytest.raises(Indefinite):
            load_model(doc)

    def test_diophantine_certificate(self):
        doc = reference_document()
        doc['omega'] = ['1', '1']
        with pytest.raises(ModelValidationError, match="Diophantine"):
            load_model(doc)
        model = load_model(doc, certify=False)
        assert diophantine_margin(model.frequency, 10) == 0.0

    def test_reality_constraint(self):
        doc = reference_document()
        doc['symmetrize'] = False
        with pytest.raises(ModelValidationError, match="reality"):
            load_model(doc)

    @pytest.mark.parametrize("mutation", [
        lambda d: d.pop('omega'),
        lambda d: d.update(omega=['1']),
        lambda d: d.update(beta0=['zero']),
        lambda d: d['terms'].append({'nu': [1], 'mu': [0]}),
    ])
    def test_parse_errors(self, mutation):
        doc = reference_document()
        mutation(doc)
        with pytest.raises(ParseError):
            load_model(doc)

    def test_unreadable_text(self):
        with pytest.raises(ParseError):
            load_model("{not json")


class TestFrequency:
    def test_validation(self):
        with pytest.raises(ModelValidationError):
            Frequency(omega=(1.0, GOLDEN), C0=0.0, tau=1)
        with pytest.raises(ModelValidationError):
            Frequency(omega=(1.0, GOLDEN, 2.0), C0=0.3, tau=1)

    def test_normalization(self, ref1):
        freq = ref1.frequency
        assert freq.normalization == pytest.approx(2.0 / 0.38)
        assert freq.omega0[0] == pytest.approx(2.0 / 0.38)

    def test_diophantine_margin(self, ref1):
        # the (0, 1) mode is the worst one on any ball
        margin = diophantine_margin(ref1.frequency, 200)
        assert margin == pytest.approx(GOLDEN / 0.38, rel=1e-9)
        assert estimate_c0(ref1.frequency, 200) == pytest.approx(GOLDEN, rel=1e-9)

    def test_margin_needs_a_ball(self, ref1):
        with pytest.raises(ValueError):
            diophantine_margin(ref1.frequency, 0)


class TestNodeTensors:
    def test_derivative_tensor_shapes(self, ref1):
        pert = ref1.perturbation
        assert derivative_tensor(pert, (1, 1), 2, 1, (0.0,)).shape == (2, 2, 1)
        np.testing.assert_allclose(derivative_tensor(pert, (0, 0), 0, 2, (0.0,)), [[-1.0]], atol=1e-15)
        np.testing.assert_allclose(derivative_tensor(pert, (0, 0), 0, 1, (0.0,)), [0.0], atol=1e-15)

    def test_vertex_table(self, ref1):
        K, w = ref1.vertex_table((1, 1))
        np.testing.assert_allclose(K, [[1j, 1j, 1j]])
        np.testing.assert_allclose(w, [0.5])

    def test_node_factors_rebuild_the_gradient(self, ref1):
        """sum over nu of the bare node factor times exp(i nu.psi) is grad f at (psi, beta0)"""
        rng = np.random.default_rng(7)
        for psi in rng.uniform(0, 2 * np.pi, size=(5, 2)):
            total = sum(ref1.node_factor(nu, []) * np.exp(1j * np.dot(nu, psi)) for nu in ref1.perturbation.support)
            d_alpha, d_beta = ref1.gradient_at(psi, np.array([0.0]))
            np.testing.assert_allclose(total, np.concatenate([d_alpha, d_beta]), atol=1e-14)

    def test_node_factor_slices(self, ref1):
        assert ref1.node_factor((1, 0), [], ALPHA).shape == (2,)
        assert ref1.node_factor((1, 0), [], BETA).shape == (1,)
        assert ref1.node_factor((1, 0), [], linear=np.eye(3)).shape == (3, 3)

    def test_vanishing_tensors(self, ref1):
        assert ref1.is_vanishing((0, 0), 1, 0)
        assert ref1.is_vanishing((1, 0), 0, 1)
        assert not ref1.is_vanishing((1, 0), 1, 0)
        assert not ref1.is_vanishing((1, 1), 1, 2)

    def test_embed(self, ref1):
        np.testing.assert_array_equal(ref1.embed(np.array([2.0]), BETA), [0.0, 0.0, 2.0])
        np.testing.assert_array_equal(ref1.embed(np.array([1.0, 3.0]), ALPHA), [1.0, 3.0, 0.0])

    def test_leg_tensor_norm(self, ref1):
        # cos a1 has no beta dependence
        norm, scale = ref1.leg_tensor_norm((1, 0), 0, 1)
        assert norm == 0.0 and scale > 0
        norm, _ = ref1.leg_tensor_norm((1, 1), 1, 1)
        assert norm == pytest.approx(0.5)


class TestCheckEquilibrium:
    def test_reference_point(self, ref1):
        equilibrium = check_equilibrium(ref1, 1e-12)
        assert equilibrium.gradient_norm <= 1e-15
        np.testing.assert_allclose(equilibrium.hessian, [[-1.0]], atol=1e-15)

    def test_other_points(self, ref1):
        with pytest.raises(NotCritical):
            check_equilibrium(ref1, 1e-12, beta0=[math.pi / 2])
        assert check_equilibrium(ref1, 1e-12, beta0=[math.pi]).branch == BRANCH_NEGATIVE

    def test_rejects_nonpositive_tolerance(self, ref1):
        with pytest.raises(ValueError):
            check_equilibrium(ref1, 0.0)
