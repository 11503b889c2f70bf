import math

import numpy as np
import pytest

from lqglab.params import (
    DomainError,
    InsertionSpec,
    LqgParams,
    TriangleWeights,
    alpha_exponent,
    beta_rho_bridge,
    beta_to_weight,
    weight_to_beta,
    weights_to_rho,
)


def test_derived_constants():
    p = LqgParams(1.3)
    assert math.isclose(p.kappa, 1.3**2, rel_tol=1e-14)
    assert math.isclose(p.Q, 2 / 1.3 + 1.3 / 2, rel_tol=1e-14)
    assert math.isclose(p.gamma * p.Q, 2 + p.gamma**2 / 2, rel_tol=1e-14)
    assert math.isclose(p.lam, math.pi / 1.3, rel_tol=1e-14)
    assert math.isclose(p.chi, 2 / 1.3 - 1.3 / 2, rel_tol=1e-14)


@pytest.mark.parametrize("gamma", [0.0, 2.0, -1.0, 2.5])
def test_gamma_domain(gamma):
    with pytest.raises(DomainError):
        LqgParams(gamma)


def test_weight_to_beta_examples():
    p1 = LqgParams(1.0)
    assert math.isclose(weight_to_beta(2.0, p1), 1.0, rel_tol=1e-14)  # beta = gamma
    assert math.isclose(weight_to_beta(p1.gamma**2 / 2, p1), p1.Q, rel_tol=1e-14)
    p08 = LqgParams(0.8)
    assert math.isclose(weight_to_beta(0.8**2, p08), 2 / 0.8, rel_tol=1e-14)


def test_weight_to_beta_domain():
    with pytest.raises(DomainError):
        weight_to_beta(0.0, LqgParams(1.0))
    with pytest.raises(DomainError):
        weight_to_beta(-1.0, LqgParams(1.0))


@pytest.mark.parametrize("gamma", [0.7, 1.0, 1.5, 1.9])
def test_beta_weight_bijection(gamma):
    p = LqgParams(gamma)
    for W in np.geomspace(1e-3, 50, 40):
        assert math.isclose(beta_to_weight(weight_to_beta(W, p), p), W,
                            rel_tol=1e-13, abs_tol=1e-13)


def test_thick_flag_and_duality():
    p = LqgParams(1.2)
    thr = p.gamma**2 / 2
    assert InsertionSpec.from_weight(thr + 1e-9, p).thick
    assert not InsertionSpec.from_weight(thr - 1e-9, p).thick
    # thick iff beta <= Q
    for W in (0.3, 0.5, thr, 1.7, 3.0):
        spec = InsertionSpec.from_weight(W, p)
        assert spec.thick == (spec.beta <= p.Q + 1e-14)
    # reflection beta -> 2Q - beta corresponds to W -> gamma^2 - W
    for W in (0.2, 0.5, 0.7, 1.0):
        b = weight_to_beta(W, p)
        assert math.isclose(weight_to_beta(p.gamma**2 - W, p), 2 * p.Q - b, rel_tol=1e-13)


def test_weights_to_rho_examples():
    p = LqgParams(1.0)
    assert weights_to_rho(2, 2, 2, p) == (0.0, 0.0, 0.0)
    assert weights_to_rho(4, 3, 1, p) == (2.0, -1.0, 2.0)
    assert weights_to_rho(0.5, 1, 1, p) == (-1.5, -1.0, 0.0)
    with pytest.raises(DomainError):
        weights_to_rho(-1, 1, 1, p)


def test_beta_rho_bridge_examples():
    p = LqgParams(1.0)
    assert beta_rho_bridge(p.gamma, p.gamma, p.gamma, p) == (0.0, 0.0, 0.0)
    got = beta_rho_bridge(p.Q, 1.0, 1.5, p)
    assert np.allclose(got, (1 - 2.5, 1 - 1.5, 0.5))


def test_bridge_round_trip():
    p = LqgParams(1.4)
    # weights -> rhos agrees with betas -> rhos through the insertion map
    for (W, W1, W2) in ((2.0, 1.5, 2.5), (0.7, 3.0, 1.1), (4.2, 0.4, 0.9)):
        direct = weights_to_rho(W, W1, W2, p)
        via_beta = beta_rho_bridge(
            weight_to_beta(W, p), weight_to_beta(W1, p), weight_to_beta(W2, p), p
        )
        assert np.allclose(direct, via_beta, rtol=1e-13, atol=1e-13)


def test_alpha_exponent_examples():
    # vanishing on the flow-line locus W3 = W1 - W2 + 2
    p = LqgParams(1.3)
    assert alpha_exponent(1.7, 0.8, 1.7 - 0.8 + 2, p) == 0.0
    p1 = LqgParams(1.0)
    assert alpha_exponent(1.4, 1.4, 2.0, p1) == 0.0
    p2 = LqgParams(math.sqrt(2.0))
    assert math.isclose(alpha_exponent(1, 2, 3, p2), 0.5, rel_tol=1e-14)


def test_triangle_weights_reflection():
    p = LqgParams(1.0)
    tw = TriangleWeights.from_weights(1.8, 0.3, 2.4, p)
    assert math.isclose(tw.beta_bar, tw.beta1 + tw.beta2 + tw.beta3, rel_tol=1e-14)
    for b, br in zip(tw.betas, tw.reflected_betas):
        assert br == b or math.isclose(br, 2 * p.Q - b, rel_tol=1e-14)
        assert br <= p.Q + 1e-12
