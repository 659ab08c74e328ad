import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corpus import random_density, random_lhs_assemblage, random_qubit_projective, rng
from steerkit.assemblage import (
    Assemblage,
    LhsModel,
    deterministic_response,
    enumerate_strategies,
    from_state_and_measurements,
    is_unsteerable,
    lhs_assemblage,
    strategy_index,
)
from steerkit.errors import DimensionError, TooManyStrategiesError, ValidationError
from steerkit.linalg import I2, X, Z, bloch_projector
from steerkit.measures import steering_robustness
from steerkit.werner import werner_assemblage, werner_state

WHITE = np.full((2, 2, 2, 2), 0) + np.eye(2) / 4


def test_maximally_mixed_state():
    povms = [[bloch_projector("X", 1), bloch_projector("X", -1)], [bloch_projector("Z", 1), bloch_projector("Z", -1)]]
    a = from_state_and_measurements(np.eye(4) / 4, povms)
    assert np.allclose(a.sigma, WHITE, atol=1e-15)


def test_maximally_mixed_general_povm():
    e = [np.diag([0.7, 0.2]), np.diag([0.3, 0.8])]
    a = from_state_and_measurements(np.eye(4) / 4, [e])
    for k in range(2):
        assert np.allclose(a.sigma[0, k], np.trace(e[k]) * I2 / 4)


def test_product_state_factorizes():
    r = rng(1)
    ra, rb = random_density(r, 2), random_density(r, 2)
    povms = [random_qubit_projective(r) for _ in range(2)]
    a = from_state_and_measurements(np.kron(ra, rb), povms)
    for x in range(2):
        for k in range(2):
            assert np.allclose(a.sigma[x, k], np.trace(ra @ povms[x][k]) * rb, atol=1e-12)
    assert steering_robustness(a)[0] < 1e-6


def test_werner_direct_oracle():
    # sigma_a|x computed entrywise: <i|sigma|j> = sum_k <k i| (E (x) 1) rho |k j>
    v = 0.8
    rho = werner_state(v)
    a = werner_assemblage(v)
    # outcome a corresponds to the (-1)^a eigenvalue of Alice's Pauli
    for x, axis in enumerate("XZ"):
        for k, sign in enumerate((-1, 1)):
            E = np.kron(bloch_projector(axis, sign), I2) @ rho
            expected = np.array([[sum(E[2 * m + i, 2 * m + j] for m in range(2)) for j in range(2)] for i in range(2)])
            assert np.allclose(a.sigma[x, k], expected, atol=1e-14)
            assert np.trace(a.sigma[x, k]).real == pytest.approx(0.5, abs=1e-14)


def test_werner_singlet_anticorrelation():
    a = werner_assemblage(1.0)
    for x, P in enumerate((X, Z)):
        for k, sign in enumerate((-1, 1)):
            assert np.allclose(2 * a.sigma[x, k], (I2 - sign * P) / 2, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_random_inputs_give_valid_assemblages(seed, nx):
    r = rng(seed)
    rho = random_density(r, 4, rank=int(r.integers(1, 5)))
    a = from_state_and_measurements(rho, [random_qubit_projective(r) for _ in range(nx)])
    assert np.allclose(a.marginals().sum(axis=1), 1)
    assert np.min(np.linalg.eigvalsh(a.sigma)) > -1e-9


@pytest.mark.parametrize("nx,na,count", [(2, 2, 4), (1, 3, 3), (3, 2, 8)])
def test_strategy_counts(nx, na, count):
    s = enumerate_strategies(nx, na)
    assert len(s) == count == len(set(s))
    assert [strategy_index(t, na) for t in s] == list(range(count))


def test_strategy_order_first_setting_fastest():
    assert enumerate_strategies(2, 2) == [(1, 1), (2, 1), (1, 2), (2, 2)]
    assert enumerate_strategies(2, 2) == enumerate_strategies(2, 2)


def test_deterministic_response():
    D = deterministic_response(3, 2)
    assert D.shape == (8, 3, 2)
    assert np.all(D.sum(axis=2) == 1)
    assert D[5].argmax(axis=1).tolist() == [1, 0, 1]


def test_too_many_strategies():
    with pytest.raises(TooManyStrategiesError):
        enumerate_strategies(20, 2)
    with pytest.raises(ValidationError):
        enumerate_strategies(0, 2)


def test_white_noise_unsteerable():
    ok, model = is_unsteerable(Assemblage(WHITE))
    assert ok
    model.check(Assemblage(WHITE), tol=1e-7)
    # the white-noise model with equal weights is one valid certificate
    eq = LhsModel(np.array([np.eye(2) / 8] * 4), 2, 2)
    assert np.allclose(eq.reconstruct(), WHITE)


def test_werner_membership():
    assert is_unsteerable(werner_assemblage(1.0)) == (False, None)
    ok, model = is_unsteerable(werner_assemblage(0.70))
    assert ok
    model.check(werner_assemblage(0.70), tol=1e-7)


def test_lhs_constructed_always_unsteerable():
    r = rng(3)
    for i in range(15):
        a = random_lhs_assemblage(r, 2 + i % 2)
        ok, model = is_unsteerable(a)
        assert ok
        model.check(a, tol=1e-7)
        assert steering_robustness(a)[0] <= 1e-6


def test_lhs_assemblage_helper():
    states = np.array([np.eye(2) / 8] * 4)
    assert np.allclose(lhs_assemblage(states, 2, 2).sigma, WHITE)


class TestValidation:
    def test_negative_element_names_label(self):
        s = WHITE.copy()
        s[1, 0] = np.diag([0.5, -0.01])
        s[1, 1] = np.diag([0.0, 0.51])
        with pytest.raises(ValidationError, match=r"positivity.*x=2, a=1"):
            Assemblage(s)

    def test_signaling(self):
        s = WHITE.copy()
        s[1, 0] = np.diag([0.3, 0.2])
        s[1, 1] = np.diag([0.3, 0.2])
        with pytest.raises(ValidationError, match="no-signaling.*x=2"):
            Assemblage(s)

    def test_normalization(self):
        with pytest.raises(ValidationError, match="normalization"):
            Assemblage(WHITE * 2)

    def test_non_hermitian(self):
        s = WHITE.astype(complex)
        s[0, 1, 0, 1] = 0.1
        with pytest.raises(ValidationError, match=r"x=1, a=2"):
            Assemblage(s)

    def test_bad_shape(self):
        with pytest.raises(DimensionError):
            Assemblage(np.eye(2))

    def test_povm_mismatch(self):
        with pytest.raises(ValidationError):
            from_state_and_measurements(np.eye(4) / 4, [[I2, 0 * I2], [I2 / 2]])
        with pytest.raises(ValidationError):
            from_state_and_measurements(np.eye(4) / 4, [[I2, I2]])
        with pytest.raises(ValidationError):
            from_state_and_measurements(np.eye(4) / 4, [[I2], [I2 / 2, I2 / 2]])
        with pytest.raises(DimensionError):
            from_state_and_measurements(np.eye(3) / 3, [[np.eye(2)]])

    def test_lhs_model_bad_weights(self):
        with pytest.raises(ValidationError, match="sum to"):
            LhsModel(np.array([np.eye(2) / 4] * 4), 2, 2).check(Assemblage(WHITE))


def test_json_round_trip():
    a = werner_assemblage(0.9)
    text = json.dumps(a.to_json())
    b = Assemblage.from_json(json.loads(text))
    assert np.array_equal(a.sigma, b.sigma)
    obj = a.to_json()
    assert set(obj["sigma"]) == {"1:1", "1:2", "2:1", "2:2"}
    assert a[2, 1] is not None and np.array_equal(a[2, 1], a.sigma[1, 0])


def test_json_missing_entry():
    obj = werner_assemblage(0.9).to_json()
    del obj["sigma"]["2:2"]
    with pytest.raises(ValidationError, match=r"x=2, a=2"):
        Assemblage.from_json(obj)


def test_lhs_model_json():
    ok, model = is_unsteerable(werner_assemblage(0.5))
    back = LhsModel.from_json(json.loads(json.dumps(model.to_json())))
    assert np.array_equal(back.states, model.states)
    assert math.isclose(float(np.einsum("lii->", back.states).real), 1, abs_tol=1e-8)
