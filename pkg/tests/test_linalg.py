import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import random_hermitian, random_psd, rng
from steerkit.errors import DimensionError, NotHermitianError, ValidationError
from steerkit.linalg import (
    I2,
    X,
    Y,
    Z,
    density_matrix,
    hermitian,
    matrix_from_json,
    matrix_to_json,
    max_eigenvalue,
    max_entangled_projector,
    min_eigenvalue,
    partial_trace,
    povm,
    projector,
    tensor,
    transpose,
)

seeds = st.integers(0, 2**32 - 1)


def ptrace_oracle(m, da, db, keep):
    """Index-by-index partial trace."""
    out = np.zeros((da, da) if keep == "A" else (db, db), dtype=complex)
    for i in range(da):
        for j in range(db):
            for k in range(da):
                for l in range(db):
                    v = m[i * db + j, k * db + l]
                    if keep == "A" and j == l:
                        out[i, k] += v
                    if keep == "B" and i == k:
                        out[j, l] += v
    return out


class TestTensor:
    def test_identity(self):
        assert np.array_equal(tensor(I2, I2), np.eye(4))

    def test_x_z_entries(self):
        m = tensor(X, Z)
        assert m.shape == (4, 4)
        assert m[0, 2] == 1
        assert m[1, 3] == -1

    def test_basis_projectors(self):
        p0, p1 = np.diag([1, 0]), np.diag([0, 1])
        assert np.array_equal(tensor(p0, p1), np.diag([0, 1, 0, 0]))

    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_associative(self, seed):
        r = rng(seed)
        a, b, c = (random_hermitian(r, d) for d in (2, 3, 2))
        assert np.max(np.abs(tensor(tensor(a, b), c) - tensor(a, tensor(b, c)))) <= 1e-12


class TestPartialTrace:
    def test_bell_marginal(self):
        phi = max_entangled_projector(2)
        assert np.allclose(partial_trace(phi, (2, 2), keep="A"), I2 / 2, atol=1e-15)

    def test_product_factorization(self):
        r = rng(1)
        rho, tau = random_psd(r, 2), random_psd(r, 3)
        assert np.allclose(partial_trace(tensor(rho, tau), (2, 3), keep="B"), tau * np.trace(rho), atol=1e-12)

    def test_singlet_conditional(self):
        # Z|0> = +|0>, so the +Z projector is |0><0|; the singlet leaves Bob in |1>
        psi = np.array([0, -1, 1, 0]) / math.sqrt(2)
        singlet = np.outer(psi, psi)
        plus_z = np.diag([1.0, 0.0])
        m = singlet @ tensor(plus_z, I2)
        expected = ptrace_oracle(m, 2, 2, "B")
        assert np.allclose(expected, np.diag([0, 0.5]))
        assert np.allclose(partial_trace(m, (2, 2), keep="B"), expected, atol=1e-15)

    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_matches_oracle_and_keeps_trace(self, seed):
        r = rng(seed)
        m = random_hermitian(r, 6)
        for keep in ("A", "B"):
            got = partial_trace(m, (2, 3), keep=keep)
            assert np.allclose(got, ptrace_oracle(m, 2, 3, keep), atol=1e-12)
            assert abs(np.trace(got) - np.trace(m)) <= 1e-12

    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_tensor_then_trace(self, seed):
        r = rng(seed)
        a, b = random_psd(r, 2), random_psd(r, 2)
        assert np.max(np.abs(partial_trace(tensor(a, b), (2, 2), keep="A") - a * np.trace(b))) <= 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            partial_trace(np.eye(5), (2, 2), keep="A")


class TestTranspose:
    def test_z(self):
        assert np.array_equal(transpose(Z), Z)

    def test_y(self):
        assert np.array_equal(transpose(Y), -Y)

    def test_y_eigenprojectors_swap(self):
        plus_i = projector([1, 1j])
        minus_i = projector([1, -1j])
        assert np.allclose(transpose(plus_i), minus_i)

    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_involution_and_conjugation(self, seed):
        m = random_hermitian(rng(seed), 3)
        assert np.array_equal(transpose(transpose(m)), m)
        assert np.allclose(transpose(m), m.conj())


class TestMaxEntangled:
    def test_qubit_entries(self):
        expected = np.zeros((4, 4))
        for i in (0, 3):
            for j in (0, 3):
                expected[i, j] = 0.5
        assert np.allclose(max_entangled_projector(2), expected)

    def test_qutrit_rank_one_trace_one(self):
        p = max_entangled_projector(3)
        assert p.shape == (9, 9)
        assert np.linalg.matrix_rank(p) == 1
        assert np.trace(p).real == pytest.approx(1, abs=1e-14)

    def test_rejects_small_d(self):
        with pytest.raises(DimensionError):
            max_entangled_projector(1)

    @pytest.mark.parametrize("d", [2, 3])
    def test_transpose_trick(self, d):
        r = rng(10 + d)
        phi = max_entangled_projector(d)
        for _ in range(100):
            s, w = random_hermitian(r, d), random_hermitian(r, d)
            lhs = np.trace(phi @ tensor(s, w)) * d
            assert abs(lhs - np.trace(w.T @ s)) <= 1e-10


class TestEigenvalues:
    def test_identity(self):
        assert min_eigenvalue(I2) == pytest.approx(1)

    def test_z(self):
        assert min_eigenvalue(Z) == pytest.approx(-1)
        assert max_eigenvalue(Z) == pytest.approx(1)

    def test_strategy_operator(self):
        c = 2 + math.sqrt(2)
        m = (I2 + X) / c + (I2 + Z) / c
        assert max_eigenvalue(m) == pytest.approx(1, abs=1e-14)
        assert min_eigenvalue(m) == pytest.approx((2 - math.sqrt(2)) / c, abs=1e-14)

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitianError):
            min_eigenvalue(np.array([[0, 1], [0, 0]]))


class TestConstructors:
    def test_symmetrizes_small_drift(self):
        m = np.array([[1, 1e-13], [0, 1]])
        h = hermitian(m)
        assert np.array_equal(h, h.conj().T)

    def test_rejects_drift(self):
        with pytest.raises(NotHermitianError):
            hermitian(np.array([[1, 1e-6], [0, 1]]))

    def test_immutable(self):
        with pytest.raises(ValueError):
            hermitian(I2)[0, 0] = 2

    def test_density_checks(self):
        density_matrix(I2 / 2)
        with pytest.raises(ValidationError, match="trace"):
            density_matrix(I2)
        with pytest.raises(ValidationError, match="PSD"):
            density_matrix(np.diag([1.5, -0.5]))

    def test_povm_checks(self):
        povm([I2 / 2, I2 / 2])
        with pytest.raises(ValidationError, match="identity"):
            povm([I2 / 2, I2 / 3])
        with pytest.raises(ValidationError, match="PSD"):
            povm([np.diag([1.5, 1]), np.diag([-0.5, 0])])


def test_matrix_json_round_trip():
    m = hermitian(random_hermitian(rng(3), 3))
    obj = json.loads(json.dumps(matrix_to_json(m)))
    assert set(obj) == {"dim", "re", "im"}
    assert np.array_equal(matrix_from_json(obj), m)
