"""Seeded random assemblages, states and operators shared by the test modules."""

import numpy as np

from steerkit.assemblage import Assemblage, from_state_and_measurements
from steerkit.linalg import I2, X, Y, Z


def rng(seed):
    return np.random.default_rng(seed)


def random_psd(r, d, rank=None):
    rank = rank or d
    g = r.normal(size=(d, rank)) + 1j * r.normal(size=(d, rank))
    return g @ g.conj().T


def random_hermitian(r, d):
    g = r.normal(size=(d, d)) + 1j * r.normal(size=(d, d))
    return (g + g.conj().T) / 2


def random_density(r, d, rank=None):
    m = random_psd(r, d, rank)
    return m / np.trace(m).real


def random_pure(r, d):
    v = r.normal(size=d) + 1j * r.normal(size=d)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def random_qubit_projective(r):
    n = r.normal(size=3)
    n /= np.linalg.norm(n)
    s = n[0] * X + n[1] * Y + n[2] * Z
    return [(I2 + s) / 2, (I2 - s) / 2]


def random_lhs_assemblage(r, n_settings, n_outcomes=2, d=2, n_hidden=None):
    """``sigma_a|x = sum_l p(a|x,l) rho_l`` with random stochastic responses."""
    n_hidden = n_hidden or int(r.integers(2, 7))
    rhos = np.array([random_psd(r, d) for _ in range(n_hidden)])
    rhos /= np.einsum("lii->", rhos).real
    resp = r.dirichlet(np.ones(n_outcomes), size=(n_hidden, n_settings))
    sigma = np.einsum("lxa,lij->xaij", resp, rhos)
    return Assemblage(sigma)


def random_state_assemblage(r, n_settings, noise=None):
    """Random pure two-qubit state with white noise, measured in random projective bases."""
    noise = r.uniform(0, 0.5) if noise is None else noise
    rho = (1 - noise) * random_pure(r, 4) + noise * np.eye(4) / 4
    return from_state_and_measurements(rho, [random_qubit_projective(r) for _ in range(n_settings)])


def qubit_corpus(seed=2024, n=100):
    """Half LHS-constructed, half from random states; ``|X|`` alternates 2 and 3."""
    r = rng(seed)
    out = []
    for i in range(n // 2):
        out.append(("lhs", random_lhs_assemblage(r, 2 + i % 2)))
    for i in range(n - n // 2):
        out.append(("state", random_state_assemblage(r, 2 + i % 2)))
    return out


def random_steerable(r, n_settings, min_sr=1e-3):
    from steerkit.measures import steering_robustness

    while True:
        a = random_state_assemblage(r, n_settings, noise=r.uniform(0, 0.2))
        if steering_robustness(a)[0] > min_sr:
            return a


def random_effect(r, d2):
    """Random joint effect ``0 <= E1 <= 1``."""
    m = random_psd(r, d2, rank=int(r.integers(1, d2 + 1)))
    return m / np.linalg.eigvalsh(m)[-1] * r.uniform(0.2, 1.0)
