"""Assemblages, deterministic strategies and local-hidden-state models.

Labels are 1-based at every external surface (JSON keys, error messages,
strategy tuples); arrays are indexed from 0 internally, so ``sigma[x-1, a-1]``
holds the operator for setting ``x`` and outcome ``a``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, TooManyStrategiesError, ValidationError
from .linalg import density_matrix, hermitian, matrix_from_json, matrix_to_json, min_eigenvalue, partial_trace, povm

PSD_TOL = 1e-9
NOSIG_TOL = 1e-9
NORM_TOL = 1e-9
MAX_STRATEGIES = 10**6
UNSTEERABLE_TOL = 1e-6


@dataclass(frozen=True)
class Assemblage:
    """Subnormalized conditional states ``sigma[x, a]`` of shape ``(|X|, |A|, d, d)``."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.array(self.sigma, dtype=complex)
        if s.ndim != 4 or s.shape[2] != s.shape[3] or min(s.shape) < 1:
            raise DimensionError(f"assemblage array must have shape (X, A, d, d), got {s.shape}")
        nx, na = s.shape[:2]
        for x in range(nx):
            for a in range(na):
                try:
                    s[x, a] = hermitian(s[x, a])
                except ValidationError as exc:
                    raise type(exc)(f"sigma at (x={x + 1}, a={a + 1}): {exc}") from None
                lmin = min_eigenvalue(s[x, a])
                if lmin < -PSD_TOL:
                    raise ValidationError(
                        f"positivity violated at (x={x + 1}, a={a + 1}): min eigenvalue {lmin:.3e}"
                    )
        marg = s.sum(axis=1)
        for x in range(1, nx):
            dev = float(np.max(np.abs(marg[x] - marg[0])))
            if dev > NOSIG_TOL:
                raise ValidationError(f"no-signaling violated at x={x + 1} (deviation {dev:.3e} from x=1)")
        tr = float(np.trace(marg[0]).real)
        if abs(tr - 1) > NORM_TOL:
            raise ValidationError(f"normalization violated: tr(sum_a sigma_a|x) = {tr!r}")
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)

    @property
    def n_settings(self) -> int:
        return self.sigma.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.sigma.shape[1]

    @property
    def dim(self) -> int:
        return self.sigma.shape[2]

    def __getitem__(self, xa: tuple[int, int]) -> np.ndarray:
        """1-based lookup ``assemblage[x, a]``."""
        x, a = xa
        return self.sigma[x - 1, a - 1]

    @property
    def reduced_state(self) -> np.ndarray:
        return self.sigma[0].sum(axis=0)

    def marginals(self) -> np.ndarray:
        """``p(a|x) = tr sigma_a|x`` as an ``(|X|, |A|)`` array."""
        return np.einsum("xaii->xa", self.sigma).real

    def to_json(self, digits: int | None = None) -> dict:
        return {
            "nSettings": self.n_settings,
            "nOutcomes": self.n_outcomes,
            "dim": self.dim,
            "sigma": {
                f"{x + 1}:{a + 1}": matrix_to_json(self.sigma[x, a], digits)
                for x in range(self.n_settings)
                for a in range(self.n_outcomes)
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Assemblage":
        return cls(_read_xa_table(obj, "sigma"))


def _read_xa_table(obj: dict, key: str) -> np.ndarray:
    try:
        nx, na, d = int(obj["nSettings"]), int(obj["nOutcomes"]), int(obj["dim"])
        table = obj[key]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"missing or malformed field: {exc}") from exc
    out = np.zeros((nx, na, d, d), dtype=complex)
    for x in range(nx):
        for a in range(na):
            label = f"{x + 1}:{a + 1}"
            if label not in table:
                raise ValidationError(f"entry for (x={x + 1}, a={a + 1}) missing from {key!r}")
            m = matrix_from_json(table[label])
            if m.shape != (d, d):
                raise DimensionError(f"entry (x={x + 1}, a={a + 1}) has dim {m.shape[0]}, expected {d}")
            out[x, a] = m
    extra = set(table) - {f"{x + 1}:{a + 1}" for x in range(nx) for a in range(na)}
    if extra:
        raise ValidationError(f"unexpected labels in {key!r}: {sorted(extra)}")
    return out


def from_state_and_measurements(rho, povms: Sequence[Sequence], dims: tuple[int, int] | None = None) -> Assemblage:
    """``sigma_a|x = tr_A[(E_a|x (x) 1) rho]`` for Alice's POVMs ``povms[x]``."""
    if not povms:
        raise ValidationError("at least one POVM is required")
    effects = [povm(p) for p in povms]
    na = len(effects[0])
    if any(len(e) != na for e in effects):
        raise ValidationError("all POVMs must share the same outcome count")
    da = effects[0][0].shape[0]
    if any(e[0].shape[0] != da for e in effects):
        raise DimensionError("POVMs act on different dimensions")
    rho = density_matrix(rho)
    if dims is None:
        if rho.shape[0] % da:
            raise DimensionError(f"state of dim {rho.shape[0]} does not factor with d_A = {da}")
        dims = (da, rho.shape[0] // da)
    if dims[0] != da or dims[0] * dims[1] != rho.shape[0]:
        raise DimensionError(f"dims {dims} inconsistent with state of dim {rho.shape[0]}")
    eye_b = np.eye(dims[1])
    sigma = np.array(
        [[partial_trace(np.kron(e, eye_b) @ rho, dims, keep="B") for e in effs] for effs in effects]
    )
    return Assemblage(sigma)


def enumerate_strategies(n_settings: int, n_outcomes: int) -> list[tuple[int, ...]]:
    """All deterministic strategies ``(a_1, ..., a_|X|)`` with 1-based outcomes.

    Ordered by the strategy index ``sum_x (a_x - 1) |A|^(x-1)``, i.e. the
    outcome for ``x = 1`` varies fastest.
    """
    if n_settings < 1 or n_outcomes < 1:
        raise ValidationError("need at least one setting and one outcome")
    if n_outcomes**n_settings > MAX_STRATEGIES:
        raise TooManyStrategiesError(f"{n_outcomes}^{n_settings} strategies exceeds {MAX_STRATEGIES}")
    return [
        tuple(reversed(s)) for s in itertools.product(range(1, n_outcomes + 1), repeat=n_settings)
    ]


def strategy_index(strategy: Sequence[int], n_outcomes: int) -> int:
    return sum((a - 1) * n_outcomes**x for x, a in enumerate(strategy))


def deterministic_response(n_settings: int, n_outcomes: int) -> np.ndarray:
    """``D[l, x, a] = 1`` iff strategy ``l`` answers ``a`` to ``x`` (0-based)."""
    strategies = enumerate_strategies(n_settings, n_outcomes)
    D = np.zeros((len(strategies), n_settings, n_outcomes))
    for lam, s in enumerate(strategies):
        for x, a in enumerate(s):
            D[lam, x, a - 1] = 1
    return D


@dataclass(frozen=True)
class LhsModel:
    """Hidden states ``rho_l`` indexed by strategy index, shape ``(|A|^|X|, d, d)``."""

    states: np.ndarray
    n_settings: int
    n_outcomes: int

    def reconstruct(self) -> np.ndarray:
        D = deterministic_response(self.n_settings, self.n_outcomes)
        return np.einsum("lxa,lij->xaij", D, self.states)

    def check(self, target: Assemblage, tol: float = 1e-7) -> float:
        """Return the reconstruction error, raising if the model is invalid."""
        total = float(np.einsum("lii->", self.states).real)
        if abs(total - 1) > 1e-8:
            raise ValidationError(f"hidden-state weights sum to {total!r}, expected 1")
        for lam, r in enumerate(self.states):
            if min_eigenvalue(r) < -PSD_TOL:
                raise ValidationError(f"hidden state {lam} is not PSD")
        err = float(np.max(np.abs(self.reconstruct() - target.sigma)))
        if err > tol:
            raise ValidationError(f"LHS model reconstructs the assemblage only to {err:.3e}")
        return err

    def to_json(self, digits: int | None = None) -> dict:
        return {
            "nSettings": self.n_settings,
            "nOutcomes": self.n_outcomes,
            "dim": int(self.states.shape[1]),
            "states": [matrix_to_json(r, digits) for r in self.states],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LhsModel":
        states = np.array([matrix_from_json(m) for m in obj["states"]])
        return cls(states, int(obj["nSettings"]), int(obj["nOutcomes"]))


def lhs_assemblage(states, n_settings: int, n_outcomes: int) -> Assemblage:
    """Assemblage generated by hidden states indexed by deterministic strategy."""
    return Assemblage(LhsModel(np.asarray(states, dtype=complex), n_settings, n_outcomes).reconstruct())


def is_unsteerable(assemblage: Assemblage, tol: float = UNSTEERABLE_TOL) -> tuple[bool, LhsModel | None]:
    """Decide LHS membership from the steering robustness.

    Returns ``(True, model)`` when the robustness is below ``tol``; the model
    is read off the optimal hidden states of the robustness program.
    """
    from .measures import robustness_programs

    rep = robustness_programs(assemblage)
    if rep.value >= tol:
        return False, None
    states = rep.hidden_states / (1 + rep.primal_value)
    return True, LhsModel(states, assemblage.n_settings, assemblage.n_outcomes)
