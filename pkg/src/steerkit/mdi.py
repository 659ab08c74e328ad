"""Measurement-device-independent steering games.

A game is a table of real coefficients ``beta[x, a, y]`` together with the
tomographic input states ``omega_y`` sent to Bob.  Bob's joint measurement
on his share and ``omega_y`` has a "success" effect ``E1``; only the ``b = 1``
branch of his output enters the payoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assemblage import Assemblage, deterministic_response
from .errors import DegenerateGameError, DimensionError, IndexMismatchError, RangeError, RankDeficientError, ValidationError
from .linalg import (
    bloch_projector,
    density_matrix,
    hermitian,
    hermitian_coords,
    matrix_from_json,
    matrix_to_json,
    max_entangled_projector,
    partial_trace,
    projector,
)
from .measures import WitnessSet, robustness_programs
from .sdp import DEFAULT_GAP_TOL

SPAN_TOL = 1e-8
RESIDUAL_TOL = 1e-10
PSD_TOL = 1e-9


def _spanning_matrix(states: np.ndarray) -> np.ndarray:
    """Columns are real coordinates of the transposed states."""
    return np.array([hermitian_coords(w.T) for w in states]).T


@dataclass(frozen=True)
class TomoSet:
    """Ordered tomographically complete input states, shape ``(m, d, d)``."""

    states: np.ndarray

    def __post_init__(self):
        states = np.array([density_matrix(w) for w in self.states])
        if states.ndim != 3:
            raise DimensionError("tomography states must share one dimension")
        d = states.shape[1]
        if len(states) < d * d:
            raise RankDeficientError(f"{len(states)} states cannot span {d * d} Hermitian dimensions")
        sv = np.linalg.svd(_spanning_matrix(states), compute_uv=False)
        if sv[d * d - 1] <= SPAN_TOL:
            raise RankDeficientError(f"transposed states do not span (singular value {sv[d * d - 1]:.3e})")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return len(self.states)

    def spanning_rank(self, tol: float = SPAN_TOL) -> int:
        sv = np.linalg.svd(_spanning_matrix(self.states), compute_uv=False)
        return int(np.sum(sv > tol))

    def to_json(self, digits: int | None = None) -> list:
        return [matrix_to_json(w, digits) for w in self.states]

    @classmethod
    def from_json(cls, obj: list) -> "TomoSet":
        return cls(np.array([matrix_from_json(m) for m in obj]))


def pauli_tomo_set(order: str = "XZY") -> TomoSet:
    """The six Pauli eigenstates, ``+`` before ``-`` for each axis in ``order``.

    The default order ``(X+, X-, Z+, Z-, Y+, Y-)`` is the one against which the
    main-text coefficient assignment of the Werner example is written.
    """
    if sorted(order) != ["X", "Y", "Z"]:
        raise ValueError(f"order must be a permutation of 'XYZ', got {order!r}")
    return TomoSet(np.array([bloch_projector(ax, s) for ax in order for s in (+1, -1)]))


def qudit_tomo_set(d: int) -> TomoSet:
    """``d*d`` pure states: basis projectors, then ``|j>+|k>`` and ``|j>+i|k>`` for ``j < k``."""
    if d < 2:
        raise DimensionError(f"qudit tomography set needs d >= 2, got {d}")
    basis = np.eye(d, dtype=complex)
    states = [projector(basis[j]) for j in range(d)]
    for j in range(d):
        for k in range(j + 1, d):
            states.append(projector(basis[j] + basis[k]))
            states.append(projector(basis[j] + 1j * basis[k]))
    return TomoSet(np.array(states))


def tomo_set_for(name: str, d: int = 2) -> TomoSet:
    """Named tomography sets used by the command line (``pauli6``, ``minimal4``)."""
    if name == "pauli6":
        if d != 2:
            raise DimensionError("pauli6 is a qubit set")
        return pauli_tomo_set()
    if name == "minimal4":
        if d != 2:
            raise DimensionError("minimal4 is a qubit set")
        return qudit_tomo_set(2)
    if name == "qudit":
        return qudit_tomo_set(d)
    raise ValueError(f"unknown tomography set {name!r}")


@dataclass(frozen=True)
class BetaGame:
    """Payoff coefficients ``beta[x, a, y]`` for the ``b = 1`` branch."""

    tomo: TomoSet
    beta: np.ndarray

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        if beta.ndim != 3 or beta.shape[2] != len(self.tomo):
            raise IndexMismatchError(
                f"beta of shape {beta.shape} does not match a tomography set of size {len(self.tomo)}"
            )
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @property
    def n_settings(self) -> int:
        return self.beta.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.beta.shape[1]

    def reconstruct(self, transposed: bool = True) -> np.ndarray:
        """``sum_y beta[x,a,y] omega_y^T`` (or without transpose), shape ``(X, A, d, d)``."""
        states = self.tomo.states.transpose(0, 2, 1) if transposed else self.tomo.states
        return np.einsum("xay,yij->xaij", self.beta, states)

    def witness(self) -> WitnessSet:
        """The reconstructed witness, checked for positivity and local bound <= 1."""
        return WitnessSet(self.reconstruct(), "SRdual")

    def validate(self) -> None:
        """Check that every reconstructed element is PSD."""
        F = self.reconstruct()
        lmin = np.linalg.eigvalsh(F)[..., 0]
        if np.any(lmin < -PSD_TOL):
            x, a = np.unravel_index(int(np.argmin(lmin)), lmin.shape)
            raise ValidationError(
                f"reconstruction not PSD at (x={x + 1}, a={a + 1}): min eigenvalue {lmin[x, a]:.3e}"
            )

    def to_json(self, digits: int | None = None) -> dict:
        fmt = (lambda v: float(f"{v:.{digits}g}")) if digits else float
        nx, na, m = self.beta.shape
        return {
            "nSettings": nx,
            "nOutcomes": na,
            "tomo": self.tomo.to_json(digits),
            "beta": {
                f"{x + 1}:{a + 1}:{y + 1}": fmt(self.beta[x, a, y]) + 0.0
                for x in range(nx)
                for a in range(na)
                for y in range(m)
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BetaGame":
        tomo = TomoSet.from_json(obj["tomo"])
        beta = _read_xay(obj["beta"], obj.get("nSettings"), obj.get("nOutcomes"), len(tomo), "beta")
        return cls(tomo, beta)


def _read_xay(table: dict, nx, na, m: int, name: str) -> np.ndarray:
    try:
        keys = [tuple(int(t) for t in k.split(":")) for k in table]
    except ValueError as exc:
        raise ValidationError(f"malformed label in {name!r}: {exc}") from exc
    if any(len(k) != 3 for k in keys):
        raise ValidationError(f"labels in {name!r} must be 'x:a:y'")
    nx = int(nx) if nx is not None else max(k[0] for k in keys)
    na = int(na) if na is not None else max(k[1] for k in keys)
    out = np.zeros((nx, na, m))
    for (x, a, y), v in zip(keys, table.values()):
        if not (1 <= x <= nx and 1 <= a <= na and 1 <= y <= m):
            raise IndexMismatchError(f"label {x}:{a}:{y} in {name!r} out of range ({nx}, {na}, {m})")
        out[x - 1, a - 1, y - 1] = float(v)
    return out


@dataclass(frozen=True)
class CorrelationTable:
    """Observed ``p(a, 1 | x, omega_y)`` as ``p[x, a, y]``."""

    p: np.ndarray
    tomo: TomoSet | None = field(default=None, compare=False)

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 3:
            raise DimensionError(f"correlation table must have shape (X, A, m), got {p.shape}")
        if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
            raise ValidationError("correlation entries must lie in [0, 1]")
        if self.tomo is not None and p.shape[2] != len(self.tomo):
            raise IndexMismatchError("table and tomography set sizes differ")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def n_settings(self) -> int:
        return self.p.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.p.shape[1]

    @property
    def tomo_size(self) -> int:
        return self.p.shape[2]

    def to_json(self, digits: int | None = None) -> dict:
        fmt = (lambda v: float(f"{v:.{digits}g}")) if digits else float
        nx, na, m = self.p.shape
        return {
            "nSettings": nx,
            "nOutcomes": na,
            "tomoSize": m,
            "p": {
                f"{x + 1}:{a + 1}:{y + 1}": fmt(self.p[x, a, y]) + 0.0
                for x in range(nx)
                for a in range(na)
                for y in range(m)
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CorrelationTable":
        try:
            m = int(obj["tomoSize"])
            table = obj["p"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"missing or malformed field: {exc}") from exc
        return cls(_read_xay(table, obj.get("nSettings"), obj.get("nOutcomes"), m, "p"))


def beta_from_witness(witness, tomo: TomoSet) -> BetaGame:
    """Minimum-norm coefficients with ``sum_y beta[x,a,y] omega_y^T = F[x,a]``."""
    F = witness.F if isinstance(witness, WitnessSet) else np.asarray(witness, dtype=complex)
    if F.shape[2] != tomo.dim:
        raise DimensionError(f"witness dim {F.shape[2]} does not match tomography dim {tomo.dim}")
    A = _spanning_matrix(tomo.states)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[tomo.dim**2 - 1] <= SPAN_TOL:
        raise RankDeficientError("tomography set does not span the Hermitian operators")
    rhs = np.array([hermitian_coords(f) for f in F.reshape(-1, tomo.dim, tomo.dim)]).T
    beta, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    resid = float(np.max(np.abs(A @ beta - rhs)))
    if resid > RESIDUAL_TOL:
        raise RankDeficientError(f"witness not reproduced by the tomography set (residual {resid:.3e})")
    return BetaGame(tomo, beta.T.reshape(F.shape[0], F.shape[1], len(tomo)))


def _check_effect(E1, d: int) -> np.ndarray:
    E1 = hermitian(E1, tol=1e-10)
    if E1.shape != (d * d, d * d):
        raise DimensionError(f"joint effect has dim {E1.shape[0]}, expected {d * d}")
    eig = np.linalg.eigvalsh(E1)
    if eig[0] < -PSD_TOL or eig[-1] > 1 + PSD_TOL:
        raise ValidationError(f"joint effect must satisfy 0 <= E1 <= 1 (spectrum [{eig[0]:.3e}, {eig[-1]:.3e}])")
    return E1


def correlations(assemblage: Assemblage, E1, tomo: TomoSet) -> CorrelationTable:
    """``p(a,1|x,omega_y) = tr[E1 (sigma_a|x (x) omega_y)]``."""
    d = assemblage.dim
    if tomo.dim != d:
        raise DimensionError(f"tomography dim {tomo.dim} does not match assemblage dim {d}")
    E1 = _check_effect(E1, d)
    E = E1.reshape(d, d, d, d)
    # tr[E (s (x) w)] = sum E[i,k,j,l] s[j,i] w[l,k]
    p = np.einsum("ikjl,xaji,ylk->xay", E, assemblage.sigma, tomo.states).real
    return CorrelationTable(np.clip(p, 0.0, 1.0), tomo)


def payoff(table: CorrelationTable, game: BetaGame) -> float:
    """``I = sum_{a,x,y} beta[x,a,y] p[x,a,y]``."""
    if table.p.shape != game.beta.shape:
        raise IndexMismatchError(f"table shape {table.p.shape} does not match game shape {game.beta.shape}")
    return float(np.sum(game.beta * table.p))


def lhs_payoff_bound(game: BetaGame, E1=None) -> float:
    """Largest payoff reachable by any LHS assemblage under the joint effect ``E1``.

    With the default maximally entangled projection this is
    ``(1/d) max_l lambda_max(sum_{a,x} D(a|x,l) F_a|x)`` with ``F`` the
    transposed reconstruction.  For a general ``E1`` the per-element operator
    is ``tr_2[E1 (1 (x) sum_y beta omega_y)]``.
    """
    d = game.tomo.dim
    if E1 is None:
        K = game.reconstruct(transposed=True) / d
    else:
        E1 = _check_effect(E1, d)
        Fp = game.reconstruct(transposed=False)
        K = np.array(
            [[partial_trace(E1 @ np.kron(np.eye(d), f), (d, d), keep="A") for f in row] for row in Fp]
        )
    D = deterministic_response(game.n_settings, game.n_outcomes)
    G = np.einsum("lxa,xaij->lij", D, K)
    G = (G + G.conj().transpose(0, 2, 1)) / 2
    return float(np.linalg.eigvalsh(G)[:, -1].max())


def mdi_ratio(table: CorrelationTable, game: BetaGame, E1=None) -> float:
    """``I(P, beta) / I_LHS(beta)``: a lower bound on the optimal payoff ratio.

    Needs only the data table and the game.  ``E1`` selects the joint effect
    assumed for the LHS bound (default: maximally entangled projection).
    """
    bound = lhs_payoff_bound(game, E1)
    if bound <= 0 or not np.isfinite(bound):
        raise DegenerateGameError(f"LHS payoff bound is {bound!r}; the ratio is undefined")
    return payoff(table, game) / bound


def apply_loss(table: CorrelationTable, eta: float) -> CorrelationTable:
    """Uniform detection efficiency ``eta`` on every click probability."""
    if not 0.0 <= eta <= 1.0:
        raise RangeError(f"detection efficiency must lie in [0, 1], got {eta!r}")
    return CorrelationTable(eta * table.p, table.tomo)


@dataclass
class MdiReport:
    value: float
    ratio: float
    witness: WitnessSet
    game: BetaGame
    table: CorrelationTable
    robustness: float


def mdi_pipeline(assemblage: Assemblage, tomo: TomoSet | None = None, tol: float = DEFAULT_GAP_TOL, report=None) -> MdiReport:
    """Robustness witness -> coefficients -> simulated data -> payoff ratio.

    ``report`` may carry a precomputed :class:`~steerkit.measures.RobustnessReport`.
    """
    d = assemblage.dim
    if tomo is None:
        tomo = pauli_tomo_set() if d == 2 else qudit_tomo_set(d)
    rep = report if report is not None else robustness_programs(assemblage, tol)
    game = beta_from_witness(rep.witness, tomo)
    table = correlations(assemblage, max_entangled_projector(d), tomo)
    ratio = mdi_ratio(table, game)
    return MdiReport(max(ratio - 1, 0.0), ratio, rep.witness, game, table, rep.value)


def mdi_measure(assemblage: Assemblage, tomo: TomoSet | None = None, tol: float = DEFAULT_GAP_TOL) -> float:
    return mdi_pipeline(assemblage, tomo, tol).value

