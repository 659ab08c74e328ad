"""Steering robustness, steerable weight, steering fraction and witnesses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assemblage import Assemblage, _read_xa_table, deterministic_response
from .errors import SolverError, ValidationError
from .linalg import hermitian, matrix_to_json
from .sdp import DEFAULT_GAP_TOL, ProblemBuilder, SdpSolution, solve

NORMALIZATIONS = ("SRdual", "SWdual", "Shifted")
PSD_TOL = 1e-9
BOUND_TOL = 1e-8
# primal and dual programs are solved separately; disagreement beyond this is a solver fault
AGREEMENT_TOL = 1e-6


@dataclass(frozen=True)
class WitnessSet:
    """Witness operators ``F[x, a]`` of shape ``(|X|, |A|, d, d)``."""

    F: np.ndarray
    normalization: str = "SRdual"

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise ValidationError(f"unknown normalization {self.normalization!r}")
        F = np.array(self.F, dtype=complex)
        if F.ndim != 4 or F.shape[2] != F.shape[3]:
            raise ValidationError(f"witness array must have shape (X, A, d, d), got {F.shape}")
        for x in range(F.shape[0]):
            for a in range(F.shape[1]):
                F[x, a] = hermitian(F[x, a])
        if self.normalization != "Shifted":
            lmin = np.linalg.eigvalsh(F)[..., 0]
            if np.any(lmin < -PSD_TOL):
                x, a = np.unravel_index(int(np.argmin(lmin)), lmin.shape)
                raise ValidationError(
                    f"witness positivity violated at (x={x + 1}, a={a + 1}): min eigenvalue {lmin[x, a]:.3e}"
                )
            eig = np.linalg.eigvalsh(strategy_operators(F))
            if self.normalization == "SRdual" and eig[:, -1].max() > 1 + BOUND_TOL:
                raise ValidationError(f"SRdual constraint violated: max eigenvalue {eig[:, -1].max():.12g} > 1")
            if self.normalization == "SWdual" and eig[:, 0].min() < 1 - BOUND_TOL:
                raise ValidationError(f"SWdual constraint violated: min eigenvalue {eig[:, 0].min():.12g} < 1")
        F.setflags(write=False)
        object.__setattr__(self, "F", F)

    @property
    def n_settings(self) -> int:
        return self.F.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.F.shape[1]

    @property
    def dim(self) -> int:
        return self.F.shape[2]

    def value(self, assemblage: Assemblage) -> float:
        """``sum_{a,x} tr(F_a|x sigma_a|x)``."""
        return witness_value(self.F, assemblage)

    def to_json(self, digits: int | None = None) -> dict:
        return {
            "nSettings": self.n_settings,
            "nOutcomes": self.n_outcomes,
            "dim": self.dim,
            "normalization": self.normalization,
            "F": {
                f"{x + 1}:{a + 1}": matrix_to_json(self.F[x, a], digits)
                for x in range(self.n_settings)
                for a in range(self.n_outcomes)
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "WitnessSet":
        return cls(_read_xa_table(obj, "F"), obj.get("normalization", "SRdual"))


def _operators(F) -> np.ndarray:
    return F.F if isinstance(F, WitnessSet) else np.asarray(F, dtype=complex)


def strategy_operators(F) -> np.ndarray:
    """``G_l = sum_{a,x} D(a|x,l) F_a|x`` for every deterministic strategy ``l``."""
    F = _operators(F)
    D = deterministic_response(F.shape[0], F.shape[1])
    return np.einsum("lxa,xaij->lij", D, F)


def witness_value(F, assemblage: Assemblage) -> float:
    return float(np.einsum("xaij,xaji->", _operators(F), assemblage.sigma).real)


def local_bound(F) -> float:
    """Largest value of the witness on any LHS assemblage (eigenvalue enumeration)."""
    G = strategy_operators(F)
    return float(np.linalg.eigvalsh(G)[:, -1].max())


def shifted_witness(F, alpha: float, n_settings: int) -> WitnessSet:
    """``F_a|x - (alpha/|X|) 1``: non-positive on LHS, positive on the target."""
    F = _operators(F)
    return WitnessSet(F - (alpha / n_settings) * np.eye(F.shape[2]), normalization="Shifted")


def _check(sol: SdpSolution, what: str) -> SdpSolution:
    if not sol.optimal:
        raise SolverError(f"{what}: {sol.status.value} ({sol.message})", sol)
    return sol


def _hidden_state_program(assemblage: Assemblage, sense: str, slack_sign: int, tol: float):
    """Programs over hidden states ``rho_l`` and slacks ``S_xa``.

    Constraint: ``sum_l D(a|x,l) rho_l + slack_sign * S_xa = sigma_xa``; the
    objective is ``sum_l tr rho_l``.
    """
    nx, na, d = assemblage.n_settings, assemblage.n_outcomes, assemblage.dim
    D = deterministic_response(nx, na)
    pb = ProblemBuilder(sense)
    lam_ids = [pb.add_block(f"rho{l}", d) for l in range(len(D))]
    for bid in lam_ids:
        pb.add_objective(bid, np.eye(d))
    for x in range(nx):
        for a in range(na):
            s = pb.add_block(f"S{x + 1}:{a + 1}", d)
            terms = {lam_ids[l]: 1.0 for l in range(len(D)) if D[l, x, a]}
            terms[s] = float(slack_sign)
            pb.add_matrix_equality(terms, assemblage.sigma[x, a])
    sol = solve(pb.build(), tol=tol)
    return sol, lam_ids


def _witness_program(assemblage: Assemblage, sense: str, slack_sign: int, tol: float):
    """Programs over witnesses ``F_xa`` and slacks ``T_l``.

    Constraint: ``sum_{a,x} D(a|x,l) F_xa + slack_sign * T_l = 1``; the
    objective is ``sum tr(F_xa sigma_xa)``.
    """
    nx, na, d = assemblage.n_settings, assemblage.n_outcomes, assemblage.dim
    D = deterministic_response(nx, na)
    pb = ProblemBuilder(sense)
    f_ids = {}
    for x in range(nx):
        for a in range(na):
            f_ids[x, a] = pb.add_block(f"F{x + 1}:{a + 1}", d)
            pb.add_objective(f_ids[x, a], assemblage.sigma[x, a])
    for l in range(len(D)):
        t = pb.add_block(f"T{l}", d)
        terms = {f_ids[x, a]: 1.0 for (x, a) in f_ids if D[l, x, a]}
        terms[t] = float(slack_sign)
        pb.add_matrix_equality(terms, np.eye(d))
    sol = solve(pb.build(), tol=tol)
    F = np.array([[sol.block_values[f_ids[x, a]] for a in range(na)] for x in range(nx)])
    return sol, F


@dataclass
class RobustnessReport:
    value: float
    witness: WitnessSet
    primal_value: float
    dual_value: float
    hidden_states: np.ndarray
    primal: SdpSolution
    dual: SdpSolution


def robustness_programs(assemblage: Assemblage, tol: float = DEFAULT_GAP_TOL) -> RobustnessReport:
    """Solve the steering-robustness program in both primal and witness form.

    Primal: ``min sum_l tr rho_l - 1`` s.t. ``sum_l D rho_l >= sigma_a|x``.
    Witness form: ``max sum tr(F sigma) - 1`` s.t. ``sum D F <= 1``, ``F >= 0``.
    """
    psol, lam_ids = _hidden_state_program(assemblage, "min", -1, tol)
    _check(psol, "steering robustness (primal)")
    dsol, F = _witness_program(assemblage, "max", +1, tol)
    _check(dsol, "steering robustness (witness form)")
    primal_value = psol.primal_value - 1
    dual_value = dsol.primal_value - 1
    if abs(primal_value - dual_value) > AGREEMENT_TOL:
        raise SolverError(f"robustness programs disagree: {primal_value!r} vs {dual_value!r}", dsol)
    hidden = np.array([psol.block_values[b] for b in lam_ids])
    return RobustnessReport(
        value=max(dual_value, 0.0),
        witness=WitnessSet(F, "SRdual"),
        primal_value=primal_value,
        dual_value=dual_value,
        hidden_states=hidden,
        primal=psol,
        dual=dsol,
    )


def steering_robustness(assemblage: Assemblage, tol: float = DEFAULT_GAP_TOL) -> tuple[float, WitnessSet]:
    rep = robustness_programs(assemblage, tol)
    return rep.value, rep.witness


@dataclass
class WeightReport:
    value: float
    witness: WitnessSet
    lhs_weight: float
    witness_program_value: float
    primal: SdpSolution
    dual: SdpSolution


def weight_programs(assemblage: Assemblage, tol: float = DEFAULT_GAP_TOL) -> WeightReport:
    """Steerable weight from the LHS-weight primal, with the witness form as its dual.

    Primal: ``w* = max sum_l tr rho_l`` s.t. ``sum_l D rho_l <= sigma_a|x``.
    Witness form: ``min sum tr(F sigma)`` s.t. ``sum D F >= 1``, ``F >= 0``,
    whose optimum is ``w*``; the steerable weight is ``1 - w*``.
    """
    psol, _ = _hidden_state_program(assemblage, "max", +1, tol)
    _check(psol, "steerable weight (primal)")
    dsol, F = _witness_program(assemblage, "min", -1, tol)
    _check(dsol, "steerable weight (witness form)")
    w = psol.primal_value
    if abs(w - dsol.primal_value) > AGREEMENT_TOL:
        raise SolverError(f"steerable-weight programs disagree: {w!r} vs {dsol.primal_value!r}", dsol)
    return WeightReport(
        value=min(max(1 - w, 0.0), 1.0),
        witness=WitnessSet(F, "SWdual"),
        lhs_weight=w,
        witness_program_value=dsol.primal_value,
        primal=psol,
        dual=dsol,
    )


def steerable_weight(assemblage: Assemblage, tol: float = DEFAULT_GAP_TOL) -> tuple[float, WitnessSet]:
    rep = weight_programs(assemblage, tol)
    return rep.value, rep.witness


def fraction_of_witness(F, assemblage: Assemblage) -> float:
    """``tr sum F sigma / max_{tau in LHS} tr sum F tau - 1`` for one witness."""
    alpha = local_bound(F)
    if alpha <= 0:
        raise ValidationError("witness has non-positive local bound")
    return witness_value(F, assemblage) / alpha - 1


def steering_fraction(assemblage: Assemblage, tol: float = DEFAULT_GAP_TOL) -> float:
    """Steering fraction, evaluated in ratio form at the robustness-optimal witness."""
    _, F = steering_robustness(assemblage, tol)
    return max(fraction_of_witness(F, assemblage), 0.0)


def lhs_value_sdp(F, tol: float = DEFAULT_GAP_TOL) -> float:
    """``max_{tau in LHS} sum tr(F tau)`` as an SDP over hidden states."""
    G = strategy_operators(F)
    d = G.shape[1]
    pb = ProblemBuilder("max")
    terms = {}
    for l, g in enumerate(G):
        bid = pb.add_block(f"rho{l}", d)
        pb.add_objective(bid, g)
        terms[bid] = np.eye(d)
    pb.add_equality(terms, 1.0)
    return _check(solve(pb.build(), tol=tol), "LHS value").primal_value
