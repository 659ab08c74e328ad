"""Small dense semidefinite programs over Hermitian block variables.

A problem is posed in standard form::

    minimize / maximize   sum_k tr(C_k X_k)
    subject to            sum_k tr(A_ik X_k) = b_i,   i = 1..m
                          X_k >= 0 (Hermitian PSD)

Complex blocks are mapped to real symmetric blocks of twice the size and the
real problem is solved with an infeasible primal-dual interior-point method
(HKM search direction, Mehrotra predictor-corrector).  Every optimal answer is
re-verified against the original complex data before it is returned.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, ValidationError
from .linalg import hermitian, hermitian_basis, matrix_from_json, matrix_to_json

DEFAULT_GAP_TOL = 1e-8
MIN_GAP_TOL = 1e-10
FEAS_TOL = 1e-9
PSD_TOL = 1e-9
MAX_ITER = 200
MAX_CONSTRAINTS = 10_000
MAX_TOTAL_DIM = 256


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SdpProblem:
    """Standard-form SDP with Hermitian block variables.

    ``objective`` and each constraint's terms map block ids to Hermitian
    coefficient matrices; blocks absent from a mapping have zero coefficient.
    """

    blocks: tuple[tuple[str, int], ...]
    objective: Mapping[str, np.ndarray]
    constraints: tuple[tuple[Mapping[str, np.ndarray], float], ...]
    sense: str = "min"

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValidationError(f"sense must be 'min' or 'max', got {self.sense!r}")
        dims = dict(self.blocks)
        if len(dims) != len(self.blocks):
            raise ValidationError("duplicate block ids")
        if any(d < 1 for d in dims.values()):
            raise DimensionError("block dimensions must be positive")
        if sum(dims.values()) > MAX_TOTAL_DIM:
            raise ValidationError(f"total variable dimension exceeds {MAX_TOTAL_DIM}")
        if len(self.constraints) > MAX_CONSTRAINTS:
            raise ValidationError(f"more than {MAX_CONSTRAINTS} constraints")

        def check(terms, where):
            out = {}
            for bid, coef in terms.items():
                if bid not in dims:
                    raise ValidationError(f"{where} refers to unknown block {bid!r}")
                coef = hermitian(coef, tol=1e-10)
                if coef.shape[0] != dims[bid]:
                    raise DimensionError(f"{where}: coefficient for block {bid!r} has wrong size")
                out[bid] = coef
            return out

        object.__setattr__(self, "objective", check(self.objective, "objective"))
        object.__setattr__(
            self,
            "constraints",
            tuple((check(t, f"constraint {i}"), float(rhs)) for i, (t, rhs) in enumerate(self.constraints)),
        )

    @property
    def block_dims(self) -> dict[str, int]:
        return dict(self.blocks)

    def to_json(self) -> dict:
        return {
            "sense": self.sense,
            "blocks": [{"id": b, "dim": d} for b, d in self.blocks],
            "objective": {b: matrix_to_json(c) for b, c in self.objective.items()},
            "constraints": [
                {"terms": {b: matrix_to_json(c) for b, c in terms.items()}, "rhs": rhs}
                for terms, rhs in self.constraints
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SdpProblem":
        return cls(
            blocks=tuple((b["id"], int(b["dim"])) for b in obj["blocks"]),
            objective={b: matrix_from_json(m) for b, m in obj["objective"].items()},
            constraints=tuple(
                ({b: matrix_from_json(m) for b, m in c["terms"].items()}, float(c["rhs"]))
                for c in obj["constraints"]
            ),
            sense=obj.get("sense", "min"),
        )


def dump_problem(problem: SdpProblem, path) -> None:
    """Write a self-describing JSON dump for cross-checking with other solvers."""
    with open(path, "w") as fh:
        json.dump(problem.to_json(), fh, indent=1)


class ProblemBuilder:
    """Incremental construction of an :class:`SdpProblem`."""

    def __init__(self, sense: str = "min"):
        self.sense = sense
        self._blocks: list[tuple[str, int]] = []
        self._objective: dict[str, np.ndarray] = {}
        self._constraints: list[tuple[dict[str, np.ndarray], float]] = []

    def add_block(self, bid: str, dim: int) -> str:
        self._blocks.append((bid, int(dim)))
        return bid

    def add_objective(self, bid: str, coef) -> None:
        coef = np.asarray(coef, dtype=complex)
        self._objective[bid] = self._objective.get(bid, 0) + coef

    def add_equality(self, terms: Mapping[str, np.ndarray], rhs: float) -> int:
        self._constraints.append((dict(terms), float(rhs)))
        return len(self._constraints) - 1

    def add_matrix_equality(self, terms: Mapping[str, complex], rhs) -> range:
        """Constrain ``sum_k c_k X_k = rhs`` for scalar weights ``c_k``.

        Expands into ``d*d`` real equalities along :func:`hermitian_basis`;
        returns their indices so the Hermitian multiplier can be recovered
        with :meth:`SdpSolution.multiplier`.
        """
        rhs = np.asarray(rhs, dtype=complex)
        d = rhs.shape[0]
        start = len(self._constraints)
        for basis in hermitian_basis(d):
            self._constraints.append(
                ({bid: c * basis for bid, c in terms.items() if c != 0}, float(np.trace(basis @ rhs).real))
            )
        return range(start, len(self._constraints))

    def build(self) -> SdpProblem:
        return SdpProblem(tuple(self._blocks), self._objective, tuple(self._constraints), self.sense)


@dataclass
class SdpSolution:
    status: Status
    primal_value: float
    dual_value: float
    gap: float
    block_values: dict[str, np.ndarray]
    multipliers: np.ndarray
    dual_slacks: dict[str, np.ndarray]
    iterations: int
    history: list[dict] = field(default_factory=list, repr=False)
    message: str = ""
    problem: SdpProblem | None = field(default=None, repr=False, compare=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def multiplier(self, indices: range, d: int) -> np.ndarray:
        """Hermitian multiplier of a matrix equality added by ``add_matrix_equality``."""
        return np.tensordot(self.multipliers[list(indices)], hermitian_basis(d), axes=1)


def hermitian_to_real_embedding(m) -> np.ndarray:
    """``[[Re m, -Im m], [Im m, Re m]]``; PSD iff ``m`` is PSD."""
    m = np.asarray(m, dtype=complex)
    return np.block([[m.real, -m.imag], [m.imag, m.real]])


def _extract(zblock: np.ndarray) -> np.ndarray:
    n = zblock.shape[0] // 2
    re = (zblock[:n, :n] + zblock[n:, n:]) / 2
    im = (zblock[n:, :n] - zblock[:n, n:]) / 2
    return hermitian(re + 1j * im, tol=1e-6)


def _sym(m):
    return (m + m.T) / 2


def _max_step(Xs, dXs):
    """Largest ``t`` with every ``X + t dX`` PSD (blocks batched by size)."""
    groups: dict[int, list[int]] = {}
    for k, x in enumerate(Xs):
        groups.setdefault(x.shape[0], []).append(k)
    best = math.inf
    for idx in groups.values():
        x = np.stack([Xs[k] for k in idx])
        dx = np.stack([dXs[k] for k in idx])
        try:
            Linv = np.linalg.inv(np.linalg.cholesky(x))
        except np.linalg.LinAlgError:
            return 0.0
        w = Linv @ dx @ Linv.transpose(0, 2, 1)
        lmin = float(np.linalg.eigvalsh((w + w.transpose(0, 2, 1)) / 2)[:, 0].min())
        if lmin < 0:
            best = min(best, -1.0 / lmin)
    return best


class _RealForm:
    """The embedded real standard-form problem (always minimization)."""

    def __init__(self, p: SdpProblem):
        self.ids = [b for b, _ in p.blocks]
        self.dims = [2 * d for _, d in p.blocks]
        self.m = len(p.constraints)
        flip = -1.0 if p.sense == "max" else 1.0
        self.C = [
            flip * hermitian_to_real_embedding(p.objective[b]) / 2 if b in p.objective else np.zeros((n, n))
            for b, n in zip(self.ids, self.dims)
        ]
        A = [np.zeros((self.m, n, n)) for n in self.dims]
        pos = {b: k for k, b in enumerate(self.ids)}
        b_vec = np.zeros(self.m)
        for i, (terms, rhs) in enumerate(p.constraints):
            for bid, coef in terms.items():
                A[pos[bid]][i] = hermitian_to_real_embedding(coef) / 2
            b_vec[i] = rhs
        norms = np.sqrt(sum(np.sum(a * a, axis=(1, 2)) for a in A))
        if np.any(norms == 0):
            bad = int(np.flatnonzero(norms == 0)[0])
            raise ValidationError(f"constraint {bad} has no nonzero coefficient")
        self.row_scale = norms
        self.A = [a / norms[:, None, None] for a in A]
        self.b = b_vec / norms
        self.rows = [np.flatnonzero(np.any(a != 0, axis=(1, 2))) for a in self.A]
        self.Aflat = [a[r].reshape(len(r), -1) for a, r in zip(self.A, self.rows)]

    def op(self, X):
        out = np.zeros(self.m)
        for af, r, x in zip(self.Aflat, self.rows, X):
            out[r] += af @ x.ravel()
        return out

    def adj(self, y):
        return [(y[r] @ af).reshape(n, n) for af, r, n in zip(self.Aflat, self.rows, self.dims)]

    def schur(self, X, Zinv):
        M = np.zeros((self.m, self.m))
        for a, af, r, x, zi in zip(self.A, self.Aflat, self.rows, X, Zinv):
            if len(r) == 0:
                continue
            G = x @ a[r] @ zi
            M[np.ix_(r, r)] += af @ G.transpose(0, 2, 1).reshape(len(r), -1).T
        return _sym(M)


def _ip(U, V):
    return float(sum(np.sum(u * v) for u, v in zip(U, V)))


def _norm(U):
    return math.sqrt(_ip(U, U))


def solve(problem: SdpProblem, tol: float = DEFAULT_GAP_TOL, max_iter: int = MAX_ITER) -> SdpSolution:
    """Solve ``problem``; never returns a wrong ``Optimal``.

    ``tol`` bounds the duality gap relative to ``max(1, |primal value|)``
    and is floored at ``1e-10``.  Optimal answers are re-checked with
    :func:`verify`; a failed check downgrades the status to
    ``NumericalFailure``.
    """
    tol = max(float(tol), MIN_GAP_TOL)
    rf = _RealForm(problem)
    N = sum(rf.dims)
    b_norm = float(np.linalg.norm(rf.b))
    c_norm = _norm(rf.C)

    X, Z = [], []
    for k, n in enumerate(rf.dims):
        a = rf.A[k][rf.rows[k]]
        anorm = np.sqrt(np.sum(a * a, axis=(1, 2))) if len(a) else np.zeros(0)
        xi = max(10.0, math.sqrt(n), n * float(np.max((1 + np.abs(rf.b[rf.rows[k]])) / (1 + anorm), initial=0)))
        eta = max(10.0, math.sqrt(n), float(np.linalg.norm(rf.C[k])), float(np.max(anorm, initial=0)))
        X.append(xi * np.eye(n))
        Z.append(eta * np.eye(n))
    y = np.zeros(rf.m)

    history: list[dict] = []
    status, message = Status.NUMERICAL_FAILURE, f"iteration limit {max_iter} reached"
    stalls = 0
    it = 0
    for it in range(max_iter + 1):
        rp = rf.b - rf.op(X)
        aty = rf.adj(y)
        Rd = [c - z - a for c, z, a in zip(rf.C, Z, aty)]
        pobj = _ip(rf.C, X)
        dobj = float(rf.b @ y)
        xz = _ip(X, Z)
        pinf = float(np.linalg.norm(rp)) / (1 + b_norm)
        dinf = _norm(Rd) / (1 + c_norm)
        history.append(
            dict(pobj=pobj, dobj=dobj, xz=xz, pinf=pinf, dinf=dinf,
                 yrp=float(y @ rp), rdx=_ip(Rd, X))
        )
        scale = max(1.0, abs(pobj))
        if pinf < FEAS_TOL / 10 and dinf < FEAS_TOL / 10 and abs(pobj - dobj) <= tol * scale and xz <= tol * scale:
            status, message = Status.OPTIMAL, "converged"
            break
        if dobj > 0 and _norm([c - r for c, r in zip(rf.C, Rd)]) < 1e-8 * dobj and dobj > 1e6:
            status, message = Status.INFEASIBLE, "primal infeasible (dual ray found)"
            break
        if pobj < 0 and float(np.linalg.norm(rf.b - rp)) < 1e-8 * -pobj and -pobj > 1e6:
            status, message = Status.INFEASIBLE, "dual infeasible (primal ray found)"
            break
        if it == max_iter:
            break

        mu = xz / N
        try:
            Zinv = [_sym(np.linalg.inv(z)) for z in Z]
        except np.linalg.LinAlgError:
            message = "dual slack became singular"
            break
        M = rf.schur(X, Zinv)
        if not np.all(np.isfinite(M)):
            message = "non-finite Schur complement"
            break
        try:
            cho = sla.cho_factor(M)
            schur_solve = lambda rhs: sla.cho_solve(cho, rhs)  # noqa: E731
        except sla.LinAlgError:
            # near-singular M late in degenerate problems: least squares keeps the step usable
            schur_solve = lambda rhs: sla.lstsq(M, rhs, lapack_driver="gelsy")[0]  # noqa: E731

        def direction(Rc):
            rhs = rp - rf.op(Rc) + rf.op([x @ r @ zi for x, r, zi in zip(X, Rd, Zinv)])
            dy = schur_solve(rhs)
            dZ = [r - a for r, a in zip(Rd, rf.adj(dy))]
            dX = [rc - _sym(x @ dz @ zi) for rc, x, dz, zi in zip(Rc, X, dZ, Zinv)]
            return dX, dy, dZ

        def steps(dX, dZ):
            ap = _max_step(X, dX)
            ad = _max_step(Z, dZ)
            return min(1.0, ap), min(1.0, ad)

        dX, dy, dZ = direction([-x for x in X])
        ap, ad = steps(dX, dZ)
        mu_aff = _ip([x + ap * d for x, d in zip(X, dX)], [z + ad * d for z, d in zip(Z, dZ)]) / N
        sigma = min(1.0, (max(mu_aff, 0.0) / mu) ** max(1.0, 3 * min(ap, ad) ** 2)) if mu > 0 else 0.0
        Rc = [sigma * mu * zi - x - _sym(dx @ dz @ zi) for zi, x, dx, dz in zip(Zinv, X, dX, dZ)]
        dX, dy, dZ = direction(Rc)
        ap, ad = steps(dX, dZ)
        gamma = 0.9 + 0.09 * min(ap, ad)
        ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)
        stalls = stalls + 1 if max(ap, ad) < 1e-10 else 0
        if stalls >= 5:
            message = "step length stalled"
            break
        X = [x + ap * d for x, d in zip(X, dX)]
        Z = [z + ad * d for z, d in zip(Z, dZ)]
        y = y + ad * dy

    flip = -1.0 if problem.sense == "max" else 1.0
    y_orig = flip * y / rf.row_scale
    sol = SdpSolution(
        status=status,
        primal_value=flip * _ip(rf.C, X),
        dual_value=flip * float(rf.b @ y),
        gap=abs(_ip(rf.C, X) - float(rf.b @ y)),
        block_values={b: _extract(x) for b, x in zip(rf.ids, X)},
        multipliers=y_orig,
        dual_slacks={b: 2 * _extract(z) for b, z in zip(rf.ids, Z)},
        iterations=it,
        history=history,
        message=message,
        problem=problem,
    )
    if sol.optimal:
        problems = verify(problem, sol)
        if problems:
            sol.status = Status.NUMERICAL_FAILURE
            sol.message = "verification failed: " + "; ".join(problems)
    return sol


def verify(problem: SdpProblem, sol: SdpSolution, feas_tol: float = FEAS_TOL, psd_tol: float = PSD_TOL) -> list[str]:
    """Re-check a solution against the original complex problem.

    Returns a list of human-readable violations (empty when the solution is
    primal and dual feasible and the reported values match the data).
    """
    out = []
    dims = problem.block_dims
    for bid, d in dims.items():
        v = sol.block_values[bid]
        lmin = float(np.linalg.eigvalsh(v)[0])
        if lmin < -psd_tol:
            out.append(f"block {bid!r} not PSD (min eigenvalue {lmin:.2e})")
    for i, (terms, rhs) in enumerate(problem.constraints):
        lhs = sum(float(np.trace(c @ sol.block_values[b]).real) for b, c in terms.items())
        if abs(lhs - rhs) > feas_tol * (1 + abs(rhs)):
            out.append(f"constraint {i} residual {lhs - rhs:.2e}")
    pval = sum(float(np.trace(c @ sol.block_values[b]).real) for b, c in problem.objective.items())
    scale = max(1.0, abs(pval))
    if abs(pval - sol.primal_value) > feas_tol * scale:
        out.append(f"primal value mismatch {pval - sol.primal_value:.2e}")
    # dual slack rebuilt from multipliers: S_k = C_k - sum_i y_i A_ik (min) or sum_i y_i A_ik - C_k (max)
    flip = -1.0 if problem.sense == "max" else 1.0
    for bid, d in dims.items():
        s = flip * np.asarray(problem.objective.get(bid, np.zeros((d, d))), dtype=complex)
        for yi, (terms, _) in zip(sol.multipliers, problem.constraints):
            if bid in terms:
                s = s - flip * yi * terms[bid]
        lmin = float(np.linalg.eigvalsh((s + s.conj().T) / 2)[0])
        if lmin < -max(psd_tol, feas_tol * (1 + float(np.max(np.abs(s))))):
            out.append(f"dual slack of block {bid!r} not PSD (min eigenvalue {lmin:.2e})")
    dval = float(sum(yi * rhs for yi, (_, rhs) in zip(sol.multipliers, problem.constraints)))
    if abs(dval - sol.dual_value) > feas_tol * scale:
        out.append(f"dual value mismatch {dval - sol.dual_value:.2e}")
    if abs(pval - dval) > max(sol.gap, 0) + feas_tol * scale:
        out.append(f"duality gap {pval - dval:.2e} exceeds reported gap")
    return out
