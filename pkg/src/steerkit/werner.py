"""Two-qubit Werner states measured in the X and Z bases.

Outcome labels follow the reference coefficient tables: outcome ``a = 1`` of
setting ``x`` steers Bob towards ``+n_x`` (Alice's ``-1`` eigenprojector of
``n_x . sigma``, since the singlet is anticorrelated), so the optimal witness
is ``F_a|x = [1 + (-1)^(a+1) n_x . sigma] / (2 + sqrt 2)``.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Sequence

import numpy as np

from .assemblage import Assemblage, from_state_and_measurements
from .errors import RangeError
from .linalg import I2, PAULIS, bloch_projector
from .measures import WitnessSet, robustness_programs
from .mdi import BetaGame, TomoSet, mdi_pipeline, pauli_tomo_set
from .sdp import DEFAULT_GAP_TOL

AXES = ("X", "Z")
KAPPA = 1 / (2 + math.sqrt(2))
THRESHOLD = 1 / math.sqrt(2)


def _check_v(v: float) -> float:
    v = float(v)
    if not 0.0 <= v <= 1.0:
        raise RangeError(f"visibility must lie in [0, 1], got {v!r}")
    return v


def singlet() -> np.ndarray:
    """``|Phi-> = (|10> - |01>)/sqrt 2``."""
    return np.array([0, -1, 1, 0], dtype=complex) / math.sqrt(2)


def werner_state(v: float) -> np.ndarray:
    v = _check_v(v)
    psi = singlet()
    return v * np.outer(psi, psi.conj()) + (1 - v) * np.eye(4) / 4


def alice_povms() -> list[list[np.ndarray]]:
    """Projective X and Z measurements; outcome ``a`` is the ``(-1)^a`` eigenprojector."""
    return [[bloch_projector(ax, (-1) ** a) for a in (1, 2)] for ax in AXES]


def werner_assemblage(v: float) -> Assemblage:
    return from_state_and_measurements(werner_state(v), alice_povms())


def closed_form(v: float) -> float:
    """``max{(1 + v)(2 - sqrt 2) - 1, 0}``: robustness of the X/Z Werner assemblage."""
    return max((1 + _check_v(v)) * (2 - math.sqrt(2)) - 1, 0.0)


def analytic_witness() -> WitnessSet:
    F = np.array(
        [[KAPPA * (I2 + (-1) ** (a + 1) * PAULIS[ax]) for a in (1, 2)] for ax in AXES]
    )
    return WitnessSet(F, "SRdual")


def main_text_game() -> BetaGame:
    """``beta = 2/(2+sqrt 2)`` at ``(a,x,y)`` in ``{(1,1,1),(2,1,2),(1,2,3),(2,2,4)}``, zero otherwise.

    Written against the Pauli set ordered ``(X+, X-, Z+, Z-, Y+, Y-)``.
    """
    beta = np.zeros((2, 2, 6))
    for a, x, y in [(1, 1, 1), (2, 1, 2), (1, 2, 3), (2, 2, 4)]:
        beta[x - 1, a - 1, y - 1] = 2 * KAPPA
    return BetaGame(pauli_tomo_set("XZY"), beta)


def table_one_game(kappa: float = KAPPA) -> BetaGame:
    """The alternative reference table, with ``kappa``-valued Y entries.

    Its rows only reproduce the X/Z witness when the inputs are ordered
    ``(X+, X-, Y+, Y-, Z+, Z-)``, so the game carries that ordering.
    """
    k = kappa
    # beta[y][(x, a)] from the reference table; (x, a) columns in order (1,1), (2,1), (1,2), (2,2)
    rows = [
        [2 * k, k, 0, k],
        [0, k, 2 * k, k],
        [0, 0, 0, 0],
        [0, 0, 0, 0],
        [0, k, 0, -k],
        [0, -k, 0, k],
    ]
    beta = np.zeros((2, 2, 6))
    for y, row in enumerate(rows):
        for (x, a), val in zip([(1, 1), (2, 1), (1, 2), (2, 2)], row):
            beta[x - 1, a - 1, y] = val
    return BetaGame(pauli_tomo_set("XYZ"), beta)


def _sweep_point(v: float, tomo: TomoSet | None, tol: float) -> tuple[float, float, float]:
    a = werner_assemblage(v)
    rep = robustness_programs(a, tol)
    return v, mdi_pipeline(a, tomo, tol, report=rep).value, rep.value


def default_threads() -> int:
    env = os.environ.get("STEERKIT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def visibility_sweep(
    v_grid: Iterable[float],
    tomo: TomoSet | None = None,
    tol: float = DEFAULT_GAP_TOL,
    threads: int | None = None,
) -> list[tuple[float, float, float]]:
    """``(v, S_MDI, SR)`` for every grid point, sorted by ``v``."""
    grid = sorted(_check_v(v) for v in v_grid)
    threads = threads or default_threads()
    if threads == 1 or len(grid) < 2:
        return [_sweep_point(v, tomo, tol) for v in grid]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda v: _sweep_point(v, tomo, tol), grid))


def linear_grid(start: float, stop: float, steps: int) -> list[float]:
    if steps < 1:
        raise RangeError("steps must be at least 1")
    if steps == 1:
        return [float(start)]
    return [float(v) for v in np.linspace(start, stop, steps)]


CSV_HEADER = ("v", "s_mdi", "steering_robustness", "abs_diff")


def write_sweep_csv(rows: Sequence[tuple[float, float, float]], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for v, s, sr in rows:
        w.writerow([f"{v:.12g}", f"{s:.12g}", f"{sr:.12g}", f"{abs(s - sr):.12g}"])


def read_sweep_csv(fh) -> list[tuple[float, float, float]]:
    r = csv.reader(fh)
    header = next(r)
    if tuple(header) != CSV_HEADER:
        raise ValueError(f"unexpected sweep header {header}")
    return [(float(v), float(s), float(sr)) for v, s, sr, _ in r]
