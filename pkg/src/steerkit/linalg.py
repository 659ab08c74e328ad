"""Dense complex linear algebra and quantum primitives.

Operators are plain ``numpy`` complex arrays.  The constructors here
(:func:`hermitian`, :func:`density_matrix`, :func:`povm`) validate and
return fresh read-only arrays; everything else is a pure function.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DimensionError, NotHermitianError, ValidationError

HERMITIAN_TOL = 1e-12
EIG_HERMITIAN_TOL = 1e-9
PSD_TOL = 1e-9
TRACE_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"X": X, "Y": Y, "Z": Z}


def _frozen(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=complex, copy=True)
    m.setflags(write=False)
    return m


def hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate ``m`` as a Hermitian matrix and return its symmetrized copy.

    Drift ``max|m - m^H|`` below ``tol`` is removed by ``(m + m^H)/2``;
    anything larger raises :class:`NotHermitianError`.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionError(f"expected a non-empty square matrix, got shape {m.shape}")
    drift = float(np.max(np.abs(m - m.conj().T)))
    if drift > tol:
        raise NotHermitianError(f"matrix is not Hermitian (max |m - m^H| = {drift:.3e})")
    return _frozen((m + m.conj().T) / 2)


def density_matrix(m, tol: float = PSD_TOL) -> np.ndarray:
    rho = hermitian(m)
    lmin = min_eigenvalue(rho)
    if lmin < -tol:
        raise ValidationError(f"density matrix not PSD (min eigenvalue {lmin:.3e})")
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValidationError(f"density matrix trace is {tr!r}, expected 1")
    return rho


def povm(elements: Sequence, tol: float = PSD_TOL) -> tuple[np.ndarray, ...]:
    """Validate a POVM given as a sequence of effects."""
    effects = tuple(hermitian(e) for e in elements)
    if not effects:
        raise ValidationError("POVM has no elements")
    dim = effects[0].shape[0]
    if any(e.shape[0] != dim for e in effects):
        raise DimensionError("POVM elements have different dimensions")
    for k, e in enumerate(effects):
        lmin = min_eigenvalue(e)
        if lmin < -tol:
            raise ValidationError(f"POVM element {k + 1} not PSD (min eigenvalue {lmin:.3e})")
    dev = float(np.max(np.abs(sum(effects) - np.eye(dim))))
    if dev > TRACE_TOL:
        raise ValidationError(f"POVM elements do not sum to identity (deviation {dev:.3e})")
    return effects


def tensor(a, b) -> np.ndarray:
    """Kronecker product; row index is ``i_a * dim_b + i_b``."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def partial_trace(m, dims: tuple[int, int], keep: int | str) -> np.ndarray:
    """Trace out one factor of a bipartite operator.

    ``keep`` selects the surviving subsystem: ``0``/``"A"`` keeps the first
    factor, ``1``/``"B"`` the second.
    """
    m = np.asarray(m, dtype=complex)
    da, db = (int(d) for d in dims)
    if da < 1 or db < 1 or m.shape != (da * db, da * db):
        raise DimensionError(f"matrix of shape {m.shape} does not factor as {da}x{db}")
    t = m.reshape(da, db, da, db)
    if keep in (0, "A", "a"):
        return np.einsum("ijkj->ik", t)
    if keep in (1, "B", "b"):
        return np.einsum("ijil->jl", t)
    raise ValueError(f"keep must name subsystem A or B, got {keep!r}")


def transpose(m) -> np.ndarray:
    return np.asarray(m, dtype=complex).T.copy()


def max_entangled_projector(d: int) -> np.ndarray:
    """``|Phi+><Phi+|`` with ``|Phi+> = sum_i |i>|i> / sqrt(d)``."""
    if int(d) < 2:
        raise DimensionError(f"maximally entangled projector needs d >= 2, got {d}")
    phi = np.eye(d, dtype=complex).reshape(d * d) / np.sqrt(d)
    return np.outer(phi, phi.conj())


def _eigvalsh(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    drift = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if drift > EIG_HERMITIAN_TOL:
        raise NotHermitianError(f"matrix is not Hermitian (max |m - m^H| = {drift:.3e})")
    return np.linalg.eigvalsh((m + m.conj().T) / 2)


def min_eigenvalue(m) -> float:
    return float(_eigvalsh(m)[0])


def max_eigenvalue(m) -> float:
    return float(_eigvalsh(m)[-1])


def projector(ket) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex).ravel()
    ket = ket / np.linalg.norm(ket)
    return np.outer(ket, ket.conj())


def bloch_projector(axis: str, sign: int) -> np.ndarray:
    """``(1 + sign * P)/2`` for a Pauli axis ``P`` in ``{"X","Y","Z"}``."""
    return (I2 + sign * PAULIS[axis]) / 2


def hermitian_coords(m) -> np.ndarray:
    """Real coordinate vector of a Hermitian matrix (real and imaginary parts)."""
    m = np.asarray(m, dtype=complex)
    return np.concatenate([m.real.ravel(), m.imag.ravel()])


def hermitian_basis(d: int) -> np.ndarray:
    """A real basis of the ``d*d``-dimensional space of ``d x d`` Hermitian matrices.

    Element ``B_k`` satisfies ``tr(B_k M)`` = diagonal entry, ``Re M_ij``
    or ``Im M_ij`` of ``M`` respectively.
    """
    out = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1
        out.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = e[j, i] = 0.5
            out.append(e)
            e = np.zeros((d, d), dtype=complex)
            e[j, i] = -0.5j
            e[i, j] = 0.5j
            out.append(e)
    return np.array(out)


# JSON matrix encoding: {"dim": n, "re": [[...]], "im": [[...]]}

def matrix_to_json(m, digits: int | None = None) -> dict:
    m = np.asarray(m, dtype=complex)

    def fmt(x):
        x = float(x)
        if digits is not None:
            x = float(f"{x:.{digits}g}")
        return x + 0.0  # normalizes -0.0

    return {
        "dim": int(m.shape[0]),
        "re": [[fmt(v) for v in row] for row in m.real],
        "im": [[fmt(v) for v in row] for row in m.imag],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        n = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros((n, n))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix object: {exc}") from exc
    if re.shape != (n, n) or im.shape != (n, n):
        raise DimensionError(f"matrix entries do not match declared dim {n}")
    return hermitian(re + 1j * im)
