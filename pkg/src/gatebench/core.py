"""Linear algebra for density matrices, superoperators and fidelities.

Conventions
-----------
Density matrices are vectorized row by row (numpy's native C order), so that

    vec(A @ rho @ B) = kron(A, B.T) @ vec(rho)

and the superoperator of a unitary is literally ``kron(U, U.conj())``.  A
Kraus set ``{E_k}`` maps to ``sum_k kron(E_k, E_k.conj())``.

Measurement effects are stored as vectorized matrices ``vec(M)`` and outcome
probabilities are ``vdot(vec(M), vec(rho)) = Tr(M^dagger rho)``.

Gate labels are short strings: ``"I"``, ``"X90"``, ``"X-90"``, ``"Y180"`` and
so on, with the angle in degrees.
"""
from __future__ import annotations

import re
import warnings
from functools import lru_cache
from typing import Sequence

import numpy as np

from gatebench.errors import (
    ConstraintViolationError,
    DimensionMismatchError,
    InvalidDimensionError,
    NonUnitaryError,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (np.eye(2, dtype=complex), SIGMA_X, SIGMA_Y, SIGMA_Z)

UNITARY_TOL = 1e-10
KRAUS_TOL = 1e-10
CPTP_TOL = 1e-9
IMAG_RESIDUAL_FLAG = 1e-6


class FidelityWarning(UserWarning):
    """Raised when a trace overlap carries a suspicious imaginary part."""


def _dim_from_size(n: int) -> int:
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise InvalidDimensionError(f"size {n} is not a perfect square")
    return d


def _check_power_of_two(d: int):
    if d < 1 or d & (d - 1):
        raise InvalidDimensionError(f"dimension {d} is not a power of 2")


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Flatten a d x d matrix into a length d**2 vector (row stacking)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidDimensionError(f"expected a square matrix, got shape {rho.shape}")
    _check_power_of_two(rho.shape[0])
    return rho.reshape(-1).copy()


def devectorize(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    d = _dim_from_size(vec.size)
    _check_power_of_two(d)
    return vec.reshape(d, d).copy()


def superop_from_unitary(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    d = u.shape[0]
    if u.shape != (d, d):
        raise InvalidDimensionError(f"expected a square matrix, got shape {u.shape}")
    _check_power_of_two(d)
    dev = np.max(np.abs(u.conj().T @ u - np.eye(d)))
    if dev > UNITARY_TOL:
        raise NonUnitaryError(f"input deviates from unitarity by {dev:.3e}")
    return np.kron(u, u.conj())


def kraus_deviation(kraus: Sequence[np.ndarray]) -> float:
    """Max-abs deviation of ``sum_k E_k^dagger E_k`` from the identity."""
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    d = ops[0].shape[1]
    total = sum(k.conj().T @ k for k in ops)
    return float(np.max(np.abs(total - np.eye(d))))


def superop_from_kraus(kraus: Sequence[np.ndarray], tol: float = KRAUS_TOL) -> np.ndarray:
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    if not ops:
        raise InvalidDimensionError("empty Kraus set")
    d = ops[0].shape[0]
    _check_power_of_two(d)
    for k in ops:
        if k.shape != (d, d):
            raise DimensionMismatchError(f"Kraus operator shape {k.shape} != {(d, d)}")
    dev = kraus_deviation(ops)
    if dev > tol:
        raise ConstraintViolationError(
            f"Kraus set is not trace preserving (deviation {dev:.3e})", deviation=dev
        )
    return sum(np.kron(k, k.conj()) for k in ops)


def apply_superop(superop: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return devectorize(superop @ vectorize(rho))


def choi_matrix(superop: np.ndarray) -> np.ndarray:
    """Reshuffle a superoperator into its Choi matrix ``sum_k vec(E_k) vec(E_k)^dagger``."""
    superop = np.asarray(superop, dtype=complex)
    d = _dim_from_size(superop.shape[0])
    return superop.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)


def superop_from_choi(choi: np.ndarray) -> np.ndarray:
    # the reshuffle is an involution
    return choi_matrix(choi)


def kraus_from_superop(superop: np.ndarray, atol: float = 0.0) -> list[np.ndarray]:
    """Kraus operators from the eigen-decomposition of the Choi matrix.

    Negative eigenvalues (non-CP input) are clipped to zero. Operators are
    returned in order of decreasing weight; those with eigenvalue <= atol are
    dropped, but at least one is always kept.
    """
    choi = choi_matrix(superop)
    choi = 0.5 * (choi + choi.conj().T)
    d = _dim_from_size(choi.shape[0])
    evals, evecs = np.linalg.eigh(choi)
    order = np.argsort(evals)[::-1]
    ops = []
    for idx in order:
        lam = max(evals[idx], 0.0)
        if ops and lam <= atol:
            continue
        ops.append(np.sqrt(lam) * evecs[:, idx].reshape(d, d))
    return ops


def tp_deviation(superop: np.ndarray) -> float:
    """Max-abs deviation of ``vec(I)^dagger G`` from ``vec(I)^dagger``."""
    superop = np.asarray(superop, dtype=complex)
    d = _dim_from_size(superop.shape[0])
    ident = np.eye(d, dtype=complex).reshape(-1)
    return float(np.max(np.abs(ident.conj() @ superop - ident.conj())))


def choi_min_eigenvalue(superop: np.ndarray) -> float:
    choi = choi_matrix(superop)
    return float(np.linalg.eigvalsh(0.5 * (choi + choi.conj().T)).min())


def is_cptp(superop: np.ndarray, tol: float = CPTP_TOL) -> bool:
    return choi_min_eigenvalue(superop) >= -tol and tp_deviation(superop) <= tol


def is_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> bool:
    rho = np.asarray(rho, dtype=complex)
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        return False
    if abs(np.trace(rho) - 1) > tol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -tol)


def is_povm(effects: Sequence[np.ndarray], tol: float = 1e-10) -> bool:
    """Check a list of effect matrices (not vectors) for POVM validity."""
    mats = [np.asarray(e, dtype=complex) for e in effects]
    d = mats[0].shape[0]
    for m in mats:
        if np.max(np.abs(m - m.conj().T)) > tol:
            return False
        ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if ev.min() < -tol or ev.max() > 1 + tol:
            return False
    return bool(np.max(np.abs(sum(mats) - np.eye(d))) <= tol)


def _trace_overlap(ideal: np.ndarray, noisy: np.ndarray) -> complex:
    ideal = np.asarray(ideal, dtype=complex)
    noisy = np.asarray(noisy, dtype=complex)
    if ideal.shape != noisy.shape or ideal.ndim != 2 or ideal.shape[0] != ideal.shape[1]:
        raise DimensionMismatchError(f"shapes {ideal.shape} and {noisy.shape} differ")
    # Tr(A^dagger B) without forming the product
    return complex(np.vdot(ideal, noisy))


def ent_fidelity(ideal: np.ndarray, noisy: np.ndarray) -> float:
    """Entanglement fidelity ``Re Tr(ideal^dagger noisy) / d**2``.

    A :class:`FidelityWarning` is emitted when the discarded imaginary part
    exceeds 1e-6, which signals a non-Hermiticity-preserving input.
    """
    overlap = _trace_overlap(ideal, noisy)
    d2 = ideal.shape[0]
    if abs(overlap.imag) / d2 > IMAG_RESIDUAL_FLAG:
        warnings.warn(
            f"imaginary residual {overlap.imag / d2:.3e} in entanglement fidelity",
            FidelityWarning,
            stacklevel=2,
        )
    return overlap.real / d2


def avg_fidelity(ideal: np.ndarray, noisy: np.ndarray) -> float:
    d = _dim_from_size(np.asarray(ideal).shape[0])
    return (d * ent_fidelity(ideal, noisy) + 1) / (d + 1)


def compose(ops: Sequence[np.ndarray], dim: int | None = None) -> np.ndarray:
    """Compose superoperators given in application order (first applied first).

    An empty list yields the identity on ``dim`` (Hilbert-space dimension,
    default 2).
    """
    if len(ops) == 0:
        d = 2 if dim is None else dim
        return np.eye(d * d, dtype=complex)
    shape = np.asarray(ops[0]).shape
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        op = np.asarray(op, dtype=complex)
        if op.shape != shape:
            raise DimensionMismatchError(f"shape {op.shape} != {shape}")
        out = op @ out
    if dim is not None and shape[0] != dim * dim:
        raise DimensionMismatchError(f"superoperators act on d={_dim_from_size(shape[0])}, not {dim}")
    return out.copy()


def gate_unitary(axis: str | float, angle: float) -> np.ndarray:
    """Rotation ``exp(-i angle (cos(phi) X + sin(phi) Y) / 2)``.

    ``axis`` is ``"X"`` (phi = 0), ``"Y"`` (phi = pi/2), ``"I"`` or a float phi
    giving an axis in the xy-plane.
    """
    if isinstance(axis, str):
        key = axis.upper()
        if key == "I":
            return np.eye(2, dtype=complex)
        if key == "X":
            phi = 0.0
        elif key == "Y":
            phi = np.pi / 2
        elif key == "Z":
            return np.array(
                [[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]], dtype=complex
            )
        else:
            raise ValueError(f"unknown axis {axis!r}")
    else:
        phi = float(axis)
    n_dot_sigma = np.cos(phi) * SIGMA_X + np.sin(phi) * SIGMA_Y
    return np.cos(angle / 2) * np.eye(2, dtype=complex) - 1j * np.sin(angle / 2) * n_dot_sigma


def rz_unitary(angle: float) -> np.ndarray:
    return gate_unitary("Z", angle)


_LABEL_RE = re.compile(r"^([XY])(-?\d+(?:\.\d+)?)$")


@lru_cache(maxsize=None)
def parse_label(label: str) -> tuple[str, float]:
    """``"X-90"`` -> ``("X", -pi/2)``; ``"I"`` -> ``("I", 0.0)``."""
    if label == "I":
        return "I", 0.0
    m = _LABEL_RE.match(label)
    if m is None:
        raise ValueError(f"unrecognised gate label {label!r}")
    return m.group(1), float(np.deg2rad(float(m.group(2))))


def label_unitary(label: str) -> np.ndarray:
    return gate_unitary(*parse_label(label))


def label_superop(label: str) -> np.ndarray:
    return superop_from_unitary(label_unitary(label))


def basis_projector(bit: int, d: int = 2) -> np.ndarray:
    out = np.zeros((d, d), dtype=complex)
    out[bit, bit] = 1.0
    return out


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)
