"""Complex Stiefel manifold: points ``V`` with ``V^dagger V = I``.

Stacking Kraus operators ``[E_1; E_2; ...]`` into ``V`` makes ``V^dagger V = I``
exactly the trace-preservation condition, so every point is a CPTP map.  The
same manifold parametrizes two-outcome POVMs (``E_a = B_a^dagger B_a``) and,
with a single column, unit-trace density matrices.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np


def project_tangent(v: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Orthogonal projection of an ambient direction onto the tangent space at ``v``."""
    vg = v.conj().T @ g
    return g - v @ (0.5 * (vg + vg.conj().T))


def retract_qr(v: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """QR retraction ``qf(v + xi)`` with the R-factor diagonal made real positive."""
    q, r = np.linalg.qr(v + xi)
    diag = np.diag(r)
    phases = np.where(np.abs(diag) > 0, diag / np.abs(diag), 1.0)
    return q * phases


def polar_project(v: np.ndarray) -> np.ndarray:
    """Closest Stiefel point in Frobenius norm, ``v (v^dagger v)^(-1/2)``."""
    u, _, vh = np.linalg.svd(v, full_matrices=False)
    return u @ vh


def orthonormality_error(v: np.ndarray) -> float:
    return float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1]))))


def stack(blocks: Sequence[np.ndarray]) -> np.ndarray:
    return np.vstack(blocks)


def unstack(v: np.ndarray, d: int) -> list[np.ndarray]:
    return [v[i : i + d] for i in range(0, v.shape[0], d)]
