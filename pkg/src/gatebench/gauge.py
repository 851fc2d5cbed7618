"""Post-MLE gauge fixing for single-qubit gate sets.

Two unitary gauge steps bring an estimate into a canonical frame:

1. a qubit rotation ``u`` that jointly (approximately) diagonalizes the input
   state and the POVM effects, found by minimizing their total off-diagonal
   weight over ZYZ Euler angles from eight octant starts;
2. a z-rotation ``delta`` maximizing the summed average fidelity of the gates
   to their ideal targets.

Both steps are unitary, so every predicted probability is unchanged.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from gatebench.core import SIGMA_X, gate_unitary, label_superop, rz_unitary, superop_from_unitary
from gatebench.gst import GateSetEstimate


class GaugeWarning(UserWarning):
    pass


@dataclass
class GaugeTransform:
    """Qubit rotation ``u`` followed by the residual z-rotation ``delta``.

    ``as_superop`` is the superoperator ``T`` with ``est.transform(T)`` giving
    the canonical estimate, i.e. conjugation ``X -> W^dagger X W`` by
    ``W = u R_z(delta)``.
    """

    u: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))
    delta: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def as_superop(self) -> np.ndarray:
        w = self.u @ rz_unitary(self.delta)
        return superop_from_unitary(w.conj().T)


def zyz_unitary(a: float, b: float, c: float) -> np.ndarray:
    return rz_unitary(a) @ gate_unitary("Y", b) @ rz_unitary(c)


def off_diagonal_weight(u: np.ndarray, mats) -> float:
    total = 0.0
    for m in mats:
        r = u.conj().T @ m @ u
        total += float(np.sum(np.abs(r) ** 2) - np.sum(np.abs(np.diag(r)) ** 2))
    return total


OCTANT_STARTS = tuple(
    (a, b, 0.0)
    for b in (np.pi / 4, 3 * np.pi / 4)
    for a in (np.pi / 4, 3 * np.pi / 4, 5 * np.pi / 4, 7 * np.pi / 4)
)


def joint_diagonalize(
    est: GateSetEstimate,
    threshold: float = 1e-4,
) -> tuple[GaugeTransform, GateSetEstimate]:
    """Rotate the estimate so that the state and POVM are as diagonal as possible.

    The residual permutation freedom is fixed by putting the larger diagonal
    entry of the outcome-0 effect first.
    """
    mats = [est.rho_matrix()] + est.povm_matrices()
    mats = [0.5 * (m + m.conj().T) for m in mats]

    def objective(x):
        return off_diagonal_weight(zyz_unitary(*x), mats)

    runs = []
    for start in OCTANT_STARTS:
        res = minimize(objective, np.array(start), method="BFGS", options={"gtol": 1e-12})
        runs.append((float(res.fun), res.x))
    values = [r[0] for r in runs]
    best = int(np.argmin(values))
    f_best, x_best = runs[best]
    u = zyz_unitary(*x_best)

    e0 = u.conj().T @ mats[1] @ u
    if e0[0, 0].real < e0[1, 1].real:
        u = u @ SIGMA_X

    if f_best > threshold:
        warnings.warn(
            f"joint diagonalization left off-diagonal weight {f_best:.3e} > {threshold:.1e}",
            GaugeWarning,
            stacklevel=2,
        )
    info = {"offdiag_weight": f_best, "start_values": values}
    transform = GaugeTransform(u=u, delta=0.0, info=info)
    return transform, est.transform(transform.as_superop)


def _rz_phases(deltas: np.ndarray) -> np.ndarray:
    """Diagonal of the z-rotation superoperator, shape (n, 4)."""
    deltas = np.atleast_1d(deltas)
    one = np.ones_like(deltas, dtype=complex)
    return np.stack([one, np.exp(-1j * deltas), np.exp(1j * deltas), one], axis=1)


def rotated_fidelity(g: np.ndarray, ideal: np.ndarray, deltas) -> np.ndarray:
    """``Re Tr(ideal^dagger R_z(d)^dagger g R_z(d)) / 6 + 1/3`` on an array of angles."""
    ph = _rz_phases(np.asarray(deltas, dtype=float))
    # (R^dagger g R)_ab = conj(ph_a) g_ab ph_b
    overlap = np.einsum("ab,na,ab,nb->n", ideal.conj(), ph.conj(), g, ph)
    return overlap.real / 6.0 + 1.0 / 3.0


def fix_delta(
    est: GateSetEstimate,
    ideal: Mapping[str, np.ndarray] | None = None,
    grid_points: int = 3600,
    degeneracy_tol: float = 1e-9,
) -> tuple[float, GateSetEstimate]:
    """Best z-rotation angle in [0, 2 pi) and the correspondingly rotated estimate.

    The summed fidelity is scanned on a uniform grid, then refined by bounded
    Brent/golden-section search within one grid step.  If another, separate
    grid maximum lies within ``degeneracy_tol`` the smallest angle wins and
    the degeneracy is flagged in ``diagnostics``.
    """
    if ideal is None:
        ideal = {lab: label_superop(lab) for lab in est.gates}
    labels = list(ideal)
    grid = np.arange(grid_points) * (2 * np.pi / grid_points)
    step = grid[1] - grid[0]

    def total(d):
        return sum(rotated_fidelity(est.gates[lab], ideal[lab], d) for lab in labels)

    scores = total(grid)
    top = scores.max()
    near = np.flatnonzero(scores >= top - degeneracy_tol)
    # collapse runs of adjacent grid points (cyclically) into one maximum
    separate = [near[0]]
    for idx in near[1:]:
        if idx - separate[-1] > 2:
            separate.append(idx)
    if len(separate) > 1 and (separate[0] + grid_points - separate[-1]) <= 2:
        separate.pop()
    degenerate = len(separate) > 1
    centre = grid[separate[0]]

    res = minimize_scalar(
        lambda d: -float(total(d)[0]),
        bounds=(centre - step, centre + step),
        method="bounded",
        options={"xatol": 1e-12},
    )
    # a flat objective gives the refinement nothing to improve; keep the grid angle
    delta = float(res.x) if -res.fun > scores[separate[0]] + 1e-14 else float(centre)
    delta = delta % (2 * np.pi)

    t = superop_from_unitary(rz_unitary(delta).conj().T)
    out = est.transform(t)
    per_gate = {lab: float(rotated_fidelity(est.gates[lab], ideal[lab], delta)[0]) for lab in labels}
    spam_shift = max(
        float(np.max(np.abs(out.rho - est.rho))),
        *(float(np.max(np.abs(a - b))) for a, b in zip(out.povm, est.povm)),
    )
    out.diagnostics = dict(est.diagnostics)
    out.diagnostics["delta"] = {
        "delta": delta,
        "fidelity": per_gate,
        "degenerate": degenerate,
        "spam_shift": spam_shift,
    }
    return delta, out


def gauge_fix(
    est: GateSetEstimate,
    ideal: Mapping[str, np.ndarray] | None = None,
    threshold: float = 1e-4,
) -> tuple[GaugeTransform, GateSetEstimate]:
    """Joint diagonalization followed by the z-rotation; returns the combined transform."""
    partial, rotated = joint_diagonalize(est, threshold)
    delta, canonical = fix_delta(rotated, ideal)
    transform = GaugeTransform(u=partial.u, delta=delta, info=dict(partial.info))
    canonical.gauge_fixed = True
    canonical.diagnostics["gauge"] = {
        "offdiag_weight": partial.info["offdiag_weight"],
        "delta": delta,
    }
    return transform, canonical
