"""Two-parameter coherent-error calibration from DRB data.

The miscalibration model scales every rotation angle by ``k`` and tilts the
nominal y-axis to azimuth ``phi`` (ideal ``pi/2``).  Measured DRB records are
compared with exact simulations over a ``(k, phi)`` grid; the best grid point
gives control corrections for the pulse duration and the y-axis phase.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gatebench.core import gate_unitary, parse_label, superop_from_unitary
from gatebench.drb import Circuit, DrbAnalysis, ShotRecord, run_drb
from gatebench.errors import InsufficientDataError, InvalidModelError
from gatebench.noise import NoiseParams, initial_state, measurement_effects, relaxation_superop
from gatebench._parallel import parallel_map

HALF_PI = math.pi / 2
TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class MiscalModel:
    """Overrotation factor ``k`` and y-axis azimuth ``phi`` (radians, stored mod 2 pi)."""

    k: float = 1.0
    phi: float = HALF_PI

    def __post_init__(self):
        if not (self.k > 0 and math.isfinite(self.k)):
            raise InvalidModelError(f"overrotation factor must be positive, got {self.k}")
        if not math.isfinite(self.phi):
            raise InvalidModelError(f"axis offset must be finite, got {self.phi}")
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)

    @classmethod
    def identity(cls) -> "MiscalModel":
        return cls(1.0, HALF_PI)

    def unitary(self, label: str) -> np.ndarray:
        axis, angle = parse_label(label)
        return miscalibrated_unitary(axis, angle, self)


def miscalibrated_unitary(axis: str, angle: float, model: MiscalModel) -> np.ndarray:
    if axis == "I":
        return np.eye(2, dtype=complex)
    if axis == "X":
        return gate_unitary(0.0, model.k * angle)
    if axis == "Y":
        return gate_unitary(model.phi, model.k * angle)
    raise ValueError(f"miscalibration applies to X/Y/I gates, got axis {axis!r}")


def miscalibrated_gate(axis: str, angle: float, model: MiscalModel) -> np.ndarray:
    """Superoperator of the coherent (noise-free) miscalibrated rotation."""
    return superop_from_unitary(miscalibrated_unitary(axis, angle, model))


# --------------------------------------------------------------------------------------------
# batched simulation over grid points
# --------------------------------------------------------------------------------------------


def _batched_superops(label: str, ks: np.ndarray, phis: np.ndarray) -> np.ndarray:
    """Coherent superoperators of ``label`` for every grid point, shape (n, 4, 4)."""
    axis, angle = parse_label(label)
    n = len(ks)
    if axis == "I":
        return np.broadcast_to(np.eye(4, dtype=complex), (n, 4, 4))
    az = np.zeros(n) if axis == "X" else phis
    half = 0.5 * ks * angle
    c, s = np.cos(half), np.sin(half)
    u = np.empty((n, 2, 2), dtype=complex)
    u[:, 0, 0] = c
    u[:, 1, 1] = c
    u[:, 0, 1] = -1j * s * np.exp(-1j * az)
    u[:, 1, 0] = -1j * s * np.exp(1j * az)
    return np.einsum("nab,ncd->nacbd", u, u.conj()).reshape(n, 4, 4)


def simulate_grid(
    circuits: Sequence[Circuit],
    ks: np.ndarray,
    phis: np.ndarray,
    params: NoiseParams,
) -> np.ndarray:
    """Exact target-outcome probabilities, shape (n_points, n_circuits)."""
    ks = np.asarray(ks, dtype=float)
    phis = np.asarray(phis, dtype=float)
    relax = relaxation_superop(params)
    labels = dict.fromkeys(lab for c in circuits for lab in c.labels)
    gates = {lab: np.einsum("ab,nbc->nac", relax, _batched_superops(lab, ks, phis)) for lab in labels}
    rho0 = initial_state(params)
    effects = measurement_effects(params)
    out = np.empty((len(ks), len(circuits)))
    for j, circ in enumerate(circuits):
        state = np.broadcast_to(rho0, (len(ks), 4))
        for lab in circ.labels:
            state = np.einsum("nab,nb->na", gates[lab], state)
        out[:, j] = (state @ effects[circ.target].conj()).real
    return np.clip(out, 0.0, 1.0)


def _log_scores_chunk(chunk, circuits, measured, params):
    ks, phis = chunk
    sim = simulate_grid(circuits, ks, phis, params)
    f = (sim - measured[None, :]) ** 2
    return np.sum(np.log1p(-f), axis=1)


# --------------------------------------------------------------------------------------------
# calibration map
# --------------------------------------------------------------------------------------------


@dataclass
class CalibrationMap:
    """Scores on a ``(k, phi)`` grid.

    ``scores`` holds ``f_x = prod_i (1 - f_i)`` and ``log_scores`` the
    numerically safe ``sum_i log(1 - f_i)``; both have shape
    ``(len(k_grid), len(phi_grid))`` and share the same argmax.  When a
    refinement pass ran, ``refined`` is the finer map and ``argmax`` is its
    maximizer.
    """

    k_grid: np.ndarray
    phi_grid: np.ndarray
    log_scores: np.ndarray
    argmax: tuple[float, float]
    refined: "CalibrationMap | None" = None
    coherent_only: bool = False

    @property
    def scores(self) -> np.ndarray:
        return np.exp(self.log_scores)

    @property
    def model(self) -> MiscalModel:
        return MiscalModel(*self.argmax)

    @property
    def best_score(self) -> float:
        m = self.refined if self.refined is not None else self
        return float(np.exp(m.log_scores.max()))

    def rows(self) -> list[tuple[float, float, float]]:
        """``(k, phi, score)`` triples in row-major grid order."""
        s = self.scores
        return [
            (float(k), float(p), float(s[i, j]))
            for i, k in enumerate(self.k_grid)
            for j, p in enumerate(self.phi_grid)
        ]


def default_k_grid(step: float = 0.005) -> np.ndarray:
    return np.round(np.linspace(0.8, 1.2, int(round(0.4 / step)) + 1), 12)


def default_phi_grid(step: float = 0.005) -> np.ndarray:
    return HALF_PI + np.round(np.linspace(-0.3, 0.3, int(round(0.6 / step)) + 1), 12)


def _grid_argmax(k_grid, phi_grid, log_scores, atol: float = 1e-12) -> tuple[int, int]:
    """Index of the maximum; exact ties go to the point nearest (1, pi/2)."""
    top = log_scores.max()
    ii, jj = np.nonzero(log_scores >= top - atol)
    dist = (k_grid[ii] - 1.0) ** 2 + (phi_grid[jj] - HALF_PI) ** 2
    best = int(np.argmin(dist))
    return int(ii[best]), int(jj[best])


def _evaluate_map(circuits, measured, k_grid, phi_grid, params, jobs):
    kk, pp = np.meshgrid(k_grid, phi_grid, indexing="ij")
    ks, phis = kk.ravel(), pp.ravel()
    n_chunks = max(1, jobs)
    chunks = [(a, b) for a, b in zip(np.array_split(ks, n_chunks), np.array_split(phis, n_chunks)) if len(a)]
    work = functools.partial(_log_scores_chunk, circuits=circuits, measured=measured, params=params)
    parts = parallel_map(work, chunks, jobs)
    return np.concatenate(parts).reshape(kk.shape)


def score_map(
    records: Sequence[ShotRecord],
    k_grid: Sequence[float] | None = None,
    phi_grid: Sequence[float] | None = None,
    params: NoiseParams | None = None,
    coherent_only: bool = False,
    refine: bool = True,
    refine_factor: int = 10,
    sampled_shots: int | None = None,
    seed: int = 0,
    jobs: int = 1,
) -> CalibrationMap:
    """Score every grid point against the measured success frequencies.

    Parameters
    ----------
    records
        Measured DRB shot records.
    k_grid, phi_grid
        Sorted grids; defaults span k in [0.8, 1.2] and phi within 0.3 rad of
        pi/2, both with step 0.005.
    params
        Stochastic noise included in the simulation (ignored when
        ``coherent_only``); ``None`` means noiseless.
    refine
        Rescan at ``refine_factor`` times the resolution within one coarse
        step of the coarse argmax.
    sampled_shots
        If given, simulated probabilities are replaced by binomially sampled
        frequencies (shot-sampled mode); the default uses exact probabilities.
    """
    if not records:
        raise InsufficientDataError("score_map needs at least one record")
    k_grid = np.asarray(default_k_grid() if k_grid is None else k_grid, dtype=float)
    phi_grid = np.asarray(default_phi_grid() if phi_grid is None else phi_grid, dtype=float)
    if k_grid.size == 0 or phi_grid.size == 0:
        raise InsufficientDataError("calibration grids must be nonempty")
    sim_params = NoiseParams.noiseless() if (coherent_only or params is None) else params
    circuits = [r.circuit for r in records]
    measured = np.array([r.frequency for r in records])

    if sampled_shots is not None:
        return _sampled_map(circuits, measured, k_grid, phi_grid, sim_params, sampled_shots, seed, coherent_only)

    logs = _evaluate_map(circuits, measured, k_grid, phi_grid, sim_params, jobs)
    i, j = _grid_argmax(k_grid, phi_grid, logs)
    coarse = CalibrationMap(k_grid, phi_grid, logs, (float(k_grid[i]), float(phi_grid[j])),
                            coherent_only=coherent_only)
    if not refine or (k_grid.size < 2 and phi_grid.size < 2):
        return coarse

    def fine_axis(grid, idx):
        if grid.size < 2:
            return grid.copy()
        step = float(np.min(np.diff(grid)))
        centre = float(grid[idx])
        return centre + np.linspace(-step, step, 2 * refine_factor + 1)

    fk, fp = fine_axis(k_grid, i), fine_axis(phi_grid, j)
    fk = fk[fk > 0]
    flogs = _evaluate_map(circuits, measured, fk, fp, sim_params, jobs)
    fi, fj = _grid_argmax(fk, fp, flogs)
    coarse.refined = CalibrationMap(fk, fp, flogs, (float(fk[fi]), float(fp[fj])), coherent_only=coherent_only)
    coarse.argmax = coarse.refined.argmax
    return coarse


def _sampled_map(circuits, measured, k_grid, phi_grid, params, shots, seed, coherent_only):
    kk, pp = np.meshgrid(k_grid, phi_grid, indexing="ij")
    sim = simulate_grid(circuits, kk.ravel(), pp.ravel(), params)
    rng = np.random.default_rng(seed)
    sim = rng.binomial(shots, sim) / shots
    logs = np.sum(np.log1p(-((sim - measured) ** 2)), axis=1).reshape(kk.shape)
    i, j = _grid_argmax(k_grid, phi_grid, logs)
    return CalibrationMap(k_grid, phi_grid, logs, (float(k_grid[i]), float(phi_grid[j])),
                          coherent_only=coherent_only)


# --------------------------------------------------------------------------------------------
# corrections
# --------------------------------------------------------------------------------------------


def correct_controls(current_tau: float, current_phi: float, found: MiscalModel) -> tuple[float, float]:
    """Pulse duration ``tau / k`` and y-axis phase ``phi_ctrl - (phi - pi/2)``."""
    if not found.k > 0:
        raise InvalidModelError(f"overrotation factor must be positive, got {found.k}")
    return current_tau / found.k, current_phi - (found.phi - HALF_PI)


def residual_model(injected: MiscalModel, found: MiscalModel) -> MiscalModel:
    """Miscalibration left after applying the correction derived from ``found``.

    Rotation angles scale with pulse duration, so the overrotation becomes
    ``k0 / k``; the axis offset shifts by the phase correction.
    """
    return MiscalModel(injected.k / found.k, injected.phi - found.phi + HALF_PI)


@dataclass
class CalibrationResult:
    injected: MiscalModel
    maps: list[CalibrationMap]
    found: list[MiscalModel]
    residual: MiscalModel
    controls: tuple[float, float]
    pre: DrbAnalysis
    post: DrbAnalysis
    pre_records: list[ShotRecord] = field(default_factory=list)
    post_records: list[ShotRecord] = field(default_factory=list)

    @property
    def improved(self) -> bool:
        return self.post.fidelity >= self.pre.fidelity


def closed_loop(
    injected: MiscalModel,
    circuits: Sequence[Circuit],
    params: NoiseParams,
    shots: int,
    seed: int,
    k_grid: Sequence[float] | None = None,
    phi_grid: Sequence[float] | None = None,
    tau: float = 1.0,
    phi_ctrl: float = HALF_PI,
    max_rounds: int = 1,
    tol: float = 1e-3,
    resamples: int = 0,
    coherent_only: bool = False,
    jobs: int = 1,
) -> CalibrationResult:
    """Measure, score, correct and re-measure.

    Each round simulates DRB under the current residual miscalibration,
    scores it and updates the controls; rounds stop once the found model is
    within ``tol`` of the identity in both parameters or after
    ``max_rounds``.  Pre- and post-correction DRB runs share the circuit list
    and seed so their fidelities differ only through the gates.
    """
    current = injected
    maps, found = [], []
    pre_records, pre = run_drb(circuits, params, shots, seed, resamples, jobs, unitary_fn=current.unitary)
    records = pre_records
    for rnd in range(max_rounds):
        if rnd:
            records, _ = run_drb(circuits, params, shots, seed + rnd, 0, jobs, unitary_fn=current.unitary)
        cmap = score_map(records, k_grid, phi_grid, params, coherent_only=coherent_only, jobs=jobs)
        model = cmap.model
        maps.append(cmap)
        found.append(model)
        tau, phi_ctrl = correct_controls(tau, phi_ctrl, model)
        current = residual_model(current, model)
        phase_gap = abs((model.phi - HALF_PI + math.pi) % TWO_PI - math.pi)
        if abs(model.k - 1.0) < tol and phase_gap < tol:
            break
    post_records, post = run_drb(circuits, params, shots, seed, resamples, jobs, unitary_fn=current.unitary)
    return CalibrationResult(injected, maps, found, current, (tau, phi_ctrl), pre, post,
                             pre_records, post_records)
