"""Gate set tomography: circuit design, linear inversion and CPTP-constrained MLE.

Circuits have the form ``meas_fiducial . process . prep_fiducial`` acting on
the native state, where the process is a single gate, a nonempty fiducial, the
identity (empty sequence) or a germ repeated ``p = 1..L`` times.  The
identity-process block is the Gram matrix used by linear inversion.

The MLE stage represents every gate by stacked Kraus operators on the complex
Stiefel manifold, the input state by a unit-norm square root ``A`` with
``rho = A A^dagger`` and the two-outcome POVM by stacked square roots
``[B_0; B_1]``, so physicality holds at every iterate.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from gatebench.core import (
    avg_fidelity,
    devectorize,
    kraus_from_superop,
    label_superop,
    label_unitary,
    vectorize,
)
from gatebench.drb import Circuit, ShotRecord, sample_counts
from gatebench.errors import GramSingularError, InvalidDesignError
from gatebench.noise import NoiseParams, gate_superops, initial_state, measurement_effects
from gatebench.stiefel import polar_project, project_tangent, retract_qr

CLAMP_EPS = 1e-12
D = 2


class MleWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GstDesign:
    """Fiducials are shared between preparation and measurement.

    Germs are written in application order, so ``("Y90", "X90")`` is the
    operator product ``R_x R_y``.  The first fiducial must be empty.
    """

    gate_labels: tuple[str, ...] = ("X90", "Y90")
    fiducials: tuple[tuple[str, ...], ...] = ((), ("X90",), ("Y90",), ("X90", "X90"))
    germs: tuple[tuple[str, ...], ...] = (("Y90", "X90"), ("X90", "Y90"))
    max_reps: int = 3
    includes_identity_slot: bool = True

    def validate(self):
        if not self.includes_identity_slot:
            raise InvalidDesignError("the identity-process slot is required to measure the Gram matrix")
        if self.max_reps < 1:
            raise InvalidDesignError(f"max_reps must be >= 1, got {self.max_reps}")
        if not self.fiducials or tuple(self.fiducials[0]) != ():
            raise InvalidDesignError("the first fiducial must be the empty sequence")
        known = set(self.gate_labels)
        for seq in list(self.fiducials) + list(self.germs):
            missing = set(seq) - known
            if missing:
                raise InvalidDesignError(f"sequence {seq} uses labels {missing} outside the gate set")

    def circuit_count(self) -> int:
        n_fid = len(self.fiducials)
        n_nonempty = sum(1 for f in self.fiducials if f)
        per_pair = len(self.gate_labels) + n_nonempty + 1 + len(self.germs) * self.max_reps
        return n_fid * n_fid * per_pair


def generate_gst_circuits(design: GstDesign) -> list[Circuit]:
    """All fiducial-process-fiducial circuits, tagged ``(kind, i, j, ...)``.

    ``i`` indexes the measurement fiducial and ``j`` the preparation fiducial.
    Kinds are ``gate`` (+label), ``fiducial`` (+fiducial index), ``identity``
    and ``germ`` (+germ index, repetitions).
    """
    design.validate()
    processes: list[tuple[tuple, tuple[str, ...]]] = []
    for lab in design.gate_labels:
        processes.append((("gate", lab), (lab,)))
    for f_idx, fid in enumerate(design.fiducials):
        if fid:
            processes.append((("fiducial", f_idx), tuple(fid)))
    processes.append((("identity",), ()))
    for g_idx, germ in enumerate(design.germs):
        for p in range(1, design.max_reps + 1):
            processes.append((("germ", g_idx, p), tuple(germ) * p))

    circuits = []
    for key, seq in processes:
        for i, fi in enumerate(design.fiducials):
            for j, fj in enumerate(design.fiducials):
                tag = (key[0], i, j) + key[1:]
                circuits.append(Circuit(tuple(fj), seq, tuple(fi), 0, tag))
    return circuits


# --------------------------------------------------------------------------------------------
# gate set container
# --------------------------------------------------------------------------------------------


def _sequence_superop(gates: Mapping[str, np.ndarray], labels: Sequence[str]) -> np.ndarray:
    out = np.eye(D * D, dtype=complex)
    for lab in labels:
        out = gates[lab] @ out
    return out


@dataclass
class GateSetEstimate:
    """Input state, POVM effects (outcomes 0 and 1) and one superoperator per label.

    All operators are vectorized; the probability of outcome ``a`` after the
    sequence ``S`` is ``vdot(povm[a], S @ rho)``.
    """

    rho: np.ndarray
    povm: list[np.ndarray]
    gates: dict[str, np.ndarray]
    loglik: float | None = None
    gauge_fixed: bool = False
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_noise(
        cls,
        params: NoiseParams,
        labels: Sequence[str] = ("X90", "Y90"),
        unitary_fn: Callable[[str], np.ndarray] = label_unitary,
    ) -> "GateSetEstimate":
        return cls(
            rho=initial_state(params),
            povm=measurement_effects(params),
            gates=gate_superops(labels, params, unitary_fn),
        )

    @classmethod
    def ideal(cls, labels: Sequence[str] = ("X90", "Y90")) -> "GateSetEstimate":
        return cls.from_noise(NoiseParams.noiseless(), labels)

    def copy(self, **changes) -> "GateSetEstimate":
        kw = dict(
            rho=self.rho.copy(),
            povm=[e.copy() for e in self.povm],
            gates={k: v.copy() for k, v in self.gates.items()},
            loglik=self.loglik,
            gauge_fixed=self.gauge_fixed,
            diagnostics=dict(self.diagnostics),
        )
        kw.update(changes)
        return GateSetEstimate(**kw)

    def outcome_probabilities(self, circuit: Circuit) -> np.ndarray:
        state = _sequence_superop(self.gates, circuit.labels) @ self.rho
        return np.array([np.vdot(e, state).real for e in self.povm])

    def predict(self, circuits: Sequence[Circuit]) -> np.ndarray:
        """Probability of each circuit's target outcome."""
        return np.array([self.outcome_probabilities(c)[c.target] for c in circuits])

    def transform(self, t: np.ndarray) -> "GateSetEstimate":
        """Gauge action ``rho -> T rho``, ``E^dagger -> E^dagger T^-1``, ``G -> T G T^-1``."""
        t_inv = np.linalg.inv(t)
        return self.copy(
            rho=t @ self.rho,
            povm=[t_inv.conj().T @ e for e in self.povm],
            gates={k: t @ g @ t_inv for k, g in self.gates.items()},
        )

    def rho_matrix(self) -> np.ndarray:
        return devectorize(self.rho)

    def povm_matrices(self) -> list[np.ndarray]:
        return [devectorize(e) for e in self.povm]

    def readout_errors(self) -> tuple[float, float]:
        """``(p01, p10)`` read off the diagonal of the outcome-0 effect."""
        e0 = self.povm_matrices()[0]
        return 1.0 - float(e0[0, 0].real), float(e0[1, 1].real)

    def fidelities(self, ideal: Mapping[str, np.ndarray] | None = None) -> dict[str, float]:
        if ideal is None:
            ideal = {lab: label_superop(lab) for lab in self.gates}
        return {lab: avg_fidelity(ideal[lab], g) for lab, g in self.gates.items()}


def simulate_gst(
    circuits: Sequence[Circuit],
    truth: GateSetEstimate,
    shots: int,
    seed: int,
) -> list[ShotRecord]:
    probs = np.clip(truth.predict(circuits), 0.0, 1.0)
    counts = sample_counts(probs, shots, (seed, 0))
    return [ShotRecord(c, shots, n) for c, n in zip(circuits, counts)]


# --------------------------------------------------------------------------------------------
# linear inversion
# --------------------------------------------------------------------------------------------


def frequency_table(records: Sequence[ShotRecord], design: GstDesign) -> dict:
    """``{(kind, key): n_fid x n_fid matrix}`` of outcome-0 frequencies indexed ``[i, j]``."""
    n = len(design.fiducials)
    tables: dict = {}
    for r in records:
        kind, i, j, *extra = r.circuit.tag
        key = (kind, *extra)
        tab = tables.setdefault(key, np.full((n, n), np.nan))
        f = r.frequency if r.circuit.target == 0 else 1.0 - r.frequency
        tab[i, j] = f
    return tables


def ideal_fiducial_matrices(design: GstDesign):
    """Ideal ``A`` (rows ``M0^dagger F_i``) and ``B`` (columns ``F_j rho0``)."""
    ideal = {lab: label_superop(lab) for lab in design.gate_labels}
    rho0 = vectorize(np.diag([1.0, 0.0]))
    m0 = vectorize(np.diag([1.0, 0.0]))
    fids = [_sequence_superop(ideal, f) for f in design.fiducials]
    b = np.column_stack([f @ rho0 for f in fids])
    a = np.vstack([m0.conj() @ f for f in fids])
    return a, b


def linear_inversion(
    tables: Mapping,
    design: GstDesign,
    cond_bound: float = 1e6,
) -> GateSetEstimate:
    """Gauge-frame estimate ``G_k = B g^-1 p_k B^-1`` with ``B`` from ideal fiducials.

    ``tables`` is the output of :func:`frequency_table` (or a mapping with the
    same ``("identity",)`` and ``("gate", label)`` keys).
    """
    design.validate()
    g = np.asarray(tables[("identity",)], dtype=complex)
    if np.isnan(g).any():
        raise InvalidDesignError("Gram table has missing entries")
    cond = float(np.linalg.cond(g))
    if not np.isfinite(cond) or cond > cond_bound:
        raise GramSingularError(f"Gram matrix condition number {cond:.3e} exceeds {cond_bound:.1e}", cond)
    _, b = ideal_fiducial_matrices(design)
    b_cond = float(np.linalg.cond(b))
    if not np.isfinite(b_cond) or b_cond > cond_bound:
        # sampling noise can hide a rank-deficient Gram matrix; the ideal fiducials cannot
        raise GramSingularError(
            f"fiducials are not informationally complete (condition number {b_cond:.3e})", b_cond
        )
    b_inv = np.linalg.inv(b)
    g_inv = np.linalg.inv(g)
    gates = {}
    for lab in design.gate_labels:
        p_k = np.asarray(tables[("gate", lab)], dtype=complex)
        gates[lab] = b @ g_inv @ p_k @ b_inv
    rho = b @ g_inv @ g[:, 0]
    e0_row = g[0, :] @ b_inv
    e0 = e0_row.conj()
    ident = np.eye(D, dtype=complex).reshape(-1)
    return GateSetEstimate(rho=rho, povm=[e0, ident - e0], gates=gates,
                           diagnostics={"gram_condition": cond})


# --------------------------------------------------------------------------------------------
# maximum likelihood on the Stiefel manifold
# --------------------------------------------------------------------------------------------


@dataclass
class GstData:
    """Outcome counts per circuit; counts may be fractional for exact-probability studies."""

    circuits: list[Circuit]
    counts: np.ndarray  # shape (n_circuits, 2), outcomes 0 and 1

    @classmethod
    def from_records(cls, records: Sequence[ShotRecord]) -> "GstData":
        rows = []
        for r in records:
            hit, miss = r.count_target, r.shots - r.count_target
            rows.append((hit, miss) if r.circuit.target == 0 else (miss, hit))
        return cls([r.circuit for r in records], np.array(rows, dtype=float))

    @classmethod
    def from_probabilities(cls, circuits: Sequence[Circuit], probs0, shots: float) -> "GstData":
        probs0 = np.asarray(probs0, dtype=float)
        return cls(list(circuits), np.column_stack([shots * probs0, shots * (1 - probs0)]))

    @property
    def total(self) -> float:
        return float(self.counts.sum())


class _Likelihood:
    """Log-likelihood and its Euclidean gradient for a fixed circuit list."""

    def __init__(self, data: GstData, labels: Sequence[str]):
        self.labels = list(labels)
        self.counts = data.counts
        self.total = data.total
        self.preps = _unique([c.prep for c in data.circuits])
        self.meass = _unique([c.meas for c in data.circuits])
        self.procs = _unique([c.layers for c in data.circuits])
        self.prep_idx = np.array([self.preps.index(c.prep) for c in data.circuits])
        self.meas_idx = np.array([self.meass.index(c.meas) for c in data.circuits])
        self.proc_idx = np.array([self.procs.index(c.layers) for c in data.circuits])
        self.clamp_events = 0

    # forward ---------------------------------------------------------------------------
    def _tables(self, gates, rho, povm):
        fp = [_sequence_superop(gates, s) for s in self.preps]
        fm = [_sequence_superop(gates, s) for s in self.meass]
        procs = np.array([_sequence_superop(gates, s) for s in self.procs])
        s = np.array([f @ rho for f in fp])  # (n_prep, d2)
        r = np.array([[e.conj() @ f for f in fm] for e in povm])  # (2, n_meas, d2)
        table = np.einsum("xia,kab,jb->xkij", r, procs, s)
        return fp, fm, procs, s, r, table

    def probabilities(self, gates, rho, povm) -> np.ndarray:
        *_, table = self._tables(gates, rho, povm)
        p = table[:, self.proc_idx, self.meas_idx, self.prep_idx].real.T
        return p

    def value(self, gates, rho, povm) -> float:
        p = self.probabilities(gates, rho, povm)
        return float(np.sum(self.counts * np.log(np.maximum(p, CLAMP_EPS))))

    # backward --------------------------------------------------------------------------
    def value_and_grad(self, gates, rho, povm):
        fp, fm, procs, s, r, table = self._tables(gates, rho, povm)
        p = table[:, self.proc_idx, self.meas_idx, self.prep_idx].real.T  # (n_circ, 2)
        clamped = (p < CLAMP_EPS) & (self.counts > 0)
        self.clamp_events = int(clamped.sum())
        pc = np.maximum(p, CLAMP_EPS)
        value = float(np.sum(self.counts * np.log(pc)))
        w = np.where(p < CLAMP_EPS, 0.0, self.counts / pc)

        weights = np.zeros(table.shape)
        for a in range(2):
            np.add.at(weights[a], (self.proc_idx, self.meas_idx, self.prep_idx), w[:, a])

        g_proc = np.einsum("xkij,xia,jb->kab", weights, r, s).conj()
        g_s = np.einsum("xkij,xia,kab->jb", weights, r, procs).conj()
        g_r = np.einsum("xkij,kab,jb->xia", weights, procs, s).conj()

        g_gates = {lab: np.zeros((D * D, D * D), dtype=complex) for lab in self.labels}
        g_rho = np.zeros(D * D, dtype=complex)
        g_povm = [np.zeros(D * D, dtype=complex) for _ in povm]

        for j, seq in enumerate(self.preps):
            g_rho += fp[j].conj().T @ g_s[j]
            _accumulate_sequence(gates, seq, np.outer(g_s[j], rho.conj()), g_gates)
        for i, seq in enumerate(self.meass):
            g_f = np.zeros((D * D, D * D), dtype=complex)
            for a, e in enumerate(povm):
                g_f += np.outer(e, g_r[a, i])
                g_povm[a] += fm[i] @ g_r[a, i].conj()
            _accumulate_sequence(gates, seq, g_f, g_gates)
        for k, seq in enumerate(self.procs):
            _accumulate_sequence(gates, seq, g_proc[k], g_gates)
        return value, g_gates, g_rho, g_povm


def _unique(seqs):
    return list(dict.fromkeys(tuple(s) for s in seqs))


def _accumulate_sequence(gates, seq, grad_product, out):
    """Chain rule from the product ``G_n ... G_1`` back to each factor."""
    n = len(seq)
    if n == 0:
        return
    prefix = [np.eye(D * D, dtype=complex)]
    for lab in seq:
        prefix.append(gates[lab] @ prefix[-1])
    suffix = np.eye(D * D, dtype=complex)
    for t in range(n - 1, -1, -1):
        out[seq[t]] += suffix.conj().T @ grad_product @ prefix[t].conj().T
        suffix = suffix @ gates[seq[t]]


# parametrization ---------------------------------------------------------------------------


def _kraus_superop(v: np.ndarray) -> np.ndarray:
    ks = v.reshape(-1, D, D)
    return np.einsum("kab,kcd->acbd", ks, ks.conj()).reshape(D * D, D * D)


def _kraus_grad(v: np.ndarray, g_super: np.ndarray) -> np.ndarray:
    ks = v.reshape(-1, D, D)
    g4 = g_super.reshape(D, D, D, D)
    x1 = np.einsum("ijkl,njl->nik", g4, ks)
    x2 = np.einsum("ijkl,nik->njl", g4.conj(), ks)
    return (x1 + x2).reshape(v.shape)


def _psd_sqrt(h: np.ndarray, lo: float = 0.0, hi: float | None = None) -> np.ndarray:
    h = 0.5 * (h + h.conj().T)
    evals, evecs = np.linalg.eigh(h)
    evals = np.clip(evals, lo, hi)
    return (evecs * np.sqrt(evals)) @ evecs.conj().T


def to_manifold(est: GateSetEstimate, rank: int = D * D) -> dict:
    """CPTP projection of an estimate onto the Stiefel parametrization.

    Gates: leading ``rank`` Choi eigenvectors (negative weights clipped), zero
    padded, then polar-projected.  State: eigenvalues clipped at zero and
    renormalized.  POVM: outcome-0 effect clipped into [0, 1], outcome 1 its
    complement.
    """
    point = {}
    for lab, g in est.gates.items():
        ks = kraus_from_superop(g)[:rank]
        ks += [np.zeros((D, D), dtype=complex)] * (rank - len(ks))
        point["gate:" + lab] = polar_project(np.vstack(ks))
    rho = devectorize(est.rho)
    rho = 0.5 * (rho + rho.conj().T)
    evals, evecs = np.linalg.eigh(rho)
    evals = np.clip(evals, 0.0, None)
    evals = evals / evals.sum()
    a = (evecs * np.sqrt(evals)) @ evecs.conj().T
    point["rho"] = a.reshape(-1, 1) / np.linalg.norm(a)
    e0 = devectorize(est.povm[0])
    e0 = 0.5 * (e0 + e0.conj().T)
    evals, evecs = np.linalg.eigh(e0)
    evals = np.clip(evals, 0.0, 1.0)
    b0 = (evecs * np.sqrt(evals)) @ evecs.conj().T
    b1 = (evecs * np.sqrt(1.0 - evals)) @ evecs.conj().T
    point["povm"] = polar_project(np.vstack([b0, b1]))
    return point


def from_manifold(point: Mapping[str, np.ndarray]):
    gates = {k[5:]: _kraus_superop(v) for k, v in point.items() if k.startswith("gate:")}
    a = point["rho"].reshape(D, D)
    rho = vectorize(a @ a.conj().T)
    b0, b1 = point["povm"][:D], point["povm"][D:]
    povm = [vectorize(b0.conj().T @ b0), vectorize(b1.conj().T @ b1)]
    return gates, rho, povm


def euclidean_gradient(lik: _Likelihood, point: Mapping[str, np.ndarray]):
    """Log-likelihood and its gradient with respect to every manifold block."""
    gates, rho, povm = from_manifold(point)
    value, g_gates, g_rho, g_povm = lik.value_and_grad(gates, rho, povm)
    grad = {}
    for lab, gg in g_gates.items():
        grad["gate:" + lab] = _kraus_grad(point["gate:" + lab], gg)
    a = point["rho"].reshape(D, D)
    gr = g_rho.reshape(D, D)
    grad["rho"] = ((gr + gr.conj().T) @ a).reshape(-1, 1)
    blocks = []
    for idx in range(2):
        b = point["povm"][idx * D:(idx + 1) * D]
        ge = g_povm[idx].reshape(D, D)
        blocks.append(b @ (ge + ge.conj().T))
    grad["povm"] = np.vstack(blocks)
    return value, grad


def _inner(x: Mapping, y: Mapping) -> float:
    return float(sum(np.vdot(x[k], y[k]).real for k in x))


def gradient_check(data: GstData, est: GateSetEstimate, rank: int = D * D, eps: float = 1e-6,
                   seed: int = 0) -> float:
    """Relative error between the analytic directional derivative and central differences.

    The direction is a random tangent vector at the projected point.
    """
    rng = np.random.default_rng(seed)
    lik = _Likelihood(data, list(est.gates))
    point = to_manifold(est, rank)
    _, grad = euclidean_gradient(lik, point)
    direction = {
        k: project_tangent(v, rng.standard_normal(v.shape) + 1j * rng.standard_normal(v.shape))
        for k, v in point.items()
    }
    analytic = _inner(grad, direction)

    def f(t):
        moved = {k: v + t * direction[k] for k, v in point.items()}
        return lik.value(*from_manifold(moved))

    numeric = (f(eps) - f(-eps)) / (2 * eps)
    return abs(analytic - numeric) / max(abs(numeric), 1e-12)


def mle_refine(
    init: GateSetEstimate,
    data: GstData | Sequence[ShotRecord],
    rank: int = D * D,
    max_iters: int = 3000,
    tol: float = 1e-9,
    fix_spam: bool = False,
    conjugate: bool = True,
    ftol: float = 1e-3,
    window: int = 20,
    stall_gradient: float = 1e-5,
) -> GateSetEstimate:
    """Maximize the multinomial log-likelihood over CPTP gate sets.

    Riemannian ascent on the product of Stiefel manifolds with QR retraction
    and Armijo backtracking (Polak-Ribiere conjugate directions by default,
    reset whenever they stop being ascent directions). ``tol`` bounds the
    Riemannian gradient norm of the per-shot log-likelihood; the run also
    stops once the total log-likelihood gained over the last ``window``
    accepted steps falls below ``ftol``. A failed line search with gradient
    norm under ``stall_gradient`` is round-off at the optimum and counts as
    convergence. Every accepted
    step increases the log-likelihood; the trace is kept in
    ``diagnostics["loglik_trace"]``.
    """
    if not isinstance(data, GstData):
        data = GstData.from_records(data)
    if not 1 <= rank <= D * D:
        raise ValueError(f"rank must lie in [1, {D * D}], got {rank}")
    lik = _Likelihood(data, list(init.gates))
    scale = 1.0 / lik.total
    point = to_manifold(init, rank)
    frozen = {"rho", "povm"} if fix_spam else set()

    def evaluate(pt):
        value, grad = euclidean_gradient(lik, pt)
        rgrad = {
            k: (np.zeros_like(v) if k in frozen else project_tangent(pt[k], scale * grad[k]))
            for k, v in pt.items()
        }
        return value, rgrad

    value, rgrad = evaluate(point)
    trace = [value]
    direction = rgrad
    gnorm2 = _inner(rgrad, rgrad)
    step = 1.0 / max(math.sqrt(gnorm2), 1e-12)
    status = "max_iters"
    it = 0
    for it in range(1, max_iters + 1):
        if math.sqrt(gnorm2) < tol:
            status = "converged"
            break
        slope = _inner(rgrad, direction)
        if slope <= 0:
            direction, slope = rgrad, gnorm2
        accepted = False
        for _ in range(60):
            trial = {k: retract_qr(v, step * direction[k]) for k, v in point.items()}
            trial_value = lik.value(*from_manifold(trial))
            if (trial_value - value) * scale >= 1e-4 * step * slope and trial_value >= value:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            status = "converged" if math.sqrt(gnorm2) < stall_gradient else "linesearch_exhausted"
            break
        point = trial
        new_value, new_rgrad = evaluate(point)
        trace.append(new_value)
        if conjugate:
            transported_old = {k: project_tangent(point[k], rgrad[k]) for k in rgrad}
            diff = {k: new_rgrad[k] - transported_old[k] for k in rgrad}
            beta = max(0.0, _inner(new_rgrad, diff) / max(gnorm2, 1e-300))
            moved_dir = {k: project_tangent(point[k], direction[k]) for k in direction}
            direction = {k: new_rgrad[k] + beta * moved_dir[k] for k in new_rgrad}
        else:
            direction = new_rgrad
        value, rgrad = new_value, new_rgrad
        gnorm2 = _inner(rgrad, rgrad)
        step *= 2.0
        if len(trace) > window and trace[-1] - trace[-1 - window] < ftol:
            status = "converged"
            break

    if status == "linesearch_exhausted":
        warnings.warn("MLE line search exhausted; returning best point found", MleWarning, stacklevel=2)
    gates, rho, povm = from_manifold(point)
    return GateSetEstimate(
        rho=rho,
        povm=povm,
        gates=gates,
        loglik=value,
        diagnostics={
            "status": status,
            "iterations": it,
            "loglik_trace": trace,
            "gradient_norm": math.sqrt(gnorm2),
            "clamp_events": lik.clamp_events,
            "rank": rank,
        },
    )


def loglikelihood(est: GateSetEstimate, data: GstData | Sequence[ShotRecord]) -> float:
    if not isinstance(data, GstData):
        data = GstData.from_records(data)
    return _Likelihood(data, list(est.gates)).value(est.gates, est.rho, est.povm)


def cptp_projection(est: GateSetEstimate, rank: int = D * D) -> GateSetEstimate:
    gates, rho, povm = from_manifold(to_manifold(est, rank))
    return GateSetEstimate(rho=rho, povm=povm, gates=gates)
