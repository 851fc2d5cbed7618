"""Direct randomized benchmarking: circuits, simulation, decay fits, bootstrap.

A DRB circuit prepares one of the six single-qubit stabilizer states with a
single gate, applies ``m`` uniformly random generator layers, and finishes with
a short measurement sequence that (ideally) maps the state onto a chosen
computational basis state.  Success probabilities are fitted to
``P(m) = A p**m + B`` and the average gate fidelity is ``p + (1 - p)/2``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from gatebench._parallel import parallel_map
from gatebench.core import label_unitary
from gatebench.errors import (
    BootstrapInstabilityError,
    FitConvergenceError,
    InsufficientDataError,
    NumericalError,
)
from gatebench.noise import NoiseParams, gate_superops, initial_state, measurement_effects

D = 2

STABILIZER_PREPS = ("I", "Y90", "Y-90", "Y180", "X90", "X-90")
GENERATORS = ("X90", "X-90", "Y90", "Y-90", "X180", "X-180", "Y180", "Y-180")

# +z, -z, +x, -x, +y, -y
_STAB_STATES = [
    np.array([1, 0], dtype=complex),
    np.array([0, 1], dtype=complex),
    np.array([1, 1], dtype=complex) / np.sqrt(2),
    np.array([1, -1], dtype=complex) / np.sqrt(2),
    np.array([1, 1j], dtype=complex) / np.sqrt(2),
    np.array([1, -1j], dtype=complex) / np.sqrt(2),
]


def _stab_index(psi: np.ndarray) -> int:
    overlaps = [abs(np.vdot(s, psi)) for s in _STAB_STATES]
    idx = int(np.argmax(overlaps))
    if abs(overlaps[idx] - 1) > 1e-9:
        raise ValueError("state is not a stabilizer state")
    return idx


@functools.lru_cache(maxsize=None)
def _transition(label: str) -> tuple[int, ...]:
    u = label_unitary(label)
    return tuple(_stab_index(u @ s) for s in _STAB_STATES)


@functools.lru_cache(maxsize=None)
def measurement_sequence(state: int, target: int) -> tuple[str, ...]:
    """Shortest generator sequence (at most two gates) taking ``state`` to ``|target>``."""
    goal = 0 if target == 0 else 1
    if state == goal:
        return ()
    for g in GENERATORS:
        if _transition(g)[state] == goal:
            return (g,)
    for g1 in GENERATORS:
        for g2 in GENERATORS:
            if _transition(g2)[_transition(g1)[state]] == goal:
                return (g1, g2)
    raise RuntimeError("stabilizer state unreachable")  # cannot happen for this gate set


def track_state(labels: Sequence[str], state: int = 0) -> int:
    for lab in labels:
        state = _transition(lab)[state]
    return state


@dataclass(frozen=True)
class Circuit:
    """Preparation, core layers and measurement sequence, all as gate labels.

    ``target`` is the outcome whose counts are recorded.  ``tag`` carries
    free-form indices (used by GST designs).
    """

    prep: tuple[str, ...]
    layers: tuple[str, ...]
    meas: tuple[str, ...]
    target: int = 0
    tag: tuple = ()

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.prep + self.layers + self.meas


@dataclass(frozen=True)
class ShotRecord:
    circuit: Circuit
    shots: int
    count_target: int

    def __post_init__(self):
        if self.shots <= 0 or not 0 <= self.count_target <= self.shots:
            raise ValueError(f"need shots > 0 and 0 <= count_target <= shots, got {self.count_target}/{self.shots}")

    @property
    def frequency(self) -> float:
        return self.count_target / self.shots


@dataclass
class DecayFit:
    A: float
    B: float
    p: float
    ci95: dict = field(default_factory=dict)
    per_depth_means: list = field(default_factory=list)
    per_depth_std: list = field(default_factory=list)
    decay_identifiable: bool = True

    @property
    def fidelity(self) -> float:
        return rb_fidelity(self.p)

    @property
    def spam_sum(self) -> float:
        return self.A + self.B


@dataclass
class SpamEstimate:
    p01: float
    p10: float
    ci_p01: float = float("nan")
    ci_p10: float = float("nan")


@dataclass
class DrbAnalysis:
    """Target-resolved fits, the pooled fit and SPAM extracted from them."""

    fit0: DecayFit
    fit1: DecayFit
    pooled: DecayFit
    spam: SpamEstimate

    @property
    def fidelity(self) -> float:
        return self.pooled.fidelity


@dataclass(frozen=True)
class ArrayScenario:
    per_site: tuple[NoiseParams, ...]
    site_positions: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if len(self.per_site) < 1:
            raise ValueError("array needs at least one site")
        if self.site_positions is not None and len(self.site_positions) != len(self.per_site):
            raise ValueError("site_positions and per_site lengths differ")

    @property
    def n_sites(self) -> int:
        return len(self.per_site)


@dataclass
class ArrayResult:
    sites: list[DrbAnalysis]
    mean_fidelity: float
    mean_fidelity_ci: float
    positions: list[tuple[int, int]]


def rb_fidelity(p: float, d: int = D) -> float:
    return p + (1 - p) / d


# --------------------------------------------------------------------------------------------
# circuit generation
# --------------------------------------------------------------------------------------------


def generate_drb_circuits(
    depths: Sequence[int],
    circuits_per_depth: int,
    seed: int,
    identity_weight: float = 0.0,
) -> list[Circuit]:
    """``circuits_per_depth`` circuits for every depth and each target outcome.

    Layers are drawn uniformly from :data:`GENERATORS`; ``identity_weight`` adds
    the idle gate with that weight relative to one generator.
    """
    if circuits_per_depth < 1:
        raise ValueError("circuits_per_depth must be >= 1")
    if any(m < 0 for m in depths):
        raise ValueError("depths must be nonnegative")
    pool = list(GENERATORS)
    weights = np.ones(len(pool))
    if identity_weight > 0:
        pool.append("I")
        weights = np.append(weights, identity_weight)
    weights = weights / weights.sum()

    circuits = []
    for m in depths:
        for target in (0, 1):
            rng = np.random.default_rng([seed, m, target])
            for _ in range(circuits_per_depth):
                prep = STABILIZER_PREPS[rng.integers(len(STABILIZER_PREPS))]
                layers = tuple(pool[i] for i in rng.choice(len(pool), size=m, p=weights))
                state = track_state((prep,) + layers)
                meas = measurement_sequence(state, target)
                circuits.append(Circuit((prep,), layers, meas, target))
    return circuits


# --------------------------------------------------------------------------------------------
# simulation
# --------------------------------------------------------------------------------------------


def circuit_labels(circuits: Sequence[Circuit]) -> list[str]:
    return list(dict.fromkeys(lab for c in circuits for lab in c.labels))


def success_probability(
    circuit: Circuit,
    gates: Mapping[str, np.ndarray],
    rho: np.ndarray,
    effects: Sequence[np.ndarray],
) -> float:
    state = rho
    for lab in circuit.labels:
        state = gates[lab] @ state
    return float(np.vdot(effects[circuit.target], state).real)


def exact_probabilities(
    circuits: Sequence[Circuit],
    params: NoiseParams,
    unitary_fn: Callable[[str], np.ndarray] = label_unitary,
) -> np.ndarray:
    """Target-outcome probability of each circuit, readout confusion included."""
    gates = gate_superops(circuit_labels(circuits), params, unitary_fn)
    rho = initial_state(params)
    effects = measurement_effects(params)
    probs = np.array([success_probability(c, gates, rho, effects) for c in circuits])
    return np.clip(probs, 0.0, 1.0)


def sample_counts(probs: np.ndarray, shots: int, seed_words: Sequence[int]) -> list[int]:
    """One binomial draw per circuit, each from its own stream ``(*seed_words, i)``."""
    return [
        int(np.random.default_rng([*seed_words, i]).binomial(shots, p)) for i, p in enumerate(probs)
    ]


def run_circuit(circuit: Circuit, params: NoiseParams, shots: int, seed: int) -> ShotRecord:
    prob = exact_probabilities([circuit], params)[0]
    count = int(np.random.default_rng(seed).binomial(shots, prob))
    return ShotRecord(circuit, shots, count)


def run_circuits(
    circuits: Sequence[Circuit],
    params: NoiseParams,
    shots: int,
    seed: int,
    site: int = 0,
    unitary_fn: Callable[[str], np.ndarray] = label_unitary,
) -> list[ShotRecord]:
    probs = exact_probabilities(circuits, params, unitary_fn)
    counts = sample_counts(probs, shots, (seed, site))
    return [ShotRecord(c, shots, n) for c, n in zip(circuits, counts)]


# --------------------------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------------------------


def _depth_table(records: Sequence[ShotRecord]):
    by_depth: dict[int, list[float]] = {}
    for r in records:
        by_depth.setdefault(r.circuit.depth, []).append(r.frequency)
    depths = np.array(sorted(by_depth), dtype=float)
    means = np.array([np.mean(by_depth[int(m)]) for m in depths])
    stds = np.array([np.std(by_depth[int(m)]) for m in depths])
    return depths, means, stds


def _decay_model(x, m):
    a, b, p = x
    return a * p**m + b


def _solve(m, y, x0, lower, upper, to_model):
    def resid(z):
        return _decay_model(to_model(z), m) - y

    x0 = np.clip(x0, lower, upper)
    res = least_squares(
        resid, x0, bounds=(lower, upper), method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
        max_nfev=2000,
    )
    if res.status <= 0:
        raise FitConvergenceError(f"decay fit did not converge: {res.message}", residuals=res.fun)
    return to_model(res.x)


def fit_decay(records: Sequence[ShotRecord], per_circuit: bool = False) -> DecayFit:
    """Least-squares fit of ``A p**m + B`` with ``p, B`` in [0, 1] and ``A`` in [-1, 1].

    Per-depth means are weighted equally unless ``per_circuit`` is set. If the
    box-constrained optimum has ``A + B > 1`` the fit is repeated with that
    sum capped at one. When no decay is observable (``A`` collapses to 0) ``p``
    is reported as 1 and ``decay_identifiable`` is cleared.
    """
    depths, means, stds = _depth_table(records)
    if len(depths) < 3:
        raise InsufficientDataError(f"need at least 3 distinct depths, got {len(depths)}")
    if per_circuit:
        m = np.array([r.circuit.depth for r in records], dtype=float)
        y = np.array([r.frequency for r in records])
    else:
        m, y = depths, means

    b0 = min(means[-1], 1.0)
    a0 = means[0] - means[-1]
    x = _solve(m, y, np.array([a0, b0, 0.99]), [-1, 0, 0], [1, 1, 1], lambda z: z)
    if x[0] + x[1] > 1 + 1e-9:
        # reparametrize as (A + B, B, p) so the cap becomes a box bound
        z = _solve(
            m, y, np.array([1.0, x[1], x[2]]), [0, 0, 0], [1, 1, 1],
            lambda z: np.array([z[0] - z[1], z[1], z[2]]),
        )
        x = z
    a, b, p = (float(v) for v in x)
    identifiable = abs(a) > 1e-9
    if not identifiable:
        p = 1.0
    return DecayFit(
        A=a,
        B=b,
        p=p,
        per_depth_means=[(int(d), float(v)) for d, v in zip(depths, means)],
        per_depth_std=[(int(d), float(v)) for d, v in zip(depths, stds)],
        decay_identifiable=identifiable,
    )


def _fit_summary(fit: DecayFit) -> dict:
    return {"A": fit.A, "B": fit.B, "p": fit.p, "fidelity": fit.fidelity, "A+B": fit.spam_sum}


def split_by_target(records: Sequence[ShotRecord]):
    r0 = [r for r in records if r.circuit.target == 0]
    r1 = [r for r in records if r.circuit.target == 1]
    return r0, r1


def drb_point_estimates(records: Sequence[ShotRecord]) -> dict:
    """Flat parameter dictionary of the target-0, target-1 and pooled fits."""
    r0, r1 = split_by_target(records)
    out = {}
    for name, recs in (("target0", r0), ("target1", r1), ("pooled", records)):
        for key, val in _fit_summary(fit_decay(recs)).items():
            out[f"{name}.{key}"] = val
    return out


def _resample_records(records: Sequence[ShotRecord], rng: np.random.Generator) -> list[ShotRecord]:
    return [
        ShotRecord(r.circuit, r.shots, int(rng.binomial(r.shots, r.frequency))) for r in records
    ]


def _bootstrap_one(r, records, seed_words, estimator):
    rng = np.random.default_rng([*seed_words, r])
    try:
        return estimator(_resample_records(records, rng))
    except (NumericalError, ValueError, np.linalg.LinAlgError):
        return None


def bootstrap_ci(
    records: Sequence[ShotRecord],
    resamples: int,
    seed,
    estimator: Callable[[Sequence[ShotRecord]], dict] = drb_point_estimates,
    jobs: int = 1,
    max_failure_rate: float = 0.05,
) -> dict:
    """95% half-widths (1.96 standard deviations) from a parametric binomial bootstrap.

    Each record's observed frequency is treated as the true probability and
    its counts are redrawn; ``estimator`` maps a record list to a flat dict of
    named estimates. ``seed`` may be an int or a sequence of ints.
    """
    if resamples < 100:
        raise ValueError(f"need at least 100 bootstrap resamples, got {resamples}")
    seed_words = tuple(np.atleast_1d(seed).tolist())
    work = functools.partial(
        _bootstrap_one, records=list(records), seed_words=seed_words, estimator=estimator
    )
    results = parallel_map(work, range(resamples), jobs)
    good = [r for r in results if r is not None]
    failures = resamples - len(good)
    if failures > max_failure_rate * resamples:
        raise BootstrapInstabilityError(
            f"estimator failed on {failures}/{resamples} bootstrap resamples"
        )
    keys = list(good[0])
    return {k: 1.96 * float(np.std([g[k] for g in good], ddof=1)) for k in keys}


def spam_from_fits(fit0: DecayFit, fit1: DecayFit) -> SpamEstimate:
    return SpamEstimate(
        p01=1.0 - fit0.spam_sum,
        p10=1.0 - fit1.spam_sum,
        ci_p01=fit0.ci95.get("A+B", float("nan")),
        ci_p10=fit1.ci95.get("A+B", float("nan")),
    )


def analyze_drb(
    records: Sequence[ShotRecord],
    resamples: int = 200,
    seed=0,
    jobs: int = 1,
) -> DrbAnalysis:
    """Fit both targets and the pooled data, attach bootstrap CIs, extract SPAM."""
    r0, r1 = split_by_target(records)
    fit0, fit1, pooled = fit_decay(r0), fit_decay(r1), fit_decay(records)
    if resamples:
        ci = bootstrap_ci(records, resamples, seed, drb_point_estimates, jobs)
        for name, fit in (("target0", fit0), ("target1", fit1), ("pooled", pooled)):
            fit.ci95 = {k.split(".", 1)[1]: v for k, v in ci.items() if k.startswith(name + ".")}
    return DrbAnalysis(fit0, fit1, pooled, spam_from_fits(fit0, fit1))


def run_drb(
    circuits: Sequence[Circuit],
    params: NoiseParams,
    shots: int,
    seed: int,
    resamples: int = 200,
    jobs: int = 1,
    site: int = 0,
    unitary_fn: Callable[[str], np.ndarray] = label_unitary,
) -> tuple[list[ShotRecord], DrbAnalysis]:
    records = run_circuits(circuits, params, shots, seed, site=site, unitary_fn=unitary_fn)
    analysis = analyze_drb(records, resamples, seed=(seed, site, 1), jobs=jobs)
    return records, analysis


def run_array(
    scenario: ArrayScenario,
    circuits: Sequence[Circuit],
    shots: int,
    seed: int,
    resamples: int = 200,
    jobs: int = 1,
) -> ArrayResult:
    """Benchmark every site independently under the shared circuit list.

    The mean-fidelity CI combines per-site half-widths in quadrature, since
    sites are statistically independent.
    """
    sites = []
    for s, params in enumerate(scenario.per_site):
        _, analysis = run_drb(circuits, params, shots, seed, resamples, jobs, site=s)
        sites.append(analysis)
    fids = np.array([a.fidelity for a in sites])
    hws = np.array([a.pooled.ci95.get("fidelity", math.nan) for a in sites])
    n = len(sites)
    positions = (
        list(scenario.site_positions)
        if scenario.site_positions is not None
        else [(i, 0) for i in range(n)]
    )
    return ArrayResult(
        sites=sites,
        mean_fidelity=float(fids.mean()),
        mean_fidelity_ci=float(np.sqrt(np.sum(hws**2)) / n),
        positions=positions,
    )
