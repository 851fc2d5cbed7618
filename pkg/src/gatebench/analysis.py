"""End-to-end GST pipeline: linear inversion, MLE, gauge fixing and bootstrap CIs."""
from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gatebench.drb import ShotRecord, bootstrap_ci
from gatebench.gauge import GaugeTransform, gauge_fix
from gatebench.gst import (
    GateSetEstimate,
    GstDesign,
    frequency_table,
    generate_gst_circuits,
    linear_inversion,
    mle_refine,
    simulate_gst,
)
from gatebench.noise import NoiseParams, analytic_gate_fidelity


@dataclass
class GstResult:
    """All stages of one GST analysis.

    ``ci95`` holds bootstrap half-widths keyed like :func:`gst_point_estimates`.
    """

    linear: GateSetEstimate
    mle: GateSetEstimate
    canonical: GateSetEstimate
    transform: GaugeTransform
    ci95: dict = field(default_factory=dict)

    def summary(self) -> dict:
        p01, p10 = self.canonical.readout_errors()
        out = {"p01": p01, "p10": p10}
        out.update({f"fidelity.{k}": v for k, v in self.canonical.fidelities().items()})
        return out


def _estimate(records, design, mle_options, cond_bound=1e6):
    li = linear_inversion(frequency_table(records, design), design, cond_bound)
    mle = mle_refine(li, records, **mle_options)
    transform, canonical = gauge_fix(mle)
    return li, mle, transform, canonical


def gst_point_estimates(
    records: Sequence[ShotRecord], design: GstDesign, mle_options=None, cond_bound: float = 1e6
) -> dict:
    """Readout errors and gauge-fixed gate fidelities as a flat dict."""
    with warnings.catch_warnings():
        # replicate-level diagnostics would flood the output; the point estimate keeps them
        warnings.simplefilter("ignore")
        *_, canonical = _estimate(records, design, dict(mle_options or {}), cond_bound)
    p01, p10 = canonical.readout_errors()
    out = {"p01": p01, "p10": p10}
    out.update({f"fidelity.{k}": v for k, v in canonical.fidelities().items()})
    return out


def analyze_gst(
    records: Sequence[ShotRecord],
    design: GstDesign = GstDesign(),
    resamples: int = 100,
    seed=0,
    jobs: int = 1,
    mle_options: dict | None = None,
    cond_bound: float = 1e6,
) -> GstResult:
    """Run the full GST chain on measured records; ``resamples=0`` skips the bootstrap."""
    mle_options = dict(mle_options or {})
    li, mle, transform, canonical = _estimate(records, design, mle_options, cond_bound)
    result = GstResult(li, mle, canonical, transform)
    if resamples:
        estimator = functools.partial(
            gst_point_estimates, design=design, mle_options=mle_options, cond_bound=cond_bound
        )
        result.ci95 = bootstrap_ci(records, resamples, seed, estimator, jobs)
    return result


def run_gst(
    params: NoiseParams,
    design: GstDesign = GstDesign(),
    shots: int = 1000,
    seed: int = 0,
    resamples: int = 100,
    jobs: int = 1,
    mle_options: dict | None = None,
    cond_bound: float = 1e6,
) -> tuple[list[ShotRecord], GstResult]:
    """Simulate the design under ``params`` and analyze it."""
    truth = GateSetEstimate.from_noise(params, labels=design.gate_labels)
    records = simulate_gst(generate_gst_circuits(design), truth, shots, seed)
    result = analyze_gst(records, design, resamples, (seed, 1), jobs, mle_options, cond_bound)
    return records, result


def gst_t2_sweep(
    params: NoiseParams,
    t2_values: Sequence[float],
    design: GstDesign = GstDesign(),
    shots: int = 1000,
    seed: int = 0,
    resamples: int = 100,
    jobs: int = 1,
    mle_options: dict | None = None,
    cond_bound: float = 1e6,
) -> list[dict]:
    """Gauge-fixed GST at each T2, with analytic fidelities alongside (one row per T2)."""
    rows = []
    for i, t2 in enumerate(t2_values):
        p = params.replace(t2=float(t2))
        _, res = run_gst(p, design, shots, int(np.random.SeedSequence([seed, i]).generate_state(1)[0]),
                         resamples, jobs, mle_options, cond_bound)
        row = {"t2_s": float(t2), "analytic_fidelity": analytic_gate_fidelity(p)}
        for k, v in res.summary().items():
            row[k] = v
            row[f"ci95.{k}"] = res.ci95.get(k, float("nan"))
        rows.append(row)
    return rows
