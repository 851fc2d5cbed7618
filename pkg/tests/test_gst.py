import numpy as np
import pytest
from hypothesis import given, strategies as st

from gatebench.analysis import analyze_gst
from gatebench.core import (
    SIGMA_X, SIGMA_Y, SIGMA_Z, is_cptp, is_density_matrix, is_povm, label_unitary,
    superop_from_kraus,
)
from gatebench.errors import GramSingularError, InvalidDesignError
from gatebench.gst import (
    GateSetEstimate,
    GstData,
    GstDesign,
    cptp_projection,
    frequency_table,
    generate_gst_circuits,
    gradient_check,
    linear_inversion,
    loglikelihood,
    mle_refine,
    to_manifold,
)
from gatebench.noise import NoiseParams, analytic_gate_fidelity
from gatebench.stiefel import orthonormality_error, polar_project, project_tangent, retract_qr

from conftest import exact_records

DESIGN = GstDesign()
CIRCUITS = generate_gst_circuits(DESIGN)
NOISY = NoiseParams(t1=0.1, t2=100e-6, gate_time=10e-6, p01=0.01, p10=0.25)


def exact_data(truth, shots=None):
    probs = truth.predict(CIRCUITS)
    if shots is None:
        return exact_records(CIRCUITS, probs)
    return GstData.from_probabilities(CIRCUITS, probs, shots)


def depolarized(lam):
    q = 1 - lam
    kraus = [np.sqrt(1 - 3 * q / 4) * np.eye(2)] + [np.sqrt(q / 4) * s for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)]
    dep = superop_from_kraus(kraus)
    ideal = GateSetEstimate.ideal()
    return ideal.copy(gates={k: dep @ g for k, g in ideal.gates.items()})


def sorted_spectrum(g):
    ev = np.linalg.eigvals(g)
    return ev[np.lexsort((np.round(ev.imag, 8), np.round(ev.real, 8)))]


def random_gauge(rng):
    """Small invertible perturbation of the identity that keeps the trace functional."""
    t = np.eye(4, dtype=complex)
    t[1:, :] += 0.05 * (rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4)))
    return t


# design -----------------------------------------------------------------------------------


def test_circuit_count_matches_enumeration():
    fids = DESIGN.fiducials
    processes = [(g,) for g in DESIGN.gate_labels] + [f for f in fids if f] + [()]
    processes += [germ * p for germ in DESIGN.germs for p in range(1, DESIGN.max_reps + 1)]
    enumerated = {tuple(fj) + proc + tuple(fi) for proc in processes for fi in fids for fj in fids}
    labels = [c.labels for c in CIRCUITS]
    assert len(CIRCUITS) == DESIGN.circuit_count() == 192
    assert set(labels) <= enumerated
    assert len(labels) == len(processes) * len(fids) ** 2


def test_longest_germ_power():
    germs = [c for c in CIRCUITS if c.tag[0] == "germ" and c.tag[-1] == 3]
    assert germs and all(len(c.layers) == 6 for c in germs)


def test_identity_slot_is_gram_matrix():
    params = NoiseParams.noiseless()
    tables = frequency_table(exact_data(GateSetEstimate.from_noise(params)), DESIGN)
    gram = tables[("identity",)]
    for i, fi in enumerate(DESIGN.fiducials):
        for j, fj in enumerate(DESIGN.fiducials):
            psi = np.array([1, 0], dtype=complex)
            for lab in fj + fi:
                psi = label_unitary(lab) @ psi
            assert gram[i, j] == pytest.approx(abs(psi[0]) ** 2, abs=1e-12)


@pytest.mark.parametrize(
    "design",
    [
        GstDesign(includes_identity_slot=False),
        GstDesign(max_reps=0),
        GstDesign(fiducials=(("X90",), ())),
        GstDesign(germs=(("Z90",),)),
    ],
)
def test_invalid_designs(design):
    with pytest.raises(InvalidDesignError):
        generate_gst_circuits(design)


def test_singular_fiducials():
    design = GstDesign(fiducials=((), ("X90",), ("X90", "X90"), ("X90", "X90", "X90")))
    circs = generate_gst_circuits(design)
    truth = GateSetEstimate.ideal()
    tables = frequency_table(exact_records(circs, truth.predict(circs)), design)
    with pytest.raises(GramSingularError):
        linear_inversion(tables, design)


# linear inversion -------------------------------------------------------------------------


def test_linear_inversion_noiseless_is_exact():
    ideal = GateSetEstimate.ideal()
    est = linear_inversion(frequency_table(exact_data(ideal), DESIGN), DESIGN)
    for lab in DESIGN.gate_labels:
        np.testing.assert_allclose(est.gates[lab], ideal.gates[lab], atol=1e-10)
    np.testing.assert_allclose(est.rho, ideal.rho, atol=1e-10)
    np.testing.assert_allclose(est.povm[0], ideal.povm[0], atol=1e-10)


@pytest.mark.parametrize("truth_kind", ["noisy", "depolarized", "gauged"])
def test_linear_inversion_reproduces_gauge_invariants(truth_kind):
    rng = np.random.default_rng(3)
    truth = {
        "noisy": GateSetEstimate.from_noise(NOISY),
        "depolarized": depolarized(0.98),
        "gauged": GateSetEstimate.from_noise(NOISY).transform(random_gauge(rng)),
    }[truth_kind]
    est = linear_inversion(frequency_table(exact_data(truth), DESIGN), DESIGN)
    # every prediction, including germ circuits unused by the inversion
    np.testing.assert_allclose(est.predict(CIRCUITS), truth.predict(CIRCUITS), atol=1e-10)
    for lab in DESIGN.gate_labels:
        np.testing.assert_allclose(
            sorted_spectrum(est.gates[lab]),
            sorted_spectrum(truth.gates[lab]),
            atol=1e-9,
        )


def test_depolarized_gauge_fixed_fidelity():
    # the inversion frame is off by the fiducial noise; the canonical frame is not
    res = analyze_gst(exact_data(depolarized(0.97)), DESIGN, resamples=0)
    for f in res.canonical.fidelities().values():
        assert f == pytest.approx((1 + 0.97) / 2, abs=1e-4)


def test_gauge_action_preserves_predictions():
    rng = np.random.default_rng(0)
    truth = GateSetEstimate.from_noise(NOISY)
    moved = truth.transform(random_gauge(rng))
    np.testing.assert_allclose(moved.predict(CIRCUITS), truth.predict(CIRCUITS), atol=1e-12)


# MLE --------------------------------------------------------------------------------------

INTERIOR = NoiseParams(t1=0.01, t2=300e-6, gate_time=10e-6, p01=0.05, p10=0.2, prep_error=0.02)


@pytest.mark.parametrize("rank", [1, 2, 4])
def test_gradient_matches_finite_differences(rank):
    data = exact_data(GateSetEstimate.from_noise(NOISY), shots=1000)
    err = gradient_check(data, GateSetEstimate.from_noise(INTERIOR), rank=rank, seed=rank)
    assert err <= 1e-5


@pytest.fixture(scope="module")
def sampled():
    from gatebench.gst import simulate_gst

    records = simulate_gst(CIRCUITS, GateSetEstimate.from_noise(NOISY), 1000, seed=5)
    li = linear_inversion(frequency_table(records, DESIGN), DESIGN)
    return records, li, mle_refine(li, records)


def test_mle_trace_monotone_and_physical(sampled):
    records, li, mle = sampled
    trace = np.array(mle.diagnostics["loglik_trace"])
    assert np.all(np.diff(trace) >= -1e-9)
    assert mle.diagnostics["status"] == "converged"
    for g in mle.gates.values():
        assert is_cptp(g)
    assert is_density_matrix(mle.rho_matrix())
    assert is_povm(mle.povm_matrices())


def test_mle_beats_projected_linear_inversion(sampled):
    records, li, mle = sampled
    assert mle.loglik >= loglikelihood(cptp_projection(li), records) - 1e-9
    assert mle.loglik == pytest.approx(loglikelihood(mle, records), rel=1e-12)


def test_rank_one_mle_is_unitary_and_no_better(sampled):
    records, li, mle = sampled
    r1 = mle_refine(li, records, rank=1)
    for g in r1.gates.values():
        assert abs(abs(np.linalg.det(g)) - 1) < 1e-9
    assert r1.loglik <= mle.loglik + 1e-6


def test_fix_spam_keeps_initial_spam(sampled):
    records, li, _ = sampled
    out = mle_refine(li, records, fix_spam=True, max_iters=50)
    start = cptp_projection(li)
    np.testing.assert_allclose(out.rho, start.rho, atol=1e-12)
    np.testing.assert_allclose(out.povm[0], start.povm[0], atol=1e-12)


def test_invalid_rank():
    with pytest.raises(ValueError):
        mle_refine(GateSetEstimate.ideal(), exact_data(GateSetEstimate.ideal()), rank=5)


def test_noiseless_end_to_end():
    res = analyze_gst(exact_data(GateSetEstimate.ideal()), DESIGN, resamples=0)
    for f in res.canonical.fidelities().values():
        assert f == pytest.approx(1.0, abs=1e-8)
    p01, p10 = res.canonical.readout_errors()
    assert abs(p01) < 1e-8 and abs(p10) < 1e-8


def test_exact_noisy_data_recovers_truth():
    truth = GateSetEstimate.from_noise(NOISY)
    res = analyze_gst(exact_data(truth), DESIGN, resamples=0)
    # predictions are gauge invariant; fidelities only up to the non-unitary gauge freedom
    np.testing.assert_allclose(res.mle.predict(CIRCUITS), truth.predict(CIRCUITS), atol=5e-5)
    for f in res.canonical.fidelities().values():
        assert f == pytest.approx(analytic_gate_fidelity(NOISY), abs=1e-3)
    p01, p10 = res.canonical.readout_errors()
    assert p01 == pytest.approx(NOISY.p01, abs=5e-3)
    assert p10 == pytest.approx(NOISY.p10, abs=5e-3)


# Stiefel geometry -------------------------------------------------------------------------


def test_retraction_stays_on_manifold():
    rng = np.random.default_rng(1)
    v = polar_project(rng.standard_normal((8, 2)) + 1j * rng.standard_normal((8, 2)))
    for _ in range(10_000):
        xi = project_tangent(v, 0.1 * (rng.standard_normal(v.shape) + 1j * rng.standard_normal(v.shape)))
        v = retract_qr(v, xi)
    assert orthonormality_error(v) <= 1e-12


@given(st.integers(0, 2**31), st.sampled_from([(4, 1), (4, 2), (8, 2), (16, 2)]))
def test_tangent_projection(seed, shape):
    rng = np.random.default_rng(seed)
    v = polar_project(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    xi = project_tangent(v, g)
    skew = v.conj().T @ xi
    np.testing.assert_allclose(skew + skew.conj().T, 0, atol=1e-12)
    np.testing.assert_allclose(project_tangent(v, xi), xi, atol=1e-12)


def test_manifold_point_of_noise_model_is_cptp():
    point = to_manifold(GateSetEstimate.from_noise(NOISY))
    for v in point.values():
        assert orthonormality_error(v) <= 1e-12
