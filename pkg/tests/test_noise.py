import math

import numpy as np
import pytest
from hypothesis import example, given, strategies as st

from gatebench.core import avg_fidelity, gate_unitary, kraus_deviation, superop_from_unitary, vectorize, devectorize
from gatebench.errors import InvalidDistributionError, UnphysicalParametersError
from gatebench.noise import (
    NoiseParams,
    ReadoutModel,
    analytic_gate_fidelity,
    apply_readout,
    gate_superops,
    initial_state,
    measurement_effects,
    noisy_gate,
    relaxation_kraus,
    relaxation_superop,
)

REFERENCE = NoiseParams(t1=100e-3, t2=600e-6, gate_time=10e-6, p01=0.01, p10=0.25)
PLUS = np.full((2, 2), 0.5, dtype=complex)


def evolve(params, rho):
    return sum(k @ rho @ k.conj().T for k in relaxation_kraus(params))


def bloch_fidelity(t, t1, t2):
    # average fidelity of the relaxation channel: Pauli-transfer diagonal (1, e^-t/T2, e^-t/T2, e^-t/T1)
    return (3 + 2 * math.exp(-t / t2) + math.exp(-t / t1)) / 6


times = st.floats(1e-6, 1.0)


@st.composite
def physical_params(draw):
    t1 = draw(st.floats(1e-5, 1.0))
    t2 = draw(st.floats(1e-6, 2.0)) * t1
    gate_time = draw(st.floats(0.0, 1e-3))
    return NoiseParams(t1=t1, t2=min(t2, 2 * t1), gate_time=gate_time)


@pytest.mark.parametrize(
    "kw",
    [
        dict(t1=0.0),
        dict(t2=-1.0),
        dict(t1=1e-3, t2=3e-3),
        dict(p01=1.5),
        dict(p10=-0.1),
        dict(gate_time=-1e-6),
    ],
)
def test_unphysical_params_rejected(kw):
    with pytest.raises(UnphysicalParametersError):
        NoiseParams(**kw)


def test_zero_gate_time_gives_identity():
    ks = relaxation_kraus(REFERENCE.replace(gate_time=0.0))
    assert len(ks) == 1
    np.testing.assert_allclose(ks[0], np.eye(2))
    np.testing.assert_allclose(noisy_gate("X", np.pi / 2, REFERENCE.replace(gate_time=0.0)),
                               superop_from_unitary(gate_unitary("X", np.pi / 2)), atol=1e-15)


@given(st.floats(1e-6, 1e-2), st.floats(1e-7, 1e-3))
def test_pure_dephasing_coherence_factor(t2, gate_time):
    p = NoiseParams(t2=t2, gate_time=gate_time)
    out = evolve(p, PLUS)
    assert out[0, 1].real == pytest.approx(0.5 * math.exp(-gate_time / t2), rel=1e-12)
    assert out[0, 0].real == pytest.approx(0.5, abs=1e-15)


@given(physical_params())
@example(NoiseParams(t1=1e-5, t2=2e-5, gate_time=6e-4))  # t >> T1
def test_bloch_equation_solution(p):
    t = p.gate_time
    out = evolve(p, PLUS)
    assert out[0, 1].real == pytest.approx(0.5 * math.exp(-t / p.t2), rel=1e-10, abs=1e-15)
    excited = evolve(p, np.diag([0.0, 1.0]).astype(complex))
    assert excited[1, 1].real == pytest.approx(math.exp(-t / p.t1), rel=1e-10, abs=1e-15)


def test_t2_at_twice_t1_is_pure_amplitude_damping():
    p = NoiseParams(t1=1e-3, t2=2e-3, gate_time=1e-4)
    ks = relaxation_kraus(p)
    gamma = 1 - math.exp(-1e-4 / 1e-3)
    expected = [np.array([[1, 0], [0, math.sqrt(1 - gamma)]]), np.array([[0, math.sqrt(gamma)], [0, 0]])]
    assert len(ks) == 2
    for k, e in zip(ks, expected):
        np.testing.assert_allclose(k, e, atol=1e-15)


@given(physical_params())
def test_relaxation_kraus_trace_preserving(p):
    assert kraus_deviation(relaxation_kraus(p)) <= 1e-10


@given(physical_params())
def test_analytic_fidelity_matches_bloch_oracle(p):
    assert analytic_gate_fidelity(p) == pytest.approx(bloch_fidelity(p.gate_time, p.t1, p.t2), abs=1e-13)


def test_reference_point_fidelity():
    # T1 = 100 ms, T2 = 600 us, 10 us gates
    expected = bloch_fidelity(10e-6, 100e-3, 600e-6)
    f = avg_fidelity(superop_from_unitary(gate_unitary("X", np.pi / 2)), noisy_gate("X", np.pi / 2, REFERENCE))
    assert f == pytest.approx(expected, abs=1e-13)
    assert analytic_gate_fidelity(REFERENCE) == pytest.approx(expected, abs=1e-13)


def test_identity_gate_fidelity_monotone_in_t2():
    t2s = np.linspace(100e-6, 1000e-6, 10)
    fids = [avg_fidelity(np.eye(4), noisy_gate("I", 0.0, REFERENCE.replace(t2=t2))) for t2 in t2s]
    assert all(f < 1 for f in fids)
    assert np.all(np.diff(fids) > 0)


def test_fidelity_monotone_in_gate_time():
    times_ = np.linspace(0.0, 50e-6, 26)
    fids = [analytic_gate_fidelity(REFERENCE.replace(gate_time=t)) for t in times_]
    assert fids[0] == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.diff(fids) < 0)


@pytest.mark.parametrize(
    "probs, p01, p10, expected",
    [
        ((1.0, 0.0), 0.01, 0.0, (0.99, 0.01)),
        ((0.0, 1.0), 0.0, 0.25, (0.25, 0.75)),
        ((0.5, 0.5), 0.0, 0.0, (0.5, 0.5)),
    ],
)
def test_apply_readout_examples(probs, p01, p10, expected):
    np.testing.assert_allclose(apply_readout(probs, ReadoutModel.from_flips(p01, p10)), expected)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_apply_readout_preserves_simplex(p0, p01, p10):
    out = apply_readout((p0, 1 - p0), ReadoutModel.from_flips(p01, p10))
    assert out.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(out >= 0) and np.all(out <= 1 + 1e-15)


def test_confusion_rows_sum_to_one():
    conf = ReadoutModel.from_flips(0.013, 0.27).confusion
    np.testing.assert_array_equal(conf.sum(axis=1), [1.0, 1.0])


@pytest.mark.parametrize("bad", [(-0.1, 1.1), (0.3, 0.3), (1.0, 0.0, 0.0)])
def test_apply_readout_rejects_invalid(bad):
    with pytest.raises(InvalidDistributionError):
        apply_readout(bad, ReadoutModel())


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_noisy_povm_equals_confusion(p_true0, p01, p10, eps):
    # measuring diag(p, 1-p) through the effects reproduces the confusion matrix action
    params = NoiseParams(p01=p01, p10=p10, prep_error=eps)
    rho = vectorize(np.diag([p_true0, 1 - p_true0]))
    probs = [np.vdot(e, rho).real for e in measurement_effects(params)]
    np.testing.assert_allclose(probs, apply_readout((p_true0, 1 - p_true0), params.readout()), atol=1e-14)
    np.testing.assert_allclose(devectorize(initial_state(params)), np.diag([1 - eps, eps]))


def test_gate_superops_share_noise():
    gates = gate_superops(["X90", "Y90", "X90"], REFERENCE)
    assert list(gates) == ["X90", "Y90"]
    relax = relaxation_superop(REFERENCE)
    np.testing.assert_allclose(gates["Y90"], relax @ superop_from_unitary(gate_unitary("Y", np.pi / 2)))
