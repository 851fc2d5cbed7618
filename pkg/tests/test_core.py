import numpy as np
import pytest
from hypothesis import given, strategies as st

from gatebench.core import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    FidelityWarning,
    apply_superop,
    avg_fidelity,
    choi_matrix,
    choi_min_eigenvalue,
    compose,
    devectorize,
    ent_fidelity,
    gate_unitary,
    is_cptp,
    is_density_matrix,
    is_povm,
    kraus_from_superop,
    label_superop,
    parse_label,
    random_density_matrix,
    random_unitary,
    superop_from_choi,
    superop_from_kraus,
    superop_from_unitary,
    tp_deviation,
    vectorize,
)
from gatebench.errors import (
    ConstraintViolationError,
    DimensionMismatchError,
    InvalidDimensionError,
    NonUnitaryError,
)

I2 = np.eye(2, dtype=complex)
BASIS = [np.outer(np.eye(2)[m], np.eye(2)[n]).astype(complex) for m in range(2) for n in range(2)]


def depolarizing_kraus(lam):
    q = 1 - lam
    return [np.sqrt(1 - 3 * q / 4) * I2] + [np.sqrt(q / 4) * s for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)]


def amplitude_damping_kraus(gamma):
    return [
        np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex),
    ]


seeds = st.integers(0, 2**32 - 1)


# vectorization ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "rho, expected",
    [
        (np.diag([1.0, 0.0]), [1, 0, 0, 0]),
        (np.eye(2) / 2, [0.5, 0, 0, 0.5]),
    ],
)
def test_vectorize_examples(rho, expected):
    np.testing.assert_array_equal(vectorize(rho), expected)


@given(seeds)
def test_vectorize_round_trip_exact(seed):
    r = np.random.default_rng(seed)
    m = r.standard_normal((2, 2)) + 1j * r.standard_normal((2, 2))
    assert np.array_equal(devectorize(vectorize(m)), m)


@pytest.mark.parametrize("shape", [(3, 3), (2, 3)])
def test_vectorize_rejects_bad_dimensions(shape):
    with pytest.raises(InvalidDimensionError):
        vectorize(np.zeros(shape))


def test_devectorize_rejects_non_square_length():
    with pytest.raises(InvalidDimensionError):
        devectorize(np.zeros(5))


# unitary superoperators -----------------------------------------------------------------


def test_identity_unitary_gives_identity_superop():
    np.testing.assert_array_equal(superop_from_unitary(I2), np.eye(4))


def test_bit_flip_maps_ground_to_excited():
    out = superop_from_unitary(SIGMA_X) @ vectorize(np.diag([1.0, 0.0]))
    np.testing.assert_allclose(devectorize(out), np.diag([0.0, 1.0]), atol=1e-15)


def test_rx90_matches_direct_conjugation_on_operator_basis():
    u = gate_unitary("X", np.pi / 2)
    g = superop_from_unitary(u)
    for c in BASIS:
        direct = u @ c @ u.conj().T
        np.testing.assert_allclose(devectorize(g @ vectorize(c)), direct, atol=1e-14)


def test_non_unitary_rejected():
    with pytest.raises(NonUnitaryError):
        superop_from_unitary(np.diag([1.0, 0.5]))


@given(seeds)
def test_unitary_superop_is_unitary(seed):
    g = superop_from_unitary(random_unitary(2, np.random.default_rng(seed)))
    np.testing.assert_allclose(g.conj().T @ g, np.eye(4), atol=1e-12)


@given(seeds)
def test_superop_homomorphism(seed):
    r = np.random.default_rng(seed)
    u, v = random_unitary(2, r), random_unitary(2, r)
    lhs = superop_from_unitary(u @ v)
    rhs = compose([superop_from_unitary(v), superop_from_unitary(u)])
    assert np.max(np.abs(lhs - rhs)) < 1e-12


# Kraus maps -----------------------------------------------------------------------------


def test_identity_kraus():
    np.testing.assert_allclose(superop_from_kraus([I2]), np.eye(4))


@given(seeds)
def test_single_kraus_equals_unitary_superop(seed):
    u = random_unitary(2, np.random.default_rng(seed))
    np.testing.assert_allclose(superop_from_kraus([u]), superop_from_unitary(u), atol=1e-14)


def test_amplitude_damping_matches_kraus_sum_oracle():
    ks = amplitude_damping_kraus(0.3)
    g = superop_from_kraus(ks)
    for c in BASIS:
        direct = sum(k @ c @ k.conj().T for k in ks)
        np.testing.assert_allclose(devectorize(g @ vectorize(c)), direct, atol=1e-15)


def test_non_trace_preserving_kraus_reports_deviation():
    with pytest.raises(ConstraintViolationError) as info:
        superop_from_kraus([0.9 * I2])
    assert info.value.deviation == pytest.approx(0.19)


@given(st.floats(0.0, 1.0), seeds)
def test_kraus_output_is_cptp(gamma, seed):
    u = random_unitary(2, np.random.default_rng(seed))
    ks = [u @ k for k in amplitude_damping_kraus(gamma)]
    g = superop_from_kraus(ks)
    assert choi_min_eigenvalue(g) >= -1e-9
    assert tp_deviation(g) <= 1e-9
    assert is_cptp(g)


@given(st.floats(0.0, 1.0), seeds)
def test_kraus_round_trip_through_choi(gamma, seed):
    u = random_unitary(2, np.random.default_rng(seed))
    g = superop_from_kraus([k @ u for k in amplitude_damping_kraus(gamma)])
    np.testing.assert_allclose(superop_from_kraus(kraus_from_superop(g)), g, atol=1e-12)
    np.testing.assert_allclose(superop_from_choi(choi_matrix(g)), g, atol=1e-15)


def test_choi_detects_transpose_map():
    # the transpose is positive and trace preserving but not completely positive
    t = np.zeros((4, 4))
    for m in range(2):
        for n in range(2):
            t[n * 2 + m, m * 2 + n] = 1
    assert tp_deviation(t) < 1e-15
    assert choi_min_eigenvalue(t) < -0.5
    assert not is_cptp(t)


# fidelities -----------------------------------------------------------------------------


@given(seeds)
def test_self_fidelity_is_one(seed):
    g = superop_from_unitary(random_unitary(2, np.random.default_rng(seed)))
    assert ent_fidelity(g, g) == pytest.approx(1.0, abs=1e-12)
    assert avg_fidelity(g, g) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("lam, f_ent, f_avg", [(0.9, 0.925, 0.95), (0.0, 0.25, 0.5), (1.0, 1.0, 1.0)])
def test_depolarizing_fidelities(lam, f_ent, f_avg):
    # Pauli-transfer diagonal (1, lam, lam, lam): Tr = 1 + 3 lam
    noisy = superop_from_kraus(depolarizing_kraus(lam))
    assert ent_fidelity(np.eye(4), noisy) == pytest.approx(f_ent, abs=1e-14)
    assert avg_fidelity(np.eye(4), noisy) == pytest.approx(f_avg, abs=1e-14)


@given(st.floats(0.0, 1.0))
def test_depolarizing_avg_fidelity_matches_rb_formula(lam):
    noisy = superop_from_kraus(depolarizing_kraus(lam))
    assert avg_fidelity(np.eye(4), noisy) == pytest.approx(lam + (1 - lam) / 2, abs=1e-14)


@given(seeds, st.floats(0.0, 1.0))
def test_avg_fidelity_conjugation_invariant(seed, gamma):
    r = np.random.default_rng(seed)
    ideal = superop_from_unitary(random_unitary(2, r))
    noisy = superop_from_kraus(amplitude_damping_kraus(gamma)) @ ideal
    w = superop_from_unitary(random_unitary(2, r))
    before = avg_fidelity(ideal, noisy)
    after = avg_fidelity(w @ ideal @ w.conj().T, w @ noisy @ w.conj().T)
    assert after == pytest.approx(before, abs=1e-12)


def test_fidelity_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        ent_fidelity(np.eye(4), np.eye(16))


def test_imaginary_residual_flagged():
    with pytest.warns(FidelityWarning):
        ent_fidelity(np.eye(4), np.diag([1, 1j, 1, 1]))


# composition and gates --------------------------------------------------------------------


def test_compose_examples():
    gx = superop_from_unitary(SIGMA_X)
    np.testing.assert_allclose(compose([gx, gx]), np.eye(4), atol=1e-15)
    rx90 = label_superop("X90")
    np.testing.assert_allclose(compose([rx90, rx90]), label_superop("X180"), atol=1e-14)


def test_compose_order_is_application_order():
    a, b = label_superop("X90"), label_superop("Y90")
    np.testing.assert_allclose(compose([a, b]), b @ a)


def test_compose_empty_and_mismatch():
    np.testing.assert_array_equal(compose([], dim=2), np.eye(4))
    with pytest.raises(DimensionMismatchError):
        compose([np.eye(4), np.eye(16)])


def test_gate_unitary_examples():
    np.testing.assert_allclose(gate_unitary("X", np.pi), -1j * SIGMA_X, atol=1e-15)
    theta = 0.37
    np.testing.assert_allclose(gate_unitary(np.pi / 2, theta), gate_unitary("Y", theta), atol=1e-15)
    np.testing.assert_array_equal(gate_unitary("I", 1.0), I2)


@given(st.floats(-2 * np.pi, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_gate_unitary_matches_matrix_exponential(theta, phi):
    from scipy.linalg import expm

    n = np.cos(phi) * SIGMA_X + np.sin(phi) * SIGMA_Y
    np.testing.assert_allclose(gate_unitary(phi, theta), expm(-0.5j * theta * n), atol=1e-12)


@pytest.mark.parametrize(
    "label, axis, angle", [("X90", "X", np.pi / 2), ("Y-90", "Y", -np.pi / 2), ("X180", "X", np.pi), ("I", "I", 0.0)]
)
def test_parse_label(label, axis, angle):
    assert parse_label(label) == (axis, pytest.approx(angle))


def test_parse_label_rejects_garbage():
    with pytest.raises(ValueError):
        parse_label("Z90x")


# state and POVM checks -------------------------------------------------------------------


@given(seeds)
def test_random_density_matrix_valid(seed):
    rho = random_density_matrix(2, np.random.default_rng(seed))
    assert is_density_matrix(rho)
    np.testing.assert_allclose(apply_superop(np.eye(4), rho), rho)


def test_povm_checks():
    assert is_povm([np.diag([0.99, 0.25]), np.diag([0.01, 0.75])])
    assert not is_povm([np.diag([1.0, 0.5]), np.diag([0.1, 0.5])])
