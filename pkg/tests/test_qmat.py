import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from nmrcartan import qmat

angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
small = st.floats(-3.0, 3.0, allow_nan=False)


def random_unitary(rng, n=4):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_pauli_algebra():
    x, y, z = (qmat.PAULI[k] for k in "XYZ")
    assert np.allclose(x @ y, 1j * z)
    assert np.allclose(y @ z, 1j * x)
    assert np.allclose(z @ x, 1j * y)
    for p in (x, y, z):
        assert np.allclose(p @ p, qmat.I2)


def test_pauli_tensor_is_kron():
    assert np.array_equal(qmat.pauli_tensor("Z", "X"), np.kron(qmat.PAULI["Z"], qmat.PAULI["X"]))
    assert np.array_equal(qmat.pauli_tensor("i", "i"), qmat.I4)


def test_pauli_tensor_rejects_bad_label():
    with pytest.raises(ValueError):
        qmat.pauli_tensor("Q", "X")


def test_constants_are_read_only():
    with pytest.raises(ValueError):
        qmat.PAULI["X"][0, 0] = 5


@given(small, small, small)
def test_exp_su2_matches_expm(a, b, c):
    h = a * qmat.PAULI["X"] + b * qmat.PAULI["Y"] + c * qmat.PAULI["Z"]
    assert np.allclose(qmat.exp_su2(a, b, c), expm(1j * h), atol=1e-12)


def test_exp_su2_near_zero():
    assert np.allclose(qmat.exp_su2(1e-14, 0, 0), qmat.I2 + 1e-14j * qmat.PAULI["X"], atol=1e-20)


@given(small, small, small)
def test_exp_cartan_matches_expm(c1, c2, c3):
    h = sum(c * qmat.pauli_tensor(p, p) for c, p in zip((c1, c2, c3), "XYZ"))
    assert np.allclose(qmat.exp_cartan(c1, c2, c3), expm(1j * h), atol=1e-12)


def test_rotation_convention():
    assert np.allclose(qmat.rotation(math.pi / 2, 0.0), expm(-1j * math.pi / 4 * qmat.PAULI["X"]))
    assert np.allclose(qmat.rotation(math.pi, math.pi / 2), -1j * qmat.PAULI["Y"])
    assert np.allclose(qmat.rz(0.7), expm(-0.35j * qmat.PAULI["Z"]))


def test_zz_evolution_half():
    assert np.allclose(qmat.zz_evolution(0.5), expm(-1j * math.pi / 4 * qmat.pauli_tensor("Z", "Z")))


def test_expm_hermitian():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = a + a.conj().T
    assert np.allclose(qmat.expm_hermitian(h, 0.3), expm(-0.3j * h), atol=1e-12)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), angles)
def test_phase_invariant_distance_ignores_global_phase(seed, phi):
    u = random_unitary(np.random.default_rng(seed))
    assert qmat.phase_invariant_distance(u, cmath.exp(1j * phi) * u) < 1e-12
    assert qmat.frobenius_distance(u, u) == 0.0


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_phase_invariant_distance_closed_form(seed):
    rng = np.random.default_rng(seed)
    a, b = random_unitary(rng), random_unitary(rng)
    closed = math.sqrt(max(0.0, 8.0 - 2.0 * abs(np.trace(a.conj().T @ b))))
    d = qmat.phase_invariant_distance(a, b)
    assert d == pytest.approx(closed, abs=1e-7)
    assert d == pytest.approx(qmat.phase_invariant_distance(b, a), abs=1e-12)
    assert d <= qmat.frobenius_distance(a, b) + 1e-12


def test_phase_invariant_distance_keeps_precision():
    u = random_unitary(np.random.default_rng(0))
    v = u @ expm(1e-11j * qmat.pauli_tensor("X", "Y"))
    assert 1e-12 < qmat.phase_invariant_distance(u, v) < 1e-10


def test_fidelity_bounds():
    rng = np.random.default_rng(4)
    u, v = random_unitary(rng), random_unitary(rng)
    assert qmat.fidelity(u, 1j * u) == pytest.approx(1.0)
    assert 0.0 <= qmat.fidelity(u, v) <= 1.0


def test_population_fidelity():
    u = random_unitary(np.random.default_rng(5))
    d = np.diag(np.exp(1j * np.arange(4)))
    assert qmat.population_fidelity(u, d @ u @ d) == pytest.approx(1.0)
    assert qmat.population_fidelity(qmat.I4, qmat.pauli_tensor("X", "X")) == pytest.approx(0.0)


def test_unitary_and_hermitian_checks():
    assert qmat.is_unitary(qmat.exp_cartan(0.1, 0.2, 0.3))
    assert not qmat.is_unitary(2 * qmat.I4)
    assert not qmat.is_unitary(np.ones((2, 3)))
    assert qmat.is_hermitian(qmat.pauli_tensor("Y", "Z"))
    assert not qmat.is_hermitian(1j * qmat.I4)


@given(small, small, small, small, small, small, angles)
def test_local_factors_roundtrip(a, b, c, d, e, f, phi):
    left, right = qmat.exp_su2(a, b, c), qmat.exp_su2(d, e, f)
    k = cmath.exp(1j * phi) * qmat.local(left, right)
    fa, fb = qmat.local_factors(k)
    assert abs(np.linalg.det(fa) - 1) < 1e-9 and abs(np.linalg.det(fb) - 1) < 1e-9
    assert qmat.phase_invariant_distance(qmat.local(fa, fb), k) < 1e-9


def test_local_factors_rejects_entangling():
    with pytest.raises(ValueError):
        qmat.local_factors(qmat.zz_evolution(0.5))


def test_so3_of_x_pulse():
    r = qmat.so3_from_su2(qmat.rotation(math.pi / 2, 0.0))
    # +90 degrees about x takes y to z
    assert np.allclose(r @ [0, 1, 0], [0, 0, 1])


def test_matrix_json_roundtrip():
    u = random_unitary(np.random.default_rng(6))
    assert np.array_equal(qmat.matrix_from_json(qmat.matrix_to_json(u)), u)
    with pytest.raises(ValueError):
        qmat.matrix_from_json([[1, 2]])
    with pytest.raises(ValueError):
        qmat.matrix_from_json([[[1, 0], [0, 0]]] * 3)
