"""Fixed-size complex linear algebra for two-qubit operators.

Every operator is a dense ``numpy`` array of dtype ``complex128``: shape
``(2, 2)`` for single-spin operators and ``(4, 4)`` for the two-spin
space.  Basis ordering is ``|00>, |01>, |10>, |11>`` with the left tensor
factor being qubit 1.

Rotation conventions used throughout the package::

    rotation(theta, phi) = exp(-i theta/2 (cos(phi) sx + sin(phi) sy))
    rz(alpha)            = exp(-i alpha/2 sz)
"""
from __future__ import annotations

import cmath
import math

import numpy as np

DEFAULT_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.complex128)
    a.flags.writeable = False
    return a


PAULI = {
    "I": _frozen([[1, 0], [0, 1]]),
    "X": _frozen([[0, 1], [1, 0]]),
    "Y": _frozen([[0, -1j], [1j, 0]]),
    "Z": _frozen([[1, 0], [0, -1]]),
}
I2 = PAULI["I"]
I4 = _frozen(np.eye(4))


def pauli_tensor(left: str, right: str) -> np.ndarray:
    """Return ``sigma_left (x) sigma_right`` for labels in ``{I, X, Y, Z}``."""
    try:
        a, b = PAULI[left.upper()], PAULI[right.upper()]
    except (KeyError, AttributeError):
        raise ValueError(f"invalid Pauli label pair ({left!r}, {right!r})") from None
    return np.kron(a, b)


def local(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Local two-qubit operator ``a (x) b``."""
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def exp_su2(a: float, b: float, c: float) -> np.ndarray:
    """Closed form of ``exp(i (a sx + b sy + c sz))``."""
    r = math.sqrt(a * a + b * b + c * c)
    if r < 1e-12:
        # first-order series; r**2 terms are below double precision here
        cr, sr = 1.0, 1.0
    else:
        cr, sr = math.cos(r), math.sin(r) / r
    return np.array(
        [[cr + 1j * sr * c, 1j * sr * (a - 1j * b)],
         [1j * sr * (a + 1j * b), cr - 1j * sr * c]],
        dtype=np.complex128,
    )


def exp_cartan(c1: float, c2: float, c3: float) -> np.ndarray:
    """Closed form of ``exp(i (c1 XX + c2 YY + c3 ZZ))``.

    XX, YY and ZZ commute.  On span{|00>, |11>} the generator reduces to
    ``c3 + (c1 - c2) sx`` and on span{|01>, |10>} to ``-c3 + (c1 + c2) sx``,
    so the exponential is a pair of 2x2 rotations.
    """
    u = np.zeros((4, 4), dtype=np.complex128)
    even = cmath.exp(1j * c3)
    odd = cmath.exp(-1j * c3)
    d, s = c1 - c2, c1 + c2
    u[0, 0] = u[3, 3] = even * math.cos(d)
    u[0, 3] = u[3, 0] = even * 1j * math.sin(d)
    u[1, 1] = u[2, 2] = odd * math.cos(s)
    u[1, 2] = u[2, 1] = odd * 1j * math.sin(s)
    return u


def rotation(theta: float, phi: float) -> np.ndarray:
    """Single-spin rotation by ``theta`` about the x-y plane axis at phase ``phi``."""
    h = theta / 2.0
    return exp_su2(-h * math.cos(phi), -h * math.sin(phi), 0.0)


def rz(alpha: float) -> np.ndarray:
    return np.diag([cmath.exp(-0.5j * alpha), cmath.exp(0.5j * alpha)])


def zz_evolution(tau: float) -> np.ndarray:
    """Free J-coupling evolution for ``tau`` in units of 1/J.

    The coupling term ``2 pi J sz(x)sz / 4`` integrated over ``tau / J``
    gives ``exp(-i pi tau/2 ZZ)``.
    """
    return exp_cartan(0.0, 0.0, -math.pi * tau / 2.0)


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` for Hermitian ``h`` via its eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(a))


def frobenius_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def _overlap(a: np.ndarray, b: np.ndarray) -> complex:
    """``tr(a^dagger b)``."""
    return complex(np.vdot(a, b))


def phase_invariant_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``min_phi ||a - exp(i phi) b||_F``.

    Equal to ``sqrt(2 d - 2 |tr(a^dagger b)|)`` for unitaries, but evaluated
    after aligning the phase so that near-coincident operators keep full
    precision instead of losing half the digits to the square root.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    ov = _overlap(b, a)
    mag = abs(ov)
    phase = ov / mag if mag > 0.0 else 1.0
    return float(np.linalg.norm(a - phase * b))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Gate fidelity ``|tr(a^dagger b)| / d``."""
    a = np.asarray(a)
    return min(1.0, abs(_overlap(a, b)) / a.shape[0])


def population_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Agreement of the population-transfer matrices ``|a_ij|^2`` and ``|b_ij|^2``.

    Column-averaged Bhattacharyya overlap; 1 iff both operators act
    identically on every diagonal (population-only) density matrix.
    """
    p = np.abs(np.asarray(a)) ** 2
    q = np.abs(np.asarray(b)) ** 2
    return float(np.sum(np.sqrt(p * q)) / p.shape[1])


def is_unitary(u: np.ndarray, tol: float = 1e-12) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(dagger(u) @ u - np.eye(u.shape[0]))) <= tol)


def is_hermitian(h: np.ndarray, tol: float = 1e-12) -> bool:
    h = np.asarray(h)
    return bool(np.max(np.abs(h - dagger(h))) <= tol)


def su2_normalize(u: np.ndarray) -> np.ndarray:
    """Scale a 2x2 unitary to determinant one."""
    u = np.asarray(u, dtype=np.complex128)
    return u / cmath.sqrt(np.linalg.det(u))


def so3_from_su2(u: np.ndarray) -> np.ndarray:
    """Bloch-sphere rotation ``R_ij = tr(s_i u s_j u^dagger) / 2`` of a 2x2 unitary."""
    sig = (PAULI["X"], PAULI["Y"], PAULI["Z"])
    ud = dagger(u)
    return np.array([[0.5 * np.trace(si @ u @ sj @ ud).real for sj in sig] for si in sig])


def local_factors(k: np.ndarray, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Split a local operator ``k = a (x) b`` into 2x2 unitaries.

    Both returned factors have unit determinant, so ``a (x) b`` equals
    ``k`` up to a global phase.  Raises ``ValueError`` when ``k`` is not a
    product operator.
    """
    k = np.asarray(k, dtype=np.complex128)
    # realignment: k[2i+p, 2j+q] = a[i, j] b[p, q]
    r = k.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(r)
    if s[1] > tol * max(s[0], 1.0):
        raise ValueError("operator is not a tensor product of single-qubit factors")
    a = u[:, 0].reshape(2, 2)
    b = vh[0, :].reshape(2, 2)
    return su2_normalize(a), su2_normalize(b)


def matrix_to_json(m: np.ndarray) -> list:
    """Row-major array of ``[re, im]`` pairs."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def matrix_from_json(data) -> np.ndarray:
    try:
        m = np.array([[complex(float(re), float(im)) for re, im in row] for row in data])
    except (TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix literal: {exc}") from None
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix literal must be square, got shape {m.shape}")
    return m
