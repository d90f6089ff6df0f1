"""Two-spin NMR simulation: propagators, thermal and pseudopure states, readout.

Units: ``J`` in Hz, pulse widths in seconds, delays in units of 1/J.  The
coupling Hamiltonian is ``(pi J / 2) ZZ`` in rad/s, so a delay of ``tau``
(in 1/J) is ``exp(-i pi tau/2 ZZ)``.  Qubit 1 (the left tensor factor,
carbon) is driven by channel 2; qubit 2 (hydrogen) by channel 1.

Evolution is unitary: relaxation is not modelled.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import compiler, qmat, targets

_ZZ = qmat.pauli_tensor("Z", "Z")


@dataclass(frozen=True)
class MachineConfig:
    J: float = 215.5
    pi2_duration: float = 25e-6
    gamma_ratio: float = 3.98

    def __post_init__(self):
        if not self.J > 0:
            raise ValueError("J must be positive")
        if not self.pi2_duration >= 0:
            raise ValueError("pi2_duration must be non-negative")
        if not self.gamma_ratio > 0:
            raise ValueError("gamma_ratio must be positive")

    @property
    def ideal(self) -> bool:
        return self.pi2_duration == 0

    def with_width(self, pi2_duration: float) -> "MachineConfig":
        return MachineConfig(self.J, pi2_duration, self.gamma_ratio)


@dataclass(frozen=True, eq=False)
class DeviationState:
    """Traceless Hermitian part of the density matrix (arbitrary units)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.shape != (4, 4):
            raise ValueError("deviation state must be 4x4")
        scale = max(1.0, float(np.max(np.abs(m))))
        if not qmat.is_hermitian(m, tol=1e-12 * scale) or abs(np.trace(m)) > 1e-12 * scale:
            raise ValueError("deviation state must be Hermitian and traceless")
        object.__setattr__(self, "matrix", m)

    def evolve(self, u: np.ndarray) -> "DeviationState":
        m = u @ self.matrix @ qmat.dagger(u)
        return DeviationState(0.5 * (m + qmat.dagger(m)))

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()


# ---------------------------------------------------------------- propagators

def _drive(rot: compiler.Rotation, omega1: float) -> np.ndarray:
    return 0.5 * omega1 * (math.cos(rot.phi) * qmat.PAULI["X"] + math.sin(rot.phi) * qmat.PAULI["Y"])


def _pulse_propagator(event: compiler.PulseEvent, config: MachineConfig) -> np.ndarray:
    """Constant-amplitude pulse(s) with the coupling switched on throughout.

    Both channels start together; when their lengths differ the shorter
    drive stops first and the remainder runs with one drive only.
    """
    omega1 = (math.pi / 2.0) / config.pi2_duration
    hj = 0.5 * math.pi * config.J * _ZZ
    pieces = []
    for ch in (1, 2):
        rot = event.rotation(ch)
        if rot is not None:
            pieces.append((rot.theta / omega1, ch, _drive(rot, omega1)))
    pieces.sort(key=lambda p: p[0])
    u = np.eye(4, dtype=np.complex128)
    elapsed = 0.0
    for k, (end, _, _) in enumerate(pieces):
        dt = end - elapsed
        if dt <= 0:
            continue
        h = hj.copy()
        for _, ch, hd in pieces[k:]:
            h = h + (qmat.local(qmat.I2, hd) if ch == 1 else qmat.local(hd, qmat.I2))
        u = qmat.expm_hermitian(h, dt) @ u
        elapsed = end
    return u


def propagator(program: compiler.PulseProgram, config: MachineConfig,
               include_frame: bool = True) -> np.ndarray:
    """Time-ordered propagator; ideal delta pulses when ``pi2_duration == 0``."""
    if config.ideal:
        return program.unitary(include_frame)
    u = np.eye(4, dtype=np.complex128)
    for e in program.events:
        if e.kind == "delay":
            u = qmat.zz_evolution(float(e.duration)) @ u
        else:
            u = _pulse_propagator(e, config) @ u
    if include_frame:
        u = program.frame_unitary() @ u
    return u


def duration(program: compiler.PulseProgram, config: MachineConfig) -> float:
    """Wall-clock length in seconds (simultaneous pulses take the longer width)."""
    total = 0.0
    per_rad = config.pi2_duration / (math.pi / 2.0)
    for e in program.events:
        if e.kind == "delay":
            total += float(e.duration) / config.J
        else:
            total += max(r.theta for r in (e.ch1, e.ch2) if r is not None) * per_rad
    return total


# ---------------------------------------------------------------- states

def thermal_state(config: MachineConfig) -> DeviationState:
    """``a ZI + b IZ`` with ``b/a = gamma_ratio``, scaled to a largest diagonal entry of 1."""
    a, b = 1.0, config.gamma_ratio
    m = a * qmat.pauli_tensor("Z", "I") + b * qmat.pauli_tensor("I", "Z")
    return DeviationState(m / (a + b))


def pseudopure(i: int, j: int, lam: float = 1.0) -> DeviationState:
    """``lam (|ij><ij| - I/4)``."""
    m = -0.25 * np.eye(4, dtype=np.complex128)
    m[2 * i + j, 2 * i + j] += 1.0
    return DeviationState(lam * m)


def temporal_average(programs, config: MachineConfig,
                     state: DeviationState | None = None) -> DeviationState:
    """Average of the three experiments of a cyclic-permutation preparation.

    ``programs`` is either three programs (for ``U``, ``U U_cp``,
    ``U U_cp^2``) or a single program, which is then composed with the
    ideal ``U_cp^k`` applied first.
    """
    state = state or thermal_state(config)
    if isinstance(programs, compiler.PulseProgram):
        base = propagator(programs, config)
        unitaries = [base @ targets.cyclic_permutation(k) for k in range(3)]
    else:
        programs = list(programs)
        if len(programs) != 3:
            raise ValueError("temporal averaging needs one or three programs")
        unitaries = [propagator(p, config) for p in programs]
    return average_unitaries(unitaries, state)


def average_unitaries(unitaries, state: DeviationState) -> DeviationState:
    """``mean_k U_k state U_k^dagger``."""
    unitaries = list(unitaries)
    m = sum(state.evolve(u).matrix for u in unitaries) / len(unitaries)
    return DeviationState(m)


# ---------------------------------------------------------------- readout

@dataclass
class PeakReport:
    """Signed line amplitudes; ``carbon[j]`` is the carbon line with hydrogen in ``|j>``."""

    carbon: tuple[float, float]
    hydrogen: tuple[float, float]
    populations: tuple[float, float, float, float]
    dominant: str

    def to_json(self) -> dict:
        return asdict(self)


def readout(state: DeviationState) -> PeakReport:
    p = state.populations
    carbon = (float(p[0] - p[2]), float(p[1] - p[3]))
    hydrogen = (float(p[0] - p[1]), float(p[2] - p[3]))
    k = int(np.argmax(p))
    return PeakReport(carbon, hydrogen, tuple(float(x) for x in p), f"{k >> 1}{k & 1}")


def purity(state: DeviationState, i: int, j: int) -> float:
    """Cosine overlap of ``state`` with the ideal pseudopure ``|ij>`` shape (1 is perfect)."""
    ref = pseudopure(i, j).matrix
    num = float(np.real(np.vdot(ref, state.matrix)))
    den = float(np.linalg.norm(ref) * np.linalg.norm(state.matrix))
    return num / den if den > 0 else 0.0


def unwanted_amplitude(state: DeviationState, i: int, j: int) -> float:
    """Magnitude of the carbon line that must vanish for the pure ``|ij>`` state."""
    return abs(readout(state).carbon[1 - j])


# ---------------------------------------------------------------- comparisons

@dataclass
class SeriesPoint:
    fidelity: float
    purity: float
    unwanted: float
    main: float


@dataclass
class ComparisonReport:
    target: tuple[int, int]
    config: MachineConfig
    widths: list[float] = field(default_factory=list)
    optimal: list[SeriesPoint] = field(default_factory=list)
    conventional: list[SeriesPoint] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "target": list(self.target),
            "config": asdict(self.config),
            "rows": [
                {"pi2_duration": w, "optimal": asdict(o), "conventional": asdict(c)}
                for w, o, c in zip(self.widths, self.optimal, self.conventional)
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ("fidelity", "purity", "unwanted", "main")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["pi2_us"] + [f"{s}_{c}" for s in ("optimal", "conventional") for c in cols])
        for w, o, c in zip(self.widths, self.optimal, self.conventional):
            writer.writerow([repr(w * 1e6)] + [repr(getattr(p, k)) for p in (o, c) for k in cols])
        return buf.getvalue()


def program_fidelity(program: compiler.PulseProgram, config: MachineConfig) -> float:
    """Phase-invariant fidelity of the finite-width propagator against the ideal one."""
    return qmat.fidelity(propagator(program, config), program.unitary())


def _point(programs, config: MachineConfig, target) -> SeriesPoint:
    state = temporal_average(programs, config)
    i, j = target
    fid = float(np.mean([program_fidelity(p, config) for p in programs]))
    return SeriesPoint(fid, purity(state, i, j), unwanted_amplitude(state, i, j),
                       readout(state).carbon[j])


def _grid_point(args):
    optimal, conventional, config, target = args
    return _point(optimal, config, target), _point(conventional, config, target)


def compare_sequences(optimal, conventional, widths, config: MachineConfig | None = None,
                      target: tuple[int, int] = (1, 0), workers: int = 1) -> ComparisonReport:
    """Temporal-averaged figures of merit for two program triples over pulse widths."""
    config = config or MachineConfig()
    optimal, conventional = list(optimal), list(conventional)
    widths = [float(w) for w in widths]
    jobs = [(optimal, conventional, config.with_width(w), target) for w in widths]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_grid_point, jobs))
    else:
        points = [_grid_point(j) for j in jobs]
    report = ComparisonReport(tuple(target), config, widths)
    for o, c in points:
        report.optimal.append(o)
        report.conventional.append(c)
    return report


def preset_triples(literal: bool = False):
    """``(optimal, conventional)`` program triples for the ``|10>`` search.

    ``literal`` selects the uncorrected composite conventional rows
    instead of their executable versions.
    """
    names = compiler.PRESET_NAMES
    optimal = [compiler.optimal_preset(n) for n in names]
    conventional = [compiler.conventional_preset(n, literal=literal) for n in names]
    return optimal, conventional
