"""Pulse programs for a two-spin system driven by x-y plane RF pulses.

A program is a time-ordered list of events.  A pulse event rotates one or
both channels about an axis in the x-y plane; a delay event is free
evolution under the always-on ZZ coupling.  Channel 1 drives the right
tensor factor and channel 2 the left one.

Rotations are stored in degrees so that text and JSON round-trips are
exact.  ``z`` rotations are never emitted as pulses: by default they are
tracked as a per-channel phase frame that shifts the phase of later pulses
and is reported as a trailing virtual ``Z(deg)`` token.

Text format, one line per channel::

    1: -X -(1/2J)-Xm-Ym-
    2: ----(1/2J)-Ym-Ym-

Tokens that start in the same column are simultaneous.  ``X``, ``Xm``,
``Y``, ``Ym`` are pi/2 pulses about +x, -x, +y, -y; ``Pi(p)`` is a pi pulse
with phase ``p`` degrees; ``P(f,p)`` is a general pulse; ``(k/4J)`` is a
delay in units of 1/J and ``Z(a)`` a virtual frame rotation.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial.transform import Rotation as _SO3

from . import cartan, qmat

SNAP_DEG = 1e-6
TIME_SNAP = 1e-6
EULER_TOL = 1e-9
# |sin(theta/2)| below which a pulse rounds away in Rotation.from_degrees
NEGLIGIBLE_PULSE = math.radians(SNAP_DEG) / 2.0

_NAMED = {(90.0, 0.0): "X", (90.0, 180.0): "Xm", (90.0, 90.0): "Y", (90.0, 270.0): "Ym"}
_BY_NAME = {v: k for k, v in _NAMED.items()}


class ParseError(ValueError):
    """Malformed pulse-program text; carries 1-based ``line`` and ``column``."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def _snap_deg(x: float) -> float:
    k = round(x / 45.0)
    if abs(x - 45.0 * k) < SNAP_DEG:
        x = 45.0 * k
    return x % 360.0 + 0.0


@dataclass(frozen=True)
class Rotation:
    """x-y plane rotation: ``flip`` in [0, 180] and ``phase`` in [0, 360), both degrees."""

    flip: float
    phase: float

    @classmethod
    def from_radians(cls, theta: float, phi: float) -> "Rotation | None":
        """Normalised rotation, or ``None`` if it is the identity up to phase."""
        return cls.from_degrees(math.degrees(theta), math.degrees(phi))

    @classmethod
    def from_degrees(cls, flip: float, phase: float) -> "Rotation | None":
        flip = _snap_deg(flip)
        phase = _snap_deg(phase)
        # R(f, p) = -R(360 - f, p + 180)
        if flip > 180.0:
            flip, phase = 360.0 - flip, (phase + 180.0) % 360.0
        if flip < SNAP_DEG:
            return None
        return cls(flip, phase)

    @property
    def theta(self) -> float:
        return math.radians(self.flip)

    @property
    def phi(self) -> float:
        return math.radians(self.phase)

    def matrix(self) -> np.ndarray:
        return qmat.rotation(self.theta, self.phi)

    def shifted(self, dphase_deg: float) -> "Rotation":
        return Rotation(self.flip, _snap_deg(self.phase + dphase_deg))

    @property
    def token(self) -> str:
        name = _NAMED.get((self.flip, self.phase))
        if name:
            return name
        if self.flip == 180.0:
            return f"Pi({_num(self.phase)})"
        return f"P({_num(self.flip)},{_num(self.phase)})"


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _snap_time(t: float):
    """Exact quarter-multiples of 1/J become ``Fraction``; others stay float."""
    if abs(t) < TIME_SNAP:
        return Fraction(0)
    q = round(t * 4)
    if abs(t * 4 - q) < 4 * TIME_SNAP:
        return Fraction(q, 4)
    return float(t)


@dataclass(frozen=True)
class PulseEvent:
    """A pulse (``ch1``/``ch2`` rotations) or a ZZ delay (``duration`` in 1/J).

    ``shown_on`` only affects text rendering of delays: the line(s) the
    delay token is written on.
    """

    kind: str
    ch1: Rotation | None = None
    ch2: Rotation | None = None
    duration: Fraction | float = Fraction(0)
    shown_on: int | str = "both"

    def __post_init__(self):
        if self.kind == "pulse":
            if self.ch1 is None and self.ch2 is None:
                raise ValueError("pulse event needs at least one channel rotation")
        elif self.kind == "delay":
            if not self.duration > 0:
                raise ValueError(f"delay duration must be positive, got {self.duration}")
            if self.shown_on not in (1, 2, "both"):
                raise ValueError(f"invalid delay display channel {self.shown_on!r}")
        else:
            raise ValueError(f"unknown event kind {self.kind!r}")

    @property
    def channel(self):
        if self.kind == "delay":
            return self.shown_on
        if self.ch1 is not None and self.ch2 is not None:
            return "both"
        return 1 if self.ch1 is not None else 2

    @property
    def pulses(self) -> int:
        return (self.ch1 is not None) + (self.ch2 is not None)

    def rotation(self, channel: int) -> Rotation | None:
        return self.ch1 if channel == 1 else self.ch2

    def unitary(self) -> np.ndarray:
        if self.kind == "delay":
            return qmat.zz_evolution(float(self.duration))
        r1 = self.ch1.matrix() if self.ch1 else qmat.I2
        r2 = self.ch2.matrix() if self.ch2 else qmat.I2
        return qmat.local(r2, r1)

    def to_json(self) -> dict:
        d = {"kind": self.kind, "channel": self.channel}
        if self.kind == "delay":
            d["duration"] = _duration_json(self.duration)
        else:
            for ch in (1, 2):
                r = self.rotation(ch)
                d[f"ch{ch}"] = None if r is None else {"flip_deg": r.flip, "phase_deg": r.phase}
        return d

    @classmethod
    def from_json(cls, d: dict) -> "PulseEvent":
        if d["kind"] == "delay":
            return cls("delay", duration=_duration_from_json(d["duration"]), shown_on=d.get("channel", "both"))
        rots = {}
        for ch in (1, 2):
            r = d.get(f"ch{ch}")
            rots[ch] = None if r is None else Rotation(float(r["flip_deg"]), float(r["phase_deg"]))
        return cls("pulse", ch1=rots[1], ch2=rots[2])


def pulse(channel, rotation: Rotation, other: Rotation | None = None) -> PulseEvent:
    """Pulse on channel 1 or 2; ``channel='both'`` puts ``rotation`` on 1 and ``other`` on 2."""
    if channel == 1:
        return PulseEvent("pulse", ch1=rotation)
    if channel == 2:
        return PulseEvent("pulse", ch2=rotation)
    return PulseEvent("pulse", ch1=rotation, ch2=other if other is not None else rotation)


def delay(duration, shown_on="both") -> PulseEvent:
    return PulseEvent("delay", duration=duration, shown_on=shown_on)


def _duration_json(d):
    return f"{d.numerator}/{d.denominator}" if isinstance(d, Fraction) else float(d)


def _duration_from_json(v):
    return Fraction(v) if isinstance(v, str) else float(v)


@dataclass
class PulseProgram:
    """Time-ordered events plus the pending virtual ``z`` frame (degrees per channel)."""

    events: list[PulseEvent] = field(default_factory=list)
    label: str = field(default="", compare=False)
    frame: tuple[float, float] = (0.0, 0.0)

    @property
    def pulse_count(self) -> int:
        """Number of single-channel rotations; a simultaneous pair counts two."""
        return sum(e.pulses for e in self.events if e.kind == "pulse")

    @property
    def coupling_time(self):
        """Total delay in units of 1/J (a ``Fraction`` when every delay is symbolic)."""
        total = Fraction(0)
        for e in self.events:
            if e.kind == "delay":
                total = total + e.duration
        return total

    def frame_unitary(self) -> np.ndarray:
        f1, f2 = (math.radians(f) for f in self.frame)
        return qmat.local(qmat.rz(f2), qmat.rz(f1))

    def unitary(self, include_frame: bool = True) -> np.ndarray:
        """Ideal (instantaneous-pulse) propagator."""
        u = np.eye(4, dtype=np.complex128)
        for e in self.events:
            u = e.unitary() @ u
        if include_frame:
            u = self.frame_unitary() @ u
        return u

    def channel_events(self, channel: int) -> list[str]:
        """Token list for one channel, delays included."""
        out = []
        for e in self.events:
            if e.kind == "delay":
                out.append(_delay_token(e.duration))
            elif e.rotation(channel) is not None:
                out.append(e.rotation(channel).token)
        return out

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "events": [e.to_json() for e in self.events],
            "frame_deg": list(self.frame),
            "pulse_count": self.pulse_count,
            "coupling_time": _duration_json(self.coupling_time),
        }

    @classmethod
    def from_json(cls, d: dict) -> "PulseProgram":
        return cls(
            events=[PulseEvent.from_json(e) for e in d["events"]],
            label=d.get("label", ""),
            frame=tuple(float(f) for f in d.get("frame_deg", (0.0, 0.0))),
        )


# ---------------------------------------------------------------- local gates

def _su2_entries(u: np.ndarray):
    """``(a, b)`` with ``u`` proportional to ``[[a, -b*], [b, a*]]``."""
    v = qmat.su2_normalize(u)
    return complex(v[0, 0]), complex(v[1, 0])


def _pulse_from(a: complex, b: complex) -> tuple[float, float]:
    """``(theta, phi)`` of the x-y rotation equal to ``[[a, -b*], [b, a*]]`` with real ``a``."""
    theta = 2.0 * math.atan2(abs(b), a.real)
    phi = float(np.angle(1j * b)) if abs(b) > 0 else 0.0
    return theta, phi


def _wrap(angle: float) -> float:
    """Angle mapped to (-pi, pi]."""
    a = math.remainder(angle, 2.0 * math.pi)
    return math.pi if a == -math.pi else a


def _euler(u: np.ndarray, seq: str) -> np.ndarray:
    rot = _SO3.from_matrix(qmat.so3_from_su2(u))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return rot.as_euler(seq)


def _matches(pulses, u, tol: float = 1e-9) -> bool:
    w = np.eye(2, dtype=np.complex128)
    for theta, phi in pulses:
        w = qmat.rotation(theta, phi) @ w
    return qmat.phase_invariant_distance(w, u) < tol


def decompose_local(u: np.ndarray, frame_tracking: bool = False):
    """Split a 2x2 unitary into x-y plane pulses and a trailing ``z`` rotation.

    Returns ``(pulses, alpha)`` where ``pulses`` is a time-ordered list of
    ``(theta, phi)`` and ``u`` is proportional to
    ``rz(alpha) @ R(pulses[-1]) @ ... @ R(pulses[0])``.

    With ``frame_tracking`` at most one pulse is used and any ``z`` part
    goes into ``alpha``.  Without it ``alpha`` is always 0 and at most two
    pulses are used: none for the identity, one when ``u`` is an x-y plane
    rotation, otherwise two, preferring x and y axes (a ``ZYX`` or ``ZXY``
    Euler form without ``z`` angle) when they suffice.
    """
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (2, 2) or not qmat.is_unitary(u, tol=1e-8):
        raise ValueError("local gate must be a 2x2 unitary")
    a, b = _su2_entries(u)
    if frame_tracking:
        alpha = -2.0 * float(np.angle(a))
        # rz(-alpha) u has a real, non-negative top-left entry
        b = b * complex(math.cos(alpha / 2.0), -math.sin(alpha / 2.0))
        alpha = _wrap(alpha)
        if abs(alpha) < EULER_TOL:
            alpha = 0.0
        if abs(b) < NEGLIGIBLE_PULSE:
            return [], alpha
        return [_pulse_from(complex(abs(a), 0.0), b)], alpha

    if abs(b) < EULER_TOL and abs(a.imag) < EULER_TOL:
        return [], 0.0
    if abs(a.imag) < EULER_TOL:
        return [_pulse_from(a, b)], 0.0
    for seq, axes in (("ZYX", (0.0, math.pi / 2)), ("ZXY", (math.pi / 2, 0.0))):
        z, second, first = _euler(u, seq)
        candidates = [(z, first)]
        if abs(math.cos(second)) < 1e-6:
            # gimbal lock: only first +- z is determined
            candidates += [(0.0, first + z), (0.0, first - z)]
        for z, first in candidates:
            pulses = [(first, axes[0]), (second, axes[1])]
            if abs(_wrap(z)) < EULER_TOL and _matches(pulses, u):
                return pulses, 0.0
    return _two_pulses(a, b), 0.0


def _two_pulses(a: complex, b: complex):
    """Two x-y plane pulses for ``[[a, -b*], [b, a*]]``.

    The first pulse is chosen so the remainder ``u R1^dagger`` has a real
    top-left entry, which makes it a single x-y plane rotation.
    """
    r = abs(b)
    phi1 = float(np.angle(b)) if r > EULER_TOL else 0.0
    theta1 = 2.0 * math.atan2(a.imag, r)
    u = np.array([[a, -b.conjugate()], [b, a.conjugate()]])
    rest = u @ qmat.dagger(qmat.rotation(theta1, phi1))
    a2, b2 = complex(rest[0, 0]), complex(rest[1, 0])
    if a2.real < 0:
        a2, b2 = -a2, -b2
    return [(theta1, phi1), _pulse_from(a2, b2)]


def local_pulse_count(u: np.ndarray, frame_tracking: bool = True) -> int:
    if frame_tracking:
        # one pulse unless u is diagonal; same threshold as decompose_local
        return int(abs(u[1, 0]) / math.sqrt(abs(np.linalg.det(u))) >= NEGLIGIBLE_PULSE)
    return len(decompose_local(u, frame_tracking)[0])


def compile_local(u: np.ndarray, channel: int = 1) -> list[PulseEvent]:
    """At most two x-y plane pulses on ``channel`` whose product equals ``u`` up to phase.

    Pure ``z`` rotations are built as x-y sandwiches; the identity gives [].
    """
    if abs(abs(np.linalg.det(np.asarray(u))) - 1.0) > 1e-8:
        raise ValueError("local gate must be unitary")
    pulses, _ = decompose_local(u, frame_tracking=False)
    events = []
    for theta, phi in pulses:
        rot = Rotation.from_radians(theta, phi)
        if rot is not None:
            events.append(pulse(channel, rot))
    return events


# ---------------------------------------------------------------- coupling

_X = Rotation(90.0, 0.0)
_XM = Rotation(90.0, 180.0)
_Y = Rotation(90.0, 90.0)
_YM = Rotation(90.0, 270.0)
_PI_X = Rotation(180.0, 0.0)


def compile_cartan(times) -> list[PulseEvent]:
    """Events realising ``exp(-i pi/2 (t1 XX + t2 YY + t3 ZZ))`` with ZZ delays.

    XX and YY terms are ZZ delays sandwiched by simultaneous pi/2 pulses;
    a negative sign flips one channel's pulse phases (or, for ZZ, uses a
    pi pulse about x on channel 1 around the delay).  Total delay is
    ``sum(|t|)``.
    """
    t1, t2, t3 = (_snap_time(float(t)) for t in times)
    events: list[PulseEvent] = []
    for t, (pre, post) in ((t1, (_YM, _Y)), (t2, (_X, _XM))):
        if t == 0:
            continue
        if t > 0:
            events += [pulse("both", pre), delay(abs(t)), pulse("both", post)]
        else:
            events += [pulse("both", pre, post), delay(abs(t)), pulse("both", post, pre)]
    if t3 != 0:
        if t3 > 0:
            events.append(delay(t3))
        else:
            events += [pulse(1, _PI_X), delay(-t3), pulse(1, _PI_X)]
    return events


# ---------------------------------------------------------------- whole programs

class _Emitter:
    """Builds events while tracking a virtual ``z`` frame per channel."""

    def __init__(self, frame_tracking: bool):
        self.tracking = frame_tracking
        self.frame = [0.0, 0.0]  # radians, channels 1 and 2
        self.events: list[PulseEvent] = []

    def _shift(self, ch: int, rot: Rotation | None) -> Rotation | None:
        if rot is None or not self.tracking:
            return rot
        return rot.shifted(-math.degrees(self.frame[ch - 1]))

    def add(self, event: PulseEvent):
        if event.kind == "pulse":
            event = PulseEvent("pulse", ch1=self._shift(1, event.ch1), ch2=self._shift(2, event.ch2))
        self.events.append(event)

    def local(self, left: np.ndarray, right: np.ndarray):
        """Append ``left (x) right``; channel 2 carries the left factor."""
        per_channel = {}
        for ch, u in ((1, right), (2, left)):
            pulses, alpha = decompose_local(u, self.tracking)
            rots = [Rotation.from_radians(t, p) for t, p in pulses]
            per_channel[ch] = [self._shift(ch, r) for r in rots if r is not None]
            self.frame[ch - 1] += alpha
        r1, r2 = per_channel[1], per_channel[2]
        for i in range(max(len(r1), len(r2))):
            a = r1[i] if i < len(r1) else None
            b = r2[i] if i < len(r2) else None
            self.events.append(PulseEvent("pulse", ch1=a, ch2=b))

    def program(self, label: str) -> PulseProgram:
        frame = tuple(_snap_deg(math.degrees(f)) for f in self.frame)
        frame = tuple(0.0 if min(f, 360.0 - f) < SNAP_DEG else f for f in frame)
        return PulseProgram(self.events, label=label, frame=frame)


def _segments(blocks):
    """Multiply consecutive local blocks; returns ``(locals, delays)`` with len(locals) = len(delays)+1."""
    locals_, delays = [], []
    left, right = np.eye(2, dtype=complex), np.eye(2, dtype=complex)
    for b in blocks:
        if b[0] == "delay":
            locals_.append((left, right))
            delays.append(b[1])
            left, right = np.eye(2, dtype=complex), np.eye(2, dtype=complex)
        elif b[0] == "local":
            left, right = b[1] @ left, b[2] @ right
        else:
            ev = b[1]
            if ev.ch2 is not None:
                left = ev.ch2.matrix() @ left
            if ev.ch1 is not None:
                right = ev.ch1.matrix() @ right
    locals_.append((left, right))
    return locals_, delays


_PAULI_PAIRS = [(qmat.PAULI[p], qmat.PAULI[q]) for p in "IXYZ" for q in "IXYZ"]


def _pauli_moves(duration):
    """Pauli pairs ``M1`` whose image ``D M1 D^dagger`` under the delay is local."""
    d = qmat.zz_evolution(float(duration))
    moves = []
    for p, q in _PAULI_PAIRS:
        m2 = d @ qmat.local(p, q) @ qmat.dagger(d)
        try:
            a2, b2 = qmat.local_factors(m2)
        except ValueError:
            continue
        moves.append(((p, q), (a2, b2)))
    return moves


def _pauli_optimise(locals_, delays, frame_tracking: bool):
    """Move Paulis across delays to minimise the pulse count.

    Segment ``k`` is changed only by the moves at delays ``k-1`` and ``k``,
    so the optimum over all move sequences is a shortest path along the
    chain.  Ties resolve to the lexicographically first sequence, which
    keeps the original segments whenever they are already optimal.
    """
    if not delays:
        return locals_
    options = [_pauli_moves(d) for d in delays]
    n = len(delays)

    def segment(k, before, after):
        left, right = locals_[k]
        if after is not None:
            p, q = after[0]
            left, right = qmat.dagger(p) @ left, qmat.dagger(q) @ right
        if before is not None:
            a2, b2 = before[1]
            left, right = left @ a2, right @ b2
        return left, right

    def cost(seg):
        return local_pulse_count(seg[0], frame_tracking) + local_pulse_count(seg[1], frame_tracking)

    # togo[k][c]: fewest pulses in segments k+1..n given move c at delay k
    togo = [None] * n
    togo[n - 1] = [cost(segment(n, c, None)) for c in options[n - 1]]
    for k in range(n - 2, -1, -1):
        togo[k] = [min(cost(segment(k + 1, c, d)) + togo[k + 1][j]
                       for j, d in enumerate(options[k + 1]))
                   for c in options[k]]
    chosen = []
    prev = None
    for k in range(n):
        totals = [cost(segment(k, prev, c)) + togo[k][i] for i, c in enumerate(options[k])]
        i = totals.index(min(totals))
        prev = options[k][i]
        chosen.append(prev)
    out = [segment(0, None, chosen[0])]
    for k in range(1, n):
        out.append(segment(k, chosen[k - 1], chosen[k]))
    out.append(segment(n, chosen[n - 1], None))
    return out


def _blocks(params: cartan.ControlParams):
    out = [("local", qmat.exp_su2(*params.k1_left), qmat.exp_su2(*params.k1_right))]
    for ev in compile_cartan(params.cartan_times):
        out.append(("delay", ev.duration) if ev.kind == "delay" else ("pulse", ev))
    out.append(("local", qmat.exp_su2(*params.k2_left), qmat.exp_su2(*params.k2_right)))
    return out


def compile(params: cartan.ControlParams, merge: bool = False, frame_tracking: bool = True,
            label: str = "") -> PulseProgram:
    """Pulse program for ``K2 U_J(t) K1`` (K1 first in time).

    Unmerged, each block is compiled on its own.  With ``merge`` all
    rotations between two delays are multiplied and recompiled per
    channel, after moving Pauli operators across delays whenever that
    lowers the pulse count.
    """
    em = _Emitter(frame_tracking)
    blocks = _blocks(params)
    if not merge:
        for b in blocks:
            if b[0] == "local":
                em.local(b[1], b[2])
            elif b[0] == "delay":
                em.add(delay(b[1]))
            else:
                em.add(b[1])
        return em.program(label)
    locals_, delays = _segments(blocks)
    locals_ = _pauli_optimise(locals_, delays, frame_tracking)
    for k, (left, right) in enumerate(locals_):
        em.local(left, right)
        if k < len(delays):
            em.add(delay(delays[k]))
    return em.program(label)


def compile_best(results, merge: bool = True, frame_tracking: bool = True,
                 time_tol: float = 1e-6, label: str = "") -> tuple[PulseProgram, object]:
    """Fewest-pulse program among the minimal-time results; returns ``(program, result)``."""
    results = list(results)
    if not results:
        raise ValueError("no results to compile")
    tmin = min(r.execution_time for r in results)
    best = None
    for r in results:
        if r.execution_time > tmin + time_tol:
            continue
        prog = compile(r.params, merge=merge, frame_tracking=frame_tracking, label=label)
        if best is None or prog.pulse_count < best[0].pulse_count:
            best = (prog, r)
    return best


# ---------------------------------------------------------------- text format

def _delay_token(d) -> str:
    if isinstance(d, Fraction):
        return f"({d.numerator}/J)" if d.denominator == 1 else f"({d.numerator}/{d.denominator}J)"
    return f"({float(d)!r}/J)"


def render(program: PulseProgram) -> str:
    """Two-line text form; simultaneous tokens share a column."""
    cols = []
    for e in program.events:
        if e.kind == "delay":
            tok = _delay_token(e.duration)
            cols.append((tok if e.shown_on in (1, "both") else None,
                         tok if e.shown_on in (2, "both") else None))
        else:
            cols.append(tuple(None if e.rotation(ch) is None else e.rotation(ch).token for ch in (1, 2)))
    if any(program.frame):
        cols.append(tuple(f"Z({_num(f)})" if f else None for f in program.frame))
    lines = []
    for ch in (0, 1):
        cells = []
        for col in cols:
            width = max(2, *(len(c) for c in col if c is not None))
            cells.append(col[ch].ljust(width) if col[ch] is not None else "-" * width)
        body = "-" + "-".join(cells) + "-" if cells else ""
        lines.append(f"{ch + 1}: {body}".rstrip())
    return "\n".join(lines)


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_TOKEN_RE = re.compile(
    rf"Xm|Ym|X|Y|Pi\((?P<pi>{_NUM})\)|P\((?P<pf>{_NUM}),(?P<pp>{_NUM})\)|Z\((?P<z>{_NUM})\)"
    rf"|\((?P<dn>\d+)/(?P<dd>\d*)J\)|\((?P<df>{_NUM})/J\)"
)


def _scan_line(text: str, lineno: int, offset: int):
    """Yield ``(column, kind, value)`` for each token of one channel line."""
    pos, n = 0, len(text)
    while pos < n:
        c = text[pos]
        if c in " -\t":
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        end = m.end() if m else pos
        if not m or (end < n and text[end] not in " -\t"):
            bad = re.match(r"[^ \-\t]+", text[pos:]).group(0)
            raise ParseError(f"unrecognised token {bad!r}", lineno, offset + pos + 1)
        tok = m.group(0)
        if tok in _BY_NAME:
            yield pos, "pulse", Rotation(*_BY_NAME[tok])
        elif m.group("pi") is not None:
            yield pos, "pulse", _parsed_rotation(180.0, float(m.group("pi")), lineno, offset + pos + 1)
        elif m.group("pf") is not None:
            yield pos, "pulse", _parsed_rotation(float(m.group("pf")), float(m.group("pp")),
                                                 lineno, offset + pos + 1)
        elif m.group("z") is not None:
            yield pos, "frame", float(m.group("z")) % 360.0 + 0.0
        else:
            if m.group("dn") is not None:
                num, den = int(m.group("dn")), int(m.group("dd") or 1)
                if den == 0 or num == 0:
                    raise ParseError(f"invalid delay {tok!r}", lineno, offset + pos + 1)
                value = Fraction(num, den)
            else:
                value = float(m.group("df"))
                if not value > 0:
                    raise ParseError(f"invalid delay {tok!r}", lineno, offset + pos + 1)
            yield pos, "delay", value
        pos = end


def _parsed_rotation(flip, phase, lineno, col):
    rot = Rotation.from_degrees(flip, phase)
    if rot is None:
        raise ParseError("zero-angle pulse", lineno, col)
    return rot


_LINE_RE = re.compile(r"^\s*([12])\s*:(.*)$")


def parse(text: str, label: str = "") -> PulseProgram:
    """Inverse of :func:`render`; raises :class:`ParseError` with line and column.

    Blank lines and lines starting with ``#`` are ignored.
    """
    tokens = {1: [], 2: []}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        m = _LINE_RE.match(raw)
        if not m:
            raise ParseError("expected '1:' or '2:' channel prefix", lineno, 1)
        ch = int(m.group(1))
        if ch in seen:
            raise ParseError(f"duplicate line for channel {ch}", lineno, 1)
        seen.add(ch)
        start = m.start(2)
        toks = list(_scan_line(m.group(2), lineno, start))
        for i, (col, kind, _) in enumerate(toks):
            if kind == "frame" and i != len(toks) - 1:
                raise ParseError("Z frame token must be last on its line", lineno, start + col + 1)
        tokens[ch] = [(start + col, kind, value, lineno, start + col + 1) for col, kind, value in toks]

    frame = [0.0, 0.0]
    by_col: dict[int, dict[int, tuple]] = {}
    for ch in (1, 2):
        for col, kind, value, lineno, abscol in tokens[ch]:
            if kind == "frame":
                frame[ch - 1] = value
            else:
                by_col.setdefault(col, {})[ch] = (kind, value, lineno, abscol)
    events = []
    for col in sorted(by_col):
        cell = by_col[col]
        kinds = {v[0] for v in cell.values()}
        if len(kinds) > 1:
            _, _, lineno, abscol = cell[2]
            raise ParseError("pulse and delay in the same column", lineno, abscol)
        if "delay" in kinds:
            values = {v[1] for v in cell.values()}
            if len(values) > 1:
                _, _, lineno, abscol = cell[2]
                raise ParseError("simultaneous delays of different length", lineno, abscol)
            shown = "both" if len(cell) == 2 else next(iter(cell))
            events.append(delay(values.pop(), shown_on=shown))
        else:
            events.append(PulseEvent("pulse", ch1=cell.get(1, (None, None))[1],
                                     ch2=cell.get(2, (None, None))[1]))
    return PulseProgram(events, label=label, frame=tuple(frame))


# ---------------------------------------------------------------- presets

_CONVENTIONAL_TEXT = {
    "u10": (
        "1: -Y -(1/2J)-Ym-Xm-(1/2J)-Ym-Xm-\n"
        "2: -Y -(1/2J)-Ym-X -(1/2J)-Ym-Xm-"
    ),
}

# Uncorrected composite rows, kept verbatim.  Their CNOT
# blocks do not implement the permutations (see executable variants below).
_LITERAL_TEXT = {
    "u10xcp": (
        "1: -X -(1/2J)-X --------------Y -(1/2J)-Ym-Xm-(1/2J)-Ym-Xm-\n"
        "2: --------------X -(1/2J)-X -Y -(1/2J)-Ym-X -(1/2J)-Ym-Xm-"
    ),
    "u10xcp2": (
        "1: --------------X -(1/2J)-X -Y -(1/2J)-Ym-Xm-(1/2J)-Ym-Xm-\n"
        "2: -X -(1/2J)-X --------------Y -(1/2J)-Ym-X -(1/2J)-Ym-Xm-"
    ),
}

# Same layout with each block closing on Ym and the two blocks in the
# order that produces U_cp and U_cp^2.
_CONVENTIONAL_TEXT["u10xcp"] = (
    "1: --------------X -(1/2J)-Ym-Y -(1/2J)-Ym-Xm-(1/2J)-Ym-Xm-\n"
    "2: -X -(1/2J)-Ym--------------Y -(1/2J)-Ym-X -(1/2J)-Ym-Xm-"
)
_CONVENTIONAL_TEXT["u10xcp2"] = (
    "1: -X -(1/2J)-Ym--------------Y -(1/2J)-Ym-Xm-(1/2J)-Ym-Xm-\n"
    "2: --------------X -(1/2J)-Ym-Y -(1/2J)-Ym-X -(1/2J)-Ym-Xm-"
)

_OPTIMAL_TEXT = {
    "u10": (
        "1: -X -(1/2J)-Xm-Ym-(1/2J)-Y -Pi(45)-\n"
        "2: -X -(1/2J)-Xm-Y -(1/2J)-X -Ym    -"
    ),
    "u10xcp": (
        "1: -X -(1/2J)-Xm-Ym-\n"
        "2: -----------Ym-Ym-"
    ),
    "u10xcp2": (
        "1:\n"
        "2: -Y -X -(1/2J)-Xm-"
    ),
}

PRESET_NAMES = ("u10", "u10xcp", "u10xcp2")


def conventional_preset(name: str, literal: bool = False) -> PulseProgram:
    """Conventional sequence for ``name``.

    ``literal=True`` returns the uncorrected composite rows; the
    default returns the executable versions (identical for ``u10``).
    """
    table = dict(_CONVENTIONAL_TEXT, **_LITERAL_TEXT) if literal else _CONVENTIONAL_TEXT
    if name not in table:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
    kind = "conventional-literal" if literal and name in _LITERAL_TEXT else "conventional"
    return parse(table[name], label=f"{kind}:{name}")


def optimal_preset(name: str) -> PulseProgram:
    """Reference time-optimal sequence for ``name``."""
    if name not in _OPTIMAL_TEXT:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
    return parse(_OPTIMAL_TEXT[name], label=f"optimal:{name}")


def preset(spec: str) -> PulseProgram:
    """``conventional:NAME``, ``conventional-literal:NAME`` or ``optimal:NAME``."""
    kind, _, name = spec.partition(":")
    if kind == "conventional":
        return conventional_preset(name)
    if kind == "conventional-literal":
        return conventional_preset(name, literal=True)
    if kind == "optimal":
        return optimal_preset(name)
    raise ValueError(f"unknown preset family {kind!r}; expected conventional, "
                     "conventional-literal or optimal")
