import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from nmrcartan import cartan, compiler, qmat, targets
from nmrcartan.compiler import ParseError, Rotation

seeds = st.integers(0, 2**32 - 1)
params_vec = st.lists(st.floats(-3.0, 3.0, allow_nan=False), min_size=15, max_size=15)


def _apply(pulses, alpha=0.0):
    w = np.eye(2, dtype=complex)
    for theta, phi in pulses:
        w = qmat.rotation(theta, phi) @ w
    return qmat.rz(alpha) @ w


@settings(max_examples=200)
@given(seeds)
def test_decompose_tracking(seed):
    u = unitary_group.rvs(2, random_state=seed)
    pulses, alpha = compiler.decompose_local(u, frame_tracking=True)
    assert len(pulses) <= 1
    assert qmat.phase_invariant_distance(_apply(pulses, alpha), u) < 1e-9


@settings(max_examples=200)
@given(seeds)
def test_decompose_without_tracking(seed):
    u = unitary_group.rvs(2, random_state=seed)
    pulses, alpha = compiler.decompose_local(u, frame_tracking=False)
    assert alpha == 0.0 and len(pulses) <= 2
    assert qmat.phase_invariant_distance(_apply(pulses), u) < 1e-9


@given(st.floats(0.01, 3.1), st.floats(-math.pi, math.pi))
def test_xy_rotation_needs_one_pulse(theta, phi):
    u = qmat.rotation(theta, phi)
    for tracking in (False, True):
        pulses, alpha = compiler.decompose_local(u, frame_tracking=tracking)
        assert len(pulses) == 1 and alpha == 0.0


@given(st.floats(0.01, 3.1))
def test_z_rotation(angle):
    u = qmat.rz(angle)
    pulses, alpha = compiler.decompose_local(u, frame_tracking=True)
    assert pulses == [] and alpha == pytest.approx(angle)
    pulses, _ = compiler.decompose_local(u, frame_tracking=False)
    assert len(pulses) == 2


def test_decompose_identity_and_errors():
    assert compiler.decompose_local(1j * qmat.I2) == ([], 0.0)
    assert compiler.compile_local(qmat.I2) == []
    with pytest.raises(ValueError):
        compiler.decompose_local(2 * qmat.I2)
    with pytest.raises(ValueError):
        compiler.compile_local(np.diag([1.0, 0.5]))


def test_compile_local_channels():
    events = compiler.compile_local(qmat.rotation(math.pi / 2, math.pi / 2), channel=2)
    assert len(events) == 1 and events[0].ch2.token == "Y" and events[0].ch1 is None


def test_rotation_normalisation():
    assert Rotation.from_degrees(270, 0) == Rotation(90.0, 180.0)
    assert Rotation.from_degrees(90.0000000001, -90) == Rotation(90.0, 270.0)
    assert Rotation.from_degrees(360, 10) is None
    assert [Rotation(90, p).token for p in (0, 90, 180, 270)] == ["X", "Y", "Xm", "Ym"]
    assert Rotation(180, 45).token == "Pi(45)"
    assert Rotation(30.5, 12).token == "P(30.5,12)"


def test_rotation_matrix_convention():
    assert np.allclose(Rotation(180, 90).matrix(), -1j * qmat.PAULI["Y"])


def test_event_validation():
    with pytest.raises(ValueError):
        compiler.PulseEvent("pulse")
    with pytest.raises(ValueError):
        compiler.delay(0)
    with pytest.raises(ValueError):
        compiler.delay(Fraction(1, 2), shown_on=3)
    with pytest.raises(ValueError):
        compiler.PulseEvent("wait")


def test_event_channels():
    x = Rotation(90, 0)
    assert compiler.pulse(1, x).channel == 1
    assert compiler.pulse(2, x).channel == 2
    assert compiler.pulse("both", x).pulses == 2
    # channel 1 drives the right tensor factor
    assert np.allclose(compiler.pulse(1, x).unitary(), qmat.local(qmat.I2, x.matrix()))


def test_compile_cartan_single_zz():
    events = compiler.compile_cartan((0, 0, 0.5))
    assert events == [compiler.delay(Fraction(1, 2))]


@pytest.mark.parametrize("times", [
    (-0.5, 0.5, 0.0), (0.25, 0, 0), (-0.25, 0, 0), (0, 0.75, 0), (0, -0.3, 0), (0, 0, -0.5), (0.1, -0.2, 0.3),
])
def test_compile_cartan_realises_coupling(times):
    events = compiler.compile_cartan(times)
    prog = compiler.PulseProgram(events)
    assert qmat.phase_invariant_distance(prog.unitary(), cartan.coupling_unitary(times)) < 1e-9
    assert float(prog.coupling_time) == pytest.approx(sum(abs(t) for t in times))


def test_compile_cartan_u10_times():
    events = compiler.compile_cartan((-0.5, 0.5, 0.0))
    delays = [e for e in events if e.kind == "delay"]
    assert [d.duration for d in delays] == [Fraction(1, 2)] * 2


def test_identity_compiles_to_empty():
    prog = compiler.compile(cartan.ControlParams(), merge=True)
    assert prog.events == [] and prog.frame == (0.0, 0.0)
    assert compiler.render(prog) == "1:\n2:"


@settings(max_examples=40, deadline=None)
@given(params_vec, st.booleans(), st.booleans())
def test_compile_realises_params(x, merge, tracking):
    p = cartan.ControlParams.from_vector(x)
    prog = compiler.compile(p, merge=merge, frame_tracking=tracking)
    assert qmat.phase_invariant_distance(prog.unitary(), cartan.reconstruct(p)) < 1e-6


@settings(max_examples=25, deadline=None)
@given(params_vec, st.booleans())
def test_merge_never_adds_pulses(x, tracking):
    p = cartan.ControlParams.from_vector(x)
    merged = compiler.compile(p, merge=True, frame_tracking=tracking)
    plain = compiler.compile(p, merge=False, frame_tracking=tracking)
    assert merged.pulse_count <= plain.pulse_count
    assert merged.coupling_time == plain.coupling_time


@pytest.mark.parametrize("name", sorted(cartan.REFERENCE_SOLUTIONS))
@pytest.mark.parametrize("tracking", [False, True])
def test_reference_compiles_to_target(name, tracking):
    target = targets.resolve(targets.parse_target(name))
    prog = compiler.compile(cartan.REFERENCE_SOLUTIONS[name], merge=True, frame_tracking=tracking)
    assert qmat.phase_invariant_distance(prog.unitary(), target) < 1e-10


def test_u10xcp_merged_without_tracking():
    prog = compiler.compile(cartan.REFERENCE_SOLUTIONS["u10xcp"], merge=True, frame_tracking=False)
    assert prog.channel_events(1) == ["X", "(1/2J)", "Xm", "Ym"]
    assert prog.channel_events(2) == ["(1/2J)", "Pi(90)"]
    assert prog.pulse_count == 4


def test_u10xcp2_merged_without_tracking():
    prog = compiler.compile(cartan.REFERENCE_SOLUTIONS["u10xcp2"], merge=True, frame_tracking=False)
    assert prog.channel_events(1) == ["(1/2J)"]
    assert prog.channel_events(2) == ["Y", "X", "(1/2J)", "Xm"]
    assert prog.pulse_count == 3


@pytest.mark.parametrize("name,count", [("u10xcp", 3), ("u10xcp2", 2)])
def test_reference_merged_with_tracking(name, count):
    prog = compiler.compile(cartan.REFERENCE_SOLUTIONS[name], merge=True)
    assert prog.pulse_count == count


def test_compile_best_prefers_fewest_pulses():
    ref = cartan.REFERENCE_SOLUTIONS["u10xcp"]
    bare = cartan.SynthesisResult(ref, 0.0, 0.5, 0, 1, 0)
    slow = cartan.SynthesisResult(cartan.ControlParams(cartan_times=(0, 0, 2.5)), 0.0, 2.5, 4, 0, 0)
    prog, chosen = compiler.compile_best([slow, bare])
    assert chosen is bare
    with pytest.raises(ValueError):
        compiler.compile_best([])


def test_frame_is_rendered_last():
    prog = compiler.PulseProgram([compiler.pulse(1, Rotation(90, 0))], frame=(45.0, 0.0))
    text = compiler.render(prog)
    assert text.splitlines()[0].endswith("Z(45)-")
    assert compiler.parse(text) == prog


CONVENTIONAL_U10 = (
    "1: -Y -(1/2J)-Ym-Xm-(1/2J)-Ym-Xm-\n"
    "2: -Y -(1/2J)-Ym-X -(1/2J)-Ym-Xm-"
)


def test_render_matches_reference_layout():
    assert compiler.render(compiler.conventional_preset("u10")) == CONVENTIONAL_U10


def test_parse_single_line():
    prog = compiler.parse("1: -X -(1/2J)-Xm-")
    assert prog.pulse_count == 2
    assert [e.kind for e in prog.events] == ["pulse", "delay", "pulse"]
    assert prog.events[1].shown_on == 1


def test_parse_forms():
    prog = compiler.parse("# comment\n\n1: -P(30,45)-(0.3/J)-(2/J)-Pi(90)-\n2: -Y\n")
    assert prog.events[0].ch1 == Rotation(30, 45) and prog.events[0].ch2 == Rotation(90, 90)
    assert prog.events[1].duration == 0.3 and prog.events[2].duration == 2
    assert prog.coupling_time == pytest.approx(2.3)


@pytest.mark.parametrize("text,line,col", [
    ("1: -X -Q", 1, 8),
    ("3: -X", 1, 1),
    ("1: -X\n1: -Y", 2, 1),
    ("1: -Z(90)-X", 1, 5),
    ("1: -X -(1/2J)\n2: -(1/2J)", 2, 5),
    ("1: -(1/2J)\n2: -(1/4J)", 2, 5),
    ("1: -(0/2J)", 1, 5),
    ("1: -P(0,30)", 1, 5),
])
def test_parse_errors(text, line, col):
    with pytest.raises(ParseError) as info:
        compiler.parse(text)
    assert (info.value.line, info.value.column) == (line, col)


@pytest.mark.parametrize("spec", [
    "conventional:u10", "conventional:u10xcp", "conventional-literal:u10xcp2", "optimal:u10", "optimal:u10xcp",
])
def test_render_parse_roundtrip_presets(spec):
    prog = compiler.preset(spec)
    assert compiler.parse(compiler.render(prog)) == prog
    assert compiler.PulseProgram.from_json(prog.to_json()) == prog


@settings(max_examples=30, deadline=None)
@given(params_vec, st.booleans())
def test_render_parse_roundtrip_compiled(x, merge):
    prog = compiler.compile(cartan.ControlParams.from_vector(x), merge=merge)
    back = compiler.parse(compiler.render(prog))
    assert back == prog
    assert compiler.PulseProgram.from_json(prog.to_json()) == prog


@pytest.mark.parametrize("name,count,time", [("u10", 10, 1), ("u10xcp", 14, 2), ("u10xcp2", 14, 2)])
def test_conventional_presets(name, count, time):
    prog = compiler.conventional_preset(name)
    assert prog.pulse_count == count and prog.coupling_time == time
    target = targets.resolve(targets.parse_target(name))
    assert qmat.population_fidelity(prog.unitary(), target) == pytest.approx(1.0)


@pytest.mark.parametrize("name", ["u10xcp", "u10xcp2"])
def test_literal_composites_are_not_executable(name):
    prog = compiler.conventional_preset(name, literal=True)
    assert prog.pulse_count == 14
    target = targets.resolve(targets.parse_target(name))
    assert qmat.population_fidelity(prog.unitary(), target) == pytest.approx(0.5)


@pytest.mark.parametrize("name,time", [("u10", 1), ("u10xcp", Fraction(1, 2)), ("u10xcp2", Fraction(1, 2))])
def test_optimal_presets(name, time):
    prog = compiler.optimal_preset(name)
    target = targets.resolve(targets.parse_target(name))
    assert qmat.phase_invariant_distance(prog.unitary(), target) < 1e-12
    assert prog.coupling_time == time


def test_preset_errors():
    for spec in ("optimal:u11", "fancy:u10", "conventional:"):
        with pytest.raises(ValueError):
            compiler.preset(spec)
