"""Concrete two-qubit targets: Grover oracles, CNOTs and cyclic permutations."""
from __future__ import annotations

import cmath
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import qmat

# Exact integer matrices; the gate-product identities are checked in tests.
_ORACLES = {
    (0, 0): [[-1, 0, 0, 0],
             [0, 0, 1, 0],
             [0, 1, 0, 0],
             [0, 0, 0, 1]],
    (0, 1): [[0, 0, 1, 0],
             [-1, 0, 0, 0],
             [0, 0, 0, -1],
             [0, -1, 0, 0]],
    (1, 0): [[0, 1, 0, 0],
             [0, 0, 0, -1],
             [-1, 0, 0, 0],
             [0, 0, -1, 0]],
    (1, 1): [[0, 0, 0, 1],
             [0, -1, 0, 0],
             [0, 0, -1, 0],
             [-1, 0, 0, 0]],
}

_CYCLIC = {
    0: np.eye(4, dtype=int).tolist(),
    1: [[1, 0, 0, 0],
        [0, 0, 0, 1],
        [0, 1, 0, 0],
        [0, 0, 1, 0]],
    2: [[1, 0, 0, 0],
        [0, 0, 1, 0],
        [0, 0, 0, 1],
        [0, 1, 0, 0]],
}


def grover_oracle(i: int, j: int) -> np.ndarray:
    """Oracle ``U_ij`` with ``U_ij |00> = exp(i alpha) |ij>``."""
    try:
        return np.array(_ORACLES[(int(i), int(j))], dtype=np.complex128)
    except KeyError:
        raise ValueError(f"oracle bits must be 0 or 1, got ({i}, {j})") from None


def oracle_phase(i: int, j: int) -> float:
    """The phase ``alpha`` read off the ``|00>`` column of ``U_ij``."""
    u = grover_oracle(i, j)
    return cmath.phase(u[2 * i + j, 0])


def cyclic_permutation(power: int) -> np.ndarray:
    """``U_cp**power``: fixes ``|00>`` and 3-cycles ``|01> -> |10> -> |11>``."""
    if power not in _CYCLIC:
        raise ValueError(f"permutation power must be 0, 1 or 2, got {power!r}")
    return np.array(_CYCLIC[power], dtype=np.complex128)


def cnot(control: int, target: int) -> np.ndarray:
    """CNOT with qubits numbered 1 (left factor) and 2 (right factor)."""
    if {control, target} != {1, 2}:
        raise ValueError(f"control/target must be distinct qubits 1 and 2, got {control}, {target}")
    p0 = np.diag([1, 0]).astype(np.complex128)
    p1 = np.diag([0, 1]).astype(np.complex128)
    x = qmat.PAULI["X"]
    if control == 1:
        return qmat.local(p0, qmat.I2) + qmat.local(p1, x)
    return qmat.local(qmat.I2, p0) + qmat.local(x, p1)


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """Either a built-in ``U_ij U_cp**k`` or a raw user matrix."""

    oracle: tuple[int, int] | None = None
    permutation_power: int = 0
    raw: np.ndarray | None = None
    source: str = ""

    @property
    def label(self) -> str:
        if self.raw is not None:
            return self.source or "raw"
        i, j = self.oracle
        return f"u{i}{j}" + {0: "", 1: "xcp", 2: "xcp2"}[self.permutation_power]


_SPEC_RE = re.compile(r"^u([01])([01])(xcp2|xcp)?$")


def parse_target(text: str) -> TargetSpec:
    """Parse ``u00``..``u11`` with optional ``xcp``/``xcp2`` suffix, or ``@file.json``.

    ``identity`` is accepted as shorthand for the raw 4x4 identity.
    """
    text = text.strip()
    if text.startswith("@"):
        path = Path(text[1:])
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot read target matrix {path}: {exc}") from None
        if isinstance(data, dict):
            data = data.get("matrix", data.get("target"))
        return TargetSpec(raw=qmat.matrix_from_json(data), source=text)
    if text.lower() in ("identity", "i4"):
        return TargetSpec(raw=np.eye(4, dtype=np.complex128), source="identity")
    m = _SPEC_RE.match(text.lower())
    if not m:
        raise ValueError(f"unrecognised target {text!r}; expected u00..u11[xcp|xcp2] or @file.json")
    power = {None: 0, "xcp": 1, "xcp2": 2}[m.group(3)]
    return TargetSpec(oracle=(int(m.group(1)), int(m.group(2))), permutation_power=power)


def resolve(spec: TargetSpec) -> np.ndarray:
    """The target unitary ``U_ij @ U_cp**k`` or the validated raw matrix."""
    if spec.raw is not None:
        m = np.asarray(spec.raw, dtype=np.complex128)
        if m.shape != (4, 4) or not qmat.is_unitary(m, tol=1e-8):
            raise ValueError("raw target is not a 4x4 unitary within 1e-8")
        return m
    return grover_oracle(*spec.oracle) @ cyclic_permutation(spec.permutation_power)


def builtin_labels() -> list[str]:
    return [f"u{i}{j}{s}" for i in (0, 1) for j in (0, 1) for s in ("", "xcp", "xcp2")]
