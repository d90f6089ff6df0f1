"""Variational Cartan decomposition ``U = K2 U_J(t) K1`` by multi-start polytope search.

The 15 search parameters are two local factors ``K_i = exp_su2(left) (x)
exp_su2(right)`` and three signed coupling times ``t`` (units of 1/J)
entering ``U_J(t) = exp(-i pi/2 (t1 XX + t2 YY + t3 ZZ))``.  The execution
time of a decomposition is ``sum |t_k|``.

An independent magic-basis KAK oracle (:func:`analytic_kak`) provides local
invariants and the Weyl-chamber lower bound on the execution time.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels, qmat

log = logging.getLogger(__name__)

PHASE_MODES = ("exact", "phase_invariant")
CLUSTER_TOL = 5e-3


@dataclass(frozen=True)
class ControlParams:
    """Fifteen real decomposition parameters (angles in radians, times in 1/J)."""

    k1_left: tuple[float, float, float] = (0.0, 0.0, 0.0)
    k1_right: tuple[float, float, float] = (0.0, 0.0, 0.0)
    k2_left: tuple[float, float, float] = (0.0, 0.0, 0.0)
    k2_right: tuple[float, float, float] = (0.0, 0.0, 0.0)
    cartan_times: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def to_vector(self) -> np.ndarray:
        return np.array(
            [*self.k1_left, *self.k1_right, *self.k2_left, *self.k2_right, *self.cartan_times],
            dtype=float,
        )

    @classmethod
    def from_vector(cls, x) -> "ControlParams":
        x = [float(v) for v in np.asarray(x, dtype=float).ravel()]
        if len(x) != 15:
            raise ValueError(f"expected 15 parameters, got {len(x)}")
        return cls(tuple(x[0:3]), tuple(x[3:6]), tuple(x[6:9]), tuple(x[9:12]), tuple(x[12:15]))

    @property
    def execution_time(self) -> float:
        return float(sum(abs(t) for t in self.cartan_times))

    def k1(self) -> np.ndarray:
        return qmat.local(qmat.exp_su2(*self.k1_left), qmat.exp_su2(*self.k1_right))

    def k2(self) -> np.ndarray:
        return qmat.local(qmat.exp_su2(*self.k2_left), qmat.exp_su2(*self.k2_right))

    def to_json(self) -> dict:
        return {k: list(v) for k, v in asdict(self).items()}

    @classmethod
    def from_json(cls, data: dict) -> "ControlParams":
        return cls(**{k: tuple(float(x) for x in data[k]) for k in cls.__dataclass_fields__})


def coupling_unitary(times) -> np.ndarray:
    """``U_J(t)`` with ``t`` in units of 1/J."""
    t1, t2, t3 = times
    h = -math.pi / 2.0
    return qmat.exp_cartan(h * t1, h * t2, h * t3)


def reconstruct(params: ControlParams) -> np.ndarray:
    return params.k2() @ coupling_unitary(params.cartan_times) @ params.k1()


def distance(u: np.ndarray, target: np.ndarray, mode: str = "phase_invariant") -> float:
    if mode == "exact":
        return qmat.frobenius_distance(u, target)
    if mode == "phase_invariant":
        return qmat.phase_invariant_distance(u, target)
    raise ValueError(f"unknown phase mode {mode!r}")


def penalty(params: ControlParams, target: np.ndarray, mode: str = "phase_invariant") -> float:
    """Frobenius distance between ``reconstruct(params)`` and ``target``."""
    return distance(reconstruct(params), target, mode)


_S2 = math.pi / (2.0 * math.sqrt(2.0))
_S3 = math.pi / (3.0 * math.sqrt(3.0))

# Known time-optimal decompositions for the |10> search family.
REFERENCE_SOLUTIONS = {
    "u10": ControlParams(
        cartan_times=(-0.5, 0.5, 0.0),
        k2_left=(0.0, 0.0, -math.pi / 4),
        k2_right=(_S2, _S2, 0.0),
    ),
    "u10xcp": ControlParams(
        k1_right=(-math.pi / 4, 0.0, 0.0),
        cartan_times=(0.0, 0.0, 0.5),
        k2_left=(0.0, math.pi / 2, 0.0),
        k2_right=(_S3, _S3, _S3),
    ),
    "u10xcp2": ControlParams(
        k1_left=(-_S3, -_S3, -_S3),
        cartan_times=(0.0, 0.0, 0.5),
        k2_left=(math.pi / 4, 0.0, 0.0),
    ),
}


# ---------------------------------------------------------------- oracle

MAGIC = np.array(
    [[1, 0, 0, 1j],
     [0, 1j, 1, 0],
     [0, 1j, -1, 0],
     [1, 0, 0, -1j]],
    dtype=np.complex128,
) / math.sqrt(2.0)


@dataclass(frozen=True)
class KakResult:
    invariants: tuple[float, float, float]
    coordinates: tuple[float, float, float]
    canonical_times: tuple[float, float, float]
    lower_bound: float


def _to_su4(u: np.ndarray) -> np.ndarray:
    det = np.linalg.det(u)
    return u / det ** 0.25


def local_invariants(u: np.ndarray) -> np.ndarray:
    """Makhlin invariants ``(Re G1, Im G1, Re G2)``; equal iff locally equivalent."""
    u = np.asarray(u, dtype=np.complex128)
    um = MAGIC.conj().T @ u @ MAGIC
    det = np.linalg.det(um)
    m = um.T @ um
    tr2 = np.trace(m) ** 2
    g1 = tr2 / (16.0 * det)
    g2 = (tr2 - np.trace(m @ m)) / (4.0 * det)
    return np.array([g1.real, g1.imag, g2.real])


def fold_weyl(c, tol: float = 1e-9) -> tuple[float, float, float]:
    """Fold interaction coefficients into ``pi/4 >= c1 >= c2 >= |c3|``.

    Uses the local symmetries of ``exp(i(c1 XX + c2 YY + c3 ZZ))``:
    permutations, sign flips of pairs, and ``pi/2`` shifts of one entry.
    """
    q = math.pi / 4.0
    c = [((x + q) % (2 * q)) - q for x in c]
    c.sort(key=lambda x: -abs(x))
    if c[0] < 0:
        c[0], c[2] = -c[0], -c[2]
    if c[1] < 0:
        c[1], c[2] = -c[1], -c[2]
    if abs(c[0] - q) < tol and c[2] < 0:
        c[2] = -c[2]
    return tuple(float(x) + 0.0 for x in c)


def analytic_kak(target: np.ndarray) -> KakResult:
    """Canonical Cartan coordinates from the spectrum of ``M^T M`` in the magic basis."""
    u = _to_su4(np.asarray(target, dtype=np.complex128))
    um = MAGIC.conj().T @ u @ MAGIC
    ev = np.linalg.eigvals(um.T @ um)
    lam = sorted((float(np.angle(z)) / 2.0 for z in ev), reverse=True)
    excess = int(round(sum(lam) / math.pi))
    for k in range(abs(excess)):
        if excess > 0:
            lam[k] -= math.pi
        else:
            lam[-1 - k] += math.pi
        lam.sort(reverse=True)
    c = ((lam[0] + lam[1]) / 2.0, (lam[1] + lam[2]) / 2.0, (lam[0] + lam[2]) / 2.0)
    c = fold_weyl(c)
    times = (2.0 * c[0] / math.pi, 2.0 * c[1] / math.pi, 0.0 - 2.0 * c[2] / math.pi)
    bound = 2.0 * (c[0] + c[1] + abs(c[2])) / math.pi
    inv = tuple(float(x) for x in local_invariants(target))
    return KakResult(inv, c, times, bound)


# ---------------------------------------------------------------- search

class NonFiniteObjective(ArithmeticError):
    """Raised when the objective returns NaN or inf during a polytope search."""


@dataclass(frozen=True)
class SearchConfig:
    num_starts: int = 512
    seed: int = 0
    penalty_tolerance: float = 1e-8
    max_iterations: int = 20000
    phase_mode: str = "phase_invariant"
    time_weight: float = 0.0
    nonneg_times: bool = False
    simplex_step: float = 0.5

    def __post_init__(self):
        if self.num_starts < 1:
            raise ValueError("num_starts must be at least 1")
        if self.phase_mode not in PHASE_MODES:
            raise ValueError(f"phase_mode must be one of {PHASE_MODES}")
        if self.time_weight < 0:
            raise ValueError("time_weight must be non-negative")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a non-negative 64-bit integer")


def polytope_minimize(objective, start, config: SearchConfig, args=None):
    """Nelder-Mead minimisation of ``objective`` from ``start``.

    Returns ``(point, value, iterations)``.  A numba-compiled objective is
    called as ``objective(x, args)`` inside compiled code; any other
    callable is called as ``objective(x)`` (or ``objective(x, args)`` when
    ``args`` is given).
    """
    x0 = np.array(start, dtype=float)
    ftol = config.penalty_tolerance / 10.0
    if hasattr(objective, "py_func"):
        x, fx, it, status = _kernels.simplex_search_jit(
            objective, args, x0, config.simplex_step, ftol, config.max_iterations)
    else:
        if args is None:
            def f(x, _):
                return objective(x)
        else:
            f = objective
        x, fx, it, status = _kernels.simplex_search(
            f, args, x0, config.simplex_step, ftol, config.max_iterations)
    if status == _kernels.NONFINITE:
        raise NonFiniteObjective(f"objective returned {fx} after {it} iterations")
    return np.asarray(x), float(fx), int(it)


def start_point(seed: int, index: int) -> np.ndarray:
    """Start ``index`` of a seeded batch: angles in [-pi, pi], times in [-2, 2].

    Each start owns a Philox stream keyed by ``(seed, index)``, so it is
    reproducible independently of execution order.
    """
    rng = np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(index)))
    return np.concatenate([rng.uniform(-math.pi, math.pi, 12), rng.uniform(-2.0, 2.0, 3)])


@dataclass
class SynthesisResult:
    params: ControlParams
    penalty: float
    execution_time: float
    winding_index: int
    start_seed: int
    iterations: int
    converged: bool = True

    def to_json(self) -> dict:
        return {
            "params": self.params.to_json(),
            "penalty": self.penalty,
            "execution_time": self.execution_time,
            "winding_index": self.winding_index,
            "seed": self.start_seed,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SynthesisResult":
        return cls(
            params=ControlParams.from_json(data["params"]),
            penalty=float(data["penalty"]),
            execution_time=float(data["execution_time"]),
            winding_index=int(data["winding_index"]),
            start_seed=int(data["seed"]),
            iterations=int(data["iterations"]),
            converged=bool(data.get("converged", True)),
        )


@dataclass
class SpectrumBin:
    winding_index: int
    center: float
    count: int


@dataclass
class Spectrum:
    offset: float
    bins: list[SpectrumBin] = field(default_factory=list)
    outliers: list[float] = field(default_factory=list)

    def histogram(self) -> dict[int, int]:
        return {b.winding_index: b.count for b in self.bins}


def time_spectrum(results, offset: float, tol: float = CLUSTER_TOL) -> Spectrum:
    """Cluster execution times and label each cluster by ``n`` in ``T = n + offset``.

    Clusters whose centre is farther than ``tol`` from the lattice
    ``offset + {0, 1, 2, ...}`` are reported as outliers.
    """
    times = sorted(r.execution_time if hasattr(r, "execution_time") else float(r) for r in results)
    spec = Spectrum(offset=offset)
    clusters: list[list[float]] = []
    for t in times:
        if clusters and t - clusters[-1][-1] <= tol:
            clusters[-1].append(t)
        else:
            clusters.append([t])
    for members in clusters:
        center = sum(members) / len(members)
        n = round(center - offset)
        if n < 0 or abs(center - (n + offset)) > tol:
            spec.outliers.extend(members)
        else:
            spec.bins.append(SpectrumBin(int(n), center, len(members)))
    return spec


@dataclass
class SynthesisRun:
    """All per-start outcomes of one multi-start search."""

    target: np.ndarray
    config: SearchConfig
    starts: list[SynthesisResult]
    kak: KakResult

    @property
    def results(self) -> list[SynthesisResult]:
        """Converged starts sorted by execution time, then penalty, then seed."""
        good = [r for r in self.starts if r.converged]
        return sorted(good, key=lambda r: (round(r.execution_time, 6), r.penalty, r.start_seed))

    @property
    def converged(self) -> bool:
        return any(r.converged for r in self.starts)

    @property
    def best(self) -> SynthesisResult | None:
        res = self.results
        return res[0] if res else None

    @property
    def min_time(self) -> float | None:
        best = self.best
        return None if best is None else best.execution_time

    @property
    def best_penalty(self) -> float:
        return min(r.penalty for r in self.starts)

    def spectrum(self, offset: float | None = None) -> Spectrum:
        return time_spectrum(self.results, self.kak.lower_bound if offset is None else offset)


def _mode_code(mode: str) -> int:
    return _kernels.MODE_EXACT if mode == "exact" else _kernels.MODE_PHASE


def _run_starts(target: np.ndarray, config: SearchConfig, indices, offset: float) -> list[SynthesisResult]:
    target = np.ascontiguousarray(target, dtype=np.complex128)
    mode = _mode_code(config.phase_mode)
    ftol = config.penalty_tolerance / 10.0
    out = []
    for k in indices:
        x0 = start_point(config.seed, k)
        args = (target, mode, float(config.time_weight), bool(config.nonneg_times))
        x, fx, it, status = _kernels.simplex_search_jit(
            _kernels.objective_jit, args, x0, float(config.simplex_step), ftol,
            int(config.max_iterations))
        if status == _kernels.NONFINITE:
            log.warning("start %d aborted: non-finite objective after %d iterations", k, it)
            x = x0
        if config.nonneg_times:
            x = x.copy()
            x[12:15] = np.abs(x[12:15])
        params = ControlParams.from_vector(x)
        pen = distance(reconstruct(params), target, config.phase_mode)
        converged = status != _kernels.NONFINITE and pen < config.penalty_tolerance
        t = params.execution_time
        out.append(SynthesisResult(params, pen, t, int(round(t - offset)), int(k), int(it), converged))
    return out


def _chunks(n: int, parts: int) -> list[range]:
    size, extra = divmod(n, parts)
    out, lo = [], 0
    for p in range(parts):
        hi = lo + size + (1 if p < extra else 0)
        if hi > lo:
            out.append(range(lo, hi))
        lo = hi
    return out


def synthesize(target: np.ndarray, config: SearchConfig | None = None, workers: int = 1) -> SynthesisRun:
    """Run ``config.num_starts`` independent polytope searches for ``target``.

    The outcome is identical for any ``workers`` count: each start depends
    only on ``(seed, index)`` and results are merged in index order.
    """
    config = config or SearchConfig()
    target = np.asarray(target, dtype=np.complex128)
    if not qmat.is_unitary(target, tol=1e-8):
        raise ValueError("target is not unitary")
    kak = analytic_kak(target)
    workers = max(1, min(int(workers or os.cpu_count() or 1), config.num_starts))
    if workers == 1:
        starts = _run_starts(target, config, range(config.num_starts), kak.lower_bound)
    else:
        starts = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_starts, target, config, chunk, kak.lower_bound)
                       for chunk in _chunks(config.num_starts, workers)]
            for fut in futures:
                starts.extend(fut.result())
    starts.sort(key=lambda r: r.start_seed)
    run = SynthesisRun(target=target, config=config, starts=starts, kak=kak)
    if not run.converged:
        log.info("no converged start; best penalty %.3e", run.best_penalty)
    return run
