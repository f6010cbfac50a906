"""Energy minimization over gate angles.

The AP ramp has one parameter (its time step) and is scanned on a grid and
refined by golden-section search. BB sequences have all 2N angles free and
go through a two-stage pipeline: a local simplex search followed by a
pattern search seeded with its result.
"""

import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import msgspec
import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .container import FORMAT_VERSION, read_json, write_json
from .ipeps import init_product_x
from .ntu import evolve
from .observables import energy_per_bond, environment
from .reference import EXACT_FERRO_ENERGY, VARIATIONAL_ENERGY
from .sequences import GateSequence, Variant, ap_sequence, bb_sequence
from .settings import BoundaryOptions, NtuOptions, OptimizerOptions


__all__ = [
    "CostEvaluation",
    "OptimizerTrace",
    "ScanResult",
    "Checkpoint",
    "BBReport",
    "CostFunction",
    "evaluate_sequence",
    "angle_bounds",
    "energy_floor",
    "default_dt_grid",
    "scan_dt",
    "nelder_mead",
    "pattern_search",
    "pad_sequence",
    "optimize_bb",
]

logger = logging.getLogger(__name__)

Strategy = str
STRATEGIES = ("ap_seed", "warm_start", "random")


class CostEvaluation(msgspec.Struct, kw_only=True):
    angles: List[float]
    energy: float
    epsilon_ntu: float
    wall_seconds: float
    key: str
    tainted: bool = False


class OptimizerTrace(msgspec.Struct, kw_only=True):
    """Best-so-far energy and step size per iteration of one search."""

    method: str
    best_energy: List[float] = []
    step: List[float] = []
    n_evals: int = 0
    termination: str = ""
    budget_exhausted: bool = False
    x_best: List[float] = []
    f_best: float = math.inf
    format_version: str = FORMAT_VERSION

    def record(self, f_best: float, step: float) -> None:
        self.best_energy.append(float(f_best))
        self.step.append(float(step))


class ScanResult(msgspec.Struct, kw_only=True):
    N: int
    variant: str
    curve: List[Tuple[float, float]]
    dt_star: float
    energy_star: float
    epsilon_ntu: float = 0.0
    interior_minimum: bool = True
    format_version: str = FORMAT_VERSION


class Checkpoint(msgspec.Struct, kw_only=True):
    N: int
    strategy: str
    stage: str
    x_best: List[float]
    f_best: float
    n_evals: int = 0
    format_version: str = FORMAT_VERSION


class BBReport(msgspec.Struct, kw_only=True):
    N: int
    strategies: List[str]
    energy: float
    epsilon_ntu: float
    tainted: bool
    budget_exhausted: bool
    n_evals: int
    traces: List[OptimizerTrace] = []
    energies: Dict[str, float] = {}
    below_floor: bool = False
    format_version: str = FORMAT_VERSION


def evaluate_sequence(seq: GateSequence, D_max: int, chi: int,
                      ntu: Optional[NtuOptions] = None,
                      boundary: Optional[BoundaryOptions] = None) -> Tuple[float, float]:
    """Final energy per bond and total NTU error of one sequence."""
    state, report = evolve(init_product_x(), seq, D_max, ntu)
    env = environment(state, chi, boundary)
    energy = energy_per_bond(env, seq.target_field).value
    return energy, report.epsilon_total


def _key(angles: Sequence[float]) -> str:
    # angles quantized to 1e-12
    return ",".join(str(int(round(a * 1e12))) for a in angles)


class CostFunction:
    """Energy of a BB sequence as a function of its flat angle vector.

    Evaluations are cached by quantized angles and are safe to request from
    several threads.
    """

    def __init__(self, template: GateSequence, D_max: int, chi: int,
                 ntu: Optional[NtuOptions] = None, boundary: Optional[BoundaryOptions] = None,
                 taint_threshold: float = 1e-4,
                 evaluator: Optional[Callable[[GateSequence], Tuple[float, float]]] = None):
        self.template = template
        self.taint_threshold = taint_threshold
        self._evaluator = evaluator or (lambda seq: evaluate_sequence(seq, D_max, chi, ntu, boundary))
        self._cache: Dict[str, CostEvaluation] = {}
        self._lock = threading.Lock()
        self.evaluations: List[CostEvaluation] = []

    @property
    def dim(self) -> int:
        return 2 * self.template.N

    def sequence(self, angles: Sequence[float]) -> GateSequence:
        return self.template.with_angles(angles)

    def evaluate(self, angles: Sequence[float]) -> CostEvaluation:
        angles = [float(a) for a in angles]
        key = _key(angles)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        start = time.perf_counter()
        energy, epsilon = self._evaluator(self.sequence(angles))
        result = CostEvaluation(angles=angles, energy=float(energy), epsilon_ntu=float(epsilon),
                                wall_seconds=time.perf_counter() - start, key=key,
                                tainted=epsilon > self.taint_threshold)
        if result.tainted:
            logger.warning("evaluation tainted: epsilon_NTU=%.2e above %.1e", epsilon,
                           self.taint_threshold)
        logger.debug("cost %.12f epsilon %.2e at %s", energy, epsilon, angles)
        with self._lock:
            self._cache.setdefault(key, result)
            self.evaluations.append(result)
        return result

    def __call__(self, angles) -> float:
        return self.evaluate(angles).energy


class _Counted:
    """Counts distinct points of a cost and remembers the best one seen."""

    def __init__(self, cost: Callable[[np.ndarray], float]):
        self.cost = cost
        self.n_evals = 0
        self.best_x: Optional[np.ndarray] = None
        self.best_f = math.inf
        self._seen: Dict[bytes, float] = {}
        self._lock = threading.Lock()

    def __call__(self, x) -> float:
        x = np.array(x, dtype=float)
        key = x.tobytes()
        with self._lock:
            if key in self._seen:
                return self._seen[key]
        f = float(self.cost(x))
        with self._lock:
            if key not in self._seen:
                self._seen[key] = f
                self.n_evals += 1
            if f < self.best_f:
                self.best_f, self.best_x = f, x.copy()
        return f


def angle_bounds(N: int, g: float) -> List[Tuple[float, float]]:
    """beta in [-pi/2, pi/2] and alpha g in [-pi, pi]."""
    a = math.pi / abs(g) if g else math.pi
    return [(-math.pi / 2, math.pi / 2)] * N + [(-a, a)] * N


def default_dt_grid(N: int, n: int = 30) -> List[float]:
    return list(np.linspace(0.02, 0.6, n))


def scan_dt(N: int, grid: Sequence[float], D_max: int = 8, chi: int = 40,
            variant: Variant = "para_target", g: float = 3.1,
            ntu: Optional[NtuOptions] = None, boundary: Optional[BoundaryOptions] = None,
            energy_fn: Optional[Callable[[float], Tuple[float, float]]] = None) -> ScanResult:
    """AP energy on a grid of time steps, refined by golden-section search.

    The curve is reported against the total rotation angle 2 N dt.
    """
    grid = sorted(float(dt) for dt in grid)
    if not grid or grid[0] <= 0:
        raise ValueError("grid must be nonempty and positive")
    if energy_fn is None:
        def energy_fn(dt):
            return evaluate_sequence(ap_sequence(N, dt, variant, g), D_max, chi, ntu, boundary)

    cache: Dict[float, Tuple[float, float]] = {}

    def energy(dt: float) -> float:
        if dt not in cache:
            cache[dt] = energy_fn(dt)
        return cache[dt][0]

    values = [energy(dt) for dt in grid]
    curve = [(2 * N * dt, e) for dt, e in zip(grid, values)]
    i = int(np.argmin(values))
    interior = 0 < i < len(grid) - 1
    if len(grid) == 1:
        dt_star = grid[0]
    elif interior:
        try:
            res = minimize_scalar(energy, bracket=(grid[i - 1], grid[i], grid[i + 1]),
                                  method="golden", options={"xtol": 1e-4})
            dt_star = float(res.x)
        except ValueError:
            res = minimize_scalar(energy, bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                                  options={"xatol": 1e-4 * grid[i]})
            dt_star = float(res.x)
    else:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        res = minimize_scalar(energy, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-4 * grid[i]})
        dt_star = float(res.x)
        logger.warning("AP scan minimum for N=%d sits at the grid edge dt=%.4f", N, grid[i])
    if energy(dt_star) > values[i]:
        dt_star = grid[i]
    e_star, eps_star = cache[dt_star]
    logger.info("AP N=%d: dt*=%.6f E*=%.8f", N, dt_star, e_star)
    return ScanResult(N=N, variant=variant, curve=curve, dt_star=dt_star, energy_star=e_star,
                      epsilon_ntu=eps_star, interior_minimum=interior)


def nelder_mead(cost: Callable, x0: Sequence[float], opts: Optional[OptimizerOptions] = None,
                step: Optional[float] = None,
                bounds: Optional[Sequence[Tuple[float, float]]] = None
                ) -> Tuple[np.ndarray, float, OptimizerTrace]:
    """Adaptive Nelder-Mead simplex search; never returns worse than ``x0``.

    scipy advances the simplex one iteration at a time so that the search
    stops as soon as the simplex diameter drops below ``opts.xtol`` or the
    spread of its energies below ``opts.ftol``. Revisited vertices are not
    re-evaluated.
    """
    opts = opts or OptimizerOptions()
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1 or x0.size < 1:
        raise ValueError("x0 must be a nonempty vector")
    counted = _Counted(cost)
    trace = OptimizerTrace(method="nelder-mead")
    counted(x0)
    step = opts.mesh0 if step is None else step
    simplex = np.vstack([x0] + [x0 + step * e for e in np.eye(x0.size)])
    if bounds is not None:
        lo, hi = (np.array(b, dtype=float) for b in zip(*bounds))
        simplex = np.clip(simplex, lo, hi)
    trace.termination = "tolerance"
    while True:
        if counted.n_evals >= opts.max_evals:
            trace.budget_exhausted = True
            trace.termination = "budget"
            break
        res = minimize(counted, simplex[0], method="Nelder-Mead", bounds=bounds,
                       options={"maxiter": 1, "maxfev": opts.max_evals + x0.size + 1,
                                "xatol": 0.0, "fatol": 0.0, "adaptive": True,
                                "initial_simplex": simplex})
        simplex, values = res.final_simplex
        diameter = float(np.max(np.abs(simplex[1:] - simplex[0])))
        spread = float(np.max(np.abs(values[1:] - values[0])))
        trace.record(counted.best_f, diameter)
        if diameter <= opts.xtol or spread <= opts.ftol:
            break
    trace.n_evals = counted.n_evals
    trace.x_best = [float(v) for v in counted.best_x]
    trace.f_best = counted.best_f
    logger.info("nelder-mead: f=%.10f after %d evaluations (%s)", counted.best_f,
                counted.n_evals, trace.termination)
    return counted.best_x, counted.best_f, trace


def pattern_search(cost: Callable, x0: Sequence[float], opts: Optional[OptimizerOptions] = None,
                   bounds: Optional[Sequence[Tuple[float, float]]] = None
                   ) -> Tuple[np.ndarray, float, OptimizerTrace]:
    """Generalized pattern search polling +-mesh along every coordinate.

    A complete poll is evaluated (concurrently with ``opts.workers`` > 1);
    the best improving point wins, ties going to the lowest poll index.
    The mesh grows by ``opts.expansion`` on success and shrinks by
    ``opts.contraction`` otherwise; the search stops below ``opts.mesh_min``.
    A start outside ``bounds`` is scored as given and stays the incumbent
    unless a feasible point beats it.
    """
    opts = opts or OptimizerOptions()
    x = np.asarray(x0, dtype=float)
    n = x.size
    if bounds is None:
        lo, hi = np.full(n, -np.inf), np.full(n, np.inf)
    else:
        lo, hi = (np.array(b, dtype=float) for b in zip(*bounds))
        if np.any(lo > hi) or len(lo) != n:
            raise ValueError("bounds must give one (low, high) pair per coordinate with low <= high")
    counted = _Counted(cost)
    trace = OptimizerTrace(method="pattern-search")
    start, f_start = x, counted(x)
    x = np.clip(x, lo, hi)
    f = counted(x)
    mesh = opts.mesh0
    pool = ThreadPoolExecutor(max_workers=opts.workers) if opts.workers > 1 else None
    try:
        while mesh >= opts.mesh_min:
            polls = []
            for i in range(n):
                for sign in (1.0, -1.0):
                    p = x.copy()
                    p[i] = np.clip(p[i] + sign * mesh, lo[i], hi[i])
                    if p[i] != x[i]:
                        polls.append(p)
            if counted.n_evals + len(polls) > opts.max_evals:
                trace.budget_exhausted = True
                break
            values = list(pool.map(counted, polls)) if pool else [counted(p) for p in polls]
            best = min(range(len(polls)), key=lambda k: (values[k], k)) if polls else None
            if best is not None and values[best] < f:
                x, f = polls[best], values[best]
                mesh *= opts.expansion
            else:
                mesh *= opts.contraction
            trace.record(min(f, f_start), mesh)
            logger.debug("pattern search f=%.12f mesh=%.2e", f, mesh)
    finally:
        if pool is not None:
            pool.shutdown()
    if f_start < f:
        logger.info("pattern search kept its out-of-bounds start (%.10f < %.10f)", f_start, f)
        x, f = start, f_start
    trace.n_evals = counted.n_evals
    trace.termination = "budget" if trace.budget_exhausted else "mesh"
    trace.x_best = [float(v) for v in x]
    trace.f_best = float(f)
    logger.info("pattern search: f=%.10f after %d evaluations (%s)", f, counted.n_evals,
                trace.termination)
    return x, float(f), trace


def pad_sequence(seq: GateSequence) -> GateSequence:
    """Depth N+1 sequence implementing the same circuit as ``seq``.

    The old last H1 layer carried half weight, so its angle is halved before
    a zero-angle layer is appended.
    """
    alpha = list(seq.alpha)
    alpha[-1] *= 0.5
    return bb_sequence(list(seq.beta) + [0.0], alpha + [0.0], seq.variant, seq.g,
                       metadata={**seq.metadata, "padded_from": seq.N})


def energy_floor(variant: Variant, g: float) -> Optional[float]:
    """Lowest energy per bond a prepared state can sensibly reach, if known."""
    if variant == "para_to_ferro":
        return EXACT_FERRO_ENERGY
    if math.isclose(g, 3.1):
        return VARIATIONAL_ENERGY
    return None


def _checkpoint_path(directory, N: int, strategy: str) -> Path:
    return Path(directory) / f"checkpoint_N{N}_{strategy}.json"


def optimize_bb(N: int, strategy: Union[Strategy, Sequence[Strategy]] = "ap_seed",
                D_max: int = 8, chi: int = 40, opts: Optional[OptimizerOptions] = None,
                variant: Variant = "para_target", g: float = 3.1,
                ntu: Optional[NtuOptions] = None, boundary: Optional[BoundaryOptions] = None,
                previous: Optional[GateSequence] = None, ap_dt: Optional[float] = None,
                seed: int = 0, checkpoint_dir=None, resume: bool = False,
                cost: Optional[CostFunction] = None) -> Tuple[GateSequence, float, BBReport]:
    """Simplex then pattern search from one or more starting points.

    Returns the best sequence over the strategies attempted. Every stage
    result is checkpointed when ``checkpoint_dir`` is given; ``resume``
    restarts from a stored checkpoint instead of the strategy's seed.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    opts = opts or OptimizerOptions()
    strategies = [strategy] if isinstance(strategy, str) else list(strategy)
    for s in strategies:
        if s not in STRATEGIES:
            raise ValueError(f"unknown strategy {s!r}, expected one of {STRATEGIES}")
    template = bb_sequence([0.0] * N, [0.0] * N, variant, g)
    cost = cost or CostFunction(template, D_max, chi, ntu, boundary, opts.taint_threshold)
    bounds = angle_bounds(N, g)

    best_x: Optional[np.ndarray] = None
    best_f = math.inf
    traces: List[OptimizerTrace] = []
    energies: Dict[str, float] = {}
    exhausted = False
    for s in strategies:
        try:
            x0 = _start(s, N, variant, g, D_max, chi, ntu, boundary, previous, ap_dt, seed, cost)
            if resume and checkpoint_dir is not None and _checkpoint_path(checkpoint_dir, N, s).exists():
                ckpt = read_json(_checkpoint_path(checkpoint_dir, N, s), Checkpoint)
                logger.info("resuming N=%d %s from stage %s (E=%.10f)", N, s, ckpt.stage,
                            ckpt.f_best)
                x0 = np.asarray(ckpt.x_best, dtype=float)
            logger.info("optimizing N=%d from %s", N, s)
            x_nm, f_nm, t_nm = nelder_mead(cost, x0, opts, bounds=bounds)
            _save_checkpoint(checkpoint_dir, N, s, "nelder-mead", x_nm, f_nm, t_nm.n_evals)
            x_ps, f_ps, t_ps = pattern_search(cost, x_nm, opts, bounds)
            _save_checkpoint(checkpoint_dir, N, s, "pattern-search", x_ps, f_ps,
                             t_nm.n_evals + t_ps.n_evals)
        except KeyboardInterrupt:
            if cost.evaluations:
                last = min(cost.evaluations, key=lambda e: e.energy)
                _save_checkpoint(checkpoint_dir, N, s, "interrupted", last.angles, last.energy,
                                 len(cost.evaluations))
            raise
        traces += [t_nm, t_ps]
        exhausted = exhausted or t_nm.budget_exhausted or t_ps.budget_exhausted
        energies[s] = f_ps
        if f_ps < best_f:
            best_x, best_f = x_ps, f_ps

    best = cost.evaluate(best_x)
    floor = energy_floor(variant, g)
    below_floor = floor is not None and best.energy < floor - 1e-3
    if below_floor:
        logger.warning("N=%d energy %.8f lies below the floor %.7f; the evaluation is not "
                       "trustworthy", N, best.energy, floor)
    seq = template.with_angles(best_x, strategy=",".join(strategies), energy=best.energy,
                               epsilon_ntu=best.epsilon_ntu)
    report = BBReport(N=N, strategies=strategies, energy=best.energy, epsilon_ntu=best.epsilon_ntu,
                      tainted=best.tainted, budget_exhausted=exhausted,
                      n_evals=len(cost.evaluations), traces=traces, energies=energies,
                      below_floor=below_floor)
    return seq, best.energy, report


def _start(strategy: str, N: int, variant: Variant, g: float, D_max: int, chi: int,
           ntu, boundary, previous: Optional[GateSequence], ap_dt: Optional[float],
           seed: int, cost: CostFunction) -> np.ndarray:
    if strategy == "ap_seed":
        if ap_dt is None:
            def energy_fn(dt):
                return cost._evaluator(ap_sequence(N, dt, variant, g))

            ap_dt = scan_dt(N, default_dt_grid(N), D_max, chi, variant, g, ntu, boundary,
                            energy_fn=energy_fn).dt_star
        return np.asarray(ap_sequence(N, ap_dt, variant, g).angles, dtype=float)
    if strategy == "warm_start":
        if previous is None or previous.N != N - 1:
            raise ValueError(f"warm_start needs the optimized N={N - 1} sequence")
        return np.asarray(pad_sequence(previous).angles, dtype=float)
    rng = np.random.default_rng(seed)
    return np.array([rng.uniform(lo, hi) for lo, hi in angle_bounds(N, g)])


def _save_checkpoint(directory, N: int, strategy: str, stage: str, x, f: float,
                     n_evals: int = 0) -> None:
    if directory is None:
        return
    write_json(_checkpoint_path(directory, N, strategy),
               Checkpoint(N=N, strategy=strategy, stage=stage, x_best=[float(v) for v in x],
                          f_best=float(f), n_evals=n_evals))
