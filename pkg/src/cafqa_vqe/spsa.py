"""SPSA with a learning-rate calibration phase and last-60-point averaging.

A run consists of ``calibration_pairs`` perturbed energy pairs around the
starting point (to set the gain ``a0``), then ``run_budget`` iterations of
two evaluations each.  The returned point averages the 30 final ``theta+``
and 30 final ``theta-`` vectors.

Gains: ``c_j = c0 / (j+1)^gamma`` and ``a_j = a0 * ((1+A) / (j+1+A))^alpha``
with ``A = 0.1 * run_budget``.  The schedule is normalized so that ``a0``
is the gain of the first iteration, which is what calibration targets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

FINAL_WINDOW = 30  # iterations, i.e. 60 evaluated points

Evaluate = Callable[[np.ndarray], float]
EvalCallback = Callable[[int, np.ndarray, float], None]


@dataclass(frozen=True)
class SpsaConfig:
    calibration_pairs: int = 25
    run_budget: int = 400
    c0: float = 0.1
    alpha: float = 0.602
    gamma: float = 0.101
    target_first_step: float = 0.1
    seed: int | None = 0

    def __post_init__(self):
        for name in ("calibration_pairs", "c0", "alpha", "gamma", "target_first_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.run_budget < FINAL_WINDOW:
            raise ValueError(f"run_budget must be >= {FINAL_WINDOW} for the final average")

    @property
    def stability(self) -> float:
        return 0.1 * self.run_budget


@dataclass
class SpsaTrace:
    evaluations: list[tuple[int, np.ndarray, float]] = field(default_factory=list)
    iterate_pairs: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)
    a0: float | None = None
    final_point: np.ndarray | None = None

    @property
    def energies(self) -> list[float]:
        return [e for _, _, e in self.evaluations]


class SpsaAborted(RuntimeError):
    """The evaluator raised; ``trace`` holds everything recorded before it."""

    def __init__(self, trace: SpsaTrace, cause: BaseException):
        super().__init__(f"SPSA aborted after {len(trace.evaluations)} evaluations: {cause!r}")
        self.trace = trace
        self.cause = cause


def rademacher(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.integers(0, 2, size=dim) * 2.0 - 1.0


class _Recorder:
    def __init__(self, evaluate: Evaluate, trace: SpsaTrace, callback: EvalCallback | None):
        self.evaluate, self.trace, self.callback = evaluate, trace, callback

    def __call__(self, theta: np.ndarray) -> float:
        theta = np.array(theta, dtype=float)
        try:
            energy = float(self.evaluate(theta))
        except Exception as exc:
            raise SpsaAborted(self.trace, exc) from exc
        index = len(self.trace.evaluations)
        self.trace.evaluations.append((index, theta, energy))
        if self.callback is not None:
            self.callback(index, theta, energy)
        return energy


def _calibrate(theta0: np.ndarray, record: Callable[[np.ndarray], float], cfg: SpsaConfig,
               rng: np.random.Generator) -> float:
    half_diffs = []
    for _ in range(cfg.calibration_pairs):
        delta = rademacher(rng, theta0.size)
        e_plus = record(theta0 + cfg.c0 * delta)
        e_minus = record(theta0 - cfg.c0 * delta)
        half_diffs.append(abs(e_plus - e_minus) / 2)
    mean = float(np.mean(half_diffs))
    if mean == 0.0:
        logger.warning("calibration saw no energy difference; using a0 = target_first_step")
        return cfg.target_first_step
    return cfg.target_first_step * cfg.c0 / mean


def calibrate(init: Sequence[float], evaluate: Evaluate, cfg: SpsaConfig) -> float:
    """Estimate ``a0`` from ``2 * calibration_pairs`` perturbed evaluations."""
    rng = np.random.default_rng(cfg.seed)
    theta0 = np.asarray(init, dtype=float)
    return _calibrate(theta0, lambda t: float(evaluate(t)), cfg, rng)


def run(init: Sequence[float], evaluate: Evaluate, cfg: SpsaConfig,
        callback: EvalCallback | None = None) -> SpsaTrace:
    """Calibrate, iterate ``run_budget`` times and finalize.

    ``callback(index, theta, energy)`` fires after every evaluation so that
    callers can stream rows to disk.  Evaluator errors raise
    :class:`SpsaAborted` with the partial trace attached.
    """
    rng = np.random.default_rng(cfg.seed)
    theta = np.array(init, dtype=float)
    trace = SpsaTrace()
    record = _Recorder(evaluate, trace, callback)
    a0 = _calibrate(theta, record, cfg, rng)
    trace.a0 = a0
    A = cfg.stability
    trace.iterates.append(theta.copy())
    for j in range(cfg.run_budget):
        delta = rademacher(rng, theta.size)
        c_j = cfg.c0 / (j + 1) ** cfg.gamma
        plus, minus = theta + c_j * delta, theta - c_j * delta
        e_plus = record(plus)
        e_minus = record(minus)
        trace.iterate_pairs.append((plus, minus))
        grad = (e_plus - e_minus) / (2 * c_j) * delta
        a_j = a0 * ((1 + A) / (j + 1 + A)) ** cfg.alpha
        theta = theta - a_j * grad
        trace.iterates.append(theta.copy())
    trace.final_point = finalize(trace)
    return trace


def finalize(trace: SpsaTrace) -> np.ndarray:
    """Mean of the last 30 (theta+, theta-) pairs, i.e. 60 points."""
    if len(trace.iterate_pairs) < FINAL_WINDOW:
        raise ValueError(f"need at least {FINAL_WINDOW} iterations, have {len(trace.iterate_pairs)}")
    window = trace.iterate_pairs[-FINAL_WINDOW:]
    total = sum(p + m for p, m in window)
    return total / (2 * FINAL_WINDOW)
