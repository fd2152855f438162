"""Continuous-limit dynamical systems of the ADMM-family optimizers.

Two systems are integrated and checked against the discrete iterates:

* ACCELERATED (second order, momentum variant):
      (2 - alpha) [ W''(t) + (r/t) W'(t) ] + grad(W(t)) = 0
* FIRST_ORDER (gradient flow, plain/relaxed variants):
      (2 - alpha) W'(t) + grad(W(t)) = 0

The discrete-to-continuous step is variant-dependent: the accelerated scheme
approaches its ODE with step ``eps = 1/sqrt(rho)`` (iterate ``l`` maps to
``t = l/sqrt(rho)``), while the non-accelerated schemes move
``O(1/rho)`` per iteration and approach the gradient flow with step
``eps = 1/rho`` (``t = l/rho``).  With the orthonormal DFT the transform has
unit spectral norm, so no extra constant enters the rate expressions.

Integration is classical fixed-step RK4 on the first-order reformulation,
chosen over adaptive stepping for bitwise reproducibility.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .objective import ProblemInstance, _gradient
from .solvers import SolverConfig, SolverState, SolverVariant, _iterate, _prepare_init

__all__ = [
    "OdeKind",
    "OdeSystem",
    "Trajectory",
    "RateFit",
    "OdeComparison",
    "IntegrationError",
    "ode_rhs",
    "integrate",
    "fit_decay_rate",
    "compare_iterates_to_ode",
    "trajectory_csv_lines",
    "kind_for_variant",
]


class OdeKind(enum.Enum):
    ACCELERATED = "accelerated"
    FIRST_ORDER = "first-order"


@dataclass(frozen=True)
class OdeSystem:
    """Initial value problem for one of the two limit systems.

    ``grad`` maps a state array to the objective gradient (same shape).
    ``r`` and ``v0`` apply to the accelerated kind only; ``v0`` defaults to
    rest, matching a discrete scheme whose extrapolated iterate starts equal
    to the plain one.
    """

    kind: OdeKind
    alpha: float
    grad: Callable[[np.ndarray], np.ndarray]
    w0: np.ndarray
    r: float = 4.0
    v0: np.ndarray | None = None

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        w0 = np.asarray(self.w0, dtype=np.float64)
        object.__setattr__(self, "w0", w0)
        if self.kind is OdeKind.ACCELERATED:
            if self.r < 3.0:
                raise ValueError(f"accelerated system requires r >= 3, got {self.r}")
            v0 = np.zeros_like(w0) if self.v0 is None else np.asarray(self.v0, dtype=np.float64)
            if v0.shape != w0.shape:
                raise ValueError("v0 shape does not match w0")
            object.__setattr__(self, "v0", v0)
        else:
            object.__setattr__(self, "v0", None)


def ode_rhs(sys: OdeSystem, t: float, state):
    """Time derivative at ``(t, state)``.

    FIRST_ORDER: ``state`` is the position array ``w``; returns ``dw/dt``.
    ACCELERATED: ``state`` is ``(w, v)``; returns ``(dw/dt, dv/dt)`` with
    ``dv/dt = -(r/t) v - grad(w) / (2 - alpha)``; requires ``t > 0``.
    """
    if sys.kind is OdeKind.FIRST_ORDER:
        w = np.asarray(state, dtype=np.float64)
        return -sys.grad(w) / (2.0 - sys.alpha)
    if t <= 0.0:
        raise ValueError(f"accelerated system is singular at t <= 0, got t={t}")
    w, v = state
    w = np.asarray(w, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    dv = -(sys.r / t) * v - sys.grad(w) / (2.0 - sys.alpha)
    return v.copy(), dv


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution: ``states[i]`` is the position at ``times[i]``."""

    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.times)


class IntegrationError(RuntimeError):
    """Raised on non-finite state; carries the partial trajectory."""

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


def _stack_state(sys: OdeSystem) -> np.ndarray:
    if sys.kind is OdeKind.FIRST_ORDER:
        return sys.w0.copy()
    return np.stack([sys.w0, sys.v0])


def _stacked_rhs(sys: OdeSystem):
    if sys.kind is OdeKind.FIRST_ORDER:
        coef = 2.0 - sys.alpha

        def rhs(t, y):
            return -sys.grad(y) / coef

    else:
        coef = 2.0 - sys.alpha
        r = sys.r

        def rhs(t, y):
            w, v = y[0], y[1]
            return np.stack([v, -(r / t) * v - sys.grad(w) / coef])

    return rhs


def _rk4_span(rhs, t0: float, y: np.ndarray, span: float, max_step: float) -> np.ndarray:
    """Advance ``y`` across ``[t0, t0 + span]`` with uniform RK4 steps."""
    n = max(1, math.ceil(span / max_step))
    h = span / n
    t = t0
    for _ in range(n):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return y


def integrate(sys: OdeSystem, t0: float, t1: float, step: float) -> Trajectory:
    """Fixed-step RK4 trajectory sampled at every step from ``t0`` to ``t1``."""
    if step <= 0.0:
        raise ValueError(f"step must be > 0, got {step}")
    if sys.kind is OdeKind.ACCELERATED and t0 <= 0.0:
        raise ValueError(f"accelerated system requires t0 > 0, got {t0}")
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
    n = max(1, math.ceil((t1 - t0) / step))
    h = (t1 - t0) / n
    rhs = _stacked_rhs(sys)
    y = _stack_state(sys)
    times = [t0]
    samples = [y.copy()]
    t = t0
    for _ in range(n):
        y = _rk4_span(rhs, t, y, h, h)
        t += h
        if not np.all(np.isfinite(y)):
            traj = _assemble(sys, times, samples)
            raise IntegrationError(f"non-finite state at t={t:.6g}", traj)
        times.append(t)
        samples.append(y.copy())
    return _assemble(sys, times, samples)


def _assemble(sys: OdeSystem, times, samples) -> Trajectory:
    arr = np.array(samples)
    ts = np.array(times)
    if sys.kind is OdeKind.FIRST_ORDER:
        return Trajectory(times=ts, states=arr)
    return Trajectory(times=ts, states=arr[:, 0], velocities=arr[:, 1])


@dataclass(frozen=True)
class RateFit:
    """Log-log decay fit plus the windowed bound diagnostics.

    ``slope``/``residual`` come from a least-squares fit of
    ``log(objective - reference)`` against ``log t`` over samples with
    ``t >= t_min``.  ``t_squared_max`` is the largest ``t^2 * suboptimality``
    over those samples and ``bound_ratio`` compares the last quarter of the
    window against the first; a ratio that stays small certifies an
    ``O(1/t^2)`` envelope without asserting an exact asymptotic slope.
    """

    slope: float
    residual: float
    reference_optimum: float
    n_samples: int
    t_min: float
    t_squared_max: float
    bound_ratio: float


def fit_decay_rate(
    times: np.ndarray,
    objectives: np.ndarray,
    reference_optimum: float,
    t_min: float = 0.5,
) -> RateFit:
    """Fit the decay of suboptimality along a trajectory; see :class:`RateFit`."""
    times = np.asarray(times, dtype=np.float64)
    objectives = np.asarray(objectives, dtype=np.float64)
    if times.shape != objectives.shape:
        raise ValueError("times and objectives must have equal length")
    keep = times >= t_min
    if int(keep.sum()) < 20:
        raise ValueError(
            f"need at least 20 samples with t >= {t_min}, got {int(keep.sum())}"
        )
    t = times[keep]
    subopt = objectives[keep] - reference_optimum
    t2s = t**2 * subopt
    quarter = max(1, len(t) // 4)
    first = float(np.max(t2s[:quarter]))
    last = float(np.max(t2s[-quarter:]))
    if first > 0.0:
        bound_ratio = last / first
    else:
        bound_ratio = 0.0 if last <= 0.0 else float("inf")
    positive = subopt > 0.0
    if int(positive.sum()) >= 2:
        logt = np.log(t[positive])
        logs = np.log(subopt[positive])
        coeffs, res, *_ = np.polyfit(logt, logs, 1, full=True)
        slope = float(coeffs[0])
        residual = float(np.sqrt(res[0] / positive.sum())) if len(res) else 0.0
    else:
        slope, residual = float("nan"), float("nan")
    return RateFit(
        slope=slope,
        residual=residual,
        reference_optimum=float(reference_optimum),
        n_samples=int(keep.sum()),
        t_min=t_min,
        t_squared_max=float(np.max(t2s)),
        bound_ratio=bound_ratio,
    )


def kind_for_variant(variant: SolverVariant) -> OdeKind:
    """Limit system matching a solver variant."""
    if variant is SolverVariant.RA_ADMM:
        return OdeKind.ACCELERATED
    return OdeKind.FIRST_ORDER


@dataclass(frozen=True)
class OdeComparison:
    """Iterate-versus-trajectory deviation report for one penalty value."""

    rho: float
    kind: OdeKind
    max_deviation: float
    samples: int
    sample_times: np.ndarray
    deviations: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "rho": self.rho,
            "max_deviation": self.max_deviation,
            "samples": self.samples,
        }


def compare_iterates_to_ode(
    prob: ProblemInstance,
    cfg: SolverConfig,
    horizon_t: float,
    init: SolverState | None = None,
    kind: OdeKind | None = None,
    max_samples: int = 200,
    ode_max_step: float = 1e-3,
) -> OdeComparison:
    """Sup-norm deviation between solver iterates and the matching ODE.

    The solver runs with the stopping criterion disabled for the number of
    iterations covering ``horizon_t`` in rescaled time; iterates are compared
    with the trajectory at the corresponding times on a thinned grid of at
    most ``max_samples`` points.  Deviations shrink as ``rho`` grows (the
    effective step tends to zero).
    """
    natural = kind_for_variant(cfg.variant)
    if kind is not None and kind is not natural:
        raise ValueError(f"variant {cfg.variant.value} pairs with {natural.value}, not {kind.value}")
    kind = natural
    rho = cfg.rho
    eps = 1.0 / math.sqrt(rho) if kind is OdeKind.ACCELERATED else 1.0 / rho
    total_iters = max(1, math.ceil(horizon_t / eps))
    state = _prepare_init(prob, init)
    w0 = state.w.copy()
    grad = lambda w: _gradient(w, prob)
    if kind is OdeKind.ACCELERATED:
        sys = OdeSystem(kind=kind, alpha=cfg.alpha, grad=grad, w0=w0, r=float(cfg.r))
        t_ode = eps  # start one discrete step in, away from the r/t singularity
    else:
        sys = OdeSystem(kind=kind, alpha=cfg.alpha, grad=grad, w0=w0)
        t_ode = 0.0
    rhs = _stacked_rhs(sys)
    y = _stack_state(sys)

    stride = max(1, total_iters // max_samples)
    sample_ls = list(range(stride, total_iters + 1, stride))
    if sample_ls[-1] != total_iters:
        sample_ls.append(total_iters)

    stepper = _iterate(prob, cfg, state, collect_residuals=False)
    deviations = []
    times = []
    next_idx = 0
    for _ in range(total_iters):
        state, _, _ = stepper.__next__()
        l = state.iteration
        if next_idx < len(sample_ls) and l == sample_ls[next_idx]:
            t_l = l * eps
            if t_l > t_ode:
                y = _rk4_span(rhs, t_ode, y, t_l - t_ode, ode_max_step)
                t_ode = t_l
            w_ode = y if kind is OdeKind.FIRST_ORDER else y[0]
            deviations.append(float(np.linalg.norm(state.w - w_ode)))
            times.append(t_l)
            next_idx += 1
    deviations = np.array(deviations)
    return OdeComparison(
        rho=rho,
        kind=kind,
        max_deviation=float(deviations.max()),
        samples=len(deviations),
        sample_times=np.array(times),
        deviations=deviations,
    )


def trajectory_csv_lines(
    traj: Trajectory,
    objective: Callable[[np.ndarray], float],
    reference_optimum: float,
    w_star: np.ndarray | None = None,
) -> list[str]:
    """Rows ``t,objective,suboptimality,dist_to_opt`` for a trajectory."""
    lines = ["t,objective,suboptimality,dist_to_opt"]
    for t, w in zip(traj.times, traj.states):
        obj = objective(w)
        dist = float(np.linalg.norm(w - w_star)) if w_star is not None else float("nan")
        lines.append(f"{t:.17g},{obj:.17g},{obj - reference_optimum:.17g},{dist:.17g}")
    return lines
