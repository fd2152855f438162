"""ADMM-family optimizers for the masked correlation filter objective.

Three variants share one iteration skeleton over the split

    minimize  f(Uhat) + g(W)   subject to  F^{-1}(Uhat) = W

with ``f`` the frequency-domain data term and ``g`` the masked penalty:

1. ``Uhat <- argmin f(Uhat) + (rho/2) ||Uhat - F(W') + F(T')||_F^2``
   (closed form per frequency bin via a rank-one Sherman-Morrison update),
2. ``Vhat <- alpha * Uhat + (1 - alpha) * F(W')``  (relaxation),
3. ``W <- argmin g(W) + (rho/2) ||F^{-1}(Vhat) - W + T'||_F^2``
   (closed form per spatial cell),
4. ``T <- T' + F^{-1}(Vhat) - W``  (multiplier update),
5. accelerated variant only: extrapolate ``W' = W + mu (W - W_prev)`` and
   ``T' = T + mu (T - T_prev)`` with momentum ``mu = l / (l + r)``.

The plain variant fixes ``alpha = 1`` and no extrapolation; the relaxed
variant allows ``alpha`` in (0, 2) without extrapolation.

Iteration stops when the mean absolute objective change per element,
``|L(W[l]) - L(W[l-1])| / (N*N*C)``, drops below ``tol`` or after
``max_iters`` iterations.
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .objective import ProblemInstance, _objective, ridge_minimizer
from .spectral import FeatureTensor, SpectrumTensor, _fft2, _ifft2_real

__all__ = [
    "SolverVariant",
    "SolverConfig",
    "SolverState",
    "TraceRecord",
    "ConvergenceTrace",
    "SolverDivergenceError",
    "solve_u_subproblem",
    "relax_step",
    "solve_w_subproblem",
    "run_solver",
    "run_solver_full",
    "iterations_to_tol",
    "kkt_state",
    "zero_state",
    "ridge_kkt_state",
]

W_STEP_EXACT = "exact"
W_STEP_MAPPING = "mapping"


class SolverVariant(str, enum.Enum):
    ADMM = "admm"
    R_ADMM = "r-admm"
    RA_ADMM = "ra-admm"


@dataclass(frozen=True)
class SolverConfig:
    """Optimizer settings; defaults follow the reference configuration.

    ``alpha=None`` resolves to 1.0 for the plain variant and 1.10 otherwise.
    ``w_step`` selects the per-cell update: ``"exact"`` zeroes the sub-problem
    gradient; ``"mapping"`` is the approximate masked mapping-operator update,
    kept for comparison.
    """

    variant: SolverVariant = SolverVariant.RA_ADMM
    rho: float = 1.0
    alpha: float | None = None
    r: int = 4
    max_iters: int = 8
    tol: float = 5e-7
    w_step: str = W_STEP_EXACT

    def __post_init__(self):
        variant = SolverVariant(self.variant)
        object.__setattr__(self, "variant", variant)
        alpha = self.alpha
        if alpha is None:
            alpha = 1.0 if variant is SolverVariant.ADMM else 1.10
        alpha = float(alpha)
        if variant is SolverVariant.ADMM:
            if alpha != 1.0:
                raise ValueError("plain ADMM requires alpha == 1")
        else:
            if not (0.0 < alpha < 2.0) or alpha == 1.0:
                raise ValueError(f"relaxed variants require alpha in (0,1) or (1,2), got {alpha}")
        if variant is SolverVariant.RA_ADMM and self.r < 3:
            raise ValueError(f"accelerated variant requires damping r >= 3, got {self.r}")
        if not self.rho > 0.0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol < 0.0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")
        if self.w_step not in (W_STEP_EXACT, W_STEP_MAPPING):
            raise ValueError(f"unknown w_step mode {self.w_step!r}")
        object.__setattr__(self, "alpha", alpha)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "rho": self.rho,
            "alpha": self.alpha,
            "r": self.r,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "w_step": self.w_step,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        return cls(
            variant=SolverVariant(d.get("variant", "ra-admm")),
            rho=d.get("rho", 1.0),
            alpha=d.get("alpha"),
            r=d.get("r", 4),
            max_iters=d.get("max_iters", 8),
            tol=d.get("tol", 5e-7),
            w_step=d.get("w_step", W_STEP_EXACT),
        )

    @classmethod
    def from_json(cls, s: str) -> "SolverConfig":
        return cls.from_dict(json.loads(s))


@dataclass
class SolverState:
    """Full iterate set of the accelerated scheme.

    For the non-accelerated variants ``w_prime``/``t_prime`` mirror ``w``/``t``
    at every step.  Arrays are ``(N, N, C)``; ``uhat`` is complex.
    """

    uhat: np.ndarray
    w: np.ndarray
    t: np.ndarray
    w_prime: np.ndarray
    t_prime: np.ndarray
    iteration: int = 0
    momentum: float = 0.0

    def copy(self) -> "SolverState":
        return SolverState(
            uhat=self.uhat.copy(),
            w=self.w.copy(),
            t=self.t.copy(),
            w_prime=self.w_prime.copy(),
            t_prime=self.t_prime.copy(),
            iteration=self.iteration,
            momentum=self.momentum,
        )


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    objective: float
    primal_residual: float
    dual_residual: float
    elapsed_s: float


@dataclass
class ConvergenceTrace:
    """Per-iteration objective/residual/time log of one solver run."""

    records: list[TraceRecord] = field(default_factory=list)
    converged: bool = False

    def __len__(self) -> int:
        return len(self.records)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    @property
    def final_objective(self) -> float:
        return self.records[-1].objective

    def to_csv(self, path, zero_elapsed: bool = False) -> None:
        """Write ``iter,objective,primal_residual,dual_residual,elapsed_ms``.

        ``zero_elapsed`` writes 0 for the timing column so that repeated runs
        produce byte-identical files.
        """
        lines = ["iter,objective,primal_residual,dual_residual,elapsed_ms"]
        for rec in self.records:
            ms = 0.0 if zero_elapsed else rec.elapsed_s * 1e3
            lines.append(
                f"{rec.iteration},{rec.objective:.17g},{rec.primal_residual:.17g},"
                f"{rec.dual_residual:.17g},{ms:.3f}"
            )
        text = "\n".join(lines) + "\n"
        if hasattr(path, "write"):
            path.write(text)
        else:
            with open(path, "w") as fh:
                fh.write(text)


class SolverDivergenceError(RuntimeError):
    """Raised when the objective becomes non-finite; carries the partial trace."""

    def __init__(self, message: str, trace: ConvergenceTrace):
        super().__init__(message)
        self.trace = trace


def _solve_u(xhat: np.ndarray, yhat: np.ndarray, rho: float, b: np.ndarray) -> np.ndarray:
    """Exact per-bin minimizer of ``|x^T u - y|^2 + (rho/2) ||u - b||^2``.

    Rank-one update: ``u = (I - xbar x^T / (rho/2 + x^T xbar)) ((2/rho) xbar y + b)``
    with ``xbar = conj(x)``; the denominator is strictly positive.
    """
    xbar = np.conj(xhat)
    s2 = np.sum(xhat.real**2 + xhat.imag**2, axis=2)
    rhs = (2.0 / rho) * xbar * yhat[:, :, None] + b
    coef = np.sum(xhat * rhs, axis=2) / (0.5 * rho + s2)
    return rhs - xbar * coef[:, :, None]


def _u_gradient_norm(xhat, yhat, rho, b, uhat) -> tuple[float, float]:
    """Max per-bin gradient norm of the u sub-problem, and max (1 + ||rhs||)."""
    resid = np.sum(xhat * uhat, axis=2) - yhat
    grad = np.conj(xhat) * resid[:, :, None] + 0.5 * rho * (uhat - b)
    gnorm = np.sqrt(np.sum(grad.real**2 + grad.imag**2, axis=2))
    rhs = (2.0 / rho) * np.conj(xhat) * yhat[:, :, None] + b
    rnorm = np.sqrt(np.sum(rhs.real**2 + rhs.imag**2, axis=2))
    ratio = gnorm / (1.0 + rnorm)
    return float(ratio.max()), float(gnorm.max())


def solve_u_subproblem(
    prob: ProblemInstance, w_ref: FeatureTensor, t_ref: FeatureTensor
) -> SpectrumTensor:
    """Frequency-domain sub-problem solve against reference ``w_ref``/``t_ref``."""
    b = _fft2(w_ref.data) - _fft2(t_ref.data)
    return SpectrumTensor(_solve_u(prob.xhat, prob.yhat, prob.rho, b))


def relax_step(uhat: SpectrumTensor, w_prev: FeatureTensor, alpha: float) -> SpectrumTensor:
    """Relaxation averaging ``alpha * Uhat + (1 - alpha) * F(W_prev)``."""
    if not (0.0 < alpha < 2.0):
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    return SpectrumTensor(alpha * uhat.data + (1.0 - alpha) * _fft2(w_prev.data))


def _solve_w(v: np.ndarray, t_ref: np.ndarray, mask, rho: float, mode: str) -> np.ndarray:
    if mode == W_STEP_EXACT:
        p2 = (mask.p**2)[:, :, None]
        return rho * (v + t_ref) / (2.0 * mask.lambda1 * p2 + rho)
    # Approximate mapping-operator update: zero the background, shrink the rest.
    gain = (np.sqrt(1.0 + mask.lambda2 / mask.lambda1) - mask.p)[:, :, None]
    return gain * (rho * v + t_ref) / (2.0 * mask.lambda1 + rho)


def solve_w_subproblem(
    v: FeatureTensor,
    t_ref: FeatureTensor,
    mask,
    rho: float,
    mode: str = W_STEP_EXACT,
) -> FeatureTensor:
    """Per-cell minimizer of ``lambda1 p^2 w^2 + (rho/2)(v - w + t)^2``.

    The exact mode returns ``w = rho (v + t) / (2 lambda1 p^2 + rho)``; the
    mapping mode applies the approximate masked shrinkage instead.
    """
    if v.data.shape != t_ref.data.shape:
        raise ValueError(f"shape mismatch: {v.data.shape} vs {t_ref.data.shape}")
    if mode not in (W_STEP_EXACT, W_STEP_MAPPING):
        raise ValueError(f"unknown w_step mode {mode!r}")
    return FeatureTensor(_solve_w(v.data, t_ref.data, mask, rho, mode))


def zero_state(prob: ProblemInstance) -> SolverState:
    """All-zero cold start."""
    shape = prob.xhat.shape
    z = np.zeros(shape)
    return SolverState(
        uhat=np.zeros(shape, dtype=np.complex128),
        w=z.copy(),
        t=z.copy(),
        w_prime=z.copy(),
        t_prime=z.copy(),
    )


def kkt_state(prob: ProblemInstance, w_star: FeatureTensor) -> SolverState:
    """Stationary state at a known minimizer ``w_star``.

    ``Uhat = F(W*)`` satisfies the constraint; the multiplier
    ``T = 2 lambda1 (P^2 . W*) / rho`` makes both sub-problem solves return
    their inputs, so one full iteration is a no-op (up to rounding).
    """
    w = w_star.data
    t = 2.0 * prob.mask.lambda1 * (prob.mask.p**2)[:, :, None] * w / prob.rho
    return SolverState(uhat=_fft2(w), w=w.copy(), t=t, w_prime=w.copy(), t_prime=t.copy())


def ridge_kkt_state(prob: ProblemInstance) -> SolverState:
    """KKT state built from the closed-form solution (``lambda2 == 0`` only)."""
    return kkt_state(prob, ridge_minimizer(prob))


def _iterate(
    prob: ProblemInstance,
    cfg: SolverConfig,
    state: SolverState,
    check_optimality: bool = False,
    collect_residuals: bool = True,
) -> Iterator[tuple[SolverState, float, float]]:
    """Yield ``(state, primal_residual, dual_residual)`` after each iteration.

    The momentum schedule restarts at the state's current ``iteration`` value
    (0 for fresh runs and warm starts alike).
    """
    accelerated = cfg.variant is SolverVariant.RA_ADMM
    rho, alpha = cfg.rho, cfg.alpha
    xhat, yhat, mask = prob.xhat, prob.yhat, prob.mask
    c = prob.c
    # Iteration-invariant pieces of both sub-problem solves.
    xbar = np.conj(xhat)
    s2 = np.sum(xhat.real**2 + xhat.imag**2, axis=2)
    u_rhs_const = (2.0 / rho) * xbar * yhat[:, :, None]
    u_denom = (0.5 * rho + s2)[:, :, None]
    if cfg.w_step == W_STEP_EXACT:
        w_denom = 2.0 * mask.lambda1 * (mask.p**2)[:, :, None] + rho
    else:
        w_gain = (np.sqrt(1.0 + mask.lambda2 / mask.lambda1) - mask.p)[:, :, None] / (
            2.0 * mask.lambda1 + rho
        )
    while True:
        l = state.iteration
        refs = _fft2(np.concatenate([state.w_prime, state.t_prime], axis=2))
        what_ref = refs[:, :, :c]
        that_ref = refs[:, :, c:]
        rhs = u_rhs_const + what_ref - that_ref
        coef = np.sum(xhat * rhs, axis=2)[:, :, None] / u_denom
        uhat = rhs - xbar * coef
        if check_optimality:
            ratio, _ = _u_gradient_norm(xhat, yhat, rho, what_ref - that_ref, uhat)
            if ratio > 1e-9:
                raise RuntimeError(f"u sub-problem gradient not zeroed: {ratio:.3e}")
        vhat = alpha * uhat + (1.0 - alpha) * what_ref
        v = _ifft2_real(vhat)
        if cfg.w_step == W_STEP_EXACT:
            w_new = rho * (v + state.t_prime) / w_denom
        else:
            w_new = w_gain * (rho * v + state.t_prime)
        if check_optimality and cfg.w_step == W_STEP_EXACT:
            gw = 2.0 * mask.lambda1 * (mask.p**2)[:, :, None] * w_new - rho * (
                v - w_new + state.t_prime
            )
            gmax = float(np.abs(gw).max())
            if gmax > 1e-8 * (1.0 + float(np.abs(w_new).max())):
                raise RuntimeError(f"w sub-problem gradient not zeroed: {gmax:.3e}")
        t_new = state.t_prime + v - w_new
        if accelerated:
            mu = l / (l + cfg.r)
            t_prime = t_new + mu * (t_new - state.t)
            w_prime = w_new + mu * (w_new - state.w)
        else:
            mu = 0.0
            t_prime = t_new
            w_prime = w_new
        if collect_residuals:
            # Primal residual uses the relaxed constraint variable F^{-1}(Vhat).
            primal = float(np.linalg.norm(v - w_new))
            dual = float(rho * np.linalg.norm(w_new - state.w))
        else:
            primal = dual = float("nan")
        state = SolverState(
            uhat=uhat,
            w=w_new,
            t=t_new,
            w_prime=w_prime,
            t_prime=t_prime,
            iteration=l + 1,
            momentum=mu,
        )
        yield state, primal, dual


def _prepare_init(prob: ProblemInstance, init: SolverState | None) -> SolverState:
    if init is None:
        return zero_state(prob)
    if init.w.shape != prob.xhat.shape:
        raise ValueError(
            f"warm-start state shape {init.w.shape} does not match problem {prob.xhat.shape}"
        )
    warm = init.copy()
    warm.iteration = 0
    warm.momentum = 0.0
    return warm


def run_solver_full(
    prob: ProblemInstance,
    cfg: SolverConfig,
    init: SolverState | None = None,
    check_optimality: bool = False,
) -> tuple[SolverState, ConvergenceTrace]:
    """Run the configured variant; return the final state and full trace.

    Stops at the mean-objective-change criterion or at ``max_iters``.  A
    non-finite objective aborts with :class:`SolverDivergenceError` carrying
    the partial trace.  Warm starts reuse the given tensors but restart the
    momentum schedule at zero.
    """
    state = _prepare_init(prob, init)
    trace = ConvergenceTrace()
    denom = prob.n * prob.n * prob.c
    obj_prev = _objective(state.w, prob)
    if not np.isfinite(obj_prev):
        raise SolverDivergenceError("non-finite objective at initialization", trace)
    start = time.perf_counter()
    stepper = _iterate(prob, cfg, state, check_optimality=check_optimality)
    for _ in range(cfg.max_iters):
        state, primal, dual = next(stepper)
        obj = _objective(state.w, prob)
        trace.records.append(
            TraceRecord(
                iteration=state.iteration,
                objective=obj,
                primal_residual=primal,
                dual_residual=dual,
                elapsed_s=time.perf_counter() - start,
            )
        )
        if not np.isfinite(obj):
            raise SolverDivergenceError(
                f"non-finite objective at iteration {state.iteration}", trace
            )
        if abs(obj - obj_prev) / denom < cfg.tol:
            trace.converged = True
            break
        obj_prev = obj
    return state, trace


def run_solver(
    prob: ProblemInstance,
    cfg: SolverConfig,
    init: SolverState | None = None,
    check_optimality: bool = False,
) -> tuple[FeatureTensor, ConvergenceTrace]:
    """Like :func:`run_solver_full` but returns only the filter and trace."""
    state, trace = run_solver_full(prob, cfg, init, check_optimality)
    return FeatureTensor(state.w), trace


def iterations_to_tol(
    prob: ProblemInstance,
    cfg: SolverConfig,
    target_tol: float,
    init: SolverState | None = None,
    max_iters: int = 500,
) -> int:
    """Smallest iteration count meeting the stopping criterion at ``target_tol``.

    The iteration cap is lifted to ``max_iters`` (default 500); that cap is
    returned when the criterion is never met.
    """
    if not target_tol > 0.0:
        raise ValueError(f"target_tol must be > 0, got {target_tol}")
    run_cfg = replace(cfg, max_iters=max_iters, tol=target_tol)
    _, trace = run_solver_full(prob, run_cfg, init)
    return len(trace) if trace.converged else max_iters
