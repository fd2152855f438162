"""Masked multi-channel ridge objective for correlation filter learning.

The learning problem couples a frequency-domain data term with a spatially
masked quadratic penalty:

    L(W) = || sum_k Xhat^k * F(W^k) - Yhat ||_F^2
           + lambda1 * sum_k || W^k . P ||_F^2

where ``*`` and ``.`` are per-bin/per-cell products, ``F`` is the orthonormal
DFT of :mod:`dcflearn.spectral`, and ``P`` fuses a plain ridge weight with a
background-only weight: ``P = sqrt(1 + (lambda2/lambda1) * B)`` with the
indicator ``B`` equal to 0 on a centred target rectangle and 1 elsewhere, so
that ``lambda1 ||W.P||^2 == lambda1 ||W||^2 + lambda2 ||W.B||^2`` identically.

Correlation convention: the stored feature spectrum ``Xhat`` is the complex
conjugate of the raw DFT of the features.  Under the orthonormal transform,
``conj(F(X)) * F(W)`` is exactly ``F(corr(X, W) / N)`` where
``corr(X, W)[m, n] = sum_{p,q} X[p, q] W[(p+m) % N, (q+n) % N]``; absorbing
the conjugation at construction time lets every downstream formula use plain
products, and makes detection responses shift-correct.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .spectral import (
    FeatureTensor,
    SpectrumTensor,
    _fft2,
    _ifft2_real,
    hermitian_flip,
    load_tensor,
    save_tensor,
)

__all__ = [
    "MaskPair",
    "LabelMap",
    "ProblemInstance",
    "build_mask",
    "gaussian_label",
    "cosine_window",
    "evaluate_objective",
    "objective_gradient",
    "ridge_minimizer",
    "random_instance",
]


@dataclass(frozen=True)
class MaskPair:
    """Background indicator ``B`` and fused penalty matrix ``P``."""

    b: np.ndarray
    p: np.ndarray
    lambda1: float
    lambda2: float

    def __post_init__(self):
        b = np.ascontiguousarray(self.b, dtype=np.float64)
        p = np.ascontiguousarray(self.p, dtype=np.float64)
        if b.ndim != 2 or b.shape[0] != b.shape[1] or b.shape != p.shape:
            raise ValueError(f"B and P must be square and equal-shaped, got {b.shape} and {p.shape}")
        if not np.all((b == 0.0) | (b == 1.0)):
            raise ValueError("B must be a 0/1 indicator matrix")
        if not self.lambda1 > 0.0:
            raise ValueError(f"lambda1 must be > 0, got {self.lambda1}")
        if self.lambda2 < 0.0:
            raise ValueError(f"lambda2 must be >= 0, got {self.lambda2}")
        expected = np.sqrt(1.0 + (self.lambda2 / self.lambda1) * b)
        if not np.allclose(p, expected, rtol=1e-12, atol=1e-12):
            raise ValueError("P does not equal sqrt(1 + (lambda2/lambda1) * B)")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def target_shape(self) -> tuple[int, int]:
        """(height, width) of the zero (target) rectangle of ``B``."""
        zero_rows = int(np.sum(self.b.min(axis=1) == 0.0))
        zero_cols = int(np.sum(self.b.min(axis=0) == 0.0))
        return zero_rows, zero_cols


def build_mask(n: int, target_cells: tuple[int, int], lambda1: float, lambda2: float) -> MaskPair:
    """Centred target rectangle of zeros in ``B`` plus the fused penalty ``P``.

    When ``n - target`` is odd the rectangle sits one cell toward the
    top-left.
    """
    th, tw = int(target_cells[0]), int(target_cells[1])
    if not (0 < th <= n and 0 < tw <= n):
        raise ValueError(f"target {th}x{tw} does not fit in a {n}x{n} grid")
    b = np.ones((n, n))
    r0 = (n - th) // 2
    c0 = (n - tw) // 2
    b[r0 : r0 + th, c0 : c0 + tw] = 0.0
    p = np.sqrt(1.0 + (lambda2 / lambda1) * b)
    return MaskPair(b=b, p=p, lambda1=float(lambda1), lambda2=float(lambda2))


@dataclass(frozen=True)
class LabelMap:
    """Desired response map and its spectrum; peak 1 at the zero-shift bin."""

    y: np.ndarray
    yhat: np.ndarray

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if y.ndim != 2 or y.shape[0] != y.shape[1]:
            raise ValueError(f"label map must be square, got {y.shape}")
        if y[0, 0] != y.max() or y.min() < 0.0 or y.max() > 1.0:
            raise ValueError("label values must lie in [0, 1] with the peak at bin (0, 0)")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "yhat", np.ascontiguousarray(self.yhat, dtype=np.complex128))

    @property
    def n(self) -> int:
        return self.y.shape[0]


def gaussian_label(n: int, sigma: float) -> LabelMap:
    """Gaussian bump over circular distance from bin (0, 0), peak value 1."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    idx = np.arange(n)
    d = np.minimum(idx, n - idx).astype(np.float64)
    y = np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2.0 * sigma**2))
    yhat = np.fft.fft2(y, norm="ortho")
    return LabelMap(y=y, yhat=yhat)


def cosine_window(n: int) -> np.ndarray:
    """Outer product of 1-D Hann windows ``0.5 * (1 - cos(2*pi*i/(n-1)))``."""
    if n < 2:
        raise ValueError(f"window side must be >= 2, got {n}")
    w = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / (n - 1)))
    return np.outer(w, w)


@dataclass(frozen=True)
class ProblemInstance:
    """One filter-learning problem, frozen after construction.

    ``xhat`` holds the correlation-convention feature spectrum (conjugate of
    the raw DFT of the features), shape ``(N, N, C)``; ``yhat`` the label
    spectrum, shape ``(N, N)``.
    """

    xhat: np.ndarray
    yhat: np.ndarray
    mask: MaskPair
    rho: float
    sigma: float | None = None

    def __post_init__(self):
        xhat = np.ascontiguousarray(self.xhat, dtype=np.complex128)
        yhat = np.ascontiguousarray(self.yhat, dtype=np.complex128)
        if xhat.ndim != 3 or xhat.shape[0] != xhat.shape[1]:
            raise ValueError(f"xhat must be (N, N, C), got {xhat.shape}")
        if yhat.shape != xhat.shape[:2]:
            raise ValueError(f"yhat shape {yhat.shape} does not match grid {xhat.shape[:2]}")
        if self.mask.n != xhat.shape[0]:
            raise ValueError(f"mask side {self.mask.n} does not match grid {xhat.shape[0]}")
        if xhat.shape[2] < 1:
            raise ValueError("need at least one channel")
        if not self.rho > 0.0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if not (np.all(np.isfinite(xhat.view(np.float64))) and np.all(np.isfinite(yhat.view(np.float64)))):
            raise ValueError("problem data contains NaN or Inf")
        object.__setattr__(self, "xhat", xhat)
        object.__setattr__(self, "yhat", yhat)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def n(self) -> int:
        return self.xhat.shape[0]

    @property
    def c(self) -> int:
        return self.xhat.shape[2]

    @classmethod
    def from_features(
        cls,
        features: FeatureTensor,
        label: LabelMap,
        mask: MaskPair,
        rho: float,
        sigma: float | None = None,
    ) -> "ProblemInstance":
        """Build from spatial features, absorbing the correlation conjugate."""
        xhat = np.conj(_fft2(features.data))
        return cls(xhat=xhat, yhat=label.yhat, mask=mask, rho=rho, sigma=sigma)

    def with_rho(self, rho: float) -> "ProblemInstance":
        return replace(self, rho=rho)

    def save_dir(self, path: str) -> None:
        """Write ``xhat.bin``, ``yhat.bin`` and a JSON sidecar into ``path``."""
        os.makedirs(path, exist_ok=True)
        save_tensor(os.path.join(path, "xhat.bin"), SpectrumTensor(self.xhat))
        save_tensor(os.path.join(path, "yhat.bin"), SpectrumTensor(self.yhat[:, :, None]))
        th, tw = self.mask.target_shape
        meta = {
            "N": self.n,
            "C": self.c,
            "lambda1": self.mask.lambda1,
            "lambda2": self.mask.lambda2,
            "rho": self.rho,
            "target_h": th,
            "target_w": tw,
            "sigma": self.sigma,
        }
        with open(os.path.join(path, "problem.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load_dir(cls, path: str) -> "ProblemInstance":
        with open(os.path.join(path, "problem.json")) as fh:
            meta = json.load(fh)
        xhat = load_tensor(os.path.join(path, "xhat.bin")).data
        yhat = load_tensor(os.path.join(path, "yhat.bin")).data[:, :, 0]
        mask = build_mask(meta["N"], (meta["target_h"], meta["target_w"]), meta["lambda1"], meta["lambda2"])
        return cls(xhat=xhat, yhat=yhat, mask=mask, rho=meta["rho"], sigma=meta["sigma"])


def _check_w(w: np.ndarray, prob: ProblemInstance) -> None:
    if w.shape != prob.xhat.shape:
        raise ValueError(f"filter shape {w.shape} does not match problem {prob.xhat.shape}")


def _residual_spectrum(what: np.ndarray, prob: ProblemInstance) -> np.ndarray:
    """Per-bin data residual ``sum_k xhat_k * what_k - yhat``."""
    return np.sum(prob.xhat * what, axis=2) - prob.yhat


def _objective(w: np.ndarray, prob: ProblemInstance) -> float:
    e = _residual_spectrum(_fft2(w), prob)
    data = float(np.sum(e.real**2 + e.imag**2))
    wp = w * prob.mask.p[:, :, None]
    return data + prob.mask.lambda1 * float(np.sum(wp * wp))


def _gradient(w: np.ndarray, prob: ProblemInstance) -> np.ndarray:
    e = _residual_spectrum(_fft2(w), prob)
    data_grad = 2.0 * _ifft2_real(np.conj(prob.xhat) * e[:, :, None])
    p2 = prob.mask.p**2
    return data_grad + 2.0 * prob.mask.lambda1 * p2[:, :, None] * w


def evaluate_objective(w: FeatureTensor, prob: ProblemInstance) -> float:
    """Objective value at ``w`` (data term evaluated in the frequency domain)."""
    _check_w(w.data, prob)
    return _objective(w.data, prob)


def objective_gradient(w: FeatureTensor, prob: ProblemInstance) -> FeatureTensor:
    """Spatial-domain gradient of the objective at ``w``.

    The data-term gradient is ``2 * F^{-1}(conj(Xhat) * E)`` per channel with
    ``E`` the per-bin residual; the penalty contributes ``2*lambda1*P^2.W``.
    """
    _check_w(w.data, prob)
    return FeatureTensor(_gradient(w.data, prob))


def _ridge_spectrum(prob: ProblemInstance) -> np.ndarray:
    s2 = np.sum(prob.xhat.real**2 + prob.xhat.imag**2, axis=2)
    return np.conj(prob.xhat) * (prob.yhat / (prob.mask.lambda1 + s2))[:, :, None]


def ridge_minimizer(prob: ProblemInstance) -> FeatureTensor:
    """Closed-form minimizer for the unmasked case (``lambda2 == 0``).

    Per bin: ``what = conj(xhat) * yhat / (lambda1 + |xhat|^2)``.  Raises if
    the penalty matrix is not identically 1 (no closed form then).
    """
    if prob.mask.lambda2 != 0.0:
        raise ValueError("closed-form ridge solution requires lambda2 == 0")
    return FeatureTensor(_ifft2_real(_ridge_spectrum(prob)))


def default_label_sigma(target_cells: tuple[int, int], factor: float = 0.1) -> float:
    """Label bandwidth from the target footprint: ``factor * sqrt(h*w)``."""
    return factor * math.sqrt(target_cells[0] * target_cells[1])


def random_instance(
    rng: np.random.Generator,
    n: int = 32,
    c: int = 12,
    target_cells: tuple[int, int] | None = None,
    lambda1: float = 10.0,
    lambda2: float = 100.0,
    rho: float = 1.0,
    sigma: float | None = None,
    scale: float = 1.0,
) -> ProblemInstance:
    """Synthetic problem with a Gaussian feature spectrum.

    The spectrum is symmetrized to be the transform of a real signal:
    ``(Z + conj(flip(Z))) / 2`` for complex Gaussian ``Z``.
    """
    if target_cells is None:
        target_cells = (n // 4, n // 4)
    if sigma is None:
        sigma = default_label_sigma(target_cells)
    z = scale * (rng.standard_normal((n, n, c)) + 1j * rng.standard_normal((n, n, c)))
    sym = 0.5 * (z + np.conj(hermitian_flip(z)))
    mask = build_mask(n, target_cells, lambda1, lambda2)
    label = gaussian_label(n, sigma)
    return ProblemInstance(xhat=np.conj(sym), yhat=label.yhat, mask=mask, rho=rho, sigma=sigma)
