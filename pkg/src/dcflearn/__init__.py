"""Spatially masked multi-channel correlation filters.

Library layout:

* :mod:`dcflearn.spectral` — tensor containers, orthonormal 2-D DFT, binary IO.
* :mod:`dcflearn.objective` — masks, labels, objective value and gradient.
* :mod:`dcflearn.solvers` — plain / relaxed / relaxed-accelerated ADMM.
* :mod:`dcflearn.dynamics` — continuous-limit ODEs, RK4, rate diagnostics.
* :mod:`dcflearn.tracker` — frame-by-frame tracking loop.
* :mod:`dcflearn.metrics` — one-pass evaluation metrics (CLE/DP/OP/AUC).
* :mod:`dcflearn.cli` — benchmark and evaluation command line.
"""

from .spectral import (
    FeatureTensor,
    SpectrumTensor,
    fft2_channels,
    ifft2_channels,
    load_tensor,
    save_tensor,
)
from .objective import (
    LabelMap,
    MaskPair,
    ProblemInstance,
    build_mask,
    cosine_window,
    evaluate_objective,
    gaussian_label,
    objective_gradient,
    random_instance,
    ridge_minimizer,
)
from .solvers import (
    ConvergenceTrace,
    SolverConfig,
    SolverState,
    SolverVariant,
    iterations_to_tol,
    run_solver,
    run_solver_full,
)
from .dynamics import (
    OdeKind,
    OdeSystem,
    RateFit,
    Trajectory,
    compare_iterates_to_ode,
    fit_decay_rate,
    integrate,
    ode_rhs,
)

__version__ = "0.1.0"
