"""Moving-source fractional diffusion-wave equations: forward solvers and
orbit reconstruction from pointwise traces.

The BLAS/OpenMP thread count defaults to ``FRACORBIT_THREADS`` (or 1), which
keeps repeated runs bitwise reproducible. It must be set before numpy loads.
"""

import os as _os

_threads = _os.environ.get("FRACORBIT_THREADS", "1")
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, _threads)

from .forward import (  # noqa: E402
    ForwardSolution,
    ModalBasis,
    SymbolGrid,
    TraceSet,
    duhamel_compose,
    fractional_ode_stepper,
    observe_and_perturb,
    solve_homogeneous_bounded,
    solve_homogeneous_free,
    solve_moving_source,
)
from .fracops import (  # noqa: E402
    SampledFunction,
    TimeGrid,
    caputo_derivative,
    mollify,
    rl_derivative,
    rl_integral,
)
from .inverse import (  # noqa: E402
    ReconstructionConfig,
    ReconstructionError,
    ReconstructionResult,
    SingularSystemError,
    memory_term,
    reconstruct_orbit_global,
    reconstruct_orbit_local,
    stability_experiment,
    synthesize_data,
    volterra_difference_solve,
)
from .model import (  # noqa: E402
    BoxDomain,
    FreeSpace,
    LocalizedOrbitBound,
    ObservabilityError,
    ObservationSet,
    Orbit,
    SourceProfile,
    check_admissible,
    linear_orbit,
    observability_condition,
    select_observation_points,
    sine_orbit,
    sum_of_sines_orbit,
    zero_orbit,
)
from .specfun import (  # noqa: E402
    MittagLefflerConvergenceError,
    mittag_leffler,
    relaxation_antiderivatives,
    relaxation_kernel,
)

__version__ = "0.1.0"
