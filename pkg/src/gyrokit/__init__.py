"""gyrokit: guiding-center dynamics with generalized-canonical variables.

Analytic field models, a full-orbit oracle, the forward/inverse
guiding-center transformation in superabundant variables, the canonical
guiding-center integrator, and diagnostics that turn every ordering claim
into a measurable scaling.
"""

from . import canonchecks, diagnostics, fields, fullorbit, gcmotion, gyrotransform
from .errors import (
    ConfigError,
    FieldNull,
    FitDegenerate,
    GyrokitError,
    InconsistentModel,
    NoConvergence,
    NonFinite,
    ResidualBlowup,
    StepTooLargeWarning,
    WindowTooCoarse,
    ZeroMu,
)
from .fields import FieldModel, FieldSample, Species, frame, sample, verify_model
from .fullorbit import (
    FullState,
    FullTrajectory,
    integrate_full,
    lorentz_rhs,
    step_boris,
    step_rk4,
    symplectic_residual,
)
from .gcmotion import (
    GCDerivative,
    GCTrajectory,
    canonical_rhs,
    hamiltonian_K,
    integrate_gc,
    v_D,
    v_E,
)
from .gyrotransform import (
    GCState,
    from_guiding_center,
    gc_from_orbit_average,
    gc_state_from_scalars,
    larmor_vector,
    to_guiding_center,
)

__version__ = "0.1.0"
