"""Exception and warning types shared across the package."""


class GyrokitError(Exception):
    """Base class for all gyrokit errors."""


class FieldNull(GyrokitError):
    """Magnetic field magnitude below the null threshold; the guiding-center
    description is undefined there."""


class NonFinite(GyrokitError):
    """A sampled or computed quantity is not finite."""


class InconsistentModel(GyrokitError):
    """A field model failed the potential-consistency check (B = curl A or
    E = -grad Phi - dA/dt)."""


class NoConvergence(GyrokitError):
    """Fixed-point iteration for the guiding-center position did not converge,
    usually because the ordering parameter is too large for the asymptotics."""


class WindowTooCoarse(GyrokitError):
    """Trajectory sampling too coarse to resolve one gyroperiod per window."""


class ResidualBlowup(GyrokitError):
    """Constraint residual left its expected band during guiding-center
    integration."""


class ZeroMu(GyrokitError):
    """Magnetic moment too small for a relative-drift diagnostic."""


class FitDegenerate(GyrokitError):
    """A scan metric hit the floating-point floor; the slope fit would be
    contaminated."""


class ConfigError(GyrokitError):
    """Run configuration failed validation. The message names the offending
    key."""


class StepTooLargeWarning(UserWarning):
    """Time step does not resolve the gyration (dt * Omega > 0.5)."""
