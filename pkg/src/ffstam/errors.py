"""Exception hierarchy. Every error carries a short machine-readable category."""


class FFStamError(Exception):
    category = "error"


class NonRealRoots(FFStamError):
    category = "non_real_roots"


class ConvergenceFailure(FFStamError):
    category = "convergence_failure"


class RepeatedRoots(FFStamError):
    category = "repeated_roots"


class DegreeMismatch(FFStamError):
    category = "degree_mismatch"


class DegenerateConfig(FFStamError):
    category = "degenerate_config"


class InvalidFamilyParams(FFStamError):
    category = "invalid_family_params"


class PrecisionExhausted(FFStamError):
    category = "precision_exhausted"


class DivergenceDetected(FFStamError):
    category = "divergence_detected"


class ProjectionFailure(FFStamError):
    category = "projection_failure"


class InvalidCounts(FFStamError):
    category = "invalid_counts"


class EmptyElites(FFStamError):
    category = "empty_elites"
