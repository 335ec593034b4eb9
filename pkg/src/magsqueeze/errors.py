"""Exception types shared across the package."""


class MagsqueezeError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MagsqueezeError):
    """Invalid, conflicting, or unparseable run configuration."""


class DegenerateParametersError(MagsqueezeError):
    """Parameter combination makes the steady-state problem singular."""


class UnstableModelError(MagsqueezeError):
    """Operation requires a stable drift matrix but got an unstable one."""


class BracketError(MagsqueezeError):
    """A threshold bracket does not straddle the predicate change."""


class VerificationError(MagsqueezeError):
    """One or more self-consistency checks failed."""
