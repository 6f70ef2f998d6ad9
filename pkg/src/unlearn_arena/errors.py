"""Exception hierarchy shared by every arena module."""


class ArenaError(Exception):
    """Base class for all arena-specific failures."""


# -- numerics ---------------------------------------------------------------

class NotPositiveDefinite(ArenaError):
    """Cholesky factorization hit a pivot at or below the pivot floor."""


class SingularDowndate(ArenaError):
    """Rank-one removal would make the Gram matrix singular."""


class LengthMismatch(ArenaError):
    """Vectors that must share a length do not."""


class InvalidCounts(ArenaError):
    """Success/trial counts or credibility level out of range."""


# -- datasets ---------------------------------------------------------------

class ForgetTooLarge(ArenaError):
    """Forget selection must be a strict subset of the training ids."""


class EmptyClass(ArenaError):
    """Classwise forgetting requested for a class with no training examples."""


# -- schemes ----------------------------------------------------------------

class EmptyData(ArenaError):
    """Operation requires at least one example."""


class DegenerateGram(ArenaError):
    """Unregularized regression with m <= n has no unique solution."""


class DimensionMismatch(ArenaError):
    """Query feature dimension does not match the model."""


# -- unlearners -------------------------------------------------------------

class UnknownId(ArenaError):
    """Forget id not present in the instance store."""


class TranscriptMismatch(ArenaError):
    """Transcript does not telescope to the model's parameters."""


class NotParametric(ArenaError):
    """Unlearner requires a flat parameter vector."""


class EmptyForget(ArenaError):
    """Unlearner requires a non-empty forget set."""


class NotConvexScheme(ArenaError):
    """Newton removal only applies to the convex (no-hidden-layer) scheme."""


class BudgetExhausted(ArenaError):
    """Inference oracle query budget exceeded."""


# -- distinguishers ---------------------------------------------------------

class InsufficientPopulation(ArenaError):
    """Population too small to train the requested shadow models."""


# -- game / cli -------------------------------------------------------------

class AllTrialsAborted(ArenaError):
    """Every trial of a game aborted; no report can be formed."""


class ConfigError(ArenaError):
    """Experiment configuration failed validation."""


class MixedSchemaVersions(ArenaError):
    """Result files with different schema versions cannot be merged."""
