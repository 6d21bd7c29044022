"""Exception taxonomy. Each maps to one machine-parsable CLI error category."""


class CcfSimError(Exception):
    category = "error"


class ConfigurationError(CcfSimError, ValueError):
    """Bad parameters: dimension mismatch, invalid probabilities, bad thresholds."""
    category = "config"


class DispersionUndefinedError(CcfSimError):
    """Dispersion requested on a field with fewer than two artifacts."""
    category = "dispersion-undefined"


class ProtocolSetupError(CcfSimError):
    """Secure-aggregation setup is incomplete (e.g. missing pairwise seed)."""
    category = "protocol-setup"


class ProtocolViolationError(CcfSimError):
    """A node broke a protocol rule (e.g. two artifacts in one round)."""
    category = "protocol-violation"


class PrivacyBudgetExhausted(CcfSimError):
    """Per-node round budget spent; the node abstains this round.

    Deliberately distinct from validation rejection: the signal was fine,
    the node is simply out of budget.
    """
    category = "privacy-budget"


class RoundAborted(CcfSimError):
    """Secure aggregation fail-safe: a dropout could not be reconstructed."""
    category = "round-aborted"


class EmptyAggregateError(CcfSimError):
    """Aggregation over an empty live set."""
    category = "empty-aggregate"


class IntegrityError(CcfSimError):
    """Transcript content hash mismatch."""
    category = "integrity"
