"""Exception types shared across the package.

The CLI maps these onto process exit codes, so new error conditions should
reuse one of the existing classes where possible.
"""


class MnamError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MnamError):
    """Experiment configuration is missing, malformed, or inconsistent."""


class DataError(MnamError):
    """Input data is missing, malformed, or fails a recipe's sanity checks."""


class TrainingError(MnamError):
    """Training diverged or was given inconsistent inputs."""


class CertificationError(MnamError):
    """Multiplier escalation exhausted its round budget without a certificate.

    Carries the last trained model, its (failing) certificate, and the full
    escalation trace so callers can inspect what happened instead of
    receiving an uncertified model that looks like a success.
    """

    def __init__(self, message, model=None, report=None, trace=None):
        super().__init__(message)
        self.model = model
        self.report = report
        self.trace = trace if trace is not None else []


class DegenerateImportanceError(MnamError):
    """All input gradients are zero, so importance cannot be normalized."""
