"""Exception types shared across the package.

Every failure mode callers are expected to handle has its own class so
that tests and the CLI can match on type rather than message text.
"""


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ContractError(RuntimeError):
    """An API was driven outside its documented protocol."""


class InputError(ValueError):
    """A user-supplied value (config entry, CLI argument) is invalid."""


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training.

    The epoch at which divergence was detected is carried so callers can
    report it without parsing the message.
    """

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


class TargetUnsatisfiableError(ValueError):
    """No admissible target label/code exists for the requested attack."""


class CheckpointError(RuntimeError):
    """Base class for checkpoint load failures."""


class CheckpointMissingError(CheckpointError):
    """Checkpoint file does not exist."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version is not supported by this build."""


class CheckpointCorruptError(CheckpointError):
    """Checkpoint payload fails checksum or structural validation."""


class CheckpointMismatchError(CheckpointError):
    """Checkpoint tensors do not match the model being restored."""


class ConfigError(InputError):
    """Config text could not be parsed or failed validation."""
