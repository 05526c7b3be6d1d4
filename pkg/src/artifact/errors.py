"""Exception types shared across the pipeline."""


class ArtifactError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(ArtifactError, ValueError):
    """An argument violates a documented precondition."""


class MaskDecodeError(ArtifactError):
    """Bytes could not be decoded into an image."""


class MaskLookupError(ArtifactError, KeyError):
    """No mask is mapped for the requested image id."""

    def __str__(self) -> str:
        # KeyError would repr-quote the message otherwise.
        return str(self.args[0]) if self.args else ""


class BackendError(ArtifactError):
    """A detector or inpainter backend call failed."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ProtocolError(BackendError):
    """A backend response violated the wire or shape contract."""


class PipelineError(ArtifactError):
    """A refinement step failed.

    ``component_label`` identifies the crop whose inpainting call failed,
    or is None for whole-image passes.
    """

    def __init__(self, message: str, component_label: int | None = None):
        super().__init__(message)
        self.component_label = component_label


class ManifestError(InvalidInputError):
    """Manifest validation failed; ``errors`` lists every violation found."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class ConfigError(InvalidInputError):
    """Pipeline configuration is invalid."""
