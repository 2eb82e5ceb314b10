"""Error types for the exporter."""


class ExportError(Exception):
    """Any failure while capturing or writing features."""


class SetupError(ExportError):
    """The model or its weights could not be prepared."""
