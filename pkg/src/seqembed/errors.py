"""Shared exception types; the CLI maps these onto exit codes."""


class DataError(Exception):
    """Invalid or inconsistent data: manifests, feature files, archives."""


class DimensionError(DataError):
    """Array shapes or widths do not match what an operation requires."""


class GenerationError(DataError):
    """Synthetic corpus parameters cannot be satisfied."""


class CheckpointError(DataError):
    """Checkpoint file is malformed, truncated, or internally inconsistent."""


class DivergenceError(Exception):
    """Training produced a non-finite loss."""
