"""Exception types shared across the package."""


class IngestionError(ValueError):
    """Bad input data: malformed file, unsupported dtype, non-finite values."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class TreeValidationError(ValueError):
    """A corner tree violates an invariant. ``vertex`` is the offending index."""

    def __init__(self, message, vertex=None):
        if vertex is not None:
            message = f"vertex {vertex}: {message}"
        super().__init__(message)
        self.vertex = vertex


class TreeSchemaError(ValueError):
    """Corner-tree JSON does not match the schema. ``path`` is a JSON pointer."""

    def __init__(self, message, path=""):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path


class OrderMismatchError(ValueError):
    """Tree order, direction length and tensor order disagree."""


class EnumerationCapError(RuntimeError):
    """The brute-force oracle would enumerate more placements than allowed."""
