"""Custom exceptions for CAPE."""

from collections.abc import Sequence


class CapeError(Exception):
    """Base exception for CAPE errors."""

    pass


class ShapeMismatchError(CapeError):
    """Raised when operand shapes are incompatible for an operation."""

    def __init__(self, op: str, *shapes: Sequence[int], detail: str = "") -> None:
        self.op = op
        self.shapes = [tuple(s) for s in shapes]
        msg = f"{op}: incompatible shapes " + " vs ".join(str(s) for s in self.shapes)
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NonFiniteError(CapeError):
    """Raised when an operation receives NaN or infinite input."""

    pass


class NonScalarError(CapeError):
    """Raised when a scalar is required (backward pass, gradient check)."""

    def __init__(self, shape: Sequence[int]) -> None:
        self.shape = tuple(shape)
        super().__init__(f"Expected a scalar output, got shape {self.shape}")


class InvalidGeometryError(CapeError):
    """Raised when a camera or motion matrix violates its invariants."""

    pass


class SingularIntrinsicsError(InvalidGeometryError):
    """Raised when an intrinsic matrix cannot be inverted."""

    pass


class BehindCameraError(InvalidGeometryError):
    """Raised when projecting a point with nonpositive depth."""

    def __init__(self, depth: float) -> None:
        self.depth = depth
        super().__init__(f"Point is behind the camera (depth={depth:.6g})")


class MatchingError(CapeError):
    """Raised when an assignment problem is malformed."""

    pass


class SceneParseError(CapeError):
    """Raised when a scene file cannot be parsed."""

    def __init__(
        self,
        path: str,
        detail: str,
        line: int | None = None,
        column: int | None = None,
        field: str | None = None,
    ) -> None:
        self.path = path
        self.detail = detail
        self.line = line
        self.column = column
        self.field = field
        where = ""
        if line is not None:
            where = f" at line {line}, column {column}"
        elif field:
            where = f" at field '{field}'"
        super().__init__(f"Malformed scene file {path}{where}: {detail}")


class InvalidConfigError(CapeError):
    """Raised when an experiment configuration is invalid."""

    pass


class ConfigMismatchError(CapeError):
    """Raised when a checkpoint does not match the requested configuration."""

    def __init__(self, expected: str, actual: str) -> None:
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"Configuration hash mismatch: checkpoint has {actual}, config has {expected}"
        )


class CheckpointError(CapeError):
    """Raised when a checkpoint cannot be read or applied."""

    pass


class EmptyDatasetError(CapeError):
    """Raised when an evaluation is requested over zero scenes."""

    pass


class InvalidQueryIdError(CapeError):
    """Raised when an attention dump names a query that does not exist."""

    def __init__(self, query_id: int, num_queries: int) -> None:
        self.query_id = query_id
        self.num_queries = num_queries
        super().__init__(f"Invalid query id {query_id}: model has {num_queries} queries")


class DivergenceError(CapeError):
    """Raised when training produces a non-finite loss."""

    def __init__(
        self, step: int, terms: dict[str, float], dump_path: str | None = None
    ) -> None:
        self.step = step
        self.terms = terms
        self.dump_path = dump_path
        msg = f"Training diverged at step {step}: " + ", ".join(
            f"{k}={v:.6g}" for k, v in terms.items()
        )
        if dump_path:
            msg += f"\n\nDiagnostic dump written to {dump_path}"
        super().__init__(msg)
