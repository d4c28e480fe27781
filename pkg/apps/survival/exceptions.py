from typing import Optional


class DatasetError(ValueError):
    """Invalid survival data; carries the offending 1-based data row and column when known."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class EstimatorError(ValueError):
    pass
