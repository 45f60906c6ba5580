"""CSV input and output for instance-major data matrices.

Rows are instances, columns are variables.  Coordinates in error messages
are 1-based and count data rows only (a header line is not row 1).
"""

from __future__ import annotations

import csv
import dataclasses

import numpy as np

from .errors import DomainViolationError, ParseError
from .family import FamilyTag, check_domain

__all__ = ["DataMatrix", "load_csv", "save_csv", "parse_csv"]

_DOMAIN_HINT = {
    FamilyTag.EXPONENTIAL: "nonnegative real",
    FamilyTag.POISSON: "nonnegative integer",
    FamilyTag.GAUSSIAN: "finite real",
}


@dataclasses.dataclass(frozen=True)
class DataMatrix:
    values: np.ndarray
    column_names: tuple[str, ...] | None = None

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def parse_csv(lines, family, has_header=False) -> DataMatrix:
    """Parse an iterable of CSV lines; see :func:`load_csv`."""
    tag = FamilyTag.parse(family)
    reader = csv.reader(lines)
    names = None
    rows = []
    width = None
    for raw in reader:
        if not raw or all(not c.strip() for c in raw):
            continue
        if has_header and names is None:
            names = tuple(c.strip() for c in raw)
            width = len(names)
            continue
        i = len(rows) + 1
        if width is None:
            width = len(raw)
        if len(raw) != width:
            raise ParseError(f"row {i} has {len(raw)} fields, expected {width}")
        vals = []
        for j, cell in enumerate(raw, 1):
            cell = cell.strip()
            if not cell:
                raise ParseError(f"missing value at (row {i}, col {j})")
            try:
                vals.append(float(cell))
            except ValueError:
                raise ParseError(f"cannot parse {cell!r} at (row {i}, col {j})") from None
        rows.append(vals)
    if not rows:
        raise ParseError("no data rows")
    x = np.array(rows, dtype=float)
    bad = np.argwhere(~check_domain(tag, x))
    if bad.size:
        i, j = bad[0]
        raise DomainViolationError(
            f"{float(x[i, j])!r} is not a {_DOMAIN_HINT[tag]} at (row {i + 1}, col {j + 1})"
        )
    x.setflags(write=False)
    return DataMatrix(x, names)


def load_csv(path, family, has_header=False) -> DataMatrix:
    """Read a comma-separated file of decimal values, one instance per row.

    Values are checked against the family's support: Poisson needs
    nonnegative integers, Exponential nonnegative reals, Gaussian finite
    reals.  Empty cells raise :class:`ParseError`.
    """
    with open(path, newline="") as fh:
        return parse_csv(fh, family, has_header)


def save_csv(path, values, column_names=None) -> None:
    """Write ``values`` with 17 significant digits so a reload is exact."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if column_names is not None:
            w.writerow(column_names)
        for row in values:
            w.writerow([format(v, ".17g") for v in row])
