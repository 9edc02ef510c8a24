"""CSV ingestion for the regression examples.

A :class:`CsvFormat` names the response and covariate columns and the
preprocessing recipe; :func:`load_dataset` turns a CSV file into a
:class:`RegressionDataset`.  The radiata pine and Pima Indians tables ship
with the package (``logz/data``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError


@dataclass(frozen=True, eq=False)
class RegressionDataset:
    responses: np.ndarray
    covariates: np.ndarray
    column_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.covariates.ndim != 2 or self.responses.shape != (self.covariates.shape[0],):
            raise ValidationError("responses and covariates disagree on the number of rows")
        if not (np.all(np.isfinite(self.responses)) and np.all(np.isfinite(self.covariates))):
            raise ValidationError("dataset contains missing or non-finite values")

    @property
    def n_rows(self) -> int:
        return self.covariates.shape[0]


@dataclass(frozen=True)
class CsvFormat:
    """Column selection and preprocessing for :func:`load_dataset`.

    Covariates are centered when ``center`` is set and additionally divided by
    their sample standard deviation (ddof=1) when ``standardize`` is set.  The
    intercept column, prepended when ``intercept`` is set, is left untouched.
    """

    response: str
    covariates: tuple[str, ...]
    intercept: bool = True
    center: bool = True
    standardize: bool = False


RADIATA_M1 = CsvFormat("strength", ("density",))
RADIATA_M2 = CsvFormat("strength", ("adjusted_density",))
PIMA_M1 = CsvFormat("diabetes", ("npreg", "glu", "bmi", "ped"), standardize=True)
PIMA_M2 = CsvFormat("diabetes", ("npreg", "glu", "bmi", "ped", "age"), standardize=True)


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file", row=1) from None
        rows = [row for row in reader if row and any(c.strip() for c in row)]
    return header, rows


def load_dataset(path, fmt: CsvFormat) -> RegressionDataset:
    """Parse a comma-separated file with a header row.

    Raises
    ------
    ParseError
        On a missing column, a short row or a non-numeric cell.  The error
        carries the 1-based row number (header = row 1) and column name.
    """
    header, rows = _read_table(path)
    wanted = (fmt.response, *fmt.covariates)
    for name in wanted:
        if name not in header:
            raise ParseError(f"{path}: missing column {name!r}", row=1, column=name)
    idx = {name: header.index(name) for name in wanted}
    values = np.empty((len(rows), len(wanted)))
    for r, row in enumerate(rows):
        for c, name in enumerate(wanted):
            j = idx[name]
            if j >= len(row):
                raise ParseError(f"{path}: row {r + 2} has no value for column {name!r}",
                                 row=r + 2, column=name)
            cell = row[j].strip()
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric cell {cell!r} at row {r + 2}, column {name!r}",
                    row=r + 2, column=name,
                ) from None
            if not math.isfinite(v):
                raise ParseError(f"{path}: missing value at row {r + 2}, column {name!r}",
                                 row=r + 2, column=name)
            values[r, c] = v
    y = values[:, 0]
    X = values[:, 1:]
    if fmt.center and len(rows):
        X = X - X.mean(axis=0)
    if fmt.standardize and len(rows) > 1:
        sd = X.std(axis=0, ddof=1)
        X = X / np.where(sd > 0, sd, 1.0)
    names = list(fmt.covariates)
    if fmt.intercept:
        X = np.column_stack([np.ones(len(rows)), X])
        names = ["intercept", *names]
    return RegressionDataset(responses=y, covariates=X, column_names=names)


def bundled_path(name: str) -> Path:
    """Filesystem path of a CSV shipped in ``logz/data``."""
    return Path(str(resources.files("logz.data").joinpath(name)))


def radiata(model: str = "M1") -> RegressionDataset:
    fmt = {"M1": RADIATA_M1, "M2": RADIATA_M2}[model]
    return load_dataset(bundled_path("radiata.csv"), fmt)


def pima(model: str = "M1") -> RegressionDataset:
    fmt = {"M1": PIMA_M1, "M2": PIMA_M2}[model]
    return load_dataset(bundled_path("pima.csv"), fmt)
