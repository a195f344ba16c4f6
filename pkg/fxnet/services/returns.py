"""Exchange-rate ingestion, re-denomination and logarithmic returns.

Input is a delimited table (comma or tab): a ``date`` column in ISO-8601 followed by one
column per currency, rates expressed in the base denomination per unit of currency.
Dates are opaque ordered labels; a window of 100 is 100 rows.
"""

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from fxnet.errors import IngestionError, InvalidParameterError, UnknownCurrencyError

logger = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "na", "n/a", "nan", "null", "none", "-"})

Source = str | Path | IO[str]


@dataclass(frozen=True)
class RateTable:
    dates: NDArray[np.datetime64]
    currencies: tuple[str, ...]
    rates: NDArray[np.float64]
    base: str

    def __post_init__(self) -> None:
        dates = np.array(self.dates, dtype="datetime64[D]")
        rates = np.array(self.rates, dtype=np.float64)
        currencies = tuple(str(code) for code in self.currencies)

        if rates.shape != (dates.size, len(currencies)):
            raise IngestionError(f"rate matrix shape {rates.shape} does not match {dates.size} dates x {len(currencies)} currencies")
        if len(set(currencies)) != len(currencies):
            raise IngestionError("duplicate currency codes")
        if self.base in currencies:
            raise IngestionError(f"base {self.base} also appears as a quoted currency", column=self.base)
        if dates.size > 1 and not np.all(np.diff(dates) > np.timedelta64(0, "D")):
            raise IngestionError("dates must be strictly increasing")
        bad = np.isinf(rates) | (rates <= 0)
        if bad.any():
            row, col = (int(i) for i in np.argwhere(bad)[0])
            raise IngestionError(f"rate must be positive and finite on {dates[row]}", row=row + 1, column=currencies[col])

        dates.flags.writeable = False
        rates.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "currencies", currencies)

    def column(self, code: str) -> NDArray[np.float64]:
        return self.rates[:, self.index_of(code)]

    def index_of(self, code: str) -> int:
        try:
            return self.currencies.index(code)
        except ValueError:
            raise UnknownCurrencyError(code, self.currencies) from None


@dataclass(frozen=True)
class ReturnsMatrix:
    """Log returns, one column per currency.

    Entries are finite except for a leading run of NaN in a column whose rates start late.
    ``offset`` is the row index of the first row within the full return history.
    """

    dates: NDArray[np.datetime64]
    currencies: tuple[str, ...]
    returns: NDArray[np.float64]
    offset: int = 0

    def __post_init__(self) -> None:
        dates = np.array(self.dates, dtype="datetime64[D]")
        returns = np.array(self.returns, dtype=np.float64)
        if returns.shape != (dates.size, len(self.currencies)):
            raise IngestionError(f"returns shape {returns.shape} does not match {dates.size} dates x {len(self.currencies)} currencies")
        if np.isinf(returns).any():
            raise IngestionError("returns contain infinite values")
        dates.flags.writeable = False
        returns.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "currencies", tuple(self.currencies))

    def __len__(self) -> int:
        return self.dates.size

    @property
    def end_index(self) -> int:
        return self.offset + len(self) - 1

    def window(self, end: int, length: int) -> "ReturnsMatrix":
        """Rows ``end - length + 1 .. end`` (inclusive, indices local to this matrix)."""
        start = end - length + 1
        if length < 1 or start < 0 or end >= len(self):
            raise InvalidParameterError(f"window [{start}, {end}] outside 0..{len(self) - 1}")
        return ReturnsMatrix(
            dates=self.dates[start : end + 1],
            currencies=self.currencies,
            returns=self.returns[start : end + 1],
            offset=self.offset + start,
        )

    def select(self, currencies: list[str] | tuple[str, ...]) -> "ReturnsMatrix":
        columns = [self.currencies.index(code) for code in currencies]
        return ReturnsMatrix(self.dates, tuple(currencies), self.returns[:, columns], self.offset)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.returns, columns=list(self.currencies))
        frame.insert(0, "date", np.datetime_as_string(self.dates, unit="D"))
        return frame

    def to_csv(self, target: str | Path | IO[str], delimiter: str = ",") -> None:
        self.to_frame().to_csv(target, sep=delimiter, index=False, float_format="%.6g", lineterminator="\n")


def detect_delimiter(header: str) -> str:
    return "\t" if "\t" in header else ","


def _read_text(source: Source) -> str:
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.is_file():
            raise IngestionError(f"input file not found: {path}")
        return path.read_text(encoding="utf-8-sig")
    return source.read().removeprefix("\ufeff")


def _read_frame(text: str, delimiter: str) -> tuple[pd.DataFrame, str]:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise IngestionError("input is empty")
    sep = detect_delimiter(lines[0]) if delimiter == "auto" else delimiter
    try:
        raw = pd.read_csv(io.StringIO(text), sep=sep, header=None, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, ValueError) as exc:
        raise IngestionError(f"malformed table: {exc}") from exc
    # header read as a data row so duplicate names survive unmangled
    header = [str(cell).strip() for cell in raw.iloc[0]]
    seen: set[str] = set()
    for cell in header:
        if cell.upper() in seen:
            raise IngestionError("duplicate column in header", row=0, column=cell)
        seen.add(cell.upper())
    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = header
    return frame, sep


def parse_rates(source: Source, *, base: str = "XAG", delimiter: str = "auto") -> RateTable:
    """Parse and validate a rate table. Rows are sorted by date, gaps forward-filled.

    Errors name the data row (1-based, header excluded) and the column.
    """
    frame, _ = _read_frame(_read_text(source), delimiter)
    if frame.columns[0].lower() != "date":
        raise IngestionError("first column must be 'date'", row=0, column=frame.columns[0])
    codes = [code.upper() for code in frame.columns[1:]]
    if not codes:
        raise IngestionError("no currency columns")

    raw_dates = frame.iloc[:, 0].str.strip()
    dates = pd.to_datetime(raw_dates, format="ISO8601", errors="coerce").dt.normalize()
    if dates.isna().any():
        row = int(np.flatnonzero(dates.isna().to_numpy())[0])
        raise IngestionError(f"unparseable date '{raw_dates.iloc[row]}'", row=row + 1, column="date")
    duplicated = dates.duplicated(keep=False).to_numpy()
    if duplicated.any():
        rows = np.flatnonzero(duplicated)
        raise IngestionError(f"duplicate date {raw_dates.iloc[rows[0]]} (rows {', '.join(str(r + 1) for r in rows)})", row=int(rows[0]) + 1, column="date")

    values = np.full((len(frame), len(codes)), np.nan)
    for col, code in enumerate(codes):
        cells = frame.iloc[:, col + 1].str.strip()
        missing = cells.str.lower().isin(MISSING_TOKENS).to_numpy()
        numeric = pd.to_numeric(cells.where(~missing), errors="coerce").to_numpy(dtype=np.float64)
        unparseable = np.isnan(numeric) & ~missing
        if unparseable.any():
            row = int(np.flatnonzero(unparseable)[0])
            raise IngestionError(f"unparseable number '{cells.iloc[row]}'", row=row + 1, column=code)
        invalid = ~np.isnan(numeric) & ((numeric <= 0) | np.isinf(numeric))
        if invalid.any():
            row = int(np.flatnonzero(invalid)[0])
            raise IngestionError(f"non-positive or infinite rate '{cells.iloc[row]}'", row=row + 1, column=code)
        values[:, col] = numeric

    table = pd.DataFrame(values, index=dates.to_numpy(), columns=codes)
    table = table.sort_index(kind="mergesort").ffill()
    leading = table.isna().sum()
    for code, count in leading[leading > 0].items():
        logger.warning("currency=%s leading_missing_rows=%d", code, count)

    return RateTable(
        dates=table.index.to_numpy().astype("datetime64[D]"),
        currencies=tuple(codes),
        rates=table.to_numpy(),
        base=base.strip().upper(),
    )


def read_columns(source: Source, names: list[str], *, delimiter: str = "auto") -> dict[str, NDArray[np.float64]]:
    """Read numeric columns by header name, e.g. two samples for a single RDC evaluation."""
    frame, _ = _read_frame(_read_text(source), delimiter)
    lookup = {column.upper(): column for column in frame.columns}
    columns: dict[str, NDArray[np.float64]] = {}
    for name in names:
        column = lookup.get(name.upper())
        if column is None:
            raise UnknownCurrencyError(name, list(frame.columns))
        cells = frame[column].str.strip()
        numeric = pd.to_numeric(cells, errors="coerce").to_numpy(dtype=np.float64)
        if np.isnan(numeric).any():
            row = int(np.flatnonzero(np.isnan(numeric))[0])
            raise IngestionError(f"unparseable number '{cells.iloc[row]}'", row=row + 1, column=column)
        columns[name] = numeric
    return columns


def redenominate(table: RateTable, new_base: str) -> RateTable:
    """Express every rate in ``new_base``; the old base becomes a quoted column."""
    code = new_base.strip().upper()
    if code == table.base:
        return table
    pivot_index = table.index_of(code)
    pivot = table.rates[:, pivot_index]
    if not np.all(np.isfinite(pivot)):
        raise InvalidParameterError(f"cannot re-denominate into {code}: its rate series has missing values")

    keep = [i for i in range(len(table.currencies)) if i != pivot_index]
    rates = np.column_stack([table.rates[:, keep] / pivot[:, np.newaxis], 1.0 / pivot])
    currencies = tuple(table.currencies[i] for i in keep) + (table.base,)
    return RateTable(dates=table.dates, currencies=currencies, rates=rates, base=code)


def log_returns(table: RateTable) -> ReturnsMatrix:
    if table.dates.size < 2:
        raise IngestionError(f"need at least 2 dates for returns, got {table.dates.size}")
    return ReturnsMatrix(
        dates=table.dates[1:],
        currencies=table.currencies,
        returns=np.diff(np.log(table.rates), axis=0),
    )
