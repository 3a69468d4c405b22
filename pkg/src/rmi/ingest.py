"""Reading and preparing raw mortality input data.

Handles the single-age, single-year ("1x1") text tables in which national
death counts and exposures are distributed: a title line, a blank line, a
column-header line, then whitespace-separated ``Year Age Female Male Total``
rows.  Ages run 0-109 plus an open ``110+`` group; missing values are coded
as ``"."``.

From a pair of parsed tables this module assembles one
:class:`MortalitySeries` per calendar year (ages 40 through 110+), and can
repair degenerate exposures by drawing a small uniform value for every age
whose exposure is exactly zero.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

AGE_MIN = 40
AGE_LO = 85
AGE_HI = 109
AGE_OPEN = 110  # stands for the open interval "110+"

DEFAULT_U_MAX = 0.5  # person-years; upper bound for imputed exposures

SEXES = ("female", "male")

_COLUMNS = ("female", "male", "total")


class ParseError(ValueError):
    """A malformed line in a 1x1 table."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class StructuralError(ValueError):
    """A structurally inconsistent table (duplicates, year gaps)."""


class DataCoverageError(ValueError):
    """Requested years or ages not covered by the input tables."""


@dataclass(frozen=True, slots=True)
class RawRow:
    """One (year, age) record; ``missing`` lists columns coded as "."."""

    year: int
    age: int  # AGE_OPEN means "110+"
    female: float
    male: float
    total: float
    missing: frozenset[str] = frozenset()

    def value(self, column: str) -> float:
        if column not in _COLUMNS:
            raise KeyError(column)
        return getattr(self, column)


@dataclass(frozen=True, slots=True)
class RawTable:
    """A parsed 1x1 table: the title line plus one row per (year, age)."""

    title: str
    rows: tuple[RawRow, ...]

    def years(self) -> list[int]:
        seen: dict[int, None] = {}
        for row in self.rows:
            seen.setdefault(row.year, None)
        return list(seen)

    def index(self) -> dict[tuple[int, int], RawRow]:
        return {(row.year, row.age): row for row in self.rows}


@dataclass(frozen=True, slots=True)
class StudyWindow:
    """An inclusive range of calendar years."""

    start_year: int
    end_year: int

    def __post_init__(self) -> None:
        if self.start_year > self.end_year:
            raise ValueError(
                f"start_year {self.start_year} > end_year {self.end_year}"
            )

    def years(self) -> range:
        return range(self.start_year, self.end_year + 1)


# Countries whose usable raw series only begins with reunification.
GERMANY_CODES = frozenset({"DEUTNP", "DEUTE", "DEUTW", "DEU", "GERMANY"})

DEFAULT_WINDOW = StudyWindow(1950, 2019)
GERMANY_WINDOW = StudyWindow(1991, 2019)


def default_window(country: str) -> StudyWindow:
    """Default study window for a country (Germany starts in 1991)."""
    if country.strip().upper() in GERMANY_CODES:
        return GERMANY_WINDOW
    return DEFAULT_WINDOW


def _parse_age(token: str, line_number: int) -> int:
    if token == "110+":
        return AGE_OPEN
    try:
        age = int(token)
    except ValueError:
        raise ParseError(f"bad age token {token!r}", line_number) from None
    if not 0 <= age <= 109:
        raise ParseError(f"age {age} outside 0-109 / 110+", line_number)
    return age


def parse_hmd_table(text: str) -> RawTable:
    """Parse a 1x1 deaths or exposures table from its text content.

    The first line is kept as the table title; the second line and any
    line whose first token is ``Year`` are treated as header filler.
    Missing values ("." cells) parse as 0.0 and are flagged in
    ``RawRow.missing``.
    """
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty input", 1)
    title = lines[0].strip()

    rows: list[RawRow] = []
    seen: set[tuple[int, int]] = set()
    year_order: list[int] = []
    for line_number, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens:
            continue
        if tokens[0].lower() == "year":
            continue
        if len(tokens) != 5:
            raise ParseError(
                f"expected 5 columns, found {len(tokens)}", line_number
            )
        try:
            year = int(tokens[0])
        except ValueError:
            raise ParseError(
                f"non-numeric year {tokens[0]!r}", line_number
            ) from None
        age = _parse_age(tokens[1], line_number)

        values: list[float] = []
        missing: set[str] = set()
        for column, token in zip(_COLUMNS, tokens[2:]):
            if token == ".":
                values.append(0.0)
                missing.add(column)
            else:
                try:
                    value = float(token)
                except ValueError:
                    raise ParseError(
                        f"bad {column} value {token!r}", line_number
                    ) from None
                if not np.isfinite(value) or value < 0:
                    raise ParseError(
                        f"{column} value {value} not finite and >= 0",
                        line_number,
                    )
                values.append(value)

        key = (year, age)
        if key in seen:
            raise StructuralError(f"duplicate (year, age) = {key}")
        seen.add(key)
        if not year_order or year_order[-1] != year:
            year_order.append(year)
        rows.append(
            RawRow(year, age, values[0], values[1], values[2], frozenset(missing))
        )

    if len(set(year_order)) != len(year_order):
        raise StructuralError("years are not grouped contiguously")
    for prev, nxt in zip(year_order, year_order[1:]):
        if nxt != prev + 1:
            raise StructuralError(f"year gap between {prev} and {nxt}")
    return RawTable(title=title, rows=tuple(rows))


def _format_value(value: float, is_missing: bool) -> str:
    if is_missing:
        return "."
    return repr(value)


def format_hmd_table(table: RawTable) -> str:
    """Serialize a table back to the 1x1 text layout (parse round-trips)."""
    out = [table.title, ""]
    out.append(f"{'Year':>6} {'Age':>6} {'Female':>16} {'Male':>16} {'Total':>16}")
    for row in table.rows:
        age = "110+" if row.age == AGE_OPEN else str(row.age)
        cells = [
            _format_value(row.value(col), col in row.missing) for col in _COLUMNS
        ]
        out.append(
            f"{row.year:>6} {age:>6} {cells[0]:>16} {cells[1]:>16} {cells[2]:>16}"
        )
    return "\n".join(out) + "\n"


@dataclass(frozen=True, slots=True)
class MortalitySeries:
    """Deaths and exposures for one population-year, ages 40 through 110+.

    Arrays are aligned with ``ages`` (40..110, where 110 is the open
    group) and are read-only.  ``imputed`` marks ages whose exposure was
    replaced by a random draw because the raw value was exactly zero.
    """

    country: str
    sex: str
    year: int
    ages: np.ndarray
    deaths: np.ndarray
    exposures: np.ndarray
    deaths_missing: np.ndarray = field(default=None)  # type: ignore[assignment]
    exposures_missing: np.ndarray = field(default=None)  # type: ignore[assignment]
    imputed: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        n = len(self.ages)
        for name in ("deaths_missing", "exposures_missing", "imputed"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, np.zeros(n, dtype=bool))
        if self.sex not in SEXES:
            raise ValueError(f"sex must be one of {SEXES}, got {self.sex!r}")
        if len(self.deaths) != n or len(self.exposures) != n:
            raise ValueError("deaths and exposures must cover the same age set")
        for name in ("deaths", "exposures"):
            values = getattr(self, name)
            if not np.all(np.isfinite(values)) or np.any(values < 0):
                raise ValueError(f"{name} must be finite and >= 0")
        for name in (
            "ages",
            "deaths",
            "exposures",
            "deaths_missing",
            "exposures_missing",
            "imputed",
        ):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def age_slice(self, lo: int, hi: int) -> np.ndarray:
        """Boolean mask selecting ages lo..hi inclusive."""
        return (self.ages >= lo) & (self.ages <= hi)

    def old_age_deaths(self) -> np.ndarray:
        return self.deaths[self.age_slice(AGE_LO, AGE_HI)]

    def old_age_exposures(self) -> np.ndarray:
        return self.exposures[self.age_slice(AGE_LO, AGE_HI)]


def build_dataset(
    deaths: RawTable,
    exposures: RawTable,
    sex: str,
    window: StudyWindow,
    country: str = "",
) -> list[MortalitySeries]:
    """Assemble one MortalitySeries per year of the window.

    Raises DataCoverageError naming the first year missing from either
    table, or the first (year, age) cell absent from a covered year.
    Ages 40..110+ are retained so that downstream count ungrouping can
    use the full tail; old-age smoothers slice 85-109 themselves.
    """
    if sex not in SEXES:
        raise ValueError(f"sex must be one of {SEXES}, got {sex!r}")
    deaths_idx = deaths.index()
    exposures_idx = exposures.index()
    deaths_years = set(deaths.years())
    exposures_years = set(exposures.years())

    ages = np.arange(AGE_MIN, AGE_OPEN + 1)
    out: list[MortalitySeries] = []
    for year in window.years():
        for label, have in (("deaths", deaths_years), ("exposures", exposures_years)):
            if year not in have:
                raise DataCoverageError(f"missing year {year} in {label} table")
        d = np.zeros(len(ages))
        e = np.zeros(len(ages))
        d_miss = np.zeros(len(ages), dtype=bool)
        e_miss = np.zeros(len(ages), dtype=bool)
        for i, age in enumerate(ages):
            key = (year, int(age))
            if key not in deaths_idx:
                raise DataCoverageError(
                    f"missing age {age} for year {year} in deaths table"
                )
            if key not in exposures_idx:
                raise DataCoverageError(
                    f"missing age {age} for year {year} in exposures table"
                )
            drow = deaths_idx[key]
            erow = exposures_idx[key]
            d[i] = drow.value(sex)
            e[i] = erow.value(sex)
            d_miss[i] = sex in drow.missing
            e_miss[i] = sex in erow.missing
        out.append(
            MortalitySeries(
                country=country,
                sex=sex,
                year=year,
                ages=ages.copy(),
                deaths=d,
                exposures=e,
                deaths_missing=d_miss,
                exposures_missing=e_miss,
            )
        )
    return out


def _imputation_rng(seed: int, series: MortalitySeries, age: int) -> np.random.Generator:
    # Stable per-cell stream: immune to iteration order and process salt.
    tag = zlib.crc32(f"{series.country}|{series.sex}".encode("utf-8"))
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), tag, series.year, int(age)])
    )


def impute_zero_exposure(
    series: MortalitySeries, seed: int, u_max: float = DEFAULT_U_MAX
) -> MortalitySeries:
    """Replace zero exposures with a uniform draw from (0, u_max].

    Deterministic for a fixed seed, idempotent (positive exposures are
    never touched), and order-independent: each (country, sex, year, age)
    cell has its own derived random stream.
    """
    if u_max <= 0:
        raise ValueError("u_max must be positive")
    zero = series.exposures == 0
    if not zero.any():
        return series
    exposures = series.exposures.copy()
    imputed = series.imputed.copy()
    for i in np.flatnonzero(zero):
        rng = _imputation_rng(seed, series, int(series.ages[i]))
        # uniform on (0, u_max]: flip the half-open interval from the rng
        exposures[i] = u_max - rng.uniform(0.0, u_max)
        imputed[i] = True
    return replace(series, exposures=exposures, imputed=imputed)


def impute_all(
    dataset: Iterable[MortalitySeries], seed: int, u_max: float = DEFAULT_U_MAX
) -> list[MortalitySeries]:
    return [impute_zero_exposure(s, seed, u_max) for s in dataset]
