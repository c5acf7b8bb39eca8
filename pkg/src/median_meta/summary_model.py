"""Study-level summary data: group summaries, reporting scenarios, CSV I/O.

A group is described by its sample size plus whichever of the five sample
quantiles (min, q1, median, q3, max) or the mean and SD were reported. The
present-field pattern decides the reporting scenario:

* S1 -- min, median, max
* S2 -- q1, median, q3
* S3 -- all five quantiles
* MEAN_SD -- mean and SD only
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, fields
from importlib import resources
from typing import IO, Iterable, Optional, Union

from .errors import (
    AmbiguousSummary,
    InvalidSummary,
    MissingQuartiles,
    ParseError,
    ZeroIQR,
)

CSV_COLUMNS = ("study_id", "group", "n", "min", "q1", "median", "q3", "max", "mean", "sd")
QUANTILE_FIELDS = ("min", "q1", "median", "q3", "max")


class Scenario(str, enum.Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    MEAN_SD = "MEAN_SD"


@dataclass(frozen=True)
class GroupSummary:
    """Reported statistics for one arm of one study."""

    n: int
    min: Optional[float] = None
    q1: Optional[float] = None
    median: Optional[float] = None
    q3: Optional[float] = None
    max: Optional[float] = None
    mean: Optional[float] = None
    sd: Optional[float] = None

    def __post_init__(self):
        if isinstance(self.n, bool) or not float(self.n).is_integer():
            raise InvalidSummary(f"n must be an integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.n < 2:
            raise InvalidSummary(f"n must be >= 2, got {self.n}")
        for name in QUANTILE_FIELDS + ("mean", "sd"):
            value = getattr(self, name)
            if value is None:
                continue
            value = float(value)
            if not math.isfinite(value):
                raise InvalidSummary(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        present = [getattr(self, f) for f in QUANTILE_FIELDS if getattr(self, f) is not None]
        if any(b < a for a, b in zip(present, present[1:])):
            raise InvalidSummary(
                "quantiles must satisfy min <= q1 <= median <= q3 <= max, got "
                + ", ".join(f"{f}={getattr(self, f)}" for f in QUANTILE_FIELDS
                            if getattr(self, f) is not None)
            )
        if self.sd is not None:
            if self.sd < 0:
                raise InvalidSummary(f"sd must be nonnegative, got {self.sd}")
            if self.mean is None:
                raise InvalidSummary("sd given without mean")

    @property
    def scenario(self) -> Scenario:
        return classify_scenario(self)

    def shifted(self, c: float) -> "GroupSummary":
        """Copy with every location statistic shifted by ``c``."""
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        for name in QUANTILE_FIELDS + ("mean",):
            if kw[name] is not None:
                kw[name] = kw[name] + c
        return GroupSummary(**kw)

    def scaled(self, lam: float) -> "GroupSummary":
        if lam <= 0:
            raise ValueError("scale factor must be positive")
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        for name in QUANTILE_FIELDS + ("mean", "sd"):
            if kw[name] is not None:
                kw[name] = kw[name] * lam
        return GroupSummary(**kw)


@dataclass(frozen=True)
class StudyRecord:
    id: str
    group1: GroupSummary
    group2: GroupSummary

    def __post_init__(self):
        s1 = classify_scenario(self.group1)
        s2 = classify_scenario(self.group2)
        if s1 is not s2:
            raise InvalidSummary(
                f"study {self.id!r}: groups report different scenarios ({s1.value} vs {s2.value})"
            )

    @property
    def scenario(self) -> Scenario:
        return classify_scenario(self.group1)


@dataclass(frozen=True)
class MetaDataset:
    studies: tuple

    def __post_init__(self):
        studies = tuple(self.studies)
        object.__setattr__(self, "studies", studies)
        if not studies:
            raise InvalidSummary("a dataset needs at least one study")
        ids = [s.id for s in studies]
        if len(set(ids)) != len(ids):
            raise InvalidSummary("study ids must be unique")

    def __len__(self):
        return len(self.studies)

    def __iter__(self):
        return iter(self.studies)

    def __getitem__(self, i):
        return self.studies[i]


def classify_scenario(g: GroupSummary) -> Scenario:
    """Return the reporting scenario implied by which fields are present."""
    has = {name: getattr(g, name) is not None for name in QUANTILE_FIELDS + ("mean", "sd")}
    any_quantile = any(has[f] for f in QUANTILE_FIELDS)
    moments = has["mean"] or has["sd"]
    if not moments:
        if all(has[f] for f in QUANTILE_FIELDS):
            return Scenario.S3
        if has["min"] and has["median"] and has["max"] and not (has["q1"] or has["q3"]):
            return Scenario.S1
        if has["q1"] and has["median"] and has["q3"] and not (has["min"] or has["max"]):
            return Scenario.S2
    elif has["mean"] and has["sd"] and not any_quantile:
        return Scenario.MEAN_SD
    present = [k for k, v in has.items() if v]
    raise AmbiguousSummary(f"fields {present} match no reporting scenario")


def bowley_skewness(g: GroupSummary) -> float:
    """Bowley's quartile skewness ``(q3 + q1 - 2 median) / (q3 - q1)``."""
    if g.q1 is None or g.median is None or g.q3 is None:
        raise MissingQuartiles("Bowley skewness needs q1, median and q3")
    iqr = g.q3 - g.q1
    if iqr == 0:
        raise ZeroIQR("q3 equals q1")
    return (g.q3 + g.q1 - 2.0 * g.median) / iqr


# --------------------------------------------------------------------------- CSV

def _parse_number(cell: str, column: str, row: int) -> Optional[float]:
    cell = cell.strip()
    if cell == "":
        return None
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"column {column!r}: {cell!r} is not a number", row) from None
    if not math.isfinite(value):
        raise ParseError(f"column {column!r}: {cell!r} is not finite", row)
    return value


def parse_csv(source: Union[bytes, str, IO]) -> MetaDataset:
    """Parse the two-rows-per-study CSV format into a :class:`MetaDataset`.

    ``source`` may be raw bytes (decoded as UTF-8), a string holding the CSV
    text, or an open text/binary file object. Studies keep the order of their
    first appearance.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc}") from None
    reader = csv.reader(io.StringIO(source))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty input (no header row)") from None
    missing = [c for c in CSV_COLUMNS if c not in header]
    extra = [c for c in header if c not in CSV_COLUMNS]
    if missing or extra:
        raise ParseError(f"bad header: missing {missing}, unexpected {extra}", 1)
    col = {name: header.index(name) for name in CSV_COLUMNS}

    groups: dict = {}
    order: list = []
    for rownum, row in enumerate(reader, start=2):
        if not row or all(c.strip() == "" for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", rownum)
        study_id = row[col["study_id"]].strip()
        if not study_id:
            raise ParseError("empty study_id", rownum)
        label = row[col["group"]].strip()
        if label not in ("1", "2"):
            raise ParseError(f"group must be 1 or 2, got {label!r}", rownum)
        values = {name: _parse_number(row[col[name]], name, rownum)
                  for name in CSV_COLUMNS[2:]}
        if values["n"] is None:
            raise ParseError("n is required", rownum)
        try:
            g = GroupSummary(**values)
            classify_scenario(g)
        except (InvalidSummary, AmbiguousSummary) as exc:
            raise ParseError(str(exc), rownum) from None
        slot = groups.setdefault(study_id, {})
        if label in slot:
            raise ParseError(f"duplicate group {label} for study {study_id!r}", rownum)
        slot[label] = (g, rownum)
        if study_id not in order:
            order.append(study_id)

    if not order:
        raise ParseError("no data rows")
    studies = []
    for study_id in order:
        slot = groups[study_id]
        if "1" not in slot or "2" not in slot:
            present = next(iter(slot.values()))[1]
            raise ParseError(f"study {study_id!r} is missing a group", present)
        try:
            studies.append(StudyRecord(study_id, slot["1"][0], slot["2"][0]))
        except InvalidSummary as exc:
            raise ParseError(str(exc), slot["2"][1]) from None
    return MetaDataset(tuple(studies))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def serialize_csv(dataset: Union[MetaDataset, Iterable[StudyRecord]]) -> str:
    """Inverse of :func:`parse_csv`; floats are written with ``repr``."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for study in dataset:
        for label, g in (("1", study.group1), ("2", study.group2)):
            writer.writerow([study.id, label, str(g.n)]
                            + [_fmt(getattr(g, name)) for name in CSV_COLUMNS[3:]])
    return out.getvalue()


def read_csv(path) -> MetaDataset:
    with open(path, "rb") as fh:
        return parse_csv(fh.read())


def tb_fixture_path():
    """Filesystem path of the bundled tuberculosis diagnostic-delay dataset."""
    return resources.files("median_meta").joinpath("data", "tb.csv")


def load_tb_fixture() -> MetaDataset:
    return parse_csv(tb_fixture_path().read_bytes())
