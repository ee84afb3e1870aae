"""Ingestion and supervised framing of district-month records.

Raw inputs are daily climate readings, weekly rainfall, monthly larval
surveys and monthly case counts. They are aggregated to district-month
resolution, joined into DistrictMonthRecord rows, min-max scaled, windowed
into (timesteps x features) supervised samples and split chronologically.

Months are (year, month) tuples everywhere. All functions are pure.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import (
    DuplicateKey,
    EmptyInput,
    EmptyTrain,
    NotFitted,
    PrecisionError,
    ValidationError,
)

CLIMATE_FEATURES = ("temp_mean", "rh_mean", "rain_total")
VARIANTS = ("I", "II")


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class RawClimateReading:
    district: str
    date: date
    temperature: float
    relative_humidity: float


@dataclass(frozen=True)
class WeeklyRainfall:
    district: str
    iso_year: int
    iso_week: int
    rainfall: float


@dataclass(frozen=True)
class LarvalSurvey:
    district: str
    month: tuple[int, int]
    n_low: int
    n_mid: int
    n_high: int


@dataclass(frozen=True)
class DistrictMonthRecord:
    district: str
    month: tuple[int, int]
    temp_mean: float
    rh_mean: float
    rain_total: float
    larval_index: float | None
    cases: float


@dataclass
class SupervisedWindow:
    features: np.ndarray  # (t, F)
    target: float
    district: str
    target_month: tuple[int, int]


@dataclass
class SplitDataset:
    train: list[SupervisedWindow]
    test: list[SupervisedWindow]
    split_seed: int


@dataclass
class GapReport:
    """Month-sequence discontinuities found while windowing."""

    gaps: list[tuple[str, tuple[int, int], tuple[int, int]]]
    skipped_windows: int = 0

    def lines(self):
        if not self.gaps:
            return ["no gaps"]
        out = []
        for district, before, after in self.gaps:
            out.append(
                f"{district}: gap between {before[0]:04d}-{before[1]:02d} "
                f"and {after[0]:04d}-{after[1]:02d}"
            )
        out.append(f"windows skipped: {self.skipped_windows}")
        return out


def month_index(month):
    """Months since year 0, for chronological arithmetic."""
    year, m = month
    return year * 12 + (m - 1)


def month_of(d: date):
    return (d.year, d.month)


# ---------------------------------------------------------------------------
# aggregation


def aggregate_monthly(readings):
    """Arithmetic mean of daily temperature/humidity per (district, month)."""
    if not readings:
        raise EmptyInput("no climate readings")
    sums = {}
    for r in readings:
        if not math.isfinite(r.temperature):
            raise ValidationError(
                f"non-finite temperature for {r.district} on {r.date.isoformat()}"
            )
        if not (0.0 <= r.relative_humidity <= 100.0):
            raise ValidationError(
                f"relative humidity {r.relative_humidity} outside [0, 100] "
                f"for {r.district} on {r.date.isoformat()}"
            )
        key = (r.district, month_of(r.date))
        t, h, n = sums.get(key, (0.0, 0.0, 0))
        sums[key] = (t + r.temperature, h + r.relative_humidity, n + 1)
    return {k: (t / n, h / n) for k, (t, h, n) in sums.items()}


def rain_to_monthly(weekly):
    """Total rainfall per (district, month).

    Each ISO week is assigned to the month containing its Thursday, the
    standard convention for deciding which month "owns" a week.
    """
    totals = {}
    for w in weekly:
        if not 1 <= w.iso_week <= 53:
            raise ValidationError(
                f"iso_week {w.iso_week} outside [1, 53] for {w.district}"
            )
        if w.rainfall < 0:
            raise ValidationError(f"negative rainfall for {w.district}")
        try:
            thursday = date.fromisocalendar(w.iso_year, w.iso_week, 4)
        except ValueError as exc:
            raise ValidationError(
                f"invalid ISO week {w.iso_year}-W{w.iso_week:02d} for {w.district}: {exc}"
            ) from None
        key = (w.district, month_of(thursday))
        totals[key] = totals.get(key, 0.0) + w.rainfall
    return totals


def weighted_larval_index(n_low, n_mid, n_high):
    """Collapse the three survey bands to one value in [1, 3].

    Houses in the 0-5%, 5-10% and >10% bands carry weights 1, 2 and 3;
    the result is the weight total divided by the number of inspected
    houses. Returns None when no houses were inspected.
    """
    for name, n in (("n_low", n_low), ("n_mid", n_mid), ("n_high", n_high)):
        if n < 0:
            raise ValidationError(f"{name} must be >= 0, got {n}")
    total = n_low + n_mid + n_high
    if total == 0:
        return None
    return (n_low * 1 + n_mid * 2 + n_high * 3) / total


def _as_map(source, name):
    """Normalize a dict or (key, value) iterable; reject duplicate keys."""
    if isinstance(source, dict):
        return source
    out = {}
    for key, value in source:
        if key in out:
            raise DuplicateKey(f"duplicate (district, month) {key} in {name}")
        out[key] = value
    return out


def assemble_records(climate, rain, larval, cases):
    """Inner-join climate, rainfall and cases; attach larval index if surveyed.

    Inputs are keyed by (district, (year, month)); dicts or (key, value)
    iterables are accepted, the latter checked for duplicate keys. Output is
    sorted by district then month.
    """
    climate = _as_map(climate, "climate")
    rain = _as_map(rain, "rain")
    larval = _as_map(larval, "larval")
    cases = _as_map(cases, "cases")

    records = []
    for key in cases:
        if key not in climate or key not in rain:
            continue
        district, month = key
        temp_mean, rh_mean = climate[key]
        rain_total = rain[key]
        n_cases = cases[key]
        larval_index = larval.get(key)
        for label, v in (("temp_mean", temp_mean), ("rh_mean", rh_mean),
                         ("rain_total", rain_total)):
            if not math.isfinite(v):
                raise ValidationError(f"non-finite {label} for {key}")
        if n_cases < 0:
            raise ValidationError(f"negative case count for {key}")
        if larval_index is not None and not 1.0 <= larval_index <= 3.0:
            raise ValidationError(
                f"larval index {larval_index} outside [1, 3] for {key}"
            )
        records.append(
            DistrictMonthRecord(
                district=district,
                month=month,
                temp_mean=float(temp_mean),
                rh_mean=float(rh_mean),
                rain_total=float(rain_total),
                larval_index=None if larval_index is None else float(larval_index),
                cases=n_cases,
            )
        )
    records.sort(key=lambda r: (r.district, month_index(r.month)))
    return records


def detect_gaps(records):
    """Month-coverage gaps per district in an assembled record list."""
    by_district = {}
    for r in records:
        by_district.setdefault(r.district, []).append(r.month)
    gaps = []
    for district in sorted(by_district):
        months = sorted(by_district[district], key=month_index)
        for a, b in zip(months, months[1:]):
            if month_index(b) - month_index(a) > 1:
                gaps.append((district, a, b))
    return GapReport(gaps=gaps)


# ---------------------------------------------------------------------------
# scaling


@dataclass
class Scaler:
    """Per-feature min-max ranges; None until fitted."""

    ranges: dict[str, tuple[float, float]] | None = None

    def _require(self, feature):
        if self.ranges is None:
            raise NotFitted("scaler has not been fitted")
        if feature not in self.ranges:
            raise NotFitted(f"scaler has no range for feature {feature!r}")
        return self.ranges[feature]

    def transform_value(self, feature, value):
        lo, hi = self._require(feature)
        if hi > lo:
            return (value - lo) / (hi - lo)
        return 0.0

    def invert_value(self, feature, value):
        lo, hi = self._require(feature)
        return lo + value * (hi - lo)

    def to_dict(self):
        if self.ranges is None:
            raise NotFitted("scaler has not been fitted")
        return {k: [lo, hi] for k, (lo, hi) in self.ranges.items()}

    @classmethod
    def from_dict(cls, d):
        return cls(ranges={k: (float(lo), float(hi)) for k, (lo, hi) in d.items()})


def fit_scaler(records, feature_set):
    """Fit per-feature min-max ranges; fit only on training-period records."""
    if not records:
        raise EmptyInput("cannot fit a scaler on zero records")
    ranges = {}
    for feature in feature_set:
        values = [getattr(r, feature) for r in records]
        values = [v for v in values if v is not None]
        if not values:
            ranges[feature] = (0.0, 0.0)
        else:
            ranges[feature] = (float(min(values)), float(max(values)))
    return Scaler(ranges=ranges)


def apply_scaler(scaler, records):
    """Return copies of the records with fitted features min-max scaled.

    Missing larval indices stay None; features the scaler was not fitted
    for are left untouched.
    """
    if scaler.ranges is None:
        raise NotFitted("scaler has not been fitted")
    out = []
    for r in records:
        changes = {}
        for feature in scaler.ranges:
            value = getattr(r, feature)
            if value is None:
                continue
            changes[feature] = scaler.transform_value(feature, value)
        out.append(dataclasses.replace(r, **changes))
    return out


# ---------------------------------------------------------------------------
# supervised framing


def build_windows(records, t, variant, predictors=CLIMATE_FEATURES):
    """Slide a t-month window over each district's chronological records.

    Every row of a window carries the climate predictors (plus the larval
    index under variant II). Rows for past months also carry the observed
    incidence; the current-month row carries a masked incidence slot fixed
    at 0 so all rows share one schema. The target is the current month's
    incidence. Windows that would span a month gap are skipped and counted.

    Returns (windows, GapReport).
    """
    if t < 2:
        raise ValidationError(f"timesteps must be >= 2, got {t}")
    if variant not in VARIANTS:
        raise ValidationError(f"variant must be one of {VARIANTS}, got {variant!r}")
    for p in predictors:
        if p not in CLIMATE_FEATURES:
            raise ValidationError(f"unknown predictor {p!r}")

    by_district = {}
    for r in records:
        by_district.setdefault(r.district, []).append(r)

    if variant == "II":
        missing = sorted(
            d for d, rows in by_district.items()
            if any(r.larval_index is None for r in rows)
        )
        if missing:
            raise PrecisionError(
                "larval index missing for districts: " + ", ".join(missing)
            )

    windows = []
    gap_pairs = []
    skipped = 0
    for district in sorted(by_district):
        rows = sorted(by_district[district], key=lambda r: month_index(r.month))
        idx = [month_index(r.month) for r in rows]
        for a, b in zip(rows, rows[1:]):
            if month_index(b.month) - month_index(a.month) > 1:
                gap_pairs.append((district, a.month, b.month))
        for i in range(t - 1, len(rows)):
            if idx[i] - idx[i - t + 1] != t - 1:
                skipped += 1
                continue
            span = rows[i - t + 1 : i + 1]
            mat = np.empty((t, len(predictors) + (variant == "II") + 1))
            for j, r in enumerate(span):
                feats = [getattr(r, p) for p in predictors]
                if variant == "II":
                    feats.append(r.larval_index)
                feats.append(float(r.cases) if j < t - 1 else 0.0)
                mat[j] = feats
            windows.append(
                SupervisedWindow(
                    features=mat,
                    target=float(span[-1].cases),
                    district=district,
                    target_month=span[-1].month,
                )
            )
    return windows, GapReport(gaps=gap_pairs, skipped_windows=skipped)


def split_dataset(windows, ratio, seed):
    """Chronological split: earliest floor(ratio * n) windows become train.

    Ordering is by target month, ties broken by district name, so every test
    target month is >= every train target month. The seed is recorded for
    provenance but unused by the chronological policy.
    """
    if not windows:
        raise EmptyInput("no windows to split")
    if not 0.0 < ratio < 1.0:
        raise ValidationError(f"ratio must lie in (0, 1), got {ratio}")
    ordered = sorted(windows, key=lambda w: (month_index(w.target_month), w.district))
    n_train = int(math.floor(ratio * len(ordered)))
    if n_train == 0:
        raise EmptyTrain(f"ratio {ratio} leaves an empty training split")
    return SplitDataset(
        train=ordered[:n_train], test=ordered[n_train:], split_seed=int(seed)
    )


# ---------------------------------------------------------------------------
# CSV interfaces
#
# climate.csv  district,date,temp_c,rh_pct        dates ISO-8601
# rain.csv     district,iso_year,iso_week,rain_mm
# larval.csv   district,year,month,n_low,n_mid,n_high
# cases.csv    district,year,month,cases
# records.csv  district,year,month,temp_mean,rh_mean,rain_total,larval_index,cases
#              (larval_index cell empty when missing)


def _read_rows(path, expected_header):
    try:
        f = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    with f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if header != list(expected_header):
            raise ValidationError(
                f"{path}: expected header {','.join(expected_header)}, "
                f"got {','.join(header)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise ValidationError(f"{path}:{lineno}: wrong column count")
            rows.append((lineno, row))
    return rows


def load_climate_csv(path):
    readings = []
    for lineno, row in _read_rows(path, ("district", "date", "temp_c", "rh_pct")):
        try:
            readings.append(
                RawClimateReading(
                    district=row[0],
                    date=date.fromisoformat(row[1]),
                    temperature=float(row[2]),
                    relative_humidity=float(row[3]),
                )
            )
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return readings


def load_rain_csv(path):
    weeks = []
    for lineno, row in _read_rows(path, ("district", "iso_year", "iso_week", "rain_mm")):
        try:
            weeks.append(
                WeeklyRainfall(
                    district=row[0],
                    iso_year=int(row[1]),
                    iso_week=int(row[2]),
                    rainfall=float(row[3]),
                )
            )
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return weeks


def load_larval_csv(path):
    surveys = []
    header = ("district", "year", "month", "n_low", "n_mid", "n_high")
    for lineno, row in _read_rows(path, header):
        try:
            surveys.append(
                LarvalSurvey(
                    district=row[0],
                    month=(int(row[1]), int(row[2])),
                    n_low=int(row[3]),
                    n_mid=int(row[4]),
                    n_high=int(row[5]),
                )
            )
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return surveys


def load_cases_csv(path):
    """Returns ((district, (year, month)), cases) pairs, duplicates included."""
    pairs = []
    for lineno, row in _read_rows(path, ("district", "year", "month", "cases")):
        try:
            pairs.append(((row[0], (int(row[1]), int(row[2]))), int(row[3])))
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return pairs


RECORDS_HEADER = (
    "district",
    "year",
    "month",
    "temp_mean",
    "rh_mean",
    "rain_total",
    "larval_index",
    "cases",
)


def _fmt(value):
    """Shortest exact decimal form of a float (round-trips via float())."""
    return repr(float(value))


def record_row(r):
    return [
        r.district,
        str(r.month[0]),
        str(r.month[1]),
        _fmt(r.temp_mean),
        _fmt(r.rh_mean),
        _fmt(r.rain_total),
        "" if r.larval_index is None else _fmt(r.larval_index),
        _fmt(r.cases) if isinstance(r.cases, float) else str(r.cases),
    ]


def write_records_csv(records, path, extra_header=(), extra_cells=None):
    """Write records.csv; extra columns (e.g. provenance) may be appended."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(list(RECORDS_HEADER) + list(extra_header))
        for i, r in enumerate(records):
            row = record_row(r)
            if extra_cells is not None:
                row += list(extra_cells[i])
            writer.writerow(row)


def load_records_csv(path, allow_extra=("provenance",)):
    records = []
    try:
        f = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    with f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        base = list(RECORDS_HEADER)
        if header != base and header != base + list(allow_extra):
            raise ValidationError(f"{path}: unexpected header {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                cases_text = row[7]
                cases = float(cases_text) if "." in cases_text else int(cases_text)
                records.append(
                    DistrictMonthRecord(
                        district=row[0],
                        month=(int(row[1]), int(row[2])),
                        temp_mean=float(row[3]),
                        rh_mean=float(row[4]),
                        rain_total=float(row[5]),
                        larval_index=float(row[6]) if row[6] != "" else None,
                        cases=cases,
                    )
                )
            except (ValueError, IndexError) as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return records
