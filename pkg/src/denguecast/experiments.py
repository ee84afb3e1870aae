"""Experiment harness: synthetic data, sweeps, variant comparison, reports.

The synthetic generator stands in for the (unpublished) field dataset. It
plants known structure so sweeps have ground truth: seasonal climate per
district, a larval index driven by season and current-month rain anomalies,
and case counts driven by 1-month-lagged temperature season, 2-month-lagged
rain anomalies and the beta-weighted 1-month-lagged larval index. The true
larval index for every district-month goes to an answer table so imputation
quality is measurable.

Sweeps train one configuration per grid cell per seed, aggregate mean
validation/test MSE and mark the argmin row. Reported MSE comes in both
raw-count and scaled flavors.
"""

from __future__ import annotations

import calendar
import csv
import dataclasses
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import date, timedelta

import numpy as np

from . import dataprep
from .dataprep import (
    CLIMATE_FEATURES,
    DistrictMonthRecord,
    GapReport,
    LarvalSurvey,
    RawClimateReading,
    SplitDataset,
    WeeklyRainfall,
    apply_scaler,
    build_windows,
    fit_scaler,
    month_index,
    split_dataset,
    weighted_larval_index,
)
from .errors import DivergenceError, EmptyInput, ValidationError
from .lstm import (
    ModelSpec,
    carve_validation,
    model_forward,
    train,
    windows_to_arrays,
)
from .nn_core import derive_seed, make_rng, mse

SWEEP_KINDS = ("variant", "timestep", "predictor", "architecture")

# planted effect sizes for the synthetic generator
CASE_BASE_RATE = 8.0        # typical monthly count
TEMP_LAG1_COEF = 0.55       # log-rate per unit of last month's temperature season
RAIN_LAG2_COEF = 0.5        # log-rate per unit of rain anomaly two months back
LARVAL_SEASON_AMP = 0.45    # larval index seasonal swing
LARVAL_RAIN_COEF = 0.12     # larval response to rain anomalies three months back
LARVAL_TEMP_COEF = 0.05     # larval response to temperature season three months back
LARVAL_NOISE_SD = 0.22      # idiosyncratic larval noise (invisible to climate)
# larval season trails each district's climate phase by pi/3, which keeps it
# orthogonal (in expectation over a year) to the lag-1 temperature season
# that drives cases
LARVAL_PHASE_OFFSET = math.pi / 3


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SynthSpec:
    districts: int = 26
    months: int = 84
    beta: float = 1.0
    noise: float = 1.0
    missing_rate: float = 0.3
    seed: int = 0
    start_year: int = 2014
    start_month: int = 1
    houses: int = 100
    amplitudes: tuple | None = None  # per-district temperature amplitude
    phases: tuple | None = None      # per-district seasonal phase

    def __post_init__(self):
        if self.districts < 1:
            raise ValidationError(f"districts must be >= 1, got {self.districts}")
        if self.months < 3:
            raise ValidationError(f"months must be >= 3, got {self.months}")
        if self.beta < 0:
            raise ValidationError(f"beta must be >= 0, got {self.beta}")
        if self.noise < 0:
            raise ValidationError(f"noise must be >= 0, got {self.noise}")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValidationError(
                f"missing_rate must lie in [0, 1), got {self.missing_rate}"
            )
        for name in ("amplitudes", "phases"):
            v = getattr(self, name)
            if v is not None and len(v) != self.districts:
                raise ValidationError(f"{name} must have one entry per district")


@dataclass
class SynthBundle:
    climate: list[RawClimateReading]
    rain: list[WeeklyRainfall]
    larval: list[LarvalSurvey]
    cases: list  # ((district, (year, month)), count) pairs
    truth: dict  # (district, (year, month)) -> pre-masking larval index


def _month_range(start_year, start_month, months):
    out = []
    y, m = start_year, start_month
    for _ in range(months):
        out.append((y, m))
        m += 1
        if m > 12:
            y, m = y + 1, 1
    return out


def _survey_counts(index, houses):
    """Integer band counts whose weighted index approximates the latent one."""
    if index <= 2.0:
        n_mid = int(round((index - 1.0) * houses))
        return houses - n_mid, n_mid, 0
    n_high = int(round((index - 2.0) * houses))
    return 0, houses - n_high, n_high


def synth_generate(spec):
    """Generate a raw CSV bundle (climate, rain, larval, cases) plus answers."""
    rng_params = make_rng(derive_seed(spec.seed, "synth.params"))
    rng_month = make_rng(derive_seed(spec.seed, "synth.monthly"))
    rng_daily = make_rng(derive_seed(spec.seed, "synth.daily"))
    rng_mask = make_rng(derive_seed(spec.seed, "synth.mask"))

    districts = [f"D{i + 1:02d}" for i in range(spec.districts)]
    base_t = 26.0 + rng_params.uniform(-3.0, 3.0, spec.districts)
    amp_t = (
        np.asarray(spec.amplitudes, dtype=np.float64)
        if spec.amplitudes is not None
        else 3.0 + rng_params.uniform(0.0, 2.0, spec.districts)
    )
    phase = (
        np.asarray(spec.phases, dtype=np.float64)
        if spec.phases is not None
        else rng_params.uniform(0.0, 2.0 * math.pi, spec.districts)
    )
    base_rh = 60.0 + rng_params.uniform(-8.0, 8.0, spec.districts)
    amp_rh = 8.0 + rng_params.uniform(0.0, 4.0, spec.districts)
    base_rain = 90.0 + rng_params.uniform(0.0, 20.0, spec.districts)

    months = _month_range(spec.start_year, spec.start_month, spec.months)

    # every ISO week belongs to the month containing its Thursday
    first = date(months[0][0], months[0][1], 1)
    last_y, last_m = months[-1]
    last = date(last_y, last_m, calendar.monthrange(last_y, last_m)[1])
    weeks_by_month = {}
    thursday = first + timedelta(days=(3 - first.weekday()) % 7)
    while thursday <= last:
        iso = thursday.isocalendar()
        weeks_by_month.setdefault((thursday.year, thursday.month), []).append(
            (iso[0], iso[1])
        )
        thursday += timedelta(days=7)

    climate = []
    rain = []
    larval = []
    cases = []
    truth = {}
    for di, district in enumerate(districts):
        season_t = np.empty(spec.months)
        rain_anom = np.empty(spec.months)
        rain_total = np.empty(spec.months)
        larval_latent = np.empty(spec.months)
        for mi, (y, m) in enumerate(months):
            ang = 2.0 * math.pi * (m - 1) / 12.0
            season_t[mi] = math.sin(ang + phase[di])
            anom = float(np.clip(rng_month.normal(0.0, 1.0), -2.5, 2.5))
            rain_anom[mi] = anom
            rain_total[mi] = max(
                2.0,
                base_rain[di] * (1.0 + 0.2 * math.sin(ang + phase[di] + math.pi))
                + 0.35 * base_rain[di] * anom * spec.noise,
            )
        for mi, (y, m) in enumerate(months):
            ang = 2.0 * math.pi * (m - 1) / 12.0
            season_l = math.sin(ang + phase[di] + LARVAL_PHASE_OFFSET)
            lag3 = max(mi - 3, 0)
            eps = rng_month.normal(0.0, LARVAL_NOISE_SD * spec.noise)
            larval_latent[mi] = float(
                np.clip(
                    2.0
                    + LARVAL_SEASON_AMP * season_l
                    + LARVAL_RAIN_COEF * rain_anom[lag3]
                    + LARVAL_TEMP_COEF * season_t[lag3]
                    + eps,
                    1.0,
                    3.0,
                )
            )

        for mi, (y, m) in enumerate(months):
            lag1 = max(mi - 1, 0)
            lag2 = max(mi - 2, 0)
            log_rate = (
                math.log(CASE_BASE_RATE)
                + TEMP_LAG1_COEF * season_t[lag1]
                + RAIN_LAG2_COEF * rain_anom[lag2]
                + spec.beta * (larval_latent[lag1] - 2.0)
            )
            rate = math.exp(min(log_rate, math.log(500.0)))
            n_cases = int(rng_month.poisson(rate))
            cases.append(((district, (y, m)), n_cases))

            n_low, n_mid, n_high = _survey_counts(larval_latent[mi], spec.houses)
            achieved = weighted_larval_index(n_low, n_mid, n_high)
            truth[(district, (y, m))] = achieved
            if rng_mask.random() >= spec.missing_rate:
                larval.append(
                    LarvalSurvey(
                        district=district, month=(y, m),
                        n_low=n_low, n_mid=n_mid, n_high=n_high,
                    )
                )

            n_days = calendar.monthrange(y, m)[1]
            ang = 2.0 * math.pi * (m - 1) / 12.0
            temp_sig = base_t[di] + amp_t[di] * season_t[mi]
            rh_sig = base_rh[di] + amp_rh[di] * math.sin(ang + phase[di] + math.pi / 3)
            for day in range(1, n_days + 1):
                climate.append(
                    RawClimateReading(
                        district=district,
                        date=date(y, m, day),
                        temperature=float(
                            temp_sig + rng_daily.normal(0.0, 0.8 * spec.noise)
                        ),
                        relative_humidity=float(
                            np.clip(
                                rh_sig + rng_daily.normal(0.0, 2.0 * spec.noise),
                                0.0,
                                100.0,
                            )
                        ),
                    )
                )

        # spread each month's rainfall evenly over the ISO weeks it owns
        for mi, (y, m) in enumerate(months):
            weeks = weeks_by_month.get((y, m), [])
            if not weeks:
                continue
            share = rain_total[mi] / len(weeks)
            for iso_year, iso_week in weeks:
                rain.append(
                    WeeklyRainfall(
                        district=district, iso_year=iso_year,
                        iso_week=iso_week, rainfall=float(share),
                    )
                )

    return SynthBundle(climate=climate, rain=rain, larval=larval, cases=cases,
                       truth=truth)


def bundle_to_records(bundle):
    """Assemble a bundle the same way the prepare step does."""
    climate = dataprep.aggregate_monthly(bundle.climate)
    rain = dataprep.rain_to_monthly(bundle.rain)
    larval = {}
    for s in bundle.larval:
        key = (s.district, s.month)
        if key in larval:
            raise ValidationError(f"duplicate larval survey for {key}")
        idx = weighted_larval_index(s.n_low, s.n_mid, s.n_high)
        if idx is not None:
            larval[key] = idx
    return dataprep.assemble_records(climate, rain, larval, bundle.cases)


# ---------------------------------------------------------------------------
# prepared supervised data


@dataclass
class PreparedData:
    split: SplitDataset
    scaler: dataprep.Scaler
    gap_report: GapReport


def make_supervised(records, t, variant, ratio=0.85, seed=0,
                    predictors=CLIMATE_FEATURES):
    """Scale, window and split records without temporal leakage.

    The chronological split boundary is found first (on unscaled windows,
    since scaling does not change ordering); the scaler is then fitted only
    on records up to the boundary month and applied everywhere.
    """
    if not records:
        raise EmptyInput("no records to prepare")
    raw_windows, _ = build_windows(records, t, variant, predictors)
    raw_split = split_dataset(raw_windows, ratio, seed)
    boundary = max(month_index(w.target_month) for w in raw_split.train)
    train_records = [r for r in records if month_index(r.month) <= boundary]
    features = list(predictors)
    if variant == "II":
        features.append("larval_index")
    features.append("cases")
    scaler = fit_scaler(train_records, features)
    scaled = apply_scaler(scaler, records)
    windows, gaps = build_windows(scaled, t, variant, predictors)
    split = split_dataset(windows, ratio, seed)
    return PreparedData(split=split, scaler=scaler, gap_report=gaps)


# ---------------------------------------------------------------------------
# single runs and sweeps


@dataclass
class PredictionRow:
    district: str
    month: tuple[int, int]
    predicted: float
    actual: float


@dataclass
class RunReport:
    label: str
    seed: int
    validation_mse: float         # raw count scale
    test_mse: float
    validation_mse_scaled: float
    test_mse_scaled: float
    predictions: list[PredictionRow]
    wall_clock: float
    trained: object | None = None


def evaluate(trained, windows):
    """(scaled MSE, raw MSE, per-window raw predictions) on a window list."""
    X, y = windows_to_arrays(windows)
    pred, _ = model_forward(trained.model, X, training=False)
    scaled = mse(y, pred)
    lo, hi = trained.scaler.ranges["cases"]
    raw_pred = lo + pred * (hi - lo)
    raw_y = lo + y * (hi - lo)
    raw = mse(raw_y, raw_pred)
    rows = [
        PredictionRow(
            district=w.district, month=w.target_month,
            predicted=float(raw_pred[i]), actual=float(raw_y[i]),
        )
        for i, w in enumerate(windows)
    ]
    return scaled, raw, rows


def run_config(records, spec, label, report_seed, ratio=0.85,
               validation_fraction=0.15, predictors=CLIMATE_FEATURES, lr=1e-3):
    """Prepare data for one configuration, train it, and report MSEs."""
    started = time.perf_counter()
    prepared = make_supervised(
        records, spec.timesteps, spec.variant, ratio=ratio, seed=spec.seed,
        predictors=predictors,
    )
    trained = train(
        spec, prepared.split, validation_fraction=validation_fraction,
        scaler=prepared.scaler, lr=lr,
    )
    _, val_w = carve_validation(prepared.split.train, validation_fraction)
    val_scaled, val_raw, _ = evaluate(trained, val_w)
    test_scaled, test_raw, rows = evaluate(trained, prepared.split.test)
    return RunReport(
        label=label,
        seed=report_seed,
        validation_mse=val_raw,
        test_mse=test_raw,
        validation_mse_scaled=val_scaled,
        test_mse_scaled=test_scaled,
        predictions=rows,
        wall_clock=time.perf_counter() - started,
        trained=trained,
    )


@dataclass(frozen=True)
class GridCell:
    label: str
    overrides: dict


@dataclass
class SweepSpec:
    kind: str
    base: ModelSpec
    grid: list[GridCell]
    seeds: list[int]

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ValidationError(f"sweep kind must be one of {SWEEP_KINDS}")
        if not self.grid:
            raise ValidationError("sweep grid must be non-empty")
        if not self.seeds:
            raise ValidationError("sweep needs at least one seed")


def default_grid(kind, base, timesteps=(2, 3, 4, 5)):
    if kind == "timestep":
        return [GridCell(f"t = {t}", {"timesteps": int(t)}) for t in timesteps]
    if kind == "predictor":
        return [
            GridCell("Temperature", {"predictors": ("temp_mean",)}),
            GridCell("Rainfall", {"predictors": ("rain_total",)}),
            GridCell("Relative Humidity", {"predictors": ("rh_mean",)}),
            GridCell("All three parameters", {"predictors": CLIMATE_FEATURES}),
        ]
    if kind == "architecture":
        deep = max(2, base.num_layers)
        return [
            GridCell("LSTM", {"arch": "plain", "num_layers": 1}),
            GridCell("Stacked LSTM", {"arch": "stacked", "num_layers": deep}),
            GridCell("Bidirectional LSTM", {"arch": "bidir", "num_layers": 1}),
            GridCell(
                "Bidirectional Stacked LSTM",
                {"arch": "bidir_stacked", "num_layers": deep},
            ),
        ]
    if kind == "variant":
        return [
            GridCell("Variant I", {"variant": "I"}),
            GridCell("Variant II", {"variant": "II"}),
        ]
    raise ValidationError(f"sweep kind must be one of {SWEEP_KINDS}")


@dataclass
class SweepRow:
    label: str
    validation_mse: float
    test_mse: float
    validation_mse_scaled: float
    test_mse_scaled: float
    n_seeds: int
    best: bool = False


@dataclass
class SweepResult:
    kind: str
    rows: list[SweepRow]
    reports: list[RunReport]
    failures: list  # (label, seed, message)
    argmin_label: str | None


def _cell_spec(base, cell, seed):
    overrides = dict(cell.overrides)
    predictors = overrides.pop("predictors", CLIMATE_FEATURES)
    spec = replace(base, **overrides, seed=derive_seed(seed, cell.label))
    return spec, tuple(predictors)


def _sweep_task(args):
    records, base, cell, seed, ratio, validation_fraction, lr = args
    spec, predictors = _cell_spec(base, cell, seed)
    try:
        report = run_config(
            records, spec, cell.label, seed, ratio=ratio,
            validation_fraction=validation_fraction, predictors=predictors, lr=lr,
        )
        return ("ok", cell.label, seed, report)
    except DivergenceError as exc:
        return ("diverged", cell.label, seed, str(exc))


def run_sweep(sweep, records, ratio=0.85, validation_fraction=0.15, lr=1e-3,
              jobs=1):
    """Train every grid cell for every seed; aggregate and mark the argmin.

    Each cell x seed pair derives its own seed from (seed, label), so results
    are independent of execution order. Divergence is recorded per row and
    the sweep continues. Rows are aggregated as the mean over seeds and the
    argmin is chosen by mean validation MSE.
    """
    tasks = [
        (records, sweep.base, cell, seed, ratio, validation_fraction, lr)
        for cell in sweep.grid
        for seed in sweep.seeds
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_sweep_task, tasks))
    else:
        outcomes = [_sweep_task(t) for t in tasks]

    reports = []
    failures = []
    for status, label, seed, payload in outcomes:
        if status == "ok":
            reports.append(payload)
        else:
            failures.append((label, seed, payload))

    rows = []
    for cell in sweep.grid:
        cell_reports = [r for r in reports if r.label == cell.label]
        if not cell_reports:
            continue
        rows.append(
            SweepRow(
                label=cell.label,
                validation_mse=float(np.mean([r.validation_mse for r in cell_reports])),
                test_mse=float(np.mean([r.test_mse for r in cell_reports])),
                validation_mse_scaled=float(
                    np.mean([r.validation_mse_scaled for r in cell_reports])
                ),
                test_mse_scaled=float(
                    np.mean([r.test_mse_scaled for r in cell_reports])
                ),
                n_seeds=len(cell_reports),
            )
        )
    argmin_label = None
    if rows:
        best_row = min(rows, key=lambda r: r.validation_mse)
        best_row.best = True
        argmin_label = best_row.label
    return SweepResult(
        kind=sweep.kind, rows=rows, reports=reports, failures=failures,
        argmin_label=argmin_label,
    )


@dataclass
class VariantComparison:
    pairs: list  # (seed, report_I, report_II)
    win_rate: float


def compare_variants(records, base, seeds, ratio=0.85, validation_fraction=0.15,
                     lr=1e-3):
    """Train variants I and II with identical seeds; report paired test MSE.

    win_rate is the fraction of seeds where variant II has the lower test MSE.
    """
    if not seeds:
        raise EmptyInput("no seeds for the variant comparison")
    pairs = []
    wins = 0
    for seed in seeds:
        run_seed = derive_seed(seed, "variant-pair")
        spec1 = replace(base, variant="I", seed=run_seed)
        spec2 = replace(base, variant="II", seed=run_seed)
        r1 = run_config(records, spec1, "Variant I", seed, ratio=ratio,
                        validation_fraction=validation_fraction, lr=lr)
        r2 = run_config(records, spec2, "Variant II", seed, ratio=ratio,
                        validation_fraction=validation_fraction, lr=lr)
        pairs.append((seed, r1, r2))
        if r2.test_mse < r1.test_mse:
            wins += 1
    return VariantComparison(pairs=pairs, win_rate=wins / len(seeds))


# ---------------------------------------------------------------------------
# rendering


KIND_COLUMN = {
    "timestep": "Time step",
    "architecture": "Model",
    "predictor": "Predictor",
    "variant": "Variant",
}

MONTH_ABBREV = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
                "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")


def round_half_away(x):
    """Round to the nearest integer, halves away from zero."""
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


def slugify(label):
    out = []
    for ch in label.lower():
        out.append(ch if ch.isalnum() else "-")
    slug = "".join(out)
    while "--" in slug:
        slug = slug.replace("--", "-")
    return slug.strip("-")


def _month_labels(months):
    by_moy = {m[1] for m in months}
    if len(by_moy) == len(months):
        return {m: MONTH_ABBREV[m[1] - 1] for m in months}
    return {m: f"{m[0]:04d}-{m[1]:02d}" for m in months}


def prediction_table_md(report):
    """Monthly-by-district prediction table with count footers.

    One row per month, one column per district; cells are predictions rounded
    half away from zero. The "Predicted Count" footer is the column sum of the
    rounded monthly predictions, "Actual Count" the sum of the actuals.
    """
    months = sorted({p.month for p in report.predictions}, key=month_index)
    districts = sorted({p.district for p in report.predictions})
    if not months:
        raise EmptyInput("report has no predictions")
    cell = {(p.district, p.month): p for p in report.predictions}
    labels = _month_labels(months)

    lines = [
        "| Month | " + " | ".join(districts) + " |",
        "|" + " --- |" * (len(districts) + 1),
    ]
    pred_sum = {d: 0 for d in districts}
    actual_sum = {d: 0 for d in districts}
    for m in months:
        row = [labels[m]]
        for d in districts:
            p = cell.get((d, m))
            if p is None:
                row.append("")
                continue
            rounded = round_half_away(p.predicted)
            pred_sum[d] += rounded
            actual_sum[d] += round_half_away(p.actual)
            row.append(str(rounded))
        lines.append("| " + " | ".join(row) + " |")
    lines.append(
        "| Predicted Count | "
        + " | ".join(str(pred_sum[d]) for d in districts) + " |"
    )
    lines.append(
        "| Actual Count | "
        + " | ".join(str(actual_sum[d]) for d in districts) + " |"
    )
    return "\n".join(lines) + "\n"


def prediction_table_csv(report):
    """Raw (unrounded) predictions; reparses to the same floats exactly."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["district", "year", "month", "predicted", "actual"])
    rows = sorted(report.predictions, key=lambda p: (p.district, month_index(p.month)))
    for p in rows:
        writer.writerow(
            [p.district, p.month[0], p.month[1], repr(p.predicted), repr(p.actual)]
        )
    return buf.getvalue()


def parse_prediction_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != ["district", "year", "month", "predicted", "actual"]:
        raise ValidationError(f"unexpected prediction CSV header {header}")
    rows = []
    for row in reader:
        if not row:
            continue
        rows.append(
            PredictionRow(
                district=row[0], month=(int(row[1]), int(row[2])),
                predicted=float(row[3]), actual=float(row[4]),
            )
        )
    return rows


def mse_table_md(result):
    """MSE comparison table: one row per configuration, argmin marked *."""
    header = KIND_COLUMN.get(result.kind, "Config")
    lines = [
        f"| {header} | Validation MSE | Test MSE |",
        "| --- | --- | --- |",
    ]
    for row in result.rows:
        label = row.label + (" *" if row.best else "")
        lines.append(f"| {label} | {row.validation_mse:.5f} | {row.test_mse:.5f} |")
    for label, seed, message in result.failures:
        lines.append(f"| {label} (seed {seed}) | diverged | diverged |")
    return "\n".join(lines) + "\n"


def mse_table_csv(result):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["label", "validation_mse", "test_mse",
         "validation_mse_scaled", "test_mse_scaled", "n_seeds", "best"]
    )
    for row in result.rows:
        writer.writerow(
            [row.label, repr(row.validation_mse), repr(row.test_mse),
             repr(row.validation_mse_scaled), repr(row.test_mse_scaled),
             row.n_seeds, int(row.best)]
        )
    return buf.getvalue()


def render_report(reports, sweep_result=None):
    """Render prediction tables (and optionally the MSE table) to file texts.

    Returns a mapping of relative path -> content covering tables/*.md and
    reports/*.csv.
    """
    if not reports:
        raise EmptyInput("no reports to render")
    files = {}
    for report in reports:
        stem = f"predictions_{slugify(report.label)}_seed{report.seed}"
        files[f"tables/{stem}.md"] = prediction_table_md(report)
        files[f"reports/{stem}.csv"] = prediction_table_csv(report)
    if sweep_result is not None:
        files["tables/mse_summary.md"] = mse_table_md(sweep_result)
        files["reports/mse_summary.csv"] = mse_table_csv(sweep_result)
    return files
