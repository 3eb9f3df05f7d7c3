"""Command-line front end: ``psarima {ingest,analyze,fit,detect,simulate,acf}``.

Every command is deterministic for fixed inputs, config and seed. Failures
print ``error [stage]: message`` on stderr and exit with status 1; usage
errors exit with status 2.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, replace
from datetime import date
from pathlib import Path

import numpy as np

from . import plots
from .arima import ArimaOrder, FitConfig, auto_fit, fit
from .changepoint import DetectorConfig, SegmentedModel, attach_whiteness, detect
from .errors import PsarimaError, StageError
from .preprocess import (
    PreprocessConfig,
    SeasonalSpec,
    daily_entries,
    parse_turnstile,
    prepare_series,
)
from .series import TimeSeries, acf, pacf, rolling_mean, significance_band
from .synth import PiecewiseSpec, gen_piecewise

logger = logging.getLogger("psarima")

QUARTER_DAYS = 91
MONTH_DAYS = 30
ACF_LAGS = 28


@dataclass(frozen=True)
class RunConfig:
    station: str = ""
    date_range: tuple | None = None
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    bounds: ArimaOrder = field(default_factory=lambda: ArimaOrder(6, 2, 6))
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    output_dir: Path = Path("out")
    seed: int = 0

    def __post_init__(self):
        if self.date_range is not None and self.date_range[0] >= self.date_range[1]:
            raise StageError("config", "date range start must precede its end")

    def to_dict(self) -> dict:
        return {
            "station": self.station,
            "date_range": None if self.date_range is None
            else [d.isoformat() for d in self.date_range],
            "detector": self.detector.to_dict(),
            "fit": asdict(self.fit),
            "bounds": self.bounds.to_dict(),
            "preprocess": asdict(self.preprocess),
            "seed": self.seed,
        }


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise StageError("config", f"cannot read {path}: {err}") from err


def build_run_config(args) -> RunConfig:
    """Merge the JSON config file (if any) with command-line overrides."""
    doc = _load_config(getattr(args, "config", None))
    try:
        det = dict(doc.get("detector", {}))
        for flag, key in (("p_lag", "p_lag"), ("min_gap", "min_gap"), ("tau", "screening_tau"),
                          ("lambda_grid", "lambda1_grid"),
                          ("whiteness_lags", "whiteness_lags")):
            value = getattr(args, flag, None)
            if value is not None:
                det[key] = value
        bounds = dict(doc.get("bounds", {"p": 6, "d": 2, "q": 6}))
        if getattr(args, "max_order", None) is not None:
            bounds["p"] = bounds["q"] = args.max_order
        if getattr(args, "max_d", None) is not None:
            bounds["d"] = args.max_d
        start = getattr(args, "date_from", None) or doc.get("from")
        end = getattr(args, "date_to", None) or doc.get("to")
        rng = None
        if start or end:
            if not (start and end):
                raise StageError("config", "--from and --to must be given together")
            rng = (date.fromisoformat(str(start)), date.fromisoformat(str(end)))
        return RunConfig(
            station=getattr(args, "station", None) or doc.get("station", ""),
            date_range=rng,
            detector=DetectorConfig(**det),
            fit=FitConfig(**doc.get("fit", {})),
            bounds=ArimaOrder(**bounds),
            preprocess=PreprocessConfig.from_dict(doc.get("preprocess", {})),
            output_dir=Path(getattr(args, "out", None) or doc.get("out", "out")),
            seed=getattr(args, "seed", None) if getattr(args, "seed", None) is not None
            else int(doc.get("seed", 0)),
        )
    except StageError:
        raise
    except (PsarimaError, TypeError, ValueError) as err:
        raise StageError("config", str(err)) from err


def _stage(name, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except StageError:
        raise
    except (PsarimaError, OSError, ValueError) as err:
        raise StageError(name, str(err)) from err


def _read_records(paths):
    records, rejects = [], []
    for path in paths:
        with open(path, newline="") as fh:
            res = parse_turnstile(fh)
        records.extend(res.records)
        rejects.extend((str(path), *r) for r in res.rejects)
    return records, rejects


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_json(path: Path, doc) -> None:
    _write(path, json.dumps(doc, indent=2) + "\n")


def _read_series(path) -> TimeSeries:
    return TimeSeries.from_csv(path)


# -- figures -----------------------------------------------------------------

def fig_raw(out: Path, series: TimeSeries, name: str = "fig1_daily") -> None:
    smooth = rolling_mean(series, 7)
    rows = zip([d.isoformat() for d in series.dates()], series.values, smooth.values)
    plots.write_figure(
        out, name,
        plots.line_chart("Daily series and 7-day rolling mean",
                         {"daily": series.values, "7-day mean": smooth.values}, xlabel="day"),
        plots.table_csv(["date", "value", "rolling_mean_7"], rows),
    )


def _corr_figure(out, name, title, seq, n):
    band = significance_band(n)
    lags = seq.lags[1:] if seq.lags[0] == 0 else seq.lags
    vals = seq.values[1:] if seq.lags[0] == 0 else seq.values
    plots.write_figure(
        out, name, plots.bar_chart(title, lags, vals, band, "lag", title),
        plots.table_csv(["lag", "value", "band"], [(int(k), v, band) for k, v in zip(lags, vals)]),
    )


def fig_distribution(out: Path, series: TimeSeries, prefix: str = "fig2") -> None:
    x = series.values
    bins = plots.freedman_diaconis_bins(x)
    counts, edges = np.histogram(x, bins=bins)
    mids = 0.5 * (edges[:-1] + edges[1:])
    plots.write_figure(
        out, f"{prefix}_histogram",
        plots.bar_chart("Histogram", mids, counts, None, "value", "count"),
        plots.table_csv(["left", "right", "count"], zip(edges[:-1], edges[1:], counts.tolist())),
    )
    lags = min(ACF_LAGS, series.n - 1)
    _corr_figure(out, f"{prefix}_acf", "ACF", acf(series, lags), series.n)
    _corr_figure(out, f"{prefix}_pacf", "PACF", pacf(series, lags), series.n)


def fig_residual(out: Path, series: TimeSeries, breaks, name: str = "fig3_residual") -> None:
    marks = set(breaks)
    rows = [(d.isoformat(), v, int(i in marks)) for i, (d, v) in
            enumerate(zip(series.dates(), series.values))]
    plots.write_figure(
        out, name,
        plots.line_chart("Residual series with detected breaks", {"residual": series.values},
                         markers=sorted(marks), xlabel="day"),
        plots.table_csv(["date", "value", "break"], rows),
    )


def fig_window_acf(out: Path, series: TimeSeries, window: int, name: str) -> None:
    lags = min(14, window // 3)
    curves, rows = {}, []
    for start in range(0, series.n - window + 1, window):
        part = series.slice(start, start + window)
        try:
            vals = acf(part, lags).values
        except PsarimaError:
            continue
        label = part.start_date.isoformat()
        curves[label] = vals
        rows.extend((label, k, v) for k, v in enumerate(vals))
    plots.write_figure(
        out, name,
        plots.line_chart(f"ACF by {window}-day window", curves, xlabel="lag", ylabel="acf"),
        plots.table_csv(["window_start", "lag", "acf"], rows),
    )


# -- reports -----------------------------------------------------------------

def segment_report(seg: SegmentedModel, station: str = "", whole=None) -> dict:
    keys = ("model", "order", "coefficients", "sigma2", "loglik", "aic", "aicc", "bic",
            "root_moduli", "whiteness_p")
    doc = seg.to_dict()

    def trim(m):
        d = m.to_dict()
        out = {k: d[k] for k in keys}
        if m.whiteness is not None:
            out["whiteness_verdict"] = m.whiteness.verdict
        return out

    report = {"station": station, "breakpoints": doc["breakpoints"],
              "break_indices": doc["break_indices"],
              "segments": [trim(m) for m in seg.segments],
              "screening_log": doc["screening_log"],
              "lambda_selected": doc["lambda_selected"]}
    if whole is not None:
        report["whole_series_model"] = trim(whole)
    return report


# -- commands ----------------------------------------------------------------

def cmd_ingest(args) -> int:
    cfg = build_run_config(args)
    records, rejects = _stage("parse", _read_records, args.input)
    pp = cfg.preprocess
    daily = _stage("daily_entries", daily_entries, records, cfg.station, cfg.date_range,
                   pp.max_per_interval, pp.interval_hours, pp.imputation_window, pp.max_gap_days)
    out = cfg.output_dir
    _write(out / "daily.csv", daily.series.to_csv())
    _write(out / "anomalies.csv", daily.anomalies_csv())
    _write(out / "rejects.csv", plots.table_csv(["file", "row", "reason", "text"], rejects))
    print(f"{daily.series.n} days, {len(daily.anomaly_log)} anomalies, {len(rejects)} rejects")
    return 0


def _detect_stage(series, cfg: RunConfig):
    return _stage("detect", detect, series, cfg.detector, cfg.fit, cfg.bounds)


def cmd_analyze(args) -> int:
    cfg = build_run_config(args)
    out = cfg.output_dir
    if args.daily:
        daily = _stage("load", _read_series, args.daily)
    else:
        if not args.input:
            raise StageError("load", "give --daily or --input")
        records, _ = _stage("parse", _read_records, args.input)
        pp = cfg.preprocess
        daily = _stage("daily_entries", daily_entries, records, cfg.station, cfg.date_range,
                       pp.max_per_interval, pp.interval_hours, pp.imputation_window,
                       pp.max_gap_days).series
    detrended, intercept, coef, residual, seasonal = _stage(
        "preprocess", prepare_series, daily, cfg.preprocess, cfg.fit)
    whole = attach_whiteness(_stage("fit", auto_fit, residual, cfg.bounds, cfg.fit),
                             cfg.detector.whiteness_lags)
    seg = _detect_stage(residual, cfg)
    report = segment_report(seg, cfg.station, whole)
    report["preprocess"] = {"weekday_intercept": intercept, "weekend_coefficient": coef,
                            "seasonal_model": seasonal.to_dict()}
    report["config"] = cfg.to_dict()
    _write_json(out / "report.json", report)
    _write(out / "residual.csv", residual.to_csv())
    fig_raw(out, daily)
    fig_distribution(out, residual)
    fig_residual(out, residual, seg.break_indices)
    fig_window_acf(out, residual, QUARTER_DAYS, "fig5_acf_quarter")
    fig_window_acf(out, residual, MONTH_DAYS, "fig6_acf_month")
    print(f"{len(seg.breakpoints)} breakpoint(s): "
          f"{', '.join(d.isoformat() for d in seg.breakpoints) or 'none'}")
    return 0


def cmd_fit(args) -> int:
    cfg = build_run_config(args)
    series = _stage("load", _read_series, args.series)
    if args.order:
        try:
            p, d, q = (int(v) for v in args.order.split(","))
        except ValueError:
            raise StageError("config", "--order expects p,d,q") from None
        model = _stage("fit", fit, series, ArimaOrder(p, d, q), cfg.fit)
    else:
        model = _stage("fit", auto_fit, series, cfg.bounds, cfg.fit)
    model = attach_whiteness(model, cfg.detector.whiteness_lags)
    _write_json(cfg.output_dir / "model.json", model.to_dict())
    print(model.order.label())
    return 0


def cmd_detect(args) -> int:
    cfg = build_run_config(args)
    series = _stage("load", _read_series, args.series)
    seg = _detect_stage(series, cfg)
    report = segment_report(seg, cfg.station)
    report["config"] = cfg.to_dict()
    _write_json(cfg.output_dir / "report.json", report)
    fig_residual(cfg.output_dir, series, seg.break_indices, "breaks")
    print(f"{len(seg.breakpoints)} breakpoint(s): "
          f"{', '.join(d.isoformat() for d in seg.breakpoints) or 'none'}")
    return 0


def cmd_simulate(args) -> int:
    try:
        spec = PiecewiseSpec.from_json(Path(args.spec).read_text())
    except OSError as err:
        raise StageError("load", str(err)) from err
    except (PsarimaError, ValueError) as err:
        raise StageError("spec", str(err)) from err
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    series, breaks = _stage("simulate", gen_piecewise, spec)
    out = Path(args.out or "out")
    _write(out / "series.csv", series.to_csv())
    _write_json(out / "truth.json", {"seed": spec.seed, "length": series.n,
                                     "breaks": [int(b) for b in breaks],
                                     "break_dates": [series.date_at(b).isoformat()
                                                     for b in breaks]})
    print(f"{series.n} values, breaks at {list(map(int, breaks))}")
    return 0


def cmd_acf(args) -> int:
    series = _stage("load", _read_series, args.series)
    out = Path(args.out or "out")
    lags = args.max_lag or min(ACF_LAGS, series.n - 1)
    _stage("acf", _corr_figure, out, "acf", "ACF", acf(series, lags), series.n)
    _stage("pacf", _corr_figure, out, "pacf", "PACF", pacf(series, lags), series.n)
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--station")
    p.add_argument("--from", dest="date_from", help="ISO start date")
    p.add_argument("--to", dest="date_to", help="ISO end date")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--lambda-grid", type=lambda s: tuple(float(v) for v in s.split(",")),
                   help="comma-separated lambda1 values")
    p.add_argument("--p-lag", type=int)
    p.add_argument("--min-gap", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--whiteness-lags", type=int, help="portmanteau lag count h")
    p.add_argument("--max-order", type=int, help="upper bound for p and q in order search")
    p.add_argument("--max-d", type=int, help="upper bound for d in order search")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psarima", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="turnstile CSVs to a daily station series")
    _common(p)
    p.add_argument("input", nargs="+")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", help="preprocess, fit, detect and write the report bundle")
    _common(p)
    p.add_argument("--daily", help="daily series CSV written by ingest")
    p.add_argument("--input", nargs="*", help="turnstile CSVs")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit an ARIMA model to a series CSV")
    _common(p)
    p.add_argument("series")
    p.add_argument("--order", help="p,d,q; omitted means automatic selection")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("detect", help="detect breaks in a series CSV")
    _common(p)
    p.add_argument("series")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="simulate a piecewise series from a JSON spec")
    p.add_argument("spec")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("acf", help="ACF and PACF of a series CSV")
    p.add_argument("series")
    p.add_argument("--max-lag", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_acf)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as err:
        print(f"error {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
