"""Turnstile CSV ingestion and per-device counter differencing."""
from __future__ import annotations

import csv
import io
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from typing import Iterable, NamedTuple

import numpy as np

from ..errors import ContinuityError, DataQualityError, FormatError, InvalidArgumentError
from ..series import TimeSeries

logger = logging.getLogger(__name__)

HEADER = ("C/A", "UNIT", "SCP", "STATION", "LINENAME", "DIVISION", "DATE", "TIME", "DESC",
          "ENTRIES", "EXITS")
MAX_REJECT_FRACTION = 0.05
NEGATIVE = "negative diff"
TOO_LARGE = "exceeds max_per_interval"


@dataclass(frozen=True)
class TurnstileRecord:
    booth: str
    unit: str
    scp: str
    station: str
    date: date
    time: time
    entries: int
    exits: int
    linename: str = ""
    division: str = ""
    desc: str = ""

    @property
    def device(self) -> tuple[str, str, str]:
        return (self.booth, self.unit, self.scp)

    @property
    def timestamp(self) -> datetime:
        return datetime.combine(self.date, self.time)


class Reject(NamedTuple):
    row: int  # 1-based line number in the file, header is line 1
    reason: str
    text: str


class ParseResult(NamedTuple):
    records: list
    rejects: list


def _counter(text: str, name: str) -> int:
    text = text.strip()
    if not text.isdigit():
        raise ValueError(f"non-numeric {name} counter {text!r}")
    return int(text)


def _row_to_record(row: list[str]) -> TurnstileRecord:
    if len(row) != len(HEADER):
        raise ValueError(f"expected {len(HEADER)} fields, got {len(row)}")
    booth, unit, scp, station, line, division, day, clock, desc, entries, exits = (
        c.strip() for c in row
    )
    try:
        day_v = datetime.strptime(day, "%m/%d/%Y").date()
    except ValueError:
        raise ValueError(f"bad DATE {day!r}") from None
    try:
        clock_v = time.fromisoformat(clock)
    except ValueError:
        raise ValueError(f"bad TIME {clock!r}") from None
    if not (booth and unit and scp and station):
        raise ValueError("empty device or station field")
    return TurnstileRecord(booth, unit, scp, station, day_v, clock_v,
                           _counter(entries, "ENTRIES"), _counter(exits, "EXITS"),
                           line, division, desc)


def parse_turnstile(stream, max_reject_fraction: float = MAX_REJECT_FRACTION) -> ParseResult:
    """Parse a public turnstile CSV (text stream, str, or path-like opened by the caller).

    Malformed rows are returned in ``rejects`` with their line number and
    reason.

    Raises
    ------
    FormatError
        When the header is missing or differs from the expected columns.
    DataQualityError
        When more than ``max_reject_fraction`` of the data rows are rejected.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != HEADER:
        raise FormatError(f"missing or unexpected header; expected {','.join(HEADER)}")
    records, rejects = [], []
    total = 0
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        total += 1
        try:
            records.append(_row_to_record(row))
        except ValueError as err:
            rejects.append(Reject(lineno, str(err), ",".join(row)))
    if total and len(rejects) > max_reject_fraction * total:
        raise DataQualityError(
            f"{len(rejects)} of {total} rows rejected (limit {max_reject_fraction:.0%})", rejects
        )
    return ParseResult(records, rejects)


@dataclass(frozen=True)
class AnomalyRecord:
    device: tuple
    date: date
    raw_diff: int
    imputed_value: float
    reason: str

    def to_dict(self) -> dict:
        return {"device": "/".join(self.device), "date": self.date.isoformat(),
                "raw_diff": self.raw_diff, "imputed_value": self.imputed_value,
                "reason": self.reason}


@dataclass(frozen=True, eq=False)
class StationDaily:
    station: str
    series: TimeSeries
    anomaly_log: tuple = field(default_factory=tuple)

    def anomalies_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["device", "date", "raw_diff", "imputed_value", "reason"])
        for a in self.anomaly_log:
            w.writerow(["/".join(a.device), a.date.isoformat(), a.raw_diff,
                        repr(float(a.imputed_value)), a.reason])
        return out.getvalue()


def stations(records: Iterable[TurnstileRecord]) -> list[str]:
    return sorted({r.station for r in records})


def _device_daily(readings, max_per_interval, interval_hours, window, log, device):
    """Per-day entry counts of one device, with anomalous diffs imputed."""
    by_stamp = {}
    for r in readings:
        by_stamp.setdefault(r.timestamp, r)  # duplicate audit rows: keep the first
    stamps = sorted(by_stamp)
    daily: dict[date, float] = defaultdict(float)
    valid: list[int] = []
    for prev, cur in zip(stamps[:-1], stamps[1:]):
        raw = by_stamp[cur].entries - by_stamp[prev].entries
        hours = (cur - prev).total_seconds() / 3600.0
        limit = max_per_interval * max(1.0, hours / interval_hours)
        reason = NEGATIVE if raw < 0 else TOO_LARGE if raw > limit else None
        if reason is None:
            value = float(raw)
            valid.append(raw)
        else:
            recent = valid[-window:]
            value = float(np.mean(recent)) if recent else 0.0
            log.append(AnomalyRecord(device, cur.date(), raw, value, reason))
        # spread a diff spanning several calendar days evenly over them
        first, last = prev.date(), cur.date()
        span = max(1, (last - first).days)
        for k in range(1, span + 1) if last > first else [0]:
            daily[first + timedelta(days=k)] += value / span
    return daily, stamps


def daily_entries(records: Iterable[TurnstileRecord], station: str, date_range=None,
                  max_per_interval: int = 10000, interval_hours: float = 4.0,
                  window: int = 7, max_gap_days: int = 2) -> StationDaily:
    """Daily station entries from cumulative device counters.

    Each device's consecutive readings are differenced and the diff is
    booked on the later reading's date (spread evenly when readings are
    days apart). A negative diff (counter reset) or one above
    ``max_per_interval`` per ``interval_hours`` is replaced by the mean of
    the device's previous ``window`` valid diffs and logged.

    Raises
    ------
    InvalidArgumentError
        Unknown station (the message lists the available ones).
    ContinuityError
        When no device reports for more than ``max_gap_days`` consecutive days.
    """
    records = list(records)
    mine = [r for r in records if r.station == station]
    if not mine:
        raise InvalidArgumentError(
            f"station {station!r} not found; available: {', '.join(stations(records)) or 'none'}"
        )
    devices: dict[tuple, list] = defaultdict(list)
    for r in mine:
        devices[r.device].append(r)
    log: list[AnomalyRecord] = []
    total: dict[date, float] = defaultdict(float)
    covered: set[date] = set()
    for dev in sorted(devices):
        daily, stamps = _device_daily(devices[dev], max_per_interval, interval_hours, window,
                                      log, dev)
        for day, v in daily.items():
            total[day] += v
        covered.update(s.date() for s in stamps[1:])
    if not total:
        raise ContinuityError(f"station {station!r} has fewer than two readings per device")
    if date_range is None:
        start, end = min(total), max(total)
    else:
        start, end = date_range
    if start > end:
        raise InvalidArgumentError("date range start must not be after its end")
    days = [start + timedelta(days=k) for k in range((end - start).days + 1)]
    run_start, run = None, 0
    for day in days + [None]:
        if day is not None and day not in covered:
            run_start = run_start or day
            run += 1
            continue
        if run > max_gap_days:
            gap = (run_start, run_start + timedelta(days=run - 1))
            raise ContinuityError(
                f"no readings from {gap[0]} to {gap[1]} ({run} days) at {station!r}", gap
            )
        run_start, run = None, 0
    values = np.array([total.get(day, 0.0) for day in days])
    log.sort(key=lambda a: (a.date, a.device))
    return StationDaily(station, TimeSeries(values, start), tuple(log))
