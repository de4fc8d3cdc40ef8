"""Price panels to quarterly log-return samples.

Input is a wide CSV: one ISO date column plus one numeric price column per
asset.  The quarter-end price of an asset is its last available observation
inside the calendar quarter.  Assets lacking a price in any quarter of the
covered range are dropped, so every retained asset has a complete history.
"""
from __future__ import annotations

import csv
import datetime as dt
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

_QUARTER_RE = re.compile(r"^\s*(\d{4})\s*-?\s*[Qq]\s*([1-4])\s*$")


class IngestError(ValueError):
    pass


def parse_quarter(label) -> tuple[int, int]:
    if isinstance(label, tuple):
        return int(label[0]), int(label[1])
    m = _QUARTER_RE.match(str(label))
    if not m:
        raise IngestError(f"bad quarter label {label!r}; expected e.g. 2017Q2")
    return int(m.group(1)), int(m.group(2))


def format_quarter(q: tuple[int, int]) -> str:
    return f"{q[0]}Q{q[1]}"


def quarter_of(d: dt.date) -> tuple[int, int]:
    return d.year, (d.month - 1) // 3 + 1


def quarter_range(first: tuple[int, int], last: tuple[int, int]) -> list[tuple[int, int]]:
    out = []
    y, q = first
    while (y, q) <= last:
        out.append((y, q))
        y, q = (y + 1, 1) if q == 4 else (y, q + 1)
    return out


def previous_quarter(q: tuple[int, int]) -> tuple[int, int]:
    y, k = q
    return (y - 1, 4) if k == 1 else (y, k - 1)


@dataclass
class LoadDiagnostics:
    dropped_rows: int = 0
    duplicate_dates: int = 0
    bad_cells: list = field(default_factory=list)  # (line, column, raw value)
    coverage: dict = field(default_factory=dict)  # ticker -> count of valid prices
    excluded_tickers: list = field(default_factory=list)


@dataclass
class PricePanel:
    """Dates in increasing order; ``prices[d, j]`` is NaN when missing."""

    dates: list
    tickers: list
    prices: np.ndarray
    diagnostics: LoadDiagnostics


def load_prices(path, date_column: str = "date", value_columns=None) -> PricePanel:
    """Read a wide price CSV.

    Rows with an unparseable date are dropped; non-numeric prices become
    missing.  Both are recorded in the diagnostics.  For repeated dates the
    last row wins.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if date_column not in header:
            raise IngestError(f"{path}: no column named {date_column!r}")
        date_idx = header.index(date_column)
        if value_columns is None:
            value_columns = [h for i, h in enumerate(header) if i != date_idx]
        missing = [c for c in value_columns if c not in header]
        if missing:
            raise IngestError(f"{path}: missing value columns {missing}")
        col_idx = [header.index(c) for c in value_columns]

        diag = LoadDiagnostics()
        rows: dict[dt.date, list[float]] = {}
        for line_no, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                day = dt.date.fromisoformat(rec[date_idx].strip()[:10])
            except (ValueError, IndexError):
                diag.dropped_rows += 1
                diag.bad_cells.append((line_no, date_column, rec[date_idx] if date_idx < len(rec) else ""))
                continue
            vals = []
            for name, j in zip(value_columns, col_idx):
                raw = rec[j].strip() if j < len(rec) else ""
                if raw == "":
                    vals.append(math.nan)
                    continue
                try:
                    vals.append(float(raw))
                except ValueError:
                    diag.bad_cells.append((line_no, name, raw))
                    vals.append(math.nan)
            if day in rows:
                diag.duplicate_dates += 1
            rows[day] = vals

    if not rows:
        raise IngestError(f"{path}: no data rows")
    dates = sorted(rows)
    prices = np.array([rows[d] for d in dates], dtype=np.float64).reshape(len(dates), len(value_columns))
    diag.coverage = {t: int(np.sum(np.isfinite(prices[:, j]))) for j, t in enumerate(value_columns)}
    if diag.duplicate_dates:
        logger.warning("%s: %d duplicate dates, kept the last row", path, diag.duplicate_dates)
    return PricePanel(dates=dates, tickers=list(value_columns), prices=prices, diagnostics=diag)


@dataclass(frozen=True)
class ReturnPanel:
    tickers: tuple
    quarters: tuple  # (year, quarter) pairs, strictly increasing
    returns: np.ndarray  # len(quarters) x len(tickers)

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=np.float64)
        if r.shape != (len(self.quarters), len(self.tickers)):
            raise IngestError(f"returns shape {r.shape} does not match labels")
        qs = tuple(parse_quarter(q) for q in self.quarters)
        if any(a >= b for a, b in zip(qs, qs[1:])):
            raise IngestError("quarters must be strictly increasing")
        if not np.all(np.isfinite(r)):
            raise IngestError("return panel has missing entries")
        object.__setattr__(self, "quarters", qs)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "returns", r)

    @property
    def labels(self) -> list[str]:
        return [format_quarter(q) for q in self.quarters]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["quarter", *self.tickers])
            for label, row in zip(self.labels, self.returns):
                w.writerow([label, *(repr(float(v)) for v in row)])

    @classmethod
    def from_csv(cls, path) -> "ReturnPanel":
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            quarters, data = [], []
            for rec in reader:
                if not rec:
                    continue
                quarters.append(rec[0])
                data.append([float(v) for v in rec[1:]])
        return cls(tuple(header[1:]), tuple(quarters), np.array(data).reshape(len(quarters), len(header) - 1))


def to_quarterly_log_returns(panel: PricePanel) -> ReturnPanel:
    """Quarter-end log returns ``ln(P_q / P_{q-1})`` for complete-history assets.

    The first quarter in the panel only supplies the base price, so the
    result has one row fewer than the number of quarters covered.
    """
    quarters_of = [quarter_of(d) for d in panel.dates]
    all_q = quarter_range(quarters_of[0], quarters_of[-1])
    if len(all_q) < 2:
        raise IngestError("need price observations in at least two quarters")
    pos = {q: i for i, q in enumerate(all_q)}
    qend = np.full((len(all_q), len(panel.tickers)), np.nan)
    qend_date = [[None] * len(panel.tickers) for _ in all_q]
    for d, q, row in zip(panel.dates, quarters_of, panel.prices):
        ok = np.isfinite(row)
        k = pos[q]
        qend[k, ok] = row[ok]  # dates are sorted, so the last one sticks
        for j in np.flatnonzero(ok):
            qend_date[k][j] = d

    keep = []
    for j, t in enumerate(panel.tickers):
        if np.all(np.isfinite(qend[:, j])):
            keep.append(j)
        else:
            panel.diagnostics.excluded_tickers.append(t)
    if panel.diagnostics.excluded_tickers:
        logger.info("dropped %d tickers with incomplete histories", len(panel.diagnostics.excluded_tickers))
    if not keep:
        raise IngestError("no ticker has a complete quarterly history")
    for j in keep:
        bad = np.flatnonzero(qend[:, j] <= 0)
        if bad.size:
            k = bad[0]
            raise IngestError(
                f"nonpositive price {qend[k, j]} for {panel.tickers[j]} on {qend_date[k][j]}"
            )
    prices = qend[:, keep]
    rets = np.log(prices[1:] / prices[:-1])
    return ReturnPanel(
        tickers=tuple(panel.tickers[j] for j in keep),
        quarters=tuple(all_q[1:]),
        returns=rets,
    )


def split_periods(panel: ReturnPanel, boundary, start=None, end=None):
    """Split return rows into ``start..boundary`` and ``boundary+1..end``.

    ``start`` and ``end`` default to the first and last quarter of the panel.
    Returns two arrays with observations in rows and the panel's column order.
    """
    b = parse_quarter(boundary)
    lo = panel.quarters[0] if start is None else parse_quarter(start)
    hi = panel.quarters[-1] if end is None else parse_quarter(end)
    if lo < panel.quarters[0] or hi > panel.quarters[-1] or lo > hi:
        raise IngestError(
            f"window {format_quarter(lo)}-{format_quarter(hi)} outside panel "
            f"{format_quarter(panel.quarters[0])}-{format_quarter(panel.quarters[-1])}"
        )
    if not lo <= b < hi:
        raise IngestError(
            f"boundary {format_quarter(b)} must lie in [{format_quarter(lo)}, {format_quarter(hi)})"
        )
    q = panel.quarters
    first = [i for i, x in enumerate(q) if lo <= x <= b]
    second = [i for i, x in enumerate(q) if b < x <= hi]
    for rows, name in ((first, "first"), (second, "second")):
        if len(rows) < 4:
            raise IngestError(f"{name} period has {len(rows)} quarters; need at least 4")
    return panel.returns[first], panel.returns[second]


def synthetic_price_panel(
    path,
    p: int = 40,
    first_quarter="2009Q4",
    last_quarter="2022Q4",
    break_after="2017Q2",
    break_scale: float = 2.5,
    seed: int = 0,
    obs_per_quarter: int = 3,
    gap_ticker: bool = True,
) -> Path:
    """Write a wide price CSV whose quarterly log returns are elliptical.

    Returns for quarters after ``break_after`` have covariance multiplied by
    ``break_scale``; ``break_after=None`` gives a panel without a break.
    With ``gap_ticker`` one extra asset misses a quarter and must be dropped
    on ingest.
    """
    # local import keeps ingest importable without the simulation stack
    from .laws import RadialLaw, RadialTag
    from .simulation import EllipticalSpec, covariance_factor, sample_elliptical, toeplitz

    rng = np.random.default_rng(seed)
    quarters = quarter_range(parse_quarter(first_quarter), parse_quarter(last_quarter))
    brk = parse_quarter(break_after) if break_after is not None else None
    base = 0.004 * (0.5 * np.eye(p) + 0.5 * toeplitz(p, 0.3))
    n = len(quarters) - 1
    law = RadialLaw(RadialTag.BETA_PRIME, p)
    before = sample_elliptical(EllipticalSpec(law, covariance_factor(base), n), rng)
    after = sample_elliptical(
        EllipticalSpec(law, covariance_factor(break_scale * base), n), rng
    )
    rets = np.empty((n, p))
    for k, q in enumerate(quarters[1:]):
        rets[k] = after[k] if brk is not None and q > brk else before[k]
    rets += 0.01  # drift; the statistic ignores location

    log_p = np.vstack([np.log(rng.uniform(20, 200, size=p)), np.zeros((n, p))])
    log_p[1:] = log_p[0] + np.cumsum(rets, axis=0)

    tickers = [f"S{j:03d}" for j in range(p)] + (["GAP"] if gap_ticker else [])
    gap_q = quarters[len(quarters) // 2]
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *tickers])
        for k, (y, qn) in enumerate(quarters):
            months = [3 * qn - 2, 3 * qn - 1, 3 * qn][-obs_per_quarter:]
            for i, m in enumerate(months):
                last = i == len(months) - 1
                lp = log_p[k] if last else log_p[k] + rng.normal(0, 0.02, size=p)
                row = [f"{y:04d}-{m:02d}-{26 if last else 15}", *(f"{math.exp(v):.10g}" for v in lp)]
                if gap_ticker:
                    row.append("" if (y, qn) == gap_q else f"{50 + k:.4f}")
                w.writerow(row)
    return path
