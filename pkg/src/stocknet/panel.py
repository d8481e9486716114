"""Price ingestion, gap filling and log-return panels."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, EmptyPanelError, IngestError

DATE_COLUMNS = ("date",)
PRICE_COLUMNS = ("adjclose", "adj close", "adj_close", "adjusted_close")
MISSING_TOKENS = {"", "null", "nan", "na", "none"}
DEFAULT_GAP_CAP = 2


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PricePanel:
    """Adjusted closes on a common date axis; NaN marks a missing cell."""

    tickers: tuple[str, ...]
    dates: tuple[dt.date, ...]
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "prices", _readonly(self.prices))
        if self.prices.shape != (len(self.tickers), len(self.dates)):
            raise DataError(
                f"price matrix shape {self.prices.shape} does not match "
                f"{len(self.tickers)} tickers x {len(self.dates)} dates"
            )
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")
        present = self.prices[~np.isnan(self.prices)]
        if np.any(present <= 0) or not np.all(np.isfinite(present)):
            raise DataError("prices must be finite and positive")

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.prices)

    @property
    def complete(self) -> bool:
        return not self.missing.any()


@dataclass(frozen=True)
class ReturnPanel:
    """Log-returns, one row per ticker. ``dates[t]`` is the closing date of return t."""

    tickers: tuple[str, ...]
    dates: tuple[dt.date, ...]
    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "returns", _readonly(self.returns))
        if self.returns.ndim != 2 or self.returns.shape != (len(self.tickers), len(self.dates)):
            raise DataError(
                f"return matrix shape {self.returns.shape} does not match "
                f"{len(self.tickers)} tickers x {len(self.dates)} dates"
            )
        if not np.all(np.isfinite(self.returns)):
            raise DataError("return panel contains non-finite values")
        if len(set(self.tickers)) != len(self.tickers):
            raise DataError("duplicate tickers in panel")

    @property
    def N(self) -> int:
        return self.returns.shape[0]

    @property
    def T(self) -> int:
        return self.returns.shape[1]

    def with_returns(self, returns: np.ndarray) -> "ReturnPanel":
        """Same metadata, new values (used for surrogates)."""
        return replace(self, returns=returns)

    @classmethod
    def from_array(cls, returns: np.ndarray, tickers: Sequence[str] | None = None,
                   start: dt.date = dt.date(2000, 1, 3)) -> "ReturnPanel":
        returns = np.asarray(returns, dtype=float)
        n, t = returns.shape
        if tickers is None:
            tickers = [f"S{i:03d}" for i in range(n)]
        return cls(tuple(tickers), business_days(start, t), returns)


def business_days(start: dt.date, count: int) -> tuple[dt.date, ...]:
    days = np.busday_offset(np.datetime64(start, "D"), np.arange(count), roll="forward")
    return tuple(d.astype(dt.date) for d in days)


def _parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip()[:10])


def read_price_file(path: str | Path) -> tuple[list[dt.date], list[float]]:
    """Read one per-ticker CSV. Missing prices come back as NaN."""
    path = Path(path)
    dates: list[dt.date] = []
    prices: list[float] = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestError(f"{path}: cannot open ({exc})") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: line 1: empty file") from None
        lowered = [h.strip().lower() for h in header]
        try:
            di = next(i for i, h in enumerate(lowered) if h in DATE_COLUMNS)
            pi = next(i for i, h in enumerate(lowered) if h in PRICE_COLUMNS)
        except StopIteration:
            raise IngestError(f"{path}: line 1: need Date and AdjClose columns, got {header}") from None
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            try:
                d = _parse_date(row[di])
                raw = row[pi].strip()
            except (ValueError, IndexError) as exc:
                raise IngestError(f"{path}: line {line}: {exc}") from None
            if raw.lower() in MISSING_TOKENS:
                p = np.nan
            else:
                try:
                    p = float(raw)
                except ValueError:
                    raise IngestError(f"{path}: line {line}: bad price {raw!r}") from None
                if not np.isfinite(p) or p <= 0:
                    raise IngestError(f"{path}: line {line}: non-positive price {raw!r}")
            if dates and d <= dates[-1]:
                raise IngestError(f"{path}: line {line}: dates not strictly increasing")
            dates.append(d)
            prices.append(p)
    if not dates:
        raise IngestError(f"{path}: no data rows")
    return dates, prices


def read_manifest(path: str | Path) -> list[Path]:
    """Ticker manifest: one ticker per line, resolved as ``<TICKER>.csv`` next to the manifest."""
    path = Path(path)
    out = []
    for raw in path.read_text().splitlines():
        name = raw.split("#", 1)[0].strip()
        if name:
            p = Path(name)
            if p.suffix != ".csv":
                p = p.with_suffix(".csv")
            out.append(p if p.is_absolute() else path.parent / p)
    if not out:
        raise EmptyPanelError(f"{path}: manifest lists no tickers")
    return out


def load_price_csv(paths: Iterable[str | Path],
                   date_range: tuple[dt.date, dt.date] | None = None) -> PricePanel:
    """Load per-ticker files and align them on one date axis.

    With ``date_range`` only tickers traded on both the first and the last
    trading day of the range survive. Without it, the span is the intersection
    of all tickers' spans. The axis is the union of survivors' dates inside the
    span; a ticker lacking one of those dates gets a missing cell.
    """
    series = {}
    for p in paths:
        p = Path(p)
        if p.stem in series:
            raise IngestError(f"{p}: duplicate ticker {p.stem}")
        series[p.stem] = read_price_file(p)
    if not series:
        raise EmptyPanelError("no input files")

    def valid_span(dates, prices):
        idx = [i for i, v in enumerate(prices) if not np.isnan(v)]
        if not idx:
            return None
        return dates[idx[0]], dates[idx[-1]]

    spans = {t: valid_span(*s) for t, s in series.items()}
    if date_range is not None:
        start, end = date_range
        if end < start:
            raise DataError(f"date range end {end} precedes start {start}")
        calendar = sorted({d for ds, _ in series.values() for d in ds if start <= d <= end})
        if not calendar:
            raise EmptyPanelError(f"no trading days inside {start}..{end}")
        lo, hi = calendar[0], calendar[-1]
        keep = [t for t, sp in spans.items() if sp is not None and sp[0] <= lo and sp[1] >= hi]
    else:
        keep = [t for t, sp in spans.items() if sp is not None]
        if not keep:
            raise EmptyPanelError("no ticker has any price")
        lo = max(spans[t][0] for t in keep)
        hi = min(spans[t][1] for t in keep)
        if hi < lo:
            raise EmptyPanelError("tickers share no common trading period")
    if not keep:
        raise EmptyPanelError(f"no ticker covers the range {date_range[0]}..{date_range[1]}")

    axis = sorted({d for t in keep for d in series[t][0] if lo <= d <= hi})
    pos = {d: i for i, d in enumerate(axis)}
    prices = np.full((len(keep), len(axis)), np.nan)
    for r, t in enumerate(keep):
        for d, v in zip(*series[t]):
            if d in pos:
                prices[r, pos[d]] = v
    return PricePanel(tuple(keep), tuple(axis), prices)


def load_manifest_panel(manifest: str | Path,
                        date_range: tuple[dt.date, dt.date] | None = None) -> PricePanel:
    return load_price_csv(read_manifest(manifest), date_range)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open [start, stop) runs of True."""
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return list(zip(edges[::2], edges[1::2]))


def interpolate_missing(panel: PricePanel, cap: int = DEFAULT_GAP_CAP) -> PricePanel:
    """Fill interior gaps of at most ``cap`` days by linear interpolation on price."""
    if cap < 0:
        raise DataError("gap cap must be non-negative")
    prices = panel.prices.copy()
    for r, ticker in enumerate(panel.tickers):
        row = prices[r]
        for a, b in _runs(np.isnan(row)):
            if a == 0 or b == row.size:
                raise DataError(
                    f"{ticker}: missing price at series {'start' if a == 0 else 'end'} "
                    f"({panel.dates[a]}..{panel.dates[b - 1]}); extrapolation not allowed"
                )
            if b - a > cap:
                raise DataError(
                    f"{ticker}: {b - a} consecutive missing days {panel.dates[a]}..{panel.dates[b - 1]} "
                    f"exceed cap {cap}"
                )
            left, right = row[a - 1], row[b]
            frac = np.arange(1, b - a + 1) / (b - a + 1)
            row[a:b] = left + frac * (right - left)
    return PricePanel(panel.tickers, panel.dates, prices)


def log_returns(panel: PricePanel) -> ReturnPanel:
    if not panel.complete:
        raise DataError("log returns need a complete panel; run interpolate_missing first")
    if len(panel.dates) < 2:
        raise DataError("need at least two prices for a return")
    r = np.diff(np.log(panel.prices), axis=1)
    return ReturnPanel(panel.tickers, panel.dates[1:], r)


def slice_period(panel: ReturnPanel, start: dt.date, end: dt.date) -> ReturnPanel:
    if not start < end:
        raise DataError(f"period start {start} must precede end {end}")
    if end < panel.dates[0] or start > panel.dates[-1]:
        raise DataError(f"period {start}..{end} lies outside panel dates "
                        f"{panel.dates[0]}..{panel.dates[-1]}")
    idx = [i for i, d in enumerate(panel.dates) if start <= d <= end]
    if not idx:
        raise DataError(f"period {start}..{end} selects no dates")
    sel = slice(idx[0], idx[-1] + 1)
    return ReturnPanel(panel.tickers, panel.dates[sel], panel.returns[:, sel])


def drop_series(panel: ReturnPanel, tickers: Iterable[str]) -> ReturnPanel:
    drop = list(dict.fromkeys(tickers))
    unknown = [t for t in drop if t not in panel.tickers]
    if unknown:
        raise DataError(f"unknown tickers: {', '.join(unknown)}")
    keep = [i for i, t in enumerate(panel.tickers) if t not in set(drop)]
    if not keep:
        raise EmptyPanelError("dropping these tickers leaves an empty panel")
    return ReturnPanel(tuple(panel.tickers[i] for i in keep), panel.dates, panel.returns[keep])


# -- wide CSV ---------------------------------------------------------------

def write_wide_csv(path: str | Path, tickers: Sequence[str], dates: Sequence[dt.date],
                   values: np.ndarray, header_comment: str | None = None) -> None:
    """Date column plus one column per ticker, 17 significant digits (bit-exact)."""
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Date", *tickers])
        for t, d in enumerate(dates):
            w.writerow([d.isoformat(), *("" if np.isnan(v) else format(v, ".17g") for v in values[:, t])])


def read_wide_csv(path: str | Path) -> tuple[tuple[str, ...], tuple[dt.date, ...], np.ndarray]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise IngestError(f"{path}: empty wide CSV")
    tickers = tuple(rows[0][1:])
    dates = []
    cols = []
    for line, r in enumerate(rows[1:], start=2):
        try:
            dates.append(_parse_date(r[0]))
            cols.append([np.nan if c.strip().lower() in MISSING_TOKENS else float(c) for c in r[1:]])
        except ValueError as exc:
            raise IngestError(f"{path}: line {line}: {exc}") from None
    return tickers, tuple(dates), np.array(cols, dtype=float).T.reshape(len(tickers), len(dates))


def save_returns(panel: ReturnPanel, path: str | Path, header_comment: str | None = None) -> None:
    write_wide_csv(path, panel.tickers, panel.dates, panel.returns, header_comment)


def load_returns(path: str | Path) -> ReturnPanel:
    return ReturnPanel(*read_wide_csv(path))


def save_prices(panel: PricePanel, path: str | Path) -> None:
    write_wide_csv(path, panel.tickers, panel.dates, panel.prices)


def load_prices(path: str | Path) -> PricePanel:
    return PricePanel(*read_wide_csv(path))
