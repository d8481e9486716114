"""Surrogate tests of graph characteristics and localization of extranormal information."""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dependence import DependenceMatrix
from .errors import ValidationError
from .filtering import FILTERS, UnweightedGraph, apply_filter, edge_order, n_edges_for_density
from .metrics import TEST_METRICS, global_metrics
from .mi import BiasCalibration, BinningSpec, mi_matrix
from .panel import ReturnPanel
from .surrogates import SurrogateSpec, surrogate_member

TIE_RTOL = 1e-12


# -- p-values ----------------------------------------------------------------

@dataclass
class NullDistribution:
    metric: str
    surrogates: np.ndarray   # NaN marks an undefined surrogate value
    data: float | None

    def __post_init__(self):
        self.surrogates = np.asarray(
            [np.nan if v is None else v for v in np.ravel(self.surrogates)], dtype=float)

    @property
    def defined(self) -> np.ndarray:
        return self.surrogates[~np.isnan(self.surrogates)]

    @property
    def effective_count(self) -> int:
        return int(self.defined.size)

    @property
    def n_undefined(self) -> int:
        return int(np.isnan(self.surrogates).sum())


def two_sided_p(null: NullDistribution) -> float | None:
    """p = min(1, 2 (min(#{s >= d}, #{s <= d}) + 1) / (N_S + 1)); values within 1e-12 relative count as ties."""
    d = null.data
    if d is None or (isinstance(d, float) and np.isnan(d)):
        return None
    s = null.defined
    if s.size == 0:
        return None
    tol = TIE_RTOL * max(1.0, abs(d))
    g = int(np.sum(s >= d - tol))
    l = int(np.sum(s <= d + tol))
    return min(1.0, 2.0 * (min(g, l) + 1) / (s.size + 1))


# -- per-panel network statistics -------------------------------------------

@dataclass(frozen=True)
class GraphPipeline:
    """Everything that turns a return panel into global graph characteristics."""

    calib: BiasCalibration | None
    filter: str = "pmfg"
    density: float | None = None
    metrics: tuple[str, ...] = TEST_METRICS
    base: str = "nats"
    mode: str = "gaussian"
    Q: int = 4

    def __post_init__(self):
        if self.filter not in FILTERS:
            raise ValidationError(f"filter must be one of {FILTERS}, got {self.filter!r}")
        if self.filter == "wta" and self.density is None:
            raise ValidationError("WTA filter needs a density")

    def matrix(self, panel: ReturnPanel) -> DependenceMatrix:
        spec = self.calib.spec if self.calib is not None else BinningSpec(self.Q, panel.T)
        return mi_matrix(panel, spec, self.calib, self.base, self.mode)

    def graph(self, panel: ReturnPanel) -> UnweightedGraph:
        return apply_filter(self.matrix(panel), self.filter, self.density)

    def stats(self, panel: ReturnPanel) -> dict[str, float | None]:
        return global_metrics(self.graph(panel), self.metrics)


# worker context, set once per process so tasks only carry an index
_CTX: dict = {}


def _init_worker(ctx: dict) -> None:
    _CTX.clear()
    _CTX.update(ctx)


def _surrogate_stats(k: int):
    panel, spec, pipe = _CTX["panel"], _CTX["spec"], _CTX["pipe"]
    return pipe.stats(surrogate_member(panel, spec, k))


def _surrogate_sweep(k: int):
    panel, spec, pipe, densities = _CTX["panel"], _CTX["spec"], _CTX["pipe"], _CTX["densities"]
    return sweep_stats(pipe.matrix(surrogate_member(panel, spec, k)), densities, pipe.metrics)


def _run_surrogates(func, ctx: dict, count: int, jobs: int) -> list:
    if jobs is None or jobs <= 1:
        _init_worker(ctx)
        try:
            return [func(k) for k in range(count)]
        finally:
            _CTX.clear()
    from concurrent.futures import ProcessPoolExecutor
    jobs = min(jobs, count)
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(ctx,)) as ex:
        return list(ex.map(func, range(count), chunksize=max(1, count // (4 * jobs))))


# -- graph metric test --------------------------------------------------------

@dataclass
class MetricTest:
    null: NullDistribution
    p: float | None

    def to_dict(self) -> dict:
        s = self.null.surrogates
        return {"data": self.null.data, "p": self.p,
                "effective_ns": self.null.effective_count,
                "undefined_surrogates": self.null.n_undefined,
                "null": [None if np.isnan(v) else float(v) for v in s]}


@dataclass
class TestReport:
    filter: str
    surrogate_count: int
    seed: int
    tests: dict[str, MetricTest]
    density: float | None = None
    extra: dict = field(default_factory=dict)

    def p_values(self) -> dict[str, float | None]:
        return {k: t.p for k, t in self.tests.items()}

    def to_dict(self) -> dict:
        return {"filter": self.filter, "density": self.density, "surrogates": self.surrogate_count,
                "seed": self.seed, "metrics": {k: t.to_dict() for k, t in self.tests.items()},
                **self.extra}

    def to_json(self, path: str | Path | None = None, **extra) -> str:
        text = json.dumps({**self.to_dict(), **extra}, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    def write_histograms(self, path: str | Path, bins: int = 30, header_comment: str | None = None) -> None:
        """Long format: metric, bin_lo, bin_hi, count, data (one row per bin)."""
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "bin_lo", "bin_hi", "count", "data", "p"])
            for name, t in self.tests.items():
                vals = t.null.defined
                if vals.size == 0:
                    continue
                lo, hi = float(vals.min()), float(vals.max())
                if hi - lo <= TIE_RTOL * max(1.0, abs(hi)):
                    # a (numerically) constant null gets one unit-wide bin around it
                    counts, edges = np.histogram(vals, bins=1, range=(lo - 0.5, hi + 0.5))
                else:
                    counts, edges = np.histogram(vals, bins=bins)
                for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                    w.writerow([name, format(lo, ".17g"), format(hi, ".17g"), int(c),
                                "" if t.null.data is None else format(t.null.data, ".17g"),
                                "" if t.p is None else format(t.p, ".17g")])


def graph_metric_test(panel: ReturnPanel, spec: SurrogateSpec, pipe: GraphPipeline,
                      jobs: int = 1) -> TestReport:
    """Compare data-derived graph characteristics with their FT-surrogate null."""
    data = pipe.stats(panel)
    ctx = {"panel": panel, "spec": spec, "pipe": pipe}
    null = _run_surrogates(_surrogate_stats, ctx, spec.count, jobs)
    tests = {}
    for name in pipe.metrics:
        nd = NullDistribution(name, np.array([s[name] for s in null], dtype=object), data[name])
        tests[name] = MetricTest(nd, two_sided_p(nd))
    return TestReport(pipe.filter, spec.count, spec.seed, tests, pipe.density)


# -- localization -----------------------------------------------------------

@dataclass
class LocalizationReport:
    tickers: tuple[str, ...]
    totals: np.ndarray
    mask: str = "all pairs"

    @property
    def ranking(self) -> list[str]:
        """Tickers by descending total (ties by original order)."""
        order = np.lexsort((np.arange(len(self.tickers)), -self.totals))
        return [self.tickers[i] for i in order]

    def to_csv(self, path: str | Path, header_comment: str | None = None) -> None:
        rank = {t: r + 1 for r, t in enumerate(self.ranking)}
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ticker", "total", "rank"])
            for t in self.ranking:
                w.writerow([t, format(self.totals[self.tickers.index(t)], ".17g"), rank[t]])


def _require_extranormal(ie: DependenceMatrix) -> None:
    if ie.kind != "extranormal":
        raise ValidationError(f"localization needs an extranormal matrix, got {ie.kind}")


def localize_total(ie: DependenceMatrix) -> LocalizationReport:
    _require_extranormal(ie)
    v = ie.values.copy()
    np.fill_diagonal(v, 0.0)
    return LocalizationReport(ie.tickers, v.sum(axis=1))


def localize_on_edges(ie: DependenceMatrix, g: UnweightedGraph, label: str = "graph edges") -> LocalizationReport:
    _require_extranormal(ie)
    if tuple(g.tickers) != tuple(ie.tickers):
        raise ValidationError("graph and matrix labels differ")
    v = np.where(g.adjacency, ie.values, 0.0)
    np.fill_diagonal(v, 0.0)
    return LocalizationReport(ie.tickers, v.sum(axis=1), label)


# -- density sweep -----------------------------------------------------------

def default_densities(step: float = 0.01, start: float = 0.0, stop: float = 0.99) -> tuple[float, ...]:
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(n))


def sweep_stats(m: DependenceMatrix, densities: Sequence[float], metrics: Sequence[str]) -> np.ndarray:
    """(len(densities), len(metrics)) array of global metrics, NaN = undefined."""
    order = edge_order(m).tolist()
    out = np.full((len(densities), len(metrics)), np.nan)
    for di, d in enumerate(densities):
        g = UnweightedGraph.from_edges(m.n, order[:n_edges_for_density(d, m.n)], m.tickers)
        vals = global_metrics(g, metrics)
        out[di] = [np.nan if vals[k] is None else vals[k] for k in metrics]
    return out


@dataclass
class SweepResult:
    densities: tuple[float, ...]
    metrics: tuple[str, ...]
    data: np.ndarray        # (D, M)
    surrogates: np.ndarray  # (S, D, M)
    band: tuple[float, float] = (0.0, 1.0)

    @property
    def envelope(self) -> tuple[np.ndarray, np.ndarray]:
        s = self.surrogates
        # all-NaN columns (undefined at every surrogate) stay NaN without a warning
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            lo = np.nanquantile(s, self.band[0], axis=0) if self.band[0] > 0 else np.nanmin(s, axis=0)
            hi = np.nanquantile(s, self.band[1], axis=0) if self.band[1] < 1 else np.nanmax(s, axis=0)
        return lo, hi

    def inside(self) -> np.ndarray:
        """(D, M) booleans: data within the envelope (NaN where either is undefined)."""
        lo, hi = self.envelope
        ok = (self.data >= lo) & (self.data <= hi)
        return np.where(np.isnan(self.data) | np.isnan(lo), np.nan, ok)

    def to_csv(self, path: str | Path, header_comment: str | None = None) -> None:
        lo, hi = self.envelope
        n_def = (~np.isnan(self.surrogates)).sum(axis=0)

        def fmt(x):
            return "" if np.isnan(x) else format(float(x), ".17g")

        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["density", "metric", "data", "env_lo", "env_hi", "n_defined", "undefined"])
            for di, d in enumerate(self.densities):
                for mi_, name in enumerate(self.metrics):
                    x = self.data[di, mi_]
                    w.writerow([format(d, ".2f"), name, fmt(x), fmt(lo[di, mi_]), fmt(hi[di, mi_]),
                                int(n_def[di, mi_]), int(np.isnan(x))])


def density_sweep(panel: ReturnPanel, spec: SurrogateSpec, pipe: GraphPipeline,
                  densities: Sequence[float] | None = None, jobs: int = 1,
                  band: tuple[float, float] = (0.0, 1.0)) -> SweepResult:
    """WTA characteristics across densities for data and surrogates (pointwise envelope)."""
    densities = tuple(default_densities() if densities is None else densities)
    for d in densities:
        n_edges_for_density(d, panel.N)
    data = sweep_stats(pipe.matrix(panel), densities, pipe.metrics)
    ctx = {"panel": panel, "spec": spec, "pipe": pipe, "densities": densities}
    sur = np.array(_run_surrogates(_surrogate_sweep, ctx, spec.count, jobs))
    return SweepResult(densities, tuple(pipe.metrics), data, sur, band)
