"""Synthetic panels: Gaussian factor models, VAR(1), the block copula and injected regime shifts."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .panel import ReturnPanel, business_days


@dataclass(frozen=True)
class FactorModel:
    """One market factor: r_i = scale_i * (beta_i f + sqrt(1 - beta_i^2) e_i)."""

    N: int = 20
    T: int = 1000
    beta_lo: float = 0.3
    beta_hi: float = 0.8
    scale: float = 0.015
    tail_df: float | None = None   # Student-t marginals via a monotone map; None keeps Gaussian

    def betas(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.beta_lo, self.beta_hi, self.N)

    def sample(self, rng: np.random.Generator, tickers=None) -> ReturnPanel:
        beta = self.betas(rng)
        f = rng.standard_normal(self.T)
        e = rng.standard_normal((self.N, self.T))
        z = beta[:, None] * f + np.sqrt(1.0 - beta[:, None] ** 2) * e
        if self.tail_df is not None:
            # Gaussian copula with fat-tailed marginals
            z = stats.t.ppf(stats.norm.cdf(z), self.tail_df) / np.sqrt(self.tail_df / (self.tail_df - 2))
        return ReturnPanel.from_array(self.scale * z, tickers)


def gaussian_factor_panel(N: int, T: int, rng: np.random.Generator, **kw) -> ReturnPanel:
    return FactorModel(N, T, **kw).sample(rng)


def var1_panel(N: int, T: int, rng: np.random.Generator, phi: float = 0.5,
               coupling: float = 0.2, burn: int = 200) -> ReturnPanel:
    """Stable Gaussian VAR(1) x_t = A x_{t-1} + e_t with cross-correlated innovations."""
    a = phi * np.eye(N) + coupling / N * rng.standard_normal((N, N))
    rad = np.max(np.abs(np.linalg.eigvals(a)))
    if rad >= 0.95:
        a *= 0.9 / rad
    chol = np.linalg.cholesky(0.5 * np.eye(N) + 0.5 * np.ones((N, N)))
    x = np.zeros(N)
    out = np.empty((N, T))
    for t in range(T + burn):
        x = a @ x + chol @ rng.standard_normal(N)
        if t >= burn:
            out[:, t - burn] = x
    return ReturnPanel.from_array(out)


def block_copula(T: int, rng: np.random.Generator, balanced: bool = False) -> np.ndarray:
    """(2, T) sample: with prob 1/2 uniform on [0, 1/2)^2, else uniform on [1/2, 1)^2.

    Exact MI is 1 bit and the Pearson correlation is 3/4. Each draw picks its
    block independently; ``balanced=True`` instead puts exactly floor(T/2)
    draws in the upper block (a stratified design used for diagnostics).
    """
    if balanced:
        hi = np.zeros(T, dtype=bool)
        hi[rng.permutation(T)[:T // 2]] = True
    else:
        hi = rng.random(T) < 0.5
    u = rng.random((2, T)) * 0.5
    return u + 0.5 * hi[None, :]


def most_coupled(panel: ReturnPanel) -> int:
    """Index of the series with the largest mean correlation to the others."""
    c = np.corrcoef(panel.returns)
    np.fill_diagonal(c, 0.0)
    return int(np.argmax(c.mean(axis=1)))


def inject_crash(panel: ReturnPanel, index: int, start: int, length: int,
                 rng: np.random.Generator, drift: float = 0.3, turbulence: float = 5.0,
                 noise: float = 0.3) -> ReturnPanel:
    """Level shift of series ``index`` inside [start, start+length): a sustained price collapse.

    In the window the returns are -sd * (drift + turbulence * (|m_t| - mean|m|) + noise * e_t),
    where m_t is the standardized cross-sectional mean of the other series, so
    losses are largest on turbulent market days whatever the market direction.
    Outside the window the series is untouched.
    """
    r = np.array(panel.returns, copy=True)
    sl = slice(start, start + length)
    m = np.delete(r, index, axis=0)[:, sl].mean(axis=0)
    m = (m - m.mean()) / m.std()
    sd = r[index].std()
    a = np.abs(m)
    r[index, sl] = -sd * (drift + turbulence * (a - a.mean()) + noise * rng.standard_normal(length))
    return panel.with_returns(r)


def returns_to_prices(r: np.ndarray, start_price: float | np.ndarray = 100.0) -> np.ndarray:
    """Price paths (N, T+1) whose log-returns are ``r``."""
    r = np.asarray(r, dtype=float)
    p0 = np.broadcast_to(np.asarray(start_price, dtype=float), (r.shape[0],))
    return p0[:, None] * np.exp(np.concatenate([np.zeros((r.shape[0], 1)), np.cumsum(r, axis=1)], axis=1))


def write_price_files(out_dir: str | Path, tickers, dates, prices: np.ndarray) -> Path:
    """One Date,AdjClose CSV per ticker (NaN written as 'null') plus manifest.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for t, row in zip(tickers, prices):
        with open(out / f"{t}.csv", "w") as fh:
            fh.write("Date,AdjClose\n")
            for d, p in zip(dates, row):
                fh.write(f"{d.isoformat()},{'null' if np.isnan(p) else format(p, '.10g')}\n")
    man = out / "manifest.txt"
    man.write_text("".join(f"{t}\n" for t in tickers))
    return man


def sample_dates(T: int, start: dt.date = dt.date(2003, 1, 2)) -> tuple[dt.date, ...]:
    return business_days(start, T)


@dataclass(frozen=True)
class SamplePanelDesign:
    """Bundled desk-scale panel: fat-tailed Gaussian-copula factor model with one crashing series."""

    n_full: int = 30
    T: int = 1500
    seed: int = 20081015
    crash_start: int = 900
    crash_length: int = 300
    n_partial: int = 2      # extra tickers that do not cover the full range
    n_gaps: int = 5         # interior missing prices (1-2 days each)
    tail_df: float = 4.0


def make_sample_prices(design: SamplePanelDesign = SamplePanelDesign()):
    """Returns (tickers, dates, prices with NaN gaps, truth dict)."""
    rng = np.random.default_rng(design.seed)
    n = design.n_full + design.n_partial
    base = FactorModel(n, design.T, beta_lo=0.3, beta_hi=0.7, tail_df=design.tail_df).sample(rng)
    full = ReturnPanel.from_array(base.returns[:design.n_full])
    j = most_coupled(full)
    full = inject_crash(full, j, design.crash_start, design.crash_length, rng)
    r = np.vstack([full.returns, base.returns[design.n_full:]])
    prices = returns_to_prices(r, rng.uniform(20.0, 200.0, n))
    tickers = [f"TK{i + 1:02d}" for i in range(n)]
    dates = sample_dates(design.T + 1)
    # partial tickers: one listed late, one delisted early
    for k in range(design.n_partial):
        row = design.n_full + k
        cut = design.T // 3
        if k % 2 == 0:
            prices[row, :cut] = np.nan
        else:
            prices[row, -cut:] = np.nan
    gaps = []
    for _ in range(design.n_gaps):
        row = int(rng.integers(design.n_full))
        col = int(rng.integers(10, design.T - 10))
        width = int(rng.integers(1, 3))
        prices[row, col:col + width] = np.nan
        gaps.append([tickers[row], dates[col].isoformat(), width])
    truth = {"injected": tickers[j], "crash_start": dates[design.crash_start + 1].isoformat(),
             "crash_end": dates[design.crash_start + design.crash_length].isoformat(),
             "partial": tickers[design.n_full:], "gaps": gaps, "seed": design.seed,
             "first_date": dates[0].isoformat(), "last_date": dates[-1].isoformat()}
    return tickers, dates, prices, truth
