"""Equiquantized mutual information, sample-size bias calibration and extranormal information.

Raw estimates are plug-in MI of the Q x Q joint histogram of rank-binned
series. Their finite-sample bias is removed by calibrating against bivariate
Gaussian ensembles of the same length: a raw value is mapped to the
correlation whose ensemble-mean raw estimate matches it, and reported as the
Gaussian MI of that correlation.
"""
from __future__ import annotations

import functools
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dependence import DependenceMatrix, check_base, gaussian_mi_value, nats_to
from .errors import DataError, ValidationError
from .panel import ReturnPanel
from .parallel import pmap, substream

DEFAULT_Q = 4
DEFAULT_GRID = tuple(np.round(np.r_[np.arange(0.0, 0.951, 0.05), 0.99], 2).tolist())
DEFAULT_REPLICATES = 1000
CORRECTION_MODES = ("gaussian", "subtract")


@dataclass(frozen=True)
class BinningSpec:
    Q: int
    T: int

    def __post_init__(self):
        if int(self.Q) != self.Q or self.Q < 2:
            raise ValidationError(f"bin count must be an integer >= 2, got {self.Q}")
        if self.T < self.Q:
            raise ValidationError(f"series length {self.T} shorter than bin count {self.Q}")
        # strict Q < T^(1/3), checked in integers
        if self.Q ** 3 >= self.T:
            raise ValidationError(
                f"bin count {self.Q} violates Q < T^(1/3) = {self.T ** (1 / 3):.3f} for T = {self.T}"
            )

    @property
    def bound(self) -> float:
        return self.T ** (1.0 / 3.0)


def bin_sizes(T: int, Q: int) -> np.ndarray:
    """Equiprobable bin sizes; the remainder goes to the lowest-rank bins."""
    q, r = divmod(T, Q)
    return np.array([q + 1] * r + [q] * (Q - r))


def _rank_to_bin(T: int, Q: int) -> np.ndarray:
    return np.repeat(np.arange(Q), bin_sizes(T, Q))


def equiquantize(series, Q: int) -> np.ndarray:
    """Bin indices 0..Q-1 with (near-)equal counts, monotone in rank (ties by time index)."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise DataError("equiquantize expects a 1-D series")
    if Q < 1 or x.size < Q:
        raise ValidationError(f"cannot split {x.size} samples into {Q} bins")
    if np.ptp(x) == 0:
        raise DataError("cannot equiquantize a constant series")
    return _codes(x[None, :], Q)[0]


def _codes(x: np.ndarray, Q: int) -> np.ndarray:
    order = np.argsort(x, axis=1, kind="stable")
    codes = np.empty(x.shape, dtype=np.intp)
    np.put_along_axis(codes, order, np.broadcast_to(_rank_to_bin(x.shape[1], Q), x.shape), axis=1)
    return codes


def _mi_from_counts(counts: np.ndarray) -> np.ndarray:
    """Plug-in MI in nats for a stack of joint count tables (..., Q, Q)."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum(axis=(-2, -1), keepdims=True)
    pxy = counts / n
    px = pxy.sum(axis=-1, keepdims=True)
    py = pxy.sum(axis=-2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pxy > 0, pxy * np.log(pxy / (px * py)), 0.0)
    return np.maximum(terms.sum(axis=(-2, -1)), 0.0)


def _pair_counts(cx: np.ndarray, cy: np.ndarray, Q: int) -> np.ndarray:
    """Joint histograms for row-aligned code arrays of shape (P, T)."""
    p = cx.shape[0]
    idx = (np.arange(p)[:, None] * Q + cx) * Q + cy
    return np.bincount(idx.ravel(), minlength=p * Q * Q).reshape(p, Q, Q)


def mi_binned_raw(x, y, spec: BinningSpec, base: str = "nats") -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError(f"series lengths differ: {x.shape} vs {y.shape}")
    if x.size != spec.T:
        raise ValidationError(f"series length {x.size} does not match binning spec T = {spec.T}")
    cx = equiquantize(x, spec.Q)
    cy = equiquantize(y, spec.Q)
    return float(nats_to(_mi_from_counts(_pair_counts(cx[None], cy[None], spec.Q))[0], base))


def raw_mi_pairs(x: np.ndarray, Q: int) -> np.ndarray:
    """Raw MI (nats) for every row pair i < j, in upper-triangle order."""
    codes = _codes(np.asarray(x, dtype=float), Q)
    iu, ju = np.triu_indices(codes.shape[0], 1)
    if iu.size == 0:
        return np.zeros(0)
    return _mi_from_counts(_pair_counts(codes[iu], codes[ju], Q))


# -- bias calibration -------------------------------------------------------

def isotonic_increasing(y: Sequence[float], w: Sequence[float] | None = None) -> np.ndarray:
    """Weighted least-squares non-decreasing fit (pool adjacent violators)."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    blocks: list[list[float]] = []  # [mean, weight, length]
    for yi, wi in zip(y, w):
        blocks.append([yi, wi, 1])
        while len(blocks) > 1 and blocks[-2][0] > blocks[-1][0]:
            m2, w2, n2 = blocks.pop()
            m1, w1, n1 = blocks.pop()
            blocks.append([(m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2, n1 + n2])
    return np.concatenate([np.full(n, m) for m, _, n in blocks])


@dataclass(frozen=True)
class BiasCalibration:
    """Ensemble-mean raw MI (nats) of Gaussian pairs along a correlation grid."""

    spec: BinningSpec
    rho_grid: tuple[float, ...]
    raw_mean: tuple[float, ...]
    replicates: int
    seed: int
    raw_sd: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        g = np.asarray(self.rho_grid)
        m = np.asarray(self.raw_mean)
        if g.size < 2 or g.size != m.size:
            raise ValidationError("calibration grid and means must have equal length >= 2")
        if np.any(np.diff(g) <= 0) or g[0] < 0 or g[-1] >= 1:
            raise ValidationError("calibration grid must increase inside [0, 1)")
        if np.any(np.diff(m) <= 0):
            raise ValidationError("calibration means must be strictly increasing")

    @property
    def key(self) -> str:
        return calibration_key(self.spec, self.rho_grid, self.replicates, self.seed)

    def invert(self, raw_nats) -> tuple[np.ndarray, np.ndarray]:
        """Piecewise-linear inverse raw -> rho*, clamped to the grid; second item flags top clamps."""
        raw = np.asarray(raw_nats, dtype=float)
        rho = np.interp(raw, self.raw_mean, self.rho_grid)
        return rho, raw > self.raw_mean[-1]

    def correct(self, raw_nats, base: str = "nats", mode: str = "gaussian"):
        """Corrected MI for raw estimates (nats in); returns (values in ``base``, top-clamp flags)."""
        raw = np.asarray(raw_nats, dtype=float)
        if mode == "gaussian":
            rho, clamped = self.invert(raw)
            return gaussian_mi_value(rho, base), clamped
        if mode == "subtract":
            return nats_to(raw - self.raw_mean[0], base), np.zeros(raw.shape, dtype=bool)
        raise ValidationError(f"correction mode must be one of {CORRECTION_MODES}, got {mode!r}")

    def to_dict(self) -> dict:
        return {"Q": self.spec.Q, "T": self.spec.T, "rho_grid": list(self.rho_grid),
                "raw_mean_nats": list(self.raw_mean), "raw_sd_nats": list(self.raw_sd),
                "replicates": self.replicates, "seed": self.seed}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "BiasCalibration":
        return cls(BinningSpec(int(d["Q"]), int(d["T"])), tuple(d["rho_grid"]),
                   tuple(d["raw_mean_nats"]), int(d["replicates"]), int(d["seed"]),
                   tuple(d.get("raw_sd_nats", ())))

    @classmethod
    def load(cls, path: str | Path) -> "BiasCalibration":
        return cls.from_dict(json.loads(Path(path).read_text()))


def calibration_key(spec: BinningSpec, grid, replicates: int, seed: int) -> str:
    g = hashlib.sha256(json.dumps([float(r) for r in grid]).encode()).hexdigest()[:10]
    return f"calib_T{spec.T}_Q{spec.Q}_seed{seed}_R{replicates}_{g}"


def _calibration_replicate(args) -> np.ndarray:
    T, Q, grid, seed, r = args
    rng = substream(seed, r)
    z = rng.standard_normal((2, T))
    grid = np.asarray(grid)
    # common random numbers across the grid keep the mean curve smooth
    y = grid[:, None] * z[0] + np.sqrt(1.0 - grid[:, None] ** 2) * z[1]
    cx = np.broadcast_to(_codes(z[:1], Q), y.shape)
    return _mi_from_counts(_pair_counts(cx, _codes(y, Q), Q))


def build_bias_calibration(spec: BinningSpec, grid: Sequence[float] = DEFAULT_GRID,
                           replicates: int = DEFAULT_REPLICATES, seed: int = 0,
                           jobs: int = 1) -> BiasCalibration:
    grid = tuple(float(g) for g in grid)
    g = np.asarray(grid)
    if g.size < 2 or np.any(np.diff(g) <= 0) or g[0] < 0 or g[-1] > 0.99:
        raise ValidationError("calibration grid must be increasing inside [0, 0.99]")
    if replicates < 100:
        raise ValidationError(f"calibration needs >= 100 replicates, got {replicates}")
    tasks = [(spec.T, spec.Q, grid, seed, r) for r in range(replicates)]
    raw = np.array(pmap(_calibration_replicate, tasks, jobs))
    mean = raw.mean(axis=0)
    sd = raw.std(axis=0, ddof=1)
    mono = isotonic_increasing(mean)
    # PAV leaves flat runs; a negligible tilt makes the curve invertible
    flat = np.diff(mono) <= 0
    if flat.any():
        eps = 1e-12 * max(1.0, float(mono[-1]))
        mono = mono + eps * np.arange(mono.size)
    return BiasCalibration(spec, grid, tuple(mono.tolist()), replicates, seed, tuple(sd.tolist()))


def load_or_build_calibration(spec: BinningSpec, cache_dir: str | Path | None = None,
                              grid: Sequence[float] = DEFAULT_GRID,
                              replicates: int = DEFAULT_REPLICATES, seed: int = 0,
                              jobs: int = 1) -> BiasCalibration:
    """Calibration cached on disk as JSON, keyed by (T, Q, seed, replicates, grid)."""
    if cache_dir is None:
        return _cached_in_memory(spec, tuple(grid), replicates, seed, jobs)
    path = Path(cache_dir) / (calibration_key(spec, grid, replicates, seed) + ".json")
    if path.exists():
        calib = BiasCalibration.load(path)
        if calib.spec == spec and calib.replicates == replicates and calib.seed == seed:
            return calib
    calib = _cached_in_memory(spec, tuple(grid), replicates, seed, jobs)
    path.parent.mkdir(parents=True, exist_ok=True)
    calib.save(path)
    return calib


@functools.lru_cache(maxsize=16)
def _cached_in_memory(spec, grid, replicates, seed, jobs):
    return build_bias_calibration(spec, grid, replicates, seed, jobs)


def _check_calib(spec: BinningSpec, calib: BiasCalibration) -> None:
    if calib.spec != spec:
        raise ValidationError(f"calibration built for {calib.spec}, estimator uses {spec}")


def mi_corrected(x, y, spec: BinningSpec, calib: BiasCalibration, base: str = "nats",
                 mode: str = "gaussian") -> float:
    _check_calib(spec, calib)
    raw = mi_binned_raw(x, y, spec, "nats")
    value, _ = calib.correct(raw, base, mode)
    return float(value)


def mi_matrix(panel: ReturnPanel, spec: BinningSpec | None = None,
              calib: BiasCalibration | None = None, base: str = "nats",
              mode: str = "gaussian") -> DependenceMatrix:
    """All-pairs MI. Without a calibration the plug-in (raw) estimates are returned."""
    check_base(base)
    if spec is None:
        spec = calib.spec if calib is not None else BinningSpec(DEFAULT_Q, panel.T)
    if spec.T != panel.T:
        raise ValidationError(f"binning spec T = {spec.T} but panel has T = {panel.T}")
    flat = np.ptp(panel.returns, axis=1) == 0
    if flat.any():
        raise DataError(f"constant series: {', '.join(panel.tickers[i] for i in np.flatnonzero(flat))}")
    raw = raw_mi_pairs(panel.returns, spec.Q)
    n = panel.N
    iu = np.triu_indices(n, 1)
    meta = {"Q": spec.Q, "T": spec.T, "diagonal": "excluded"}
    raw_m = np.zeros((n, n))
    raw_m[iu] = raw
    raw_m = raw_m + raw_m.T
    meta["raw_nats"] = raw_m
    if calib is None:
        vals = nats_to(raw, base)
        clamped = np.zeros(raw.shape, dtype=bool)
        meta["correction"] = "none"
    else:
        _check_calib(spec, calib)
        vals, clamped = calib.correct(raw, base, mode)
        meta["correction"] = mode
        meta["calibration"] = calib.key
    out = np.zeros((n, n))
    out[iu] = vals
    out = out + out.T
    cl = np.zeros((n, n), dtype=bool)
    cl[iu] = clamped
    meta["clamped"] = cl | cl.T
    meta["n_clamped"] = int(clamped.sum())
    return DependenceMatrix("mi", out, panel.tickers, base, meta)


def extranormal_matrix(mi: DependenceMatrix, ig: DependenceMatrix) -> DependenceMatrix:
    """I_E = I - I_G entrywise; negative noise is kept."""
    if mi.kind != "mi" or ig.kind != "gaussian_mi":
        raise ValidationError(f"need (mi, gaussian_mi) matrices, got ({mi.kind}, {ig.kind})")
    if mi.tickers != ig.tickers:
        raise ValidationError("ticker labels differ between MI and Gaussian MI matrices")
    if mi.base != ig.base:
        raise ValidationError(f"log bases differ: {mi.base} vs {ig.base}")
    ie = mi.values - ig.values
    np.fill_diagonal(ie, 0.0)
    return DependenceMatrix("extranormal", ie, mi.tickers, mi.base, {"diagonal": "excluded"})
