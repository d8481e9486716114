"""Multivariate Fourier-transform (phase-randomized) surrogates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import DataError, ValidationError
from .panel import ReturnPanel
from .parallel import substream

DEFAULT_COUNT = 999


@dataclass(frozen=True)
class SurrogateSpec:
    count: int = DEFAULT_COUNT
    seed: int = 0
    mode: str = "multivariate-ft"

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ValidationError(f"surrogate count must be a positive integer, got {self.count}")
        if self.mode != "multivariate-ft":
            raise ValidationError(f"unsupported surrogate mode {self.mode!r}")


def shared_phases(T: int, rng: np.random.Generator) -> np.ndarray:
    """One phase offset per rfft frequency: 0 at DC, {0, pi} at Nyquist for even T."""
    nfreq = T // 2 + 1
    phases = rng.uniform(0.0, 2.0 * np.pi, nfreq)
    phases[0] = 0.0
    if T % 2 == 0:
        phases[-1] = np.pi if phases[-1] >= np.pi else 0.0
    return phases


def ft_surrogate(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Rotate every series' Fourier coefficient at frequency k by the same random phase."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DataError("expected an (N, T) array")
    T = x.shape[1]
    if T < 4:
        raise DataError(f"FT surrogates need T >= 4, got {T}")
    if not np.all(np.isfinite(x)):
        raise DataError("FT surrogates need finite input")
    coef = np.fft.rfft(x, axis=1)
    coef *= np.exp(1j * shared_phases(T, rng))[None, :]
    return np.fft.irfft(coef, n=T, axis=1)


def ft_surrogate_panel(panel: ReturnPanel, seed: int | np.random.Generator) -> ReturnPanel:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return ReturnPanel(panel.tickers, panel.dates, ft_surrogate(panel.returns, rng))


def surrogate_member(panel: ReturnPanel, spec: SurrogateSpec, k: int) -> ReturnPanel:
    """Member k of the ensemble, drawn from substream (seed, k)."""
    if not 0 <= k < spec.count:
        raise ValidationError(f"surrogate index {k} outside 0..{spec.count - 1}")
    return ft_surrogate_panel(panel, substream(spec.seed, k))


def surrogate_ensemble(panel: ReturnPanel, spec: SurrogateSpec) -> Iterator[ReturnPanel]:
    """Lazily yields the N_S surrogate panels in index order."""
    for k in range(spec.count):
        yield surrogate_member(panel, spec, k)
