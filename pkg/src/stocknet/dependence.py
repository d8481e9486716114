"""Linear and rank dependence, marginal normalization and the rho -> distance / Gaussian MI maps."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .errors import DataError, NumericError, ValidationError
from .panel import ReturnPanel

KINDS = ("pearson", "spearman", "distance", "mi", "gaussian_mi", "extranormal")
CORRELATION_KINDS = ("pearson", "spearman")
INFO_KINDS = ("mi", "gaussian_mi", "extranormal")
LOG_BASES = {"nats": 1.0, "bits": np.log(2.0)}


def check_base(base: str) -> str:
    if base not in LOG_BASES:
        raise ValidationError(f"log base must be one of {sorted(LOG_BASES)}, got {base!r}")
    return base


def nats_to(values, base: str):
    return np.asarray(values, dtype=float) / LOG_BASES[check_base(base)]


@dataclass(frozen=True)
class DependenceMatrix:
    """Symmetric N x N matrix tagged with its kind.

    For information kinds ``base`` records the log base and the diagonal is
    meaningless (stored as 0, excluded from every downstream sum).
    """

    kind: str
    values: np.ndarray
    tickers: tuple[str, ...]
    base: str | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown matrix kind {self.kind!r}")
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] != len(self.tickers):
            raise DataError(f"{self.kind} matrix shape {v.shape} does not match {len(self.tickers)} tickers")
        if not np.array_equal(v, v.T):
            raise DataError(f"{self.kind} matrix is not symmetric")
        if self.kind in INFO_KINDS:
            check_base(self.base or "")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "tickers", tuple(self.tickers))

    @property
    def n(self) -> int:
        return len(self.tickers)

    def offdiag(self) -> np.ndarray:
        """Upper-triangle entries in (i, j) lexicographic order."""
        return self.values[np.triu_indices(self.n, 1)]

    def to_csv(self, path: str | Path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["", *self.tickers])
            for t, row in zip(self.tickers, self.values):
                w.writerow([t, *(format(x, ".17g") for x in row)])

    def to_json(self, path: str | Path | None = None, **extra) -> str:
        doc = {"kind": self.kind, "base": self.base, "tickers": list(self.tickers),
               "values": self.values.tolist(), **extra}
        meta = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.meta.items()}
        if meta:
            doc["meta"] = meta
        text = json.dumps(doc, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, text: str) -> "DependenceMatrix":
        doc = json.loads(text)
        return cls(doc["kind"], np.array(doc["values"], dtype=float), tuple(doc["tickers"]), doc["base"])


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def _require_variance(x: np.ndarray, tickers: Sequence[str]) -> None:
    flat = np.ptp(x, axis=1) == 0
    if flat.any():
        bad = [tickers[i] for i in np.flatnonzero(flat)]
        raise DataError(f"zero-variance series: {', '.join(bad)}")


def pearson_matrix(panel: ReturnPanel) -> DependenceMatrix:
    x = panel.returns
    if panel.T < 3:
        raise DataError("correlation needs at least 3 observations")
    _require_variance(x, panel.tickers)
    c = np.clip(_symmetrize(np.corrcoef(x)), -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return DependenceMatrix("pearson", c, panel.tickers)


def spearman_matrix(panel: ReturnPanel) -> DependenceMatrix:
    """Pearson correlation of midranks."""
    if panel.T < 3:
        raise DataError("correlation needs at least 3 observations")
    _require_variance(panel.returns, panel.tickers)
    ranks = rankdata(panel.returns, method="average", axis=1)
    c = np.clip(_symmetrize(np.corrcoef(ranks)), -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return DependenceMatrix("spearman", c, panel.tickers)


class NormalizedPanel(ReturnPanel):
    """Return panel whose rows are Gaussian scores of the source ranks."""


def gaussian_grid(T: int) -> np.ndarray:
    return ndtri((np.arange(1, T + 1) - 0.5) / T)


def normal_scores(x: np.ndarray) -> np.ndarray:
    """Rank k (1-based, ties by time index) -> Phi^-1((k - 0.5)/T), row-wise."""
    x = np.atleast_2d(x)
    order = np.argsort(x, axis=1, kind="stable")
    out = np.empty_like(x, dtype=float)
    grid = gaussian_grid(x.shape[1])
    np.put_along_axis(out, order, np.broadcast_to(grid, x.shape), axis=1)
    return out


def normalize_marginals(panel: ReturnPanel) -> NormalizedPanel:
    _require_variance(panel.returns, panel.tickers)
    return NormalizedPanel(panel.tickers, panel.dates, normal_scores(panel.returns))


def correlation_to_distance(m: DependenceMatrix) -> DependenceMatrix:
    if m.kind not in CORRELATION_KINDS:
        raise ValidationError(f"distance needs a correlation matrix, got {m.kind}")
    d = np.sqrt(np.clip(2.0 * (1.0 - m.values), 0.0, 4.0))
    np.fill_diagonal(d, 0.0)
    return DependenceMatrix("distance", d, m.tickers)


def gaussian_mi_value(rho, base: str = "nats"):
    """-1/2 log(1 - rho^2) in the requested base."""
    rho = np.asarray(rho, dtype=float)
    return nats_to(-0.5 * np.log1p(-rho * rho), base)


def gaussian_mi(m: DependenceMatrix, base: str = "nats") -> DependenceMatrix:
    if m.kind not in CORRELATION_KINDS:
        raise ValidationError(f"Gaussian MI needs a correlation matrix, got {m.kind}")
    r = m.values.copy()
    np.fill_diagonal(r, 0.0)
    if np.any(np.abs(r) >= 1.0):
        i, j = np.argwhere(np.abs(r) >= 1.0)[0]
        raise NumericError(f"|rho| = 1 between {m.tickers[i]} and {m.tickers[j]}: Gaussian MI diverges")
    ig = gaussian_mi_value(r, base)
    np.fill_diagonal(ig, 0.0)
    return DependenceMatrix("gaussian_mi", ig, m.tickers, base, {"diagonal": "excluded"})
