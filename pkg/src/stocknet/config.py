"""Pipeline configuration: INI file plus command-line overrides."""
from __future__ import annotations

import configparser
import dataclasses
import datetime as dt
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .dependence import LOG_BASES
from .errors import ValidationError
from .filtering import FILTERS
from .metrics import GLOBAL_METRICS, TEST_METRICS
from .mi import CORRECTION_MODES, DEFAULT_Q, DEFAULT_REPLICATES
from .surrogates import DEFAULT_COUNT


def sample_manifest() -> str:
    return str(resources.files("stocknet") / "data" / "sample" / "manifest.txt")


def default_config_path() -> str:
    return str(resources.files("stocknet") / "data" / "default.ini")


def _date(text) -> dt.date | None:
    if text is None or isinstance(text, dt.date):
        return text
    text = str(text).strip()
    if not text or text.lower() == "none":
        return None
    try:
        return dt.date.fromisoformat(text)
    except ValueError as exc:
        raise ValidationError(f"bad date {text!r}: {exc}") from None


def _list(text) -> tuple[str, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(text)
    return tuple(t.strip() for t in str(text).replace(",", " ").split() if t.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValidationError(f"expected on/off, got {text!r}")


def _period(text) -> tuple[dt.date, dt.date] | None:
    if text is None or isinstance(text, tuple):
        return text
    t = str(text).strip()
    if not t or t.lower() == "none":
        return None
    parts = t.replace("..", " ").replace(",", " ").split()
    if len(parts) != 2:
        raise ValidationError(f"period must be START..END, got {text!r}")
    return _date(parts[0]), _date(parts[1])


@dataclass(frozen=True)
class PipelineConfig:
    manifest: str = field(default_factory=sample_manifest)
    start: dt.date | None = None
    end: dt.date | None = None
    period: tuple[dt.date, dt.date] | None = None
    drop: tuple[str, ...] = ()
    gap_cap: int = 2
    normalize: bool = True
    bins: int = DEFAULT_Q
    log_base: str = "nats"
    correction: str = "gaussian"
    calib_replicates: int = DEFAULT_REPLICATES
    calib_seed: int = 0
    surrogates: int = DEFAULT_COUNT
    seed: int = 0
    filter: str = "pmfg"
    density: float | None = None
    density_from: float = 0.0
    density_to: float = 0.99
    density_step: float = 0.01
    envelope: tuple[float, float] = (0.0, 1.0)
    metrics: tuple[str, ...] = TEST_METRICS
    mask: str = "correlation"
    out: str = "out"
    jobs: int = 1

    # fields that may differ between runs without changing any output byte
    NON_SEMANTIC = ("out", "jobs")

    def validate(self) -> "PipelineConfig":
        if self.bins < 2:
            raise ValidationError(f"bins must be >= 2, got {self.bins}")
        if self.log_base not in LOG_BASES:
            raise ValidationError(f"log base must be one of {tuple(LOG_BASES)}, got {self.log_base!r}")
        if self.correction not in CORRECTION_MODES:
            raise ValidationError(f"correction must be one of {CORRECTION_MODES}, got {self.correction!r}")
        if self.filter not in FILTERS:
            raise ValidationError(f"filter must be one of {FILTERS}, got {self.filter!r}")
        if self.filter == "wta" and self.density is None:
            raise ValidationError("filter wta needs density")
        if self.density is not None and not 0 <= self.density < 1:
            raise ValidationError(f"density must lie in [0, 1), got {self.density}")
        if not (0 <= self.density_from <= self.density_to < 1) or self.density_step <= 0:
            raise ValidationError("density sweep needs 0 <= from <= to < 1 and step > 0")
        lo, hi = self.envelope
        if not 0 <= lo < hi <= 1:
            raise ValidationError(f"envelope quantiles must satisfy 0 <= lo < hi <= 1, got {self.envelope}")
        bad = set(self.metrics) - set(GLOBAL_METRICS)
        if bad or not self.metrics:
            raise ValidationError(f"unknown metrics {sorted(bad)}; choose from {GLOBAL_METRICS}")
        if self.surrogates < 1:
            raise ValidationError(f"surrogate count must be >= 1, got {self.surrogates}")
        if self.calib_replicates < 100:
            raise ValidationError(f"calibration needs >= 100 replicates, got {self.calib_replicates}")
        if self.mask not in ("correlation", "mi"):
            raise ValidationError(f"mask must be correlation or mi, got {self.mask!r}")
        if self.gap_cap < 0:
            raise ValidationError("gap_cap must be >= 0")
        if self.start and self.end and self.end < self.start:
            raise ValidationError(f"end {self.end} precedes start {self.start}")
        if self.period and self.period[1] < self.period[0]:
            raise ValidationError(f"period end {self.period[1]} precedes start {self.period[0]}")
        if self.jobs < 1:
            raise ValidationError("jobs must be >= 1")
        return self

    @property
    def date_range(self) -> tuple[dt.date, dt.date] | None:
        if self.start is None and self.end is None:
            return None
        return (self.start or dt.date.min, self.end or dt.date.max)

    def densities(self) -> tuple[float, ...]:
        n = int(math.floor((self.density_to - self.density_from) / self.density_step + 1e-9)) + 1
        return tuple(round(self.density_from + i * self.density_step, 10) for i in range(n))

    def to_dict(self, semantic_only: bool = False) -> dict:
        d = {}
        for f in dataclasses.fields(self):
            if semantic_only and f.name in self.NON_SEMANTIC:
                continue
            v = getattr(self, f.name)
            if isinstance(v, dt.date):
                v = v.isoformat()
            elif isinstance(v, tuple):
                v = [x.isoformat() if isinstance(x, dt.date) else x for x in v]
            d[f.name] = v
        return d

    def config_hash(self) -> str:
        # the manifest is identified by name so relocating the input tree keeps the hash
        d = self.to_dict(semantic_only=True)
        d["manifest"] = Path(d["manifest"]).name
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


_CONVERT = {
    "start": _date, "end": _date, "period": _period, "drop": _list, "metrics": _list,
    "normalize": _bool, "bins": int, "gap_cap": int, "calib_replicates": int, "calib_seed": int,
    "surrogates": int, "seed": int, "jobs": int,
    "density": lambda s: None if str(s).strip().lower() in ("", "none") else float(s),
    "density_from": float, "density_to": float, "density_step": float,
    "envelope": lambda s: tuple(float(x) for x in _list(s)),
}
_FIELDS = {f.name for f in dataclasses.fields(PipelineConfig)}


def coerce(key: str, value):
    key = key.replace("-", "_")
    if key not in _FIELDS:
        raise ValidationError(f"unknown config key {key!r}")
    try:
        return _CONVERT.get(key, str)(value)
    except ValidationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"config key {key}: {exc}") from None


def read_ini(path: str | Path) -> dict:
    """Flatten every section of a key = value file into one dict of typed values."""
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file {p} not found")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(p)
    except configparser.Error as exc:
        raise ValidationError(f"{p}: {exc}") from None
    out = {}
    for section in cp.sections():
        for k, v in cp.items(section):
            out[k.replace("-", "_")] = coerce(k, v)
    if "manifest" in out and not Path(out["manifest"]).is_absolute():
        out["manifest"] = str((p.parent / out["manifest"]).resolve())
    return out


def load_config(path: str | Path | None = None, **overrides) -> PipelineConfig:
    """Defaults <- INI file <- overrides (None values ignored).

    Without a file and without a manifest override the bundled default.ini
    (which points at the sample panel) is used.
    """
    if path is None and overrides.get("manifest") is None:
        path = default_config_path()
    values = read_ini(path) if path is not None else {}
    for k, v in overrides.items():
        if v is not None:
            values[k.replace("-", "_")] = coerce(k, v)
    return PipelineConfig(**values).validate()
