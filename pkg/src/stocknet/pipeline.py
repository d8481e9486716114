"""End-to-end analysis: prices -> dependence matrices -> graphs -> surrogate tests.

Every stage writes into one output directory. Each CSV starts with a
``# config_hash=...`` line and each JSON carries a ``config_hash`` key, so a
file can always be traced back to the configuration that produced it.
"""
from __future__ import annotations

import contextlib
import csv
import hashlib
import json
import platform
from functools import cached_property
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .dependence import (DependenceMatrix, gaussian_mi, gaussian_mi_value, normalize_marginals,
                         pearson_matrix, spearman_matrix)
from .errors import DataError, StocknetError
from .filtering import UnweightedGraph, apply_filter, pmfg
from .metrics import GLOBAL_METRICS, graph_metrics
from .mi import BinningSpec, build_bias_calibration, extranormal_matrix, mi_matrix
from .nonlin import (GraphPipeline, LocalizationReport, SweepResult, TestReport, density_sweep,
                     graph_metric_test, localize_on_edges, localize_total)
from .panel import (PricePanel, ReturnPanel, drop_series, interpolate_missing, load_manifest_panel,
                    log_returns, read_manifest, save_returns, slice_period)
from .surrogates import SurrogateSpec, surrogate_member

STAGES = ("ingest", "deps", "localize", "test", "sweep")
INCOMPLETE = "INCOMPLETE"


class StageError(StocknetError):
    """A pipeline failure tagged with the stage where it happened."""

    def __init__(self, stage: str, cause: StocknetError):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except StocknetError as exc:
        raise StageError(name, exc) from exc


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("numpy", "scipy", "networkx"):
        out[pkg] = metadata.version(pkg)
    try:
        out["stocknet"] = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        out["stocknet"] = "unknown"
    return out


class Pipeline:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg.validate()
        self.out = Path(cfg.out)
        self.hash = cfg.config_hash()
        self.written: list[str] = []
        self.stages_done: list[str] = []
        self.notes: dict = {}

    # -- bookkeeping ----------------------------------------------------------

    @property
    def comment(self) -> str:
        return f"config_hash={self.hash}"

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        if name not in self.written:
            self.written.append(name)
        return self.out / name

    def write_json(self, name: str, doc: dict) -> None:
        doc = {**doc, "config_hash": self.hash}
        self.path(name).write_text(json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n")

    def write_rows(self, name: str, header: list[str], rows) -> None:
        with open(self.path(name), "w", newline="") as fh:
            fh.write(f"# {self.comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    # -- data ----------------------------------------------------------------

    @cached_property
    def prices(self) -> PricePanel:
        with stage("ingest"):
            raw = load_manifest_panel(self.cfg.manifest, self.cfg.date_range)
            self.notes["interpolated_cells"] = int(raw.missing.sum())
            listed = [p.stem for p in read_manifest(self.cfg.manifest)]
            self.notes["excluded"] = [t for t in listed if t not in raw.tickers]
            return interpolate_missing(raw, self.cfg.gap_cap)

    @cached_property
    def returns(self) -> ReturnPanel:
        with stage("ingest"):
            r = log_returns(self.prices)
            if self.cfg.period is not None:
                r = slice_period(r, *self.cfg.period)
            if self.cfg.drop:
                r = drop_series(r, self.cfg.drop)
            if r.N < 3:
                raise DataError(f"need at least 3 series, got {r.N}")
            return r

    @cached_property
    def spec(self) -> BinningSpec:
        # validation of the bin bound happens before any estimation
        with stage("ingest"):
            return BinningSpec(self.cfg.bins, self.returns.T)

    @cached_property
    def analysis(self) -> ReturnPanel:
        with stage("deps"):
            return normalize_marginals(self.returns) if self.cfg.normalize else self.returns

    @cached_property
    def calibration(self):
        with stage("deps"):
            return build_bias_calibration(self.spec, replicates=self.cfg.calib_replicates,
                                          seed=self.cfg.calib_seed, jobs=self.cfg.jobs)

    @cached_property
    def matrices(self) -> dict[str, DependenceMatrix]:
        base, mode = self.cfg.log_base, self.cfg.correction
        with stage("deps"):
            spec = self.spec
            m = {"pearson_raw": pearson_matrix(self.returns), "spearman_raw": spearman_matrix(self.returns)}
            m["pearson"] = pearson_matrix(self.analysis)
            m["gaussian_mi"] = gaussian_mi(m["pearson"], base)
            m["mi"] = mi_matrix(self.analysis, spec, self.calibration, base, mode)
            m["extranormal"] = extranormal_matrix(m["mi"], m["gaussian_mi"])
            return m

    @cached_property
    def graph_pipe(self) -> GraphPipeline:
        c = self.cfg
        return GraphPipeline(self.calibration, c.filter, c.density, tuple(c.metrics), c.log_base,
                             c.correction, c.bins)

    @property
    def surrogate_spec(self) -> SurrogateSpec:
        return SurrogateSpec(self.cfg.surrogates, self.cfg.seed)

    # -- stages ----------------------------------------------------------------

    def run_ingest(self) -> None:
        r = self.returns
        self.spec
        with stage("ingest"):
            save_returns(r, self.path("returns.csv"), self.comment)
            self.write_json("ingest.json", {
                "tickers": list(r.tickers), "N": r.N, "T": r.T,
                "first_date": r.dates[0].isoformat(), "last_date": r.dates[-1].isoformat(),
                "excluded_by_range": self.notes.get("excluded", []),
                "interpolated_cells": self.notes.get("interpolated_cells", 0),
                "dropped": list(self.cfg.drop), "bin_bound": self.spec.bound})
        self.stages_done.append("ingest")

    def _scatter(self, name: str, rho: DependenceMatrix, mi: DependenceMatrix) -> None:
        iu, ju = np.triu_indices(rho.n, 1)
        r, i = rho.values[iu, ju], mi.values[iu, ju]
        ig = gaussian_mi_value(r, self.cfg.log_base)
        self.write_rows(name, ["ticker_i", "ticker_j", "rho", "mi", "gaussian_mi", "extranormal"],
                        ([rho.tickers[a], rho.tickers[b], format(x, ".17g"), format(y, ".17g"),
                          format(g, ".17g"), format(y - g, ".17g")]
                         for a, b, x, y, g in zip(iu, ju, r, i, ig)))

    def run_deps(self) -> None:
        m = self.matrices
        base, mode = self.cfg.log_base, self.cfg.correction
        with stage("deps"):
            for name, mat in m.items():
                mat.to_csv(self.path(f"matrix_{name}.csv"), self.comment)
            mi = m["mi"]
            self.write_json("mi_meta.json", {"base": base, "correction": mode,
                                             "n_clamped": mi.meta["n_clamped"],
                                             "clamped_pairs": [[mi.tickers[a], mi.tickers[b]] for a, b in
                                                               zip(*np.nonzero(np.triu(mi.meta["clamped"], 1)))],
                                             "calibration": mi.meta.get("calibration")})
            cal = self.calibration.to_dict()
            cal["key"] = self.calibration.key
            self.write_json("calibration.json", cal)
            # scatter data: MI is rank based, so raw and normalized panels share it
            self._scatter("scatter_raw.csv", m["pearson_raw"], mi)
            self._scatter("scatter_normalized.csv", pearson_matrix(normalize_marginals(self.returns)), mi)
            sur = surrogate_member(self.analysis, self.surrogate_spec, 0)
            self._scatter("scatter_surrogate.csv", pearson_matrix(sur),
                          mi_matrix(sur, self.spec, self.calibration, base, mode))
            grid = np.round(np.arange(-0.99, 0.9901, 0.01), 2)
            self.write_rows("gaussian_mi_curve.csv", ["rho", "gaussian_mi"],
                            ([format(x, ".2f"), format(y, ".17g")]
                             for x, y in zip(grid, gaussian_mi_value(grid, base))))
        self.stages_done.append("deps")

    def mask_graph(self) -> UnweightedGraph:
        m = self.matrices
        return pmfg(m["pearson"] if self.cfg.mask == "correlation" else m["mi"])

    def localization(self) -> tuple[LocalizationReport, LocalizationReport]:
        ie = self.matrices["extranormal"]
        with stage("localize"):
            total = localize_total(ie)
            masked = localize_on_edges(ie, self.mask_graph(), f"{self.cfg.mask} PMFG edges")
        return total, masked

    def run_localize(self) -> None:
        total, masked = self.localization()
        with stage("localize"):
            total.to_csv(self.path("localization_total.csv"), self.comment)
            masked.to_csv(self.path("localization_pmfg.csv"), self.comment)
            self.mask_graph().to_edge_csv(self.path(f"edges_pmfg_{self.cfg.mask}.csv"), self.comment)
            g = apply_filter(self.matrices["mi"], self.cfg.filter, self.cfg.density)
            g.to_edge_csv(self.path(f"edges_{self.cfg.filter}_mi.csv"), self.comment)
            graph_metrics(g, GLOBAL_METRICS).to_json(self.path(f"metrics_{self.cfg.filter}_mi.json"),
                                                     config_hash=self.hash)
        self.stages_done.append("localize")

    def surrogate_test(self) -> TestReport:
        pipe = self.graph_pipe
        with stage("test"):
            return graph_metric_test(self.analysis, self.surrogate_spec, pipe, self.cfg.jobs)

    def run_test(self) -> None:
        rep = self.surrogate_test()
        with stage("test"):
            rep.to_json(self.path("test_report.json"), config_hash=self.hash)
            rep.write_histograms(self.path("test_histograms.csv"), header_comment=self.comment)
        self.stages_done.append("test")

    def sweep(self) -> SweepResult:
        metrics = tuple(dict.fromkeys(("degree", *self.cfg.metrics)))
        pipe = GraphPipeline(self.calibration, "wta", 0.0, metrics, self.cfg.log_base,
                             self.cfg.correction, self.cfg.bins)
        with stage("sweep"):
            return density_sweep(self.analysis, self.surrogate_spec, pipe, self.cfg.densities(),
                                 self.cfg.jobs, self.cfg.envelope)

    def run_sweep(self) -> None:
        res = self.sweep()
        with stage("sweep"):
            res.to_csv(self.path("sweep.csv"), self.comment)
        self.stages_done.append("sweep")

    # -- orchestration ------------------------------------------------------------

    def write_manifest(self) -> None:
        files = {}
        for name in sorted(self.written):
            if name == "run_manifest.json":
                continue
            files[name] = hashlib.sha256((self.out / name).read_bytes()).hexdigest()
        self.write_json("run_manifest.json", {
            "config": self.cfg.to_dict(semantic_only=True), "stages": self.stages_done,
            "seeds": {"surrogates": self.cfg.seed, "calibration": self.cfg.calib_seed},
            "versions": _versions(), "outputs": files})

    def execute(self, stages=STAGES) -> None:
        """Run the named stages in pipeline order; on failure leave an INCOMPLETE marker."""
        unknown = set(stages) - set(STAGES)
        if unknown:
            raise ValueError(f"unknown stages {sorted(unknown)}")
        self.out.mkdir(parents=True, exist_ok=True)
        marker = self.out / INCOMPLETE
        marker.write_text("running\n")
        try:
            for s in STAGES:
                if s in stages:
                    getattr(self, f"run_{s}")()
            self.write_manifest()
        except StageError as exc:
            marker.write_text(f"failed at stage {exc.stage}: {exc.cause}\n"
                              f"completed stages: {', '.join(self.stages_done) or 'none'}\n")
            raise
        marker.unlink()


def run(cfg: PipelineConfig, stages=STAGES) -> Pipeline:
    p = Pipeline(cfg)
    p.execute(stages)
    return p
