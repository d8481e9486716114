"""Nonlinearity assessment for networks built from multivariate return series."""
from .dependence import DependenceMatrix, gaussian_mi, normalize_marginals, pearson_matrix, spearman_matrix
from .errors import DataError, NumericError, StocknetError, ValidationError
from .filtering import UnweightedGraph, mst, pmfg, wta
from .metrics import graph_metrics
from .mi import BiasCalibration, BinningSpec, build_bias_calibration, mi_matrix
from .nonlin import density_sweep, graph_metric_test, localize_on_edges, localize_total, two_sided_p
from .panel import PricePanel, ReturnPanel
from .surrogates import SurrogateSpec

__version__ = "0.1.0"
