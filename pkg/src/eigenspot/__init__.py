"""EigenSpot: spatiotemporal hotspot detection from dominant singular vectors."""

from .detector import HotspotReport, Method, detect, detect_baseline_method, detect_eigenspot
from .errors import EigenSpotError
from .evaluation import EvaluationReport, SweepSpec, accuracy, alpha_sweep, run_study
from .linalg import CountMatrix, SingularPair, rank1_svd, svd_oracle, vector_angle
from .simulator import SimulatedDataset, SimulationConfig, generate, sample_poisson, synthesize_baseline
from .stats import ControlChartResult, Tail, control_chart, normal_p_value, standardize

__all__ = [
    "ControlChartResult",
    "CountMatrix",
    "EigenSpotError",
    "EvaluationReport",
    "HotspotReport",
    "Method",
    "SimulatedDataset",
    "SimulationConfig",
    "SingularPair",
    "SweepSpec",
    "Tail",
    "accuracy",
    "alpha_sweep",
    "control_chart",
    "detect",
    "detect_baseline_method",
    "detect_eigenspot",
    "generate",
    "normal_p_value",
    "rank1_svd",
    "run_study",
    "sample_poisson",
    "standardize",
    "svd_oracle",
    "synthesize_baseline",
    "vector_angle",
]

__version__ = "0.1.0"
