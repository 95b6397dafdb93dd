"""dpoad: iterative differentially private release for outsourced anomaly detection.

An owner releases privatized histogram data to an untrusted analyst; the
analyst learns the count distribution, scores anomalies with a KS test, and
feeds a sampled sensitivity back into the owner's calibration. Laplace and
uniform-sampled-sensitivity baselines plus a benchmark harness live in
`dpoad.bench`.
"""
from ._kernels import IMPLEMENTATION as KERNEL_IMPLEMENTATION
from .core import (
    CountMatrix,
    DiscretePdf,
    Histogram,
    Phase,
    PrivacyParams,
    build_histogram,
    kolmogorov_distance,
    tv_distance,
)
from .detector import ks_statistic, precision_recall, utility_ratio_bound
from .mechanisms import laplace_mechanism, sample_laplace
from .protocol import SessionConfig, run_session
from .sampler import (
    lambert_w_minus1,
    rho_star_learning,
    rho_star_prediction,
    sample_sensitivity,
    sample_sensitivity_uniform,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_IMPLEMENTATION",
    "CountMatrix",
    "DiscretePdf",
    "Histogram",
    "Phase",
    "PrivacyParams",
    "build_histogram",
    "kolmogorov_distance",
    "tv_distance",
    "ks_statistic",
    "precision_recall",
    "utility_ratio_bound",
    "laplace_mechanism",
    "sample_laplace",
    "SessionConfig",
    "run_session",
    "lambert_w_minus1",
    "rho_star_learning",
    "rho_star_prediction",
    "sample_sensitivity",
    "sample_sensitivity_uniform",
    "__version__",
]
