"""Differentially private stochastic k-PCA via deflation.

Top-k private PCA built from repeated private top-eigenvector estimation: a
projector is deflated one recovered direction at a time, and each direction
comes from a pluggable private streaming oracle (a private Oja iteration with
data-adaptive gradient range estimation, or a simpler clipped-gradient Oja).
Baseline algorithms, synthetic spiked-covariance generators, utility metrics,
and a seeded benchmark CLI round out the toolkit.
"""

from .baselines import ClipThresholds, dp_gauss_1, dp_gauss_2, dp_power_method
from .bench_cli import ExperimentConfig, ResultRecord, parse_config, preset, run_experiment
from .datagen import (
    ModelParams,
    SampleBatch,
    SampleStream,
    gaussian_outer,
    heavy_tail_mixture,
    load_samples,
    dump_samples,
    spiked_rank1,
    spiked_rankk,
)
from .dp_pca import (
    OracleConfig,
    dp_ojas,
    exact_epca_oracle,
    k_dp_pca,
    modified_dp_pca,
    priv_mean,
    priv_mean_sensitivity,
    priv_range,
)
from .dp_primitives import (
    GeometricBins,
    HistogramResult,
    PrivacyBudget,
    UniformBins,
    advanced_composition_split,
    gaussian_mechanism,
    stable_histogram,
    symmetric_gaussian_matrix,
)
from .errors import (
    DeflationError,
    DegenerateDirection,
    DpPcaError,
    GapFailure,
    InsufficientData,
    InvalidInput,
    OutOfRange,
    RangeFailure,
    RankError,
    UsageError,
)
from .linalg import EigenPairs, Projector, deflate, orthonormalize, principal_sine, project_unit, sym_eig
from .metrics import (
    LemmaWitness,
    UtilityReport,
    check_eigengap_perturbation,
    check_reduction_lemma,
    check_sin_to_epca,
    check_trace_vs_frobenius,
    subspace_frob_sq,
    zeta_utility,
)
from .oja import LrSchedule, initial_direction, lr, run_oja
from .rng import stable_seed, substream

__version__ = "0.1.0"
