"""Certified bounds for the top Lyapunov exponent of i.i.d. random matrix products."""

from .bounds import (
    BoundReport,
    alpha_eval,
    alpha_optimize,
    alpha_tilde_eval,
    alpha_tilde_optimize,
    beta_eval,
    beta_optimize,
    beta_tilde_eval,
    euclidean_upper,
    gamma_orthant_eval,
    transpose_family,
)
from .core import (
    EnsembleTooLarge,
    FamilyError,
    MatrixFamily,
    McEstimate,
    expect_over_products,
    monte_carlo_lambda,
    validate_family,
)
from .lifting import gamma_sdp_upper, lift
from .optim import OptimizerSettings
from .structure import (
    PartitionStructure,
    analyze,
    block_triangularize,
    check_condition_b,
    is_reducible,
    positive_product_or_partition,
)

__version__ = "0.1.0"
