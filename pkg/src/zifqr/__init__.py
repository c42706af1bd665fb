"""zifqr: zero-inflation and measurement-error correction for replicated
functional covariates, with scalar-on-function joint quantile regression,
bootstrap inference, and a Monte Carlo benchmarking harness."""

from .core import (
    InvalidArgumentError,
    DegenerateInputError,
    IllConditionedBasisError,
    RankDeficientError,
    NumericalFailureError,
    DataFormatError,
    ZifqrError,
    TimeGrid,
    ReplicatedFunctionalDataset,
    ScalarCovariates,
    Segmentation,
    RunConfig,
    build_grid,
    validate_dataset,
)

__version__ = "0.1.0"
