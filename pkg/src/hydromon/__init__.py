"""Condition-monitoring toolkit for multi-signal industrial time series.

Pipeline: ingest/normalize -> 2D embedding -> clustering -> practitioner
labeling -> one autoencoder per state -> reconstruction-error scoring.
"""

__version__ = "0.1.0"

from hydromon.ingest import (
    FeatureMatrix,
    NormalizationParams,
    SplitSpec,
    SynthConfig,
)

__all__ = [
    "FeatureMatrix",
    "NormalizationParams",
    "SplitSpec",
    "SynthConfig",
    "__version__",
]
