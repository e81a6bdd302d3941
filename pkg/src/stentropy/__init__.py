"""Spatio-temporal entropy of location traces and GAM-based demographic inference."""
from .config import RunConfig
from .entropy import (
    EntropySequence,
    TimeSliceSpec,
    build_slice_spec,
    compute_occupancy,
    compute_sequences,
    entropy_sequence,
    slice_entropy,
)
from .errors import ConvergenceError, DataError, FormatError, NumericalError, StentropyError
from .features import FeatureTable, assemble_features, haversine, max_distance_in_slice
from .gam import fit_multiclass, predict_proba
from .grid import CellIndex, GridSpec, build_grid, locate
from .ingest import Dataset, DemographicVariable, Trace, load_dataset, parse_demographics, parse_traces
from .pipeline import EvaluationReport, evaluate, split_users

__version__ = "0.1.0"
