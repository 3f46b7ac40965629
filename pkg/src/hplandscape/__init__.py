"""Time-varying hyperparameter landscapes: sampling, phase-wise data
collection, surface models and landscape analysis."""
from hplandscape.analysis import (folding_statistic, folding_test, find_local_optima, ice_curves,
                                  modality_summary)
from hplandscape.collect import (PhasePlan, SnapshotStore, SurrogateSpec, Bump, run_phase,
                                 evaluate_final, run_pipeline, select_best, surrogate_trainable)
from hplandscape.dataset import (LandscapeDataset, aggregate, iqm, normalize, quantile, read_csv,
                                 write_csv)
from hplandscape.models import (cross_validate, fit_igpr, fit_ilm, fit_surface_triple, grid_eval,
                                lml)
from hplandscape.space import (HyperparameterDef, SearchSpace, build_space, sobol_sample,
                               unit_distance)

__version__ = "0.1.0"

__all__ = [
    "folding_statistic",
    "folding_test",
    "find_local_optima",
    "ice_curves",
    "modality_summary",
    "PhasePlan",
    "SnapshotStore",
    "SurrogateSpec",
    "Bump",
    "run_phase",
    "evaluate_final",
    "run_pipeline",
    "select_best",
    "surrogate_trainable",
    "LandscapeDataset",
    "aggregate",
    "iqm",
    "normalize",
    "quantile",
    "read_csv",
    "write_csv",
    "cross_validate",
    "fit_igpr",
    "fit_ilm",
    "fit_surface_triple",
    "grid_eval",
    "lml",
    "HyperparameterDef",
    "SearchSpace",
    "build_space",
    "sobol_sample",
    "unit_distance",
]
