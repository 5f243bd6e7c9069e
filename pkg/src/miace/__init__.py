"""Multiple instance ACE (MI-ACE) target-signature learning.

Quick tour::

    from miace import generate_site, SynthConfig, train, TrainConfig
    site = generate_site(SynthConfig(seed=1))
    result = train(site.dataset, TrainConfig(initializer="ranked_kmeans"))
"""

from .ace import ConfidenceMap, Signature, ace, ace_batch, score_sweep
from .alarms import Alarm, generate_alarms, score_alarm
from .bench import BenchReport, run_bench
from .clustering import gmm_fit, gmm_posteriors, kmeans, mean_shift
from .data import Bag, Instance, MilDataset, Sweep, load_dataset, save_dataset, split_by_lane
from .evaluation import (
    AlarmConfig,
    GroundTruth,
    RocCurve,
    Target,
    cross_validate,
    label_alarms,
    roc,
)
from .exceptions import MiaceError, ValidationError
from .initializers import (
    InitResult,
    exemplar_points,
    init_kmeans,
    init_mi_cr,
    init_original,
    init_ranked_kmeans,
    initialize,
    mic_rank,
)
from .objective import bag_representative, objective, update_signature
from .synth import Site, SynthConfig, generate_site, make_mil_dataset
from .training import TrainConfig, TrainResult, train
from .whitening import BackgroundStats, fit_background, whiten

__all__ = [
    "ConfidenceMap",
    "Signature",
    "ace",
    "ace_batch",
    "score_sweep",
    "Alarm",
    "generate_alarms",
    "score_alarm",
    "BenchReport",
    "run_bench",
    "gmm_fit",
    "gmm_posteriors",
    "kmeans",
    "mean_shift",
    "Bag",
    "Instance",
    "MilDataset",
    "Sweep",
    "load_dataset",
    "save_dataset",
    "split_by_lane",
    "AlarmConfig",
    "GroundTruth",
    "RocCurve",
    "Target",
    "cross_validate",
    "label_alarms",
    "roc",
    "MiaceError",
    "ValidationError",
    "InitResult",
    "exemplar_points",
    "init_kmeans",
    "init_mi_cr",
    "init_original",
    "init_ranked_kmeans",
    "initialize",
    "mic_rank",
    "bag_representative",
    "objective",
    "update_signature",
    "Site",
    "SynthConfig",
    "generate_site",
    "make_mil_dataset",
    "TrainConfig",
    "TrainResult",
    "train",
    "BackgroundStats",
    "fit_background",
    "whiten",
]

__version__ = "0.1.0"
