"""Non-neural core of a HoVer-Net style nucleus segmentation pipeline.

Target encoding with horizontal/vertical and diagonal distance maps,
watershed decoding, ensemble averaging, the weighted training losses and
the mPQ+ / R^2 evaluation metrics.
"""

from .core import (
    CLASS_NAMES,
    InconsistentClass,
    Instance,
    InstanceSet,
    LabeledImage,
    NucleiError,
    PredictionMaps,
    ShapeMismatch,
    connected_components,
    extract_instances,
    iou,
)
from .augment import AugPlan, augment_sample, sample_plan
from .encoder import TargetMaps, encode_distance_group, encode_targets
from .ensemble import EmptyEnsemble, average_predictions
from .losses import ClassWeights, LossWeights, loss_breakdown, total_loss, total_loss_grad
from .metrics import PqStats, accumulate_pq, counts_from_instances, match_instances, mpq_plus, r2_score
from .npyio import read_array, write_array
from .postprocess import PostprocessParams, postprocess

__version__ = "0.1.0"
