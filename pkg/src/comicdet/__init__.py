"""comicdet: two-class (panel / character) single-shot comic page detector.

Pipeline pieces: box geometry and IoU, anchor clustering, the three-scale
detection network, ground-truth encoding and the training loss, decoding /
NMS / evaluation, dataset IO and a CLI.
"""

__version__ = "0.1.0"

from .anchors import AnchorSet, assign_anchor, cluster_anchors
from .evaluation import EvalReport, MatchResult, evaluate, f_measure, match_to_ground_truth
from .geometry import Box, ImageSpace, Label, LabeledBox, from_network_space, iou, to_network_space
from .losses import detection_loss
from .network import (
    ComicDetector,
    DetectionHeads,
    NetworkConfig,
    build_network,
    class_probabilities,
    forward,
    load_checkpoint,
    parameter_count,
    save_checkpoint,
)
from .postprocess import Detection, decode, filter_objectness, nms
from .targets import TargetGrids, decode_targets, encode_targets
from .training import TrainSchedule, train

__all__ = [
    "AnchorSet",
    "Box",
    "ComicDetector",
    "Detection",
    "DetectionHeads",
    "EvalReport",
    "ImageSpace",
    "Label",
    "LabeledBox",
    "MatchResult",
    "NetworkConfig",
    "TargetGrids",
    "TrainSchedule",
    "assign_anchor",
    "build_network",
    "class_probabilities",
    "cluster_anchors",
    "decode",
    "decode_targets",
    "detection_loss",
    "encode_targets",
    "evaluate",
    "f_measure",
    "filter_objectness",
    "forward",
    "from_network_space",
    "iou",
    "load_checkpoint",
    "match_to_ground_truth",
    "nms",
    "parameter_count",
    "save_checkpoint",
    "to_network_space",
    "train",
]
