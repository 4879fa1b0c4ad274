"""Click-prompted object-level cross-view geo-localization.

A drone or ground query image plus a user click is matched against a
satellite reference image; the clicked object comes back as a bounding
box in satellite pixel coordinates.
"""

from ocgnet.gkt import ClickPoint, GktConfig, gkt_map
from ocgnet.metrics import iou, acc_at_t, per_class_report, EvalReport
from ocgnet.model import OCGNet, ModelConfig
from ocgnet.estimator import ClickGeoLocalizer

__all__ = [
    "ClickPoint",
    "GktConfig",
    "gkt_map",
    "iou",
    "acc_at_t",
    "per_class_report",
    "EvalReport",
    "OCGNet",
    "ModelConfig",
    "ClickGeoLocalizer",
]

__version__ = "0.1.0"
