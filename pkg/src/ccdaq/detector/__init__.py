from .geometry import (
    ALL_NODES,
    ChargeImage,
    DetectorGeometry,
    ExposureParams,
    FrameMeta,
    RawFrame,
    SceneModel,
    Source,
    load_detector_preset,
    load_scene,
)
from .model import (
    ScanRow,
    digitize_readout,
    drift_scan,
    integrate_charge,
    push_pull,
    scene_rate_map,
    simulate_exposure,
    step_seed,
)

__all__ = [
    "ALL_NODES",
    "ChargeImage",
    "DetectorGeometry",
    "ExposureParams",
    "FrameMeta",
    "RawFrame",
    "SceneModel",
    "ScanRow",
    "Source",
    "digitize_readout",
    "drift_scan",
    "integrate_charge",
    "load_detector_preset",
    "load_scene",
    "push_pull",
    "scene_rate_map",
    "simulate_exposure",
    "step_seed",
]
