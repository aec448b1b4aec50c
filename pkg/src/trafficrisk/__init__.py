"""Multi-vehicle traffic safety risk estimation from vehicle trajectories.

Pipeline: ingest trajectory tables into scenes, classify each ego vehicle's
neighbors per frame, compute per-pair safety metrics, fuse them into a risk
time series (threshold grid or autoencoder), and statistically evaluate the
risk signal against observed driver jerk.
"""

__version__ = "0.1.0"

from .autoencoder import AeModel, ae_risk, ae_train, load_model, save_model
from .config import (
    POSITIONAL_CONFIGS,
    SSM_CONFIGS,
    AeVariant,
    ModelConfig,
    PositionalWeights,
    SsmWeights,
    parse_model_id,
)
from .ingest import (
    exclude_truck_lane_changes,
    load_generic_scene,
    parse_generic,
    parse_highd,
    write_generic,
)
from .neighbors import (
    Encroachment,
    NeighborSet,
    RelativePosition,
    Side,
    classify_neighbors,
    classify_parallel,
    encroachment_point,
)
from .risk import (
    RiskSeries,
    SafetyCategory,
    SsmKind,
    aggregate_ego_risk,
    categorize,
    grid_risk,
    normalize_ssm,
    risk_timeseries,
)
from .ssm import SsmSample, drac, ittc, pet_parallel, ssm_for_pair, time_headway
from .stats import (
    ConfigComparison,
    CorrelationResult,
    best_lag,
    compare_configs,
    evaluate_corpus,
    evaluate_ego,
    spearman,
    wilcoxon_signed_rank,
)
from .trajectory import (
    FrameState,
    Lane,
    LaneDirection,
    LaneLayout,
    Scene,
    VehicleClass,
    VehicleTrack,
    canonicalize,
    derivative,
    jerk_of,
)
