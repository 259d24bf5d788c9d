"""Person re-identification by unsupervised patch saliency matching."""

from .config import (
    AnnotationConfig,
    GridConfig,
    KernelConfig,
    MatchConfig,
    PipelineConfig,
    SaliencyConfig,
    TrainConfig,
    TrialConfig,
    load_config,
    save_config,
)
from .features import PatchGrid, extract_grid, load_image
from .matching import (
    Correspondence,
    dense_correspondence,
    patch_similarity,
    sim_densefeats,
    sim_patmatch,
)
from .saliency import SaliencyMap, knn_score, salient_probability, saliency_map
from .ocsvm import OcsvmModel, ocsvm_decision, ocsvm_score, ocsvm_train
from .salmatch import (
    RankModel,
    pair_feature_map,
    patch_phi,
    rank_gallery,
    sim_esalmatch,
    sim_salmatch,
    sim_sdc,
)
from .ranklearn import TrainSet, auc_loss, most_violated, train
from .protocol import cmc, pearson_corr, run_protocol, split_trial

__version__ = "0.1.0"

__all__ = [
    "AnnotationConfig",
    "Correspondence",
    "GridConfig",
    "KernelConfig",
    "MatchConfig",
    "OcsvmModel",
    "PatchGrid",
    "PipelineConfig",
    "RankModel",
    "SaliencyConfig",
    "SaliencyMap",
    "TrainConfig",
    "TrainSet",
    "TrialConfig",
    "auc_loss",
    "cmc",
    "dense_correspondence",
    "extract_grid",
    "knn_score",
    "load_config",
    "load_image",
    "most_violated",
    "ocsvm_decision",
    "ocsvm_score",
    "ocsvm_train",
    "pair_feature_map",
    "patch_phi",
    "patch_similarity",
    "pearson_corr",
    "rank_gallery",
    "run_protocol",
    "salient_probability",
    "saliency_map",
    "save_config",
    "sim_densefeats",
    "sim_esalmatch",
    "sim_patmatch",
    "sim_salmatch",
    "sim_sdc",
    "split_trial",
    "train",
]
