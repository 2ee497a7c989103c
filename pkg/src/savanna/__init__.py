"""Semi-automatic wildlife-detection workbench for UAV survey imagery.

Pipeline stages: volunteer-annotation fusion -> shadow/edge object
proposals -> color-histogram and visual-word features -> an ensemble of
per-exemplar linear SVMs -> evaluation, with an interactive active-learning
loop to recover animals mislabeled as background.
"""

__version__ = "0.1.0"

from .raster import RasterImage, connected_components, downsample, load_image, sobel_blue, threshold, value_channel
from .fusion import (
    ConsensusMap,
    GroundTruthObject,
    VolunteerPolygon,
    build_consensus,
    extract_objects,
    rasterize_polygon,
    verify_objects,
)
from .proposals import (
    Proposal,
    ProposalConfig,
    edge_proposals,
    generate_proposals,
    label_proposals,
    merge_proposals,
    shadow_proposals,
)
from .features import (
    Codebook,
    FeatureNormalizer,
    FeatureVector,
    WordMap,
    assign_words,
    combine,
    extract_bovw,
    extract_hoc,
    normalize_features,
    sample_patches,
    train_codebook,
)
from .detector import (
    EnsembleConfig,
    ExemplarEnsemble,
    ExemplarModel,
    LinearModel,
    build_ensemble,
    cross_validate_c,
    ensemble_predict,
    train_exemplar,
    train_linear_svm,
)

__all__ = [name for name in dir() if not name.startswith("_")]
