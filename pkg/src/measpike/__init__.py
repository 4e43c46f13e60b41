"""measpike: MEA neural-spike preprocessing and infection-state classification.

Pipeline: multichannel voltage traces are high-pass filtered and thresholded
into spikes, sample tables are robust-scaled, variance-screened, and PCA
projected, then classified by a 1-D convolutional network whose activations
feed a gradient-boosted tree ensemble. A synthetic generator, classic
baselines, and a cross-validated evaluation harness round out the toolkit.
"""

__version__ = "0.1.0"

from .dataset import (
    ClassLabel,
    FeatureTable,
    FoldPlan,
    load_feature_table,
    materialize_fold,
    save_feature_table,
    stratified_kfold,
)
from .signals import (
    BiquadCoefficients,
    ChannelSpikes,
    MultichannelRecording,
    SpikeTrain,
    design_highpass_butterworth,
    detect_spikes,
    filter_trace,
    recording_to_feature_rows,
)
from .synth import SynthRecordingConfig, SynthTableConfig, synth_feature_table, synth_recording
from .preprocess import (
    FittedPreprocessor,
    PreprocessConfig,
    apply_pipeline,
    apply_scaler,
    apply_pca,
    fit_pca,
    fit_pipeline,
    fit_robust_scaler,
    variance_importance,
)
from .nn import CnnConfig, CnnModel, build_cnn, extract_embeddings, forward, gradient_check, train_cnn
from .gbt import BoostedEnsemble, GbtConfig, fit_gbt, predict_gbt
from .baselines import BASELINE_METHODS, BaselinesConfig, fit_baseline, predict_baseline
from .evaluate import (
    CvReport,
    MetricsReport,
    PipelineSpec,
    compare_methods,
    confusion_matrix,
    cross_validate,
    metrics_from_cm,
    pr_curve,
)
