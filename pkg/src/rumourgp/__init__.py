"""Multi-task Gaussian Process stance classification for social-media rumours.

Classifies short messages as supporting, denying or questioning a rumour,
transferring knowledge from annotated reference rumours to sparsely
annotated targets through an ICM coregionalization kernel over a linear
data kernel, with EP-based binary GPC underneath and an LOO/LPO experiment
harness on top.
"""

__version__ = "0.1.0"

from .errors import DataFormatError, NumericalError
from .experiments import (
    MODE_LOO,
    MODE_LPO,
    Corpus,
    EvalResult,
    FoldSpec,
    MethodSpec,
    Resources,
    ard_report,
    majority_baseline,
    majority_baseline_from_counts,
    make_folds,
    run_eval,
    run_method,
    run_sweep,
)
from .gpc import (
    BinaryDataset,
    EPApproximation,
    EPConfig,
    LatentPrediction,
    ep_fit,
    predict_latent,
    predict_prob,
    probit,
)
from .hyperopt import OptimizedParams, OptimizerConfig, optimize_evidence
from .kernels import (
    CoregionalizationParams,
    LinearKernelParams,
    TaskedInput,
    coreg_matrix,
    gram,
    icm_kernel,
    linear_kernel,
)
from .multiclass import (
    ClassPosterior,
    FeatureSpace,
    OneVsAllModel,
    ard_relevance,
    classify,
    classify_batch,
    load_model,
    save_model,
    train_ova,
)
from .synthetic import make_synthetic_corpus
from .textproc import (
    BrownLexicon,
    SparseFeatureVector,
    StanceLabel,
    TweetRecord,
    Vocabulary,
    build_vocabulary,
    featurize_bow,
    featurize_brown,
    filter_retweets,
    load_brown_lexicon,
    preprocess,
)
