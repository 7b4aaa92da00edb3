"""Knowledge-graph error detection toolkit.

Dual-view (text + structure) masked reconstruction with cross-view
contrastive alignment and adaptive pseudo-label confidence, embedding
baselines, three noise-generation procedures, and ranking evaluation.
"""

from .baselines import BaselineConfig, EmbeddingModel, baseline_score, train_baseline
from .detector import (DatasetPaths, DualViewDetector, OptimizerSettings,
                       RunConfig, config_from_dict)
from .encoder import EncoderConfig, MaskedEncoder
from .errors import (ConfigError, DataError, KgauditError, NumericalError,
                     ShapeError)
from .evaluate import EvalReport, evaluate
from .fusion import (ConfidenceTable, assign_confidence, build_confidence_table,
                     fuse_reconstruction, make_pseudo_labels, rank_fuse)
from .kg import KnowledgeGraph, load_kg, sample_neighbors, save_kg, stats
from .losses import (BatchViews, HyperParams, contrastive_loss,
                     contrastive_score, icl_losses, negative_similarity,
                     weighted_reconstruction_loss)
from .noise import (NoisyDataset, NoisyTriplet, describe_embed, inject_adversarial,
                    inject_mixed, inject_random, inject_semantic,
                    load_noisy_dataset, save_noisy_dataset)
from .pipeline import empirical_study, evaluate_ranking, run_detect, run_training
from .synth import make_synthetic_kg
from .tensor import Tensor, apply, backward, grad_check
from .vocab import Vocabulary, build_vocabulary

__version__ = "0.1.0"
