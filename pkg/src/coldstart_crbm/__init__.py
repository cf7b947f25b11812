"""Item cold-start recommendation with feature-conditional RBMs.

Each item is an RBM whose visible units are the users who rated it; all
items share one set of weights, and binary item features feed the hidden
units through an extra matrix ``U`` so that unrated items can still be
scored.
"""

from .data import (ColdStartSplit, FeatureMatrix, RatingDataset, Task, TaskDataset,
                   parse_features, parse_movielens_genres, parse_ratings, split_cold_start,
                   to_task)
from .evaluation import EvalReport, RocCurve, ScoredPairs, evaluate, roc, score_cold_start
from .interpret import Clustering, cluster_report, feature_embeddings, kmeans
from .model import (CrbmParams, RbmParams, cold_start_scores, energy_crbm, energy_rbm,
                    load_model, save_model, sigmoid)
from .training import TrainConfig, TrainingReport, apply_updates, cd_step, train

__version__ = "0.1.0"
