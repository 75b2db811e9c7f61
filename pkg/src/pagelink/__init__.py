"""Path-based explanations for link prediction on heterogeneous graphs."""
from .exceptions import *  # noqa: F401,F403
from .hetgraph import (ComputationGraph, HeteroGraph, Subgraph, build_graph,
                       extract_computation_graph, read_tsv, write_tsv)
from .corepruner import PrunedCore, kcore_prune, prune_for_explanation
from .masks import EdgeMaskSet
from .rgcn import (ModelParams, RGCNLinkPredictor, TrainConfig, forward, init_model, load_model,
                   loss_and_mask_grad, save_model, train)
from .paths import Path, top_k_paths
from .explainer import ExplainerConfig, Explanation, PaGELinkExplainer, explain, learn_mask
from .baselines import GNNExpLinkExplainer, PGExpLinkExplainer, gnnexp_link, pgexp_link_infer, pgexp_link_train
from .datasets import CitationSpec, GroundTruth, SynthSpec, gen_augcitation, gen_useritemattr
from .evalkit import bench_scaling, compare_explainers, mask_auc, path_hit_rate
from .randomgraph import RandomGraphSpec, core_fraction_theory, gen_random_graph, verify_theory

__version__ = "0.1.0"
