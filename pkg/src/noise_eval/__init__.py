"""Noise-evaluation anomaly detection for tabular data.

A network is trained to predict, feature by feature, how much synthetic noise
was added to a normal sample (zero for clean samples). At test time the
aggregated predicted noise magnitude is the anomaly score.
"""

__version__ = "0.1.0"

from noise_eval.data import Dataset, fit_standardizer, load_csv, split_occ, synth_blobs
from noise_eval.metrics import Aggregator, auc, evaluate, f1_topk, score
from noise_eval.nn import Arch, Network, NetworkConfig, forward, init_network, loss_and_grad
from noise_eval.noise import NoiseFamily, NoiseSpec, corrupt_batch, generate_noise_matrix
from noise_eval.optim import OptimHyper
from noise_eval.train import TrainConfig, train

__all__ = [
    "Aggregator",
    "Arch",
    "Dataset",
    "Network",
    "NetworkConfig",
    "NoiseFamily",
    "NoiseSpec",
    "OptimHyper",
    "TrainConfig",
    "auc",
    "corrupt_batch",
    "evaluate",
    "f1_topk",
    "fit_standardizer",
    "forward",
    "generate_noise_matrix",
    "init_network",
    "load_csv",
    "loss_and_grad",
    "score",
    "split_occ",
    "synth_blobs",
    "train",
]
