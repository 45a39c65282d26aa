"""Experiment runner: the training loop with optional residual smoothing,
evaluation, multi-trial aggregation, grid search and CSV emission.

Everything an experiment emits is a pure function of (config, seed). Each
trial uses seed base_seed + k, and initialization, shuffling and augmentation
draw from independent named substreams of the trial seed; dataset subsetting
draws from substreams of the dataset seed so every trial sees the same subset.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import data as data_mod
from . import nn, optim, smoothing
from .annealing import scale_at
from .config import ExperimentConfig
from .errors import ConfigError, InputError, TrainingError

METRICS_HEADER = "epoch,train_loss,train_acc,val_acc,s_t,mean_kappa"
AGGREGATE_HEADER = "b,alpha,trial,max_val_acc,tail_mean_val_acc"

_STREAMS = {"init": 0, "shuffle": 1, "augment": 2, "take": 3, "ratio": 4}


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent, named, deterministic RNG stream derived from a seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_STREAMS[name],)))


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float
    s_t: float
    mean_kappa: float


@dataclass(frozen=True)
class TrialSummary:
    max_val_acc: float
    tail_mean_val_acc: float


@dataclass(frozen=True)
class TrialRow:
    b: float
    alpha: float
    trial: int
    max_val_acc: float
    tail_mean_val_acc: float


@dataclass(frozen=True)
class TrialAggregate:
    rows: tuple
    mean_max_val_acc: float
    mean_tail_val_acc: float
    metrics: tuple  # one EpochMetrics tuple per trial
    networks: tuple


@dataclass(frozen=True)
class GridPoint:
    b: float
    alpha: float
    aggregate: TrialAggregate


@dataclass(frozen=True)
class GridResult:
    points: tuple
    best: GridPoint


def prepare_data(config: ExperimentConfig):
    """Load train/test splits and apply the configured subsetting."""
    ds = config.dataset
    if ds.kind == "fashion_mnist":
        train = data_mod.load_idx(ds.train_images, ds.train_labels, split="train")
        test = data_mod.load_idx(ds.test_images, ds.test_labels, split="test")
    else:
        train = data_mod.load_cifar10_bin(ds.train_files, split="train")
        test = data_mod.load_cifar10_bin(ds.test_files, split="test")
    if ds.take > 0:
        train = data_mod.take_uniform(train, ds.take, substream(ds.seed, "take"))
    if ds.subsample_ratio < 1.0:
        train = data_mod.subsample(train, ds.subsample_ratio, substream(ds.seed, "ratio"))
    return train, test


def _augment_rows(xb: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = np.empty_like(xb)
    for i in range(xb.shape[0]):
        img = xb[i].reshape(3, 32, 32)
        out[i] = data_mod.augment_pad_crop_flip(img, rng).reshape(-1)
    return out


def _diagnose_nonfinite(network: nn.Network, epoch: int, batch_idx: int, iteration: int) -> str:
    bad = [i for i, layer in enumerate(network.layers)
           if not (np.all(np.isfinite(layer.weights)) and np.all(np.isfinite(layer.bias)))]
    where = f"layers {bad}" if bad else "parameters finite; loss overflow"
    return (f"non-finite loss at iteration {iteration} "
            f"(epoch {epoch}, batch {batch_idx}); {where}")


def train(config: ExperimentConfig, trial_seed: int, dataset_pair=None):
    """One full training run; returns (network, per-epoch metrics)."""
    if dataset_pair is None:
        dataset_pair = prepare_data(config)
    train_ds, test_ds = dataset_pair
    if train_ds.n == 0:
        raise InputError("empty training split")

    dims = [train_ds.feature_count, *config.model.hidden, train_ds.class_count]
    network = nn.he_init(
        nn.build_network(dims, output_activation=config.model.output_activation),
        substream(trial_seed, "init"))
    optimizer = optim.make_optimizer(config.optimizer, network)
    shuffle_rng = substream(trial_seed, "shuffle")
    augment_rng = substream(trial_seed, "augment")

    sm = config.smoothing
    smoothing_on = sm.mode != "off"
    augmenting = config.dataset.augment and config.dataset.kind == "cifar10"
    targets = np.eye(train_ds.class_count)[train_ds.labels]
    if config.label_smoothing > 0.0:
        targets = optim.label_smooth(targets, config.label_smoothing)

    n = train_ds.n
    iters_per_epoch = math.ceil(n / config.batch_size)
    total_iters = config.epochs * iters_per_epoch
    t = 0
    metrics = []
    for epoch in range(config.epochs):
        loss_sum = 0.0
        kappa_sum = 0.0
        correct = 0
        s_end = 0.0
        for batch_idx, idx in enumerate(data_mod.batches(train_ds, config.batch_size, shuffle_rng)):
            progress = t / total_iters
            xb = train_ds.inputs[idx]
            if augmenting:
                xb = _augment_rows(xb, augment_rng)
            yb = targets[idx]
            cache = nn.forward_batch(network, xb)
            preds = cache.prediction
            if smoothing_on:
                s_t = scale_at(config.schedule, progress)
                loss_rows, grad_rows, kappa = smoothing.batch_smoothed_loss_grad(preds, yb, s_t, sm)
                kappa_sum += float(kappa.mean(axis=1).sum())
            else:
                s_t = 0.0
                r = preds - yb
                loss_rows = np.einsum("bj,bj->b", r, r)
                grad_rows = 2.0 * r
            batch_loss = float(loss_rows.sum())
            if not math.isfinite(batch_loss):
                raise TrainingError(_diagnose_nonfinite(network, epoch, batch_idx, t))
            loss_sum += batch_loss
            correct += int((np.argmax(preds, axis=1) == train_ds.labels[idx]).sum())
            grads = nn.backward_batch(network, cache, grad_rows / idx.size)
            optimizer.step(network, grads, progress)
            t += 1
            if batch_idx == iters_per_epoch - 1:
                s_end = s_t
        for i, layer in enumerate(network.layers):
            if not (np.all(np.isfinite(layer.weights)) and np.all(np.isfinite(layer.bias))):
                raise TrainingError(f"non-finite parameters in layer {i} after epoch {epoch}")
        val_acc, _ = evaluate(network, test_ds)
        metrics.append(EpochMetrics(
            epoch=epoch,
            train_loss=loss_sum / n,
            train_acc=100.0 * correct / n,
            val_acc=val_acc,
            s_t=s_end,
            mean_kappa=kappa_sum / n,
        ))
    return network, metrics


def evaluate(network: nn.Network, dataset: data_mod.Dataset, chunk: int = 4096):
    """(accuracy percent, mean plain squared-error loss) on a dataset.

    The predicted class is the first index attaining the output maximum."""
    if dataset.n == 0:
        raise InputError("cannot evaluate on an empty dataset")
    eye = np.eye(dataset.class_count)
    correct = 0
    loss_sum = 0.0
    for start in range(0, dataset.n, chunk):
        xb = dataset.inputs[start:start + chunk]
        lb = dataset.labels[start:start + chunk]
        preds = nn.forward_batch(network, xb).prediction
        correct += int((np.argmax(preds, axis=1) == lb).sum())
        r = preds - eye[lb]
        loss_sum += float(np.einsum("bj,bj->b", r, r).sum())
    return 100.0 * correct / dataset.n, loss_sum / dataset.n


def summarize(metrics) -> TrialSummary:
    """Max validation accuracy over epochs, and its mean over the last 10%
    of epochs (at least one)."""
    vals = [m.val_acc for m in metrics]
    n_tail = max(1, math.ceil(len(vals) / 10))
    return TrialSummary(max(vals), sum(vals[-n_tail:]) / n_tail)


def _tag_b(config: ExperimentConfig) -> float:
    return config.schedule.b if config.smoothing.mode != "off" else 0.0


def _tag_alpha(config: ExperimentConfig) -> float:
    return config.smoothing.alpha if config.smoothing.mode != "off" else 0.0


def run_trials(config: ExperimentConfig, dataset_pair=None) -> TrialAggregate:
    """Train `trials` times with seeds base_seed .. base_seed + trials - 1."""
    if dataset_pair is None:
        dataset_pair = prepare_data(config)
    rows, all_metrics, networks = [], [], []
    for k in range(config.trials):
        network, metrics = train(config, config.base_seed + k, dataset_pair)
        summary = summarize(metrics)
        rows.append(TrialRow(_tag_b(config), _tag_alpha(config), k,
                             summary.max_val_acc, summary.tail_mean_val_acc))
        all_metrics.append(tuple(metrics))
        networks.append(network)
    return TrialAggregate(
        rows=tuple(rows),
        mean_max_val_acc=sum(r.max_val_acc for r in rows) / len(rows),
        mean_tail_val_acc=sum(r.tail_mean_val_acc for r in rows) / len(rows),
        metrics=tuple(all_metrics),
        networks=tuple(networks),
    )


def grid_search(config: ExperimentConfig, b_values, alpha_values) -> GridResult:
    """run_trials per (b, alpha) grid point; the best point maximizes the mean
    of per-trial max validation accuracy, ties broken by smallest (b, alpha)."""
    if not b_values or not alpha_values:
        raise ConfigError("grid values must be non-empty")
    dataset_pair = prepare_data(config)
    points = []
    for b in sorted(b_values):
        for alpha in sorted(alpha_values):
            cfg = replace(config,
                          schedule=replace(config.schedule, b=b),
                          smoothing=replace(config.smoothing, alpha=alpha))
            points.append(GridPoint(b, alpha, run_trials(cfg, dataset_pair)))
    best = min(points, key=lambda p: (-p.aggregate.mean_max_val_acc, p.b, p.alpha))
    return GridResult(tuple(points), best)


def _write_lines(path, lines):
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")


def write_metrics_csv(metrics, path):
    """Per-epoch metrics; floats fixed at 6 decimals so files are comparable."""
    lines = [METRICS_HEADER]
    for m in metrics:
        lines.append(f"{m.epoch},{m.train_loss:.6f},{m.train_acc:.6f},"
                     f"{m.val_acc:.6f},{m.s_t:.6f},{m.mean_kappa:.6f}")
    _write_lines(path, lines)


def write_aggregate_csv(rows, path):
    """Per-trial summary rows, one per (b, alpha, trial)."""
    lines = [AGGREGATE_HEADER]
    for r in rows:
        lines.append(f"{r.b:.6f},{r.alpha:.6f},{r.trial},"
                     f"{r.max_val_acc:.6f},{r.tail_mean_val_acc:.6f}")
    _write_lines(path, lines)


def read_csv(path):
    """Header plus rows of strings; the inverse of the writers for checking."""
    with open(path, "r", newline="") as f:
        lines = f.read().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]
