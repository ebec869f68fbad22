"""Deterministic mini-batch training bound to the per-design loss regimes.

One run is single-threaded; a harness may run many (model x seed) jobs
concurrently since each owns its model, tape, and RNG. Evaluation always
sits strictly in the future of the training days.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import metrics


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 512
    epochs: int = 12
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epochs < 0:
            raise ValueError(f"invalid training config: {self}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")


@dataclass
class RunHistory:
    """Per-epoch train losses (by head), eval metrics, and wall-clock."""

    head_losses: list = field(default_factory=list)
    eval_metrics: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "head", "train_loss", "eval_joint_ce",
                             "eval_joint_pr_auc", "eval_calibration_ratio",
                             "eval_ctr_ce", "epoch_seconds"])
            for epoch, (losses, record, secs) in enumerate(
                    zip(self.head_losses, self.eval_metrics, self.epoch_seconds)):
                for head, loss in losses.items():
                    writer.writerow([
                        epoch, head, repr(loss), repr(record.joint_ce),
                        repr(record.joint_pr_auc), repr(record.calibration_ratio),
                        "" if record.ctr_ce is None else repr(record.ctr_ce),
                        repr(secs)])


def evaluate(model, ds):
    """Weighted joint CE, PR-AUC, calibration, CTR-head CE, violation rate.

    Works with any predictor exposing ``predict_dataset``, including the
    ground-truth oracle. The consistency-violation rate (joint > ctr) is
    exactly zero for the product-composed designs and is only informative
    for ESSP-Split, whose two heads are unconstrained.
    """
    preds = model.predict_dataset(ds)
    joint = preds["joint"]
    ctr = preds.get("ctr")
    return metrics.MetricsRecord(
        joint_ce=metrics.weighted_ce(joint, ds.conversion, ds.weight),
        joint_pr_auc=metrics.pr_auc(joint, ds.conversion, ds.weight),
        calibration_ratio=metrics.calibration_ratio(joint, ds.conversion, ds.weight),
        ctr_ce=None if ctr is None else metrics.weighted_ce(ctr, ds.click, ds.weight),
        essp_violation_rate=None if ctr is None else float(np.mean(joint > ctr)),
    )


def _check_finite(value, model_name, epoch):
    if not np.isfinite(value):
        raise FloatingPointError(
            f"non-finite loss ({value}) for {model_name} at epoch {epoch}: run aborted")


def _epoch_batches(rng, n, batch_size):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def train(model, train_ds, eval_ds, cfg):
    """Train a model and return (model, RunHistory).

    Per batch, the total loss is the sum over examples of the per-head
    weighted cross-entropies under the design's sample-weight regime,
    divided by the batch's summed calibration weight (so gradient scale is
    stable under calibration upweighting). One optimizer step per batch;
    everything is deterministic given cfg.seed.
    """
    if len(train_ds) == 0 or len(eval_ds) == 0:
        raise ValueError("training and evaluation datasets must be non-empty")
    if train_ds.day.max() >= eval_ds.day.min():
        raise ValueError(
            f"temporal split violated: train days reach {train_ds.day.max()}, "
            f"eval days start at {eval_ds.day.min()}")
    history = RunHistory()
    if cfg.epochs == 0:
        return model, history
    if model.name == "IP":
        _train_disjoint(model, train_ds, eval_ds, cfg, history)
    else:
        _train_single_graph(model, train_ds, eval_ds, cfg, history)
    return model, history


def _train_single_graph(model, train_ds, eval_ds, cfg, history):
    opt = ad.make_optimizer(cfg.optimizer, model.parameters(), cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    n = len(train_ds)
    cvr_key = model.cvr_loss_key()
    for epoch in range(cfg.epochs):
        start_time = time.perf_counter()
        sums = {"ctr": 0.0, "cvr": 0.0}
        weight_total = 0.0
        for idx in _epoch_batches(rng, n, cfg.batch_size):
            w = train_ds.weight[idx]
            ctr_w, cvr_w = model._loss_weight_arrays(train_ds.click[idx], w)
            tape = ad.Tape()
            out = model.forward_heads(tape, train_ds.dense[idx], train_ds.cats[idx])
            cvr_loss = ad.weighted_bce(out[cvr_key], train_ds.conversion[idx], cvr_w)
            if model.has_ctr_head():
                ctr_loss = ad.weighted_bce(out["ctr"], train_ds.click[idx], ctr_w)
                total = ad.add(ctr_loss, cvr_loss)
                sums["ctr"] += float(ctr_loss.value)
            else:
                total = cvr_loss
            sums["cvr"] += float(cvr_loss.value)
            batch_weight = float(w.sum())
            weight_total += batch_weight
            total = ad.scale(total, 1.0 / batch_weight)
            _check_finite(float(total.value), model.name, epoch)
            tape.backward(total)
            opt.step()
        losses = {"cvr": sums["cvr"] / weight_total}
        if model.has_ctr_head():
            losses["ctr"] = sums["ctr"] / weight_total
        history.head_losses.append(losses)
        history.eval_metrics.append(evaluate(model, eval_ds))
        history.epoch_seconds.append(time.perf_counter() - start_time)


def _forward_tower(model, tape, head_name, dense, cats):
    stack = model._stacks[model._wiring[head_name]]
    return model._heads[head_name].forward(stack.forward(tape, dense, cats))


def _train_disjoint(model, train_ds, eval_ds, cfg, history):
    """IP: the click tower sees every impression, the conversion tower only
    clicked ones (conditional space, weight 1). The towers share nothing, so
    training them within each epoch equals two fully sequential runs."""
    clicked = train_ds.clicked()
    if len(clicked) == 0:
        raise ValueError("IP needs at least one clicked training example")
    jobs = {
        "ctr": (train_ds, train_ds.click,
                ad.make_optimizer(cfg.optimizer, model.tower_parameters("ctr"),
                                  cfg.learning_rate),
                np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))),
        "cvr": (clicked, clicked.conversion,
                ad.make_optimizer(cfg.optimizer, model.tower_parameters("cvr"),
                                  cfg.learning_rate),
                np.random.default_rng(np.random.SeedSequence([cfg.seed, 2]))),
    }
    for epoch in range(cfg.epochs):
        start_time = time.perf_counter()
        losses = {}
        for head, (ds, labels, opt, rng) in jobs.items():
            loss_sum = 0.0
            weight_total = 0.0
            for idx in _epoch_batches(rng, len(ds), cfg.batch_size):
                w = ds.weight[idx]
                tape = ad.Tape()
                pred = _forward_tower(model, tape, head, ds.dense[idx], ds.cats[idx])
                loss = ad.weighted_bce(pred, labels[idx], w)
                batch_weight = float(w.sum())
                total = ad.scale(loss, 1.0 / batch_weight)
                _check_finite(float(total.value), model.name, epoch)
                tape.backward(total)
                opt.step()
                loss_sum += float(loss.value)
                weight_total += batch_weight
            losses[head] = loss_sum / weight_total
        history.head_losses.append(losses)
        history.eval_metrics.append(evaluate(model, eval_ds))
        history.epoch_seconds.append(time.perf_counter() - start_time)
