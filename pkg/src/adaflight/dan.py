"""Joint training: source cross-entropy plus a kernel-discrepancy penalty.

The loss is  CE(source) + lambda * sum_l MMD^2(source acts, target acts)
over the adapt-role layers. The penalty uses the biased estimator, which
is non-negative for any batch size, so the total loss never drops below
the cross-entropy term. The penalty gradient flows through both the
source and the target forward paths; cross-entropy flows only through the
source path (the target batch is unlabeled).
"""
import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import mmd, net as nets
from .errors import DegenerateSampleError, DivergedTrainingError, InvalidArgumentError

# Used when pooled adapt-layer activations have zero spread and the median
# heuristic cannot produce a bandwidth.
_FALLBACK_BANK = mmd.KernelBank.single(1.0)


@dataclass(frozen=True)
class DanConfig:
    lam: float = 0.3
    batch_size: int = 32
    steps: int = 2000
    base_lr: float = 0.01
    role_multipliers: dict = None
    adapt_layers: tuple = None  # layer indices; None = all adapt-role layers
    bank_policy: object = "median"  # "median" or a fixed KernelBank
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidArgumentError("lambda must be >= 0")
        if self.batch_size < 2:
            raise InvalidArgumentError("batch_size must be >= 2")


@dataclass
class StepRecord:
    step: int
    ce: float
    mmd_per_layer: dict
    total: float
    bank_fallback: bool = False

    @property
    def mmd_total(self):
        return math.fsum(self.mmd_per_layer.values())


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def append(self, rec):
        self.records.append(rec)

    def extend(self, other):
        """Concatenate two histories, renumbering the appended steps."""
        offset = len(self.records)
        merged = list(self.records)
        for r in other.records:
            merged.append(replace(r, step=offset + r.step))
        return TrainHistory(merged)

    def write_csv(self, path):
        layers = sorted(self.records[0].mmd_per_layer) if self.records else []
        with open(path, "w", newline="\n") as f:
            w = csv.writer(f)
            w.writerow(
                ["step", "ce", "mmd_total"]
                + [f"mmd_layer_{i}" for i in layers]
                + ["total_loss"]
            )
            for r in self.records:
                w.writerow(
                    [r.step, repr(r.ce), repr(r.mmd_total)]
                    + [repr(r.mmd_per_layer[i]) for i in layers]
                    + [repr(r.total)]
                )


def _adapt_layers(net, cfg):
    layers = cfg.adapt_layers if cfg.adapt_layers is not None else net.adapt_indices()
    layers = tuple(layers)
    for i in layers:
        if net.specs[i].role != "adapt":
            raise InvalidArgumentError(f"layer {i} does not have the adapt role")
    return layers


def _layer_bank(acts_s, acts_t, cfg, last_bank):
    """Per-batch bank from the median heuristic on pooled activations."""
    if isinstance(cfg.bank_policy, mmd.KernelBank):
        return cfg.bank_policy, False
    pooled = np.concatenate(
        [acts_s.reshape(len(acts_s), -1), acts_t.reshape(len(acts_t), -1)]
    )
    try:
        return mmd.default_bank(pooled), False
    except DegenerateSampleError:
        return (last_bank if last_bank is not None else _FALLBACK_BANK), True


def dan_loss(net, source_x, source_y, target_x, cfg, _banks=None):
    """Evaluate the joint loss; returns (total, ce, {layer: mmd2}, fallback?).

    _banks, when given, maps layer index to the KernelBank to use (so a
    step can report the loss under the exact banks its gradient used).
    """
    tr_s = nets.forward(net, source_x)
    ce = nets.cross_entropy(tr_s.outputs[-1], source_y)
    if cfg.lam == 0.0:
        return ce, ce, {}, False
    tr_t = nets.forward(net, target_x)
    terms = {}
    fallback = False
    for li in _adapt_layers(net, cfg):
        a_s = tr_s.layer_output(li).reshape(len(source_x), -1)
        a_t = tr_t.layer_output(li).reshape(len(target_x), -1)
        if _banks is not None and li in _banks:
            bank = _banks[li]
        else:
            bank, fb = _layer_bank(a_s, a_t, cfg, None)
            fallback = fallback or fb
        terms[li] = mmd.mmd2_biased(a_s, a_t, bank)
    total = ce + cfg.lam * math.fsum(terms.values())
    return total, ce, terms, fallback


def dan_step(net, source_x, source_y, target_x, cfg, step_index=0, last_banks=None):
    """One joint SGD step; returns (updated net, StepRecord, banks used)."""
    last_banks = last_banks or {}
    tr_s = nets.forward(net, source_x)
    ce = nets.cross_entropy(tr_s.outputs[-1], source_y)
    g_out = nets.cross_entropy_grad(tr_s.outputs[-1], source_y)

    if cfg.lam == 0.0:
        grads = nets.backward(net, tr_s, g_out)
        rec = StepRecord(step_index, ce, {}, ce)
        banks = {}
    else:
        tr_t = nets.forward(net, target_x)
        extra_s, extra_t, terms, banks = {}, {}, {}, {}
        fallback = False
        for li in _adapt_layers(net, cfg):
            out_s = tr_s.layer_output(li)
            out_t = tr_t.layer_output(li)
            a_s = out_s.reshape(len(source_x), -1)
            a_t = out_t.reshape(len(target_x), -1)
            bank, fb = _layer_bank(a_s, a_t, cfg, last_banks.get(li))
            fallback = fallback or fb
            banks[li] = bank
            terms[li] = mmd.mmd2_biased(a_s, a_t, bank)
            gs, gt = mmd.mmd2_biased_grad(a_s, a_t, bank)
            extra_s[li] = cfg.lam * gs.reshape(out_s.shape)
            extra_t[li] = cfg.lam * gt.reshape(out_t.shape)
        grads_s = nets.backward(net, tr_s, g_out, extra_s)
        grads_t = nets.backward(net, tr_t, np.zeros_like(tr_t.outputs[-1]), extra_t)
        grads = {
            i: (grads_s[i][0] + grads_t[i][0], grads_s[i][1] + grads_t[i][1])
            for i in grads_s
        }
        total = ce + cfg.lam * math.fsum(terms.values())
        rec = StepRecord(step_index, ce, terms, total, fallback)

    for i, (dW, db) in grads.items():
        if not (np.all(np.isfinite(dW)) and np.all(np.isfinite(db))):
            raise DivergedTrainingError(step_index)
    new_net = nets.sgd_step(net, grads, cfg.base_lr, cfg.role_multipliers)
    return new_net, rec, banks


def _batch_stream(n, batch_size, rng):
    """Yields index batches from independently reshuffled wrap-around epochs."""
    order = rng.permutation(n)
    pos = 0
    while True:
        if pos + batch_size > n:
            order = rng.permutation(n)
            pos = 0
        yield order[pos : pos + batch_size]
        pos += batch_size


def train_dan(net, source_x, source_y, target_x, cfg):
    """Run cfg.steps joint SGD steps; returns (trained net, TrainHistory)."""
    source_x = np.asarray(source_x, dtype=np.float64)
    source_y = np.asarray(source_y, dtype=np.int64)
    target_x = np.asarray(target_x, dtype=np.float64)
    if len(source_x) == 0 or len(target_x) == 0:
        raise InvalidArgumentError("datasets must be non-empty")
    ss = np.random.SeedSequence(cfg.seed)
    rng_s, rng_t = (np.random.default_rng(s) for s in ss.spawn(2))
    bs = min(cfg.batch_size, len(source_x))
    if cfg.lam != 0.0:  # target batches only matter for the regularizer
        bs = min(bs, len(target_x))
    cfg_run = replace(cfg, batch_size=max(bs, 2))
    stream_s = _batch_stream(len(source_x), cfg_run.batch_size, rng_s)
    stream_t = _batch_stream(len(target_x), cfg_run.batch_size, rng_t)
    history = TrainHistory()
    banks = {}
    for step in range(cfg.steps):
        idx_s = next(stream_s)
        idx_t = next(stream_t)
        net, rec, banks = dan_step(
            net,
            source_x[idx_s],
            source_y[idx_s],
            target_x[idx_t],
            cfg_run,
            step_index=step,
            last_banks=banks,
        )
        history.append(rec)
    return net, history


def train_supervised(net, source_x, source_y, cfg):
    """Plain supervised minibatch SGD; the lambda=0 special case."""
    target_x = np.asarray(source_x, dtype=np.float64)[:2]
    return train_dan(net, source_x, source_y, target_x, replace(cfg, lam=0.0))
