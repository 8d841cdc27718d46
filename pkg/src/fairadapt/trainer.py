"""Staged adversarial training with target adaptation, and model selection.

Iterations ``[0, fair_start)`` train the label classifier only. From
``fair_start`` the attribute head and the encoder play the adversarial game
on source batches. From ``thresh`` on, the encoder is additionally pulled
towards the target domain with the sliced Wasserstein loss, and the
adversarial game is repeated on target batches (sensitive attribute only).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .autodiff import Tape, backward, make_optimizer, scale
from .datasets.splits import DomainDataset, train_val_partition
from .errors import ConfigError
from .losses import LossWeights, fairness_loss, swd_loss, task_loss
from .metrics import EvalReport, balanced_accuracy, delta_dp, evaluate, is_degenerate
from .model import FairModel, init_model, predict

log = logging.getLogger(__name__)

ABLATIONS = {
    # steps: 1 task, 2 source adversary, 3 source encoder,
    #        4 alignment, 5 target adversary + encoder
    "base": frozenset({1}),
    "swd_only": frozenset({1, 4}),
    "fair_only": frozenset({1, 2, 3, 5}),
    "full": frozenset({1, 2, 3, 4, 5}),
}


@dataclass(frozen=True)
class TrainConfig:
    weights: LossWeights = field(default_factory=LossWeights)
    itr: int = 45000
    fair_start: int = 15000
    thresh: int = 30000
    lr_main: float = 1e-4
    lr_swd: float = 1e-5
    batch_size: int = 128
    K: int = 50
    seed: int = 0
    eval_every: int = 500
    optimizer: str = "adam"
    ablation: str = "full"
    latent_dim: int = 20
    activation: str = "relu"
    val_fraction: float = 0.2
    swd_order: int = 2
    guard_frozen: bool = False

    def __post_init__(self):
        if not 0 <= self.fair_start <= self.thresh <= self.itr:
            raise ConfigError(
                f"need 0 <= fair_start <= thresh <= itr, got "
                f"{self.fair_start}, {self.thresh}, {self.itr}"
            )
        if not (self.lr_main > 0 and self.lr_swd > 0):
            raise ConfigError("learning rates must be positive")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"ablation must be one of {sorted(ABLATIONS)}, got {self.ablation!r}")
        if self.activation not in ("relu", "identity"):
            raise ConfigError(f"activation must be relu or identity, got {self.activation!r}")
        if self.swd_order not in (1, 2):
            raise ConfigError(f"swd_order must be 1 or 2, got {self.swd_order}")

    @property
    def steps(self) -> frozenset:
        return ABLATIONS[self.ablation]

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


# ---------------------------------------------------------------------------
# single optimization steps


def _run(model: FairModel, loss_fn, opt, trainable: tuple[str, ...]) -> float:
    model.set_trainable(*trainable)
    with Tape() as tape:
        loss = loss_fn()
    backward(loss, tape)
    opt.step()
    model.set_trainable()
    return loss.item()


def step_task(model: FairModel, batch, opt, weight: float = 1.0) -> float:
    """Minimize ``weight * task_loss`` over (u, v)."""
    return _run(model, lambda: scale(task_loss(model, batch), weight), opt, ("u", "v"))


def step_fair_adversary(model: FairModel, batch, opt, weight: float = 1.0) -> float:
    """Minimize ``weight * fairness_loss`` over w with the encoder frozen."""
    return _run(model, lambda: scale(fairness_loss(model, batch), weight), opt, ("w",))


def step_fair_encoder(model: FairModel, batch, opt, weight: float = 1.0) -> float:
    """Maximize ``weight * fairness_loss`` over u with both heads frozen.

    Returns the (positive) fairness loss before the step.
    """
    return -_run(model, lambda: scale(fairness_loss(model, batch), -weight), opt, ("u",))


def step_align(model: FairModel, source_batch, target_batch, opt, K: int, rng,
               weight: float = 1.0, order: int = 2) -> float:
    """Minimize ``weight * swd_loss`` between source and target over u."""
    return _run(
        model,
        lambda: scale(swd_loss(model, source_batch, target_batch, K, rng, order), weight),
        opt, ("u",),
    )


# ---------------------------------------------------------------------------
# checkpoints and selection


@dataclass
class CheckpointRecord:
    iteration: int
    params: dict
    val_acc: float
    dp_tar: Optional[float]
    score: float
    degenerate: bool
    dp_src: Optional[float] = None


def evaluate_checkpoint(model: FairModel, validation: DomainDataset, target: DomainDataset,
                        iteration: int = 0) -> CheckpointRecord:
    """Validation balanced accuracy and target demographic parity.

    Only ``target.X`` and ``target.a`` are used; the target labels stay unread.
    """
    val_pred = predict(model, validation.X, validation.a)
    tar_pred = predict(model, target.X, target.a)
    val_acc = balanced_accuracy(val_pred, validation.y)
    dp_tar = delta_dp(tar_pred, target.a)
    score = val_acc - (dp_tar if dp_tar is not None else 0.0)
    return CheckpointRecord(
        iteration=iteration,
        params=model.snapshot(),
        val_acc=val_acc,
        dp_tar=dp_tar,
        score=score,
        degenerate=is_degenerate(tar_pred),
        dp_src=delta_dp(val_pred, validation.a),
    )


def select_checkpoint(records: list[CheckpointRecord], min_iteration: int = 0):
    """Best selection score among non-degenerate records from ``min_iteration`` on.

    Returns ``(record, all_degenerate)``. Ties go to the earliest checkpoint.
    """
    pool = [r for r in records if r.iteration > min_iteration] or list(records)
    if not pool:
        raise ValueError("no checkpoints to select from")
    healthy = [r for r in pool if not r.degenerate]
    candidates = healthy or pool
    best = max(candidates, key=lambda r: (r.score, -r.iteration))
    return best, not healthy


# ---------------------------------------------------------------------------
# training loop


class BatchStream:
    """Mini-batches from per-epoch random permutations of ``range(N)``."""

    def __init__(self, N: int, batch_size: int, rng: np.random.Generator):
        self.N = N
        self.batch_size = min(batch_size, N)
        self.rng = rng
        self._perm = rng.permutation(N)
        self._pos = 0

    def next(self) -> np.ndarray:
        if self._pos + self.batch_size > self.N:
            self._perm = self.rng.permutation(self.N)
            self._pos = 0
        idx = self._perm[self._pos:self._pos + self.batch_size]
        self._pos += self.batch_size
        return idx


CURVE_FIELDS = [
    "iteration", "task_loss", "fair_loss_src", "fair_loss_tar", "swd",
    "val_acc", "dp_src", "dp_tar",
]


@dataclass
class FitResult:
    model: FairModel
    selected: CheckpointRecord
    all_degenerate: bool
    checkpoints: list
    curves: list
    counters: dict
    target_label_reads: int
    freeze_checks: int = 0
    freeze_violations: int = 0


def _window_mean(values: list) -> float:
    return float(np.mean(values)) if values else math.nan


def fair_adapt(config: TrainConfig, source: DomainDataset, target: DomainDataset) -> FitResult:
    """Train on ``source`` and adapt to the unlabeled ``target``.

    The source is split into train/validation parts; checkpoints are scored
    every ``eval_every`` iterations and the best adaptation-phase checkpoint
    is returned.
    """
    if source.n != target.n:
        raise ConfigError(f"feature widths differ: source {source.n}, target {target.n}")
    reads_before = target.label_reads
    steps = config.steps
    w = config.weights

    ss = np.random.SeedSequence(config.seed)
    init_ss, part_ss, src_ss, tar_ss, swd_ss = ss.spawn(5)
    model = init_model(source.n, config.latent_dim,
                       int(init_ss.generate_state(1)[0]), config.activation)
    train, val = train_val_partition(source, config.val_fraction,
                                     int(part_ss.generate_state(1)[0]))
    src_stream = BatchStream(train.N, config.batch_size, np.random.default_rng(src_ss))
    tar_stream = BatchStream(target.N, config.batch_size, np.random.default_rng(tar_ss))
    swd_rng = np.random.default_rng(swd_ss)
    train_X, train_a, train_y = train.X, train.a, train.y
    target_X, target_a = target.X, target.a

    def opt(params, lr):
        return make_optimizer(config.optimizer, params, lr)

    opts = {
        "task": opt(model.params("u", "v"), config.lr_main),
        "adv_src": opt(model.params("w"), config.lr_main),
        "enc_src": opt(model.params("u"), config.lr_main),
        "swd": opt(model.params("u"), config.lr_swd),
        "adv_tar": opt(model.params("w"), config.lr_main),
        "enc_tar": opt(model.params("u"), config.lr_main),
    }

    counters = dict(task_steps=0, fair_src_steps=0, fair_tar_steps=0, swd_steps=0,
                    target_batches=0, first_fair_itr=None, first_target_itr=None)
    audit = {"checks": 0, "violations": 0}

    def guarded(frozen, fn, *args, **kwargs):
        if not config.guard_frozen:
            return fn(*args, **kwargs)
        before = [t.data.copy() for t in model.params(*frozen)]
        out = fn(*args, **kwargs)
        audit["checks"] += 1
        for old, t in zip(before, model.params(*frozen)):
            if not np.array_equal(old, t.data):
                audit["violations"] += 1
        return out

    window = {k: [] for k in ("task", "fair_src", "fair_tar", "swd")}
    checkpoints: list[CheckpointRecord] = []
    curves: list[dict] = []

    for itr in range(config.itr):
        idx = src_stream.next()
        sb = (train_X[idx], train_a[idx], train_y[idx])

        window["task"].append(
            guarded(("w",), step_task, model, sb, opts["task"], w.alpha))

        if itr >= config.fair_start and steps & {2, 3}:
            if counters["first_fair_itr"] is None:
                counters["first_fair_itr"] = itr
            if 2 in steps:
                window["fair_src"].append(
                    guarded(("u", "v"), step_fair_adversary, model, sb, opts["adv_src"], w.beta))
            if 3 in steps:
                guarded(("v", "w"), step_fair_encoder, model, sb, opts["enc_src"], w.beta)
            counters["fair_src_steps"] += 1

        if itr >= config.thresh and steps & {4, 5}:
            tidx = tar_stream.next()
            tb = (target_X[tidx], target_a[tidx])
            counters["target_batches"] += 1
            if counters["first_target_itr"] is None:
                counters["first_target_itr"] = itr
            if 4 in steps:
                window["swd"].append(guarded(
                    ("v", "w"), step_align, model, sb, tb, opts["swd"], config.K,
                    swd_rng, w.gamma, config.swd_order))
                counters["swd_steps"] += 1
            if 5 in steps:
                window["fair_tar"].append(
                    guarded(("u", "v"), step_fair_adversary, model, tb, opts["adv_tar"], w.beta))
                guarded(("v", "w"), step_fair_encoder, model, tb, opts["enc_tar"], w.beta)
                counters["fair_tar_steps"] += 1
        counters["task_steps"] += 1

        if (itr + 1) % config.eval_every == 0:
            rec = evaluate_checkpoint(model, val, target, itr + 1)
            checkpoints.append(rec)
            curves.append({
                "iteration": itr + 1,
                "task_loss": _window_mean(window["task"]),
                "fair_loss_src": _window_mean(window["fair_src"]),
                "fair_loss_tar": _window_mean(window["fair_tar"]),
                "swd": _window_mean(window["swd"]),
                "val_acc": rec.val_acc,
                "dp_src": rec.dp_src,
                "dp_tar": rec.dp_tar,
            })
            for v in window.values():
                v.clear()

    if not checkpoints:
        checkpoints.append(evaluate_checkpoint(model, val, target, config.itr))
    selected, all_degenerate = select_checkpoint(checkpoints, config.thresh)
    if all_degenerate:
        log.warning("seed %d: every candidate checkpoint is degenerate", config.seed)
    return FitResult(
        model=FairModel.from_arrays(selected.params, config.activation),
        selected=selected,
        all_degenerate=all_degenerate,
        checkpoints=checkpoints,
        curves=curves,
        counters=counters,
        target_label_reads=target.label_reads - reads_before,
        freeze_checks=audit["checks"],
        freeze_violations=audit["violations"],
    )


# ---------------------------------------------------------------------------
# repeated runs


DEGENERATE_REPORT = dict(balanced_accuracy=0.5, delta_dp=1.0, delta_eo=1.0, delta_ao=1.0)


@dataclass
class RunOutcome:
    seed: int
    fit: FitResult
    report: EvalReport


@dataclass
class RepeatedResult:
    runs: list
    aggregate: EvalReport
    n_used: int


def _one_run(config: TrainConfig, source: DomainDataset, target: DomainDataset) -> RunOutcome:
    fit = fair_adapt(config, source, target)
    # reporting only: the single place target labels are read
    report = evaluate(predict(fit.model, target.X, target.a), target.y, target.a)
    return RunOutcome(config.seed, fit, report)


def _mean(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def aggregate_reports(reports: list[EvalReport]) -> tuple[EvalReport, int]:
    """Mean over non-degenerate reports; all-degenerate gives the fixed degenerate row."""
    used = [r for r in reports if not r.degenerate]
    if not used:
        counts = dict(reports[0].group_counts) if reports else {}
        return EvalReport(**DEGENERATE_REPORT, group_counts=counts, degenerate=True), 0
    return EvalReport(
        balanced_accuracy=_mean(r.balanced_accuracy for r in used),
        delta_dp=_mean(r.delta_dp for r in used),
        delta_eo=_mean(r.delta_eo for r in used),
        delta_ao=_mean(r.delta_ao for r in used),
        group_counts=dict(used[0].group_counts),
        single_class=any(r.single_class for r in used),
    ), len(used)


def run_repeated(config: TrainConfig, source: DomainDataset, target: DomainDataset,
                 runs: int = 7, workers: int = 1) -> RepeatedResult:
    """``runs`` independent trainings with seeds ``seed, seed+1, ...``, aggregated."""
    if runs < 1:
        raise ConfigError(f"runs must be >= 1, got {runs}")
    configs = [replace(config, seed=config.seed + i) for i in range(runs)]
    if workers > 1 and runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_one_run, configs, [source] * runs, [target] * runs))
    else:
        outcomes = [_one_run(c, source, target) for c in configs]
    aggregate, n_used = aggregate_reports([o.report for o in outcomes])
    return RepeatedResult(outcomes, aggregate, n_used)
