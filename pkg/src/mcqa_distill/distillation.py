"""Losses and the training loop for the student scorer.

Three loss modes:

* ``generate``: cross-entropy against the one-hot generated label.
* ``distill``: cross-entropy against teacher scores softened at temperature
  r, with the student's softmax at the same temperature; r = 0 degenerates to
  hard teacher-argmax labels with the student at temperature 1 (a labeling
  change, not a student change, so the loss stays differentiable).
* ``binary_bce``: per-pair sigmoid cross-entropy where a pair is labeled 1
  iff the choice is the gold one.

The cross-entropy carries a 1/C factor (C = number of choices). That factor
rescales gradients but not the argmin; pass ``average_over_choices=False`` to
``ce_loss`` to drop it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import McqaInstance, SoftLabel
from .scoring import soften

PROB_FLOOR = 1e-12
LOGIT_CLAMP = 30.0
ENCODER_PARITY_LR = 1e-5

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

LOSS_MODES = ("generate", "distill", "binary_bce")


class MissingTeacherScores(ValueError):
    """Distillation needs teacher_scores on every instance."""


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 500
    micro_batch: int = 4
    grad_accumulation: int = 2
    # None resolves to the student's recommended rate, falling back to the
    # encoder-parity value 1e-5.
    learning_rate: Optional[float] = None
    optimizer: str = "adam"
    loss_mode: str = "generate"
    distill_temperature_r: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1 or self.micro_batch < 1 or self.grad_accumulation < 1:
            raise ValueError("iterations, micro_batch and grad_accumulation must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"unknown loss mode {self.loss_mode!r}")
        if self.distill_temperature_r < 0:
            raise ValueError("distillation temperature must be >= 0")

    def resolve_learning_rate(self, student) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return getattr(student, "recommended_learning_rate", ENCODER_PARITY_LR)


@dataclass
class TrainResult:
    """Per-step mean losses plus the exact number of instance visits."""

    losses: List[float] = field(default_factory=list)
    instance_visits: int = 0


def one_hot(index: int, length: int) -> SoftLabel:
    probs = [0.0] * length
    probs[index] = 1.0
    return SoftLabel(tuple(probs))


def _probs(label) -> np.ndarray:
    if isinstance(label, SoftLabel):
        return np.asarray(label.probs, dtype=np.float64)
    return np.asarray(label, dtype=np.float64)


def ce_loss(target, pred, average_over_choices: bool = True) -> float:
    """Cross-entropy -(1/C) * sum(p * log(p_hat)), with 0 * log(0) = 0.

    Predicted probabilities are floored at 1e-12 before the log so the loss
    stays finite for degenerate predictions.
    """
    p = _probs(target)
    q = _probs(pred)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: target {p.shape} vs pred {q.shape}")
    logq = np.log(np.maximum(q, PROB_FLOOR))
    total = -float(np.sum(np.where(p > 0, p * logq, 0.0)))
    return total / p.size if average_over_choices else total


def predict_probs(student, inst: McqaInstance, r: float) -> SoftLabel:
    """Student probabilities: softmax of the per-choice logits at temperature r."""
    if r <= 0:
        raise ValueError("student temperature must be > 0")
    logits = [student.forward(inst.question, choice) for choice in inst.choices]
    return soften(logits, r)


def _hard_target_loss(student, inst: McqaInstance, target_index: int) -> float:
    # Shared float path for l_generate and l_distill at r = 0.
    return ce_loss(one_hot(target_index, inst.num_choices), predict_probs(student, inst, 1.0))


def l_generate(student, inst: McqaInstance) -> float:
    """Cross-entropy against the generated (one-hot) label."""
    return _hard_target_loss(student, inst, inst.answer_index)


def teacher_soft_label(inst: McqaInstance, r: float) -> SoftLabel:
    if inst.teacher_scores is None:
        raise MissingTeacherScores(f"instance {inst.id} has no teacher scores")
    return soften(inst.teacher_scores, r)


def l_distill(student, inst: McqaInstance, r: float) -> float:
    """Cross-entropy against the teacher's softened scores.

    Temperature r divides both the teacher scores and the student logits.
    r = 0 uses the teacher argmax as a hard label (student at temperature 1),
    which equals l_generate on the relabeled instance exactly.
    """
    if inst.teacher_scores is None:
        raise MissingTeacherScores(f"instance {inst.id} has no teacher scores")
    if r < 0:
        raise ValueError("distillation temperature must be >= 0")
    if r == 0:
        target_index = teacher_soft_label(inst, 0.0).argmax()
        return _hard_target_loss(student, inst, target_index)
    return ce_loss(teacher_soft_label(inst, r), predict_probs(student, inst, r))


def binary_bce_loss(student, question: str, choice: str, label: int) -> float:
    """Sigmoid cross-entropy on one (question, choice) pair, logit clamped to +-30."""
    z = float(np.clip(student.forward(question, choice), -LOGIT_CLAMP, LOGIT_CLAMP))
    # -[y*log(sigmoid) + (1-y)*log(1-sigmoid)] via logaddexp for stability.
    return float(label * np.logaddexp(0.0, -z) + (1 - label) * np.logaddexp(0.0, z))


def _softmax_mode_pieces(student, inst: McqaInstance, mode: str, r: float):
    """(target probs, student temperature) for the generate/distill modes."""
    if mode == "generate":
        return _probs(one_hot(inst.answer_index, inst.num_choices)), 1.0
    if inst.teacher_scores is None:
        raise MissingTeacherScores(f"instance {inst.id} has no teacher scores")
    if r == 0:
        target_index = teacher_soft_label(inst, 0.0).argmax()
        return _probs(one_hot(target_index, inst.num_choices)), 1.0
    return _probs(teacher_soft_label(inst, r)), r


def instance_loss(student, inst: McqaInstance, mode: str, r: float = 1.0) -> float:
    """Loss of one instance under a mode (binary mode averages its C pairs)."""
    if mode == "generate":
        return l_generate(student, inst)
    if mode == "distill":
        return l_distill(student, inst, r)
    if mode == "binary_bce":
        losses = [
            binary_bce_loss(student, inst.question, choice, int(i == inst.answer_index))
            for i, choice in enumerate(inst.choices)
        ]
        return float(np.mean(losses))
    raise ValueError(f"unknown loss mode {mode!r}")


def _accumulate_instance_grad(
    grad: np.ndarray, student, inst: McqaInstance, mode: str, r: float, scale: float
) -> float:
    """Add ``scale`` times the instance's loss gradient into ``grad``; return its loss."""
    n = inst.num_choices
    pairs = [student.logit_and_grad(inst.question, choice) for choice in inst.choices]
    logits = np.array([z for z, _ in pairs], dtype=np.float64)
    if mode in ("generate", "distill"):
        target, temp = _softmax_mode_pieces(student, inst, mode, r)
        probs = _probs(soften(logits, temp))
        # d/dz of -(1/C) sum(p*log softmax(z/t)) is (softmax - p) / (C*t).
        coeffs = (probs - target) / (n * temp)
        loss = ce_loss(target, probs)
    elif mode == "binary_bce":
        labels = np.array(
            [1.0 if i == inst.answer_index else 0.0 for i in range(n)], dtype=np.float64
        )
        clamped = np.clip(logits, -LOGIT_CLAMP, LOGIT_CLAMP)
        sig = 1.0 / (1.0 + np.exp(-clamped))
        active = (np.abs(logits) < LOGIT_CLAMP).astype(np.float64)
        coeffs = (sig - labels) * active / n
        per_pair = labels * np.logaddexp(0.0, -clamped) + (1 - labels) * np.logaddexp(
            0.0, clamped
        )
        loss = float(np.mean(per_pair))
    else:
        raise ValueError(f"unknown loss mode {mode!r}")
    for coeff, (_, (idx, val)) in zip(coeffs, pairs):
        if coeff != 0.0 and idx.size:
            np.add.at(grad, idx, scale * coeff * val)
    return float(loss)


def batch_loss(student, batch: Sequence[McqaInstance], mode: str, r: float = 1.0) -> float:
    if not batch:
        raise ValueError("batch must not be empty")
    return float(np.mean([instance_loss(student, inst, mode, r) for inst in batch]))


def batch_loss_and_gradient(
    student, batch: Sequence[McqaInstance], mode: str, r: float = 1.0
) -> Tuple[float, np.ndarray]:
    """Mean loss and mean parameter gradient over a batch."""
    if not batch:
        raise ValueError("batch must not be empty")
    grad = np.zeros_like(student.params)
    scale = 1.0 / len(batch)
    losses = [
        _accumulate_instance_grad(grad, student, inst, mode, r, scale) for inst in batch
    ]
    return float(np.mean(losses)), grad


def gradient(student, batch: Sequence[McqaInstance], mode: str, r: float = 1.0) -> np.ndarray:
    """Mean per-instance loss gradient with respect to the student parameters."""
    return batch_loss_and_gradient(student, batch, mode, r)[1]


def train(student, dataset: Sequence[McqaInstance], cfg: TrainConfig):
    """Run cfg.iterations optimizer steps over the dataset.

    Each step accumulates gradients over ``grad_accumulation`` micro-batches
    of ``micro_batch`` instances before one parameter update (micro_batch 4
    with accumulation 2 behaves like batch size 8). Instances are drawn by
    cycling a seeded shuffle, reshuffled each epoch, so identical seeds give
    identical final parameters. Returns (student, TrainResult).
    """
    instances = list(dataset)
    if not instances:
        raise ValueError("training dataset is empty")
    lr = cfg.resolve_learning_rate(student)
    rng = np.random.default_rng(cfg.seed)
    order: List[int] = []
    cursor = 0

    def next_instance() -> McqaInstance:
        nonlocal order, cursor
        if cursor >= len(order):
            order = list(rng.permutation(len(instances)))
            cursor = 0
        inst = instances[order[cursor]]
        cursor += 1
        return inst

    params = student.params
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    result = TrainResult()
    for step in range(1, cfg.iterations + 1):
        grad_sum = np.zeros_like(params)
        loss_sum = 0.0
        for _ in range(cfg.grad_accumulation):
            batch = [next_instance() for _ in range(cfg.micro_batch)]
            result.instance_visits += len(batch)
            loss, grad = batch_loss_and_gradient(
                student, batch, cfg.loss_mode, cfg.distill_temperature_r
            )
            grad_sum += grad
            loss_sum += loss
        grad = grad_sum / cfg.grad_accumulation
        result.losses.append(loss_sum / cfg.grad_accumulation)
        if cfg.optimizer == "sgd":
            params -= lr * grad
        else:
            m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
            v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad * grad
            m_hat = m / (1.0 - ADAM_BETA1**step)
            v_hat = v / (1.0 - ADAM_BETA2**step)
            params -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return student, result


def write_loss_trace(result: TrainResult, path) -> None:
    """Loss trace as CSV (step, loss)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for step, loss in enumerate(result.losses, start=1):
            fh.write(f"{step},{loss!r}\n")
