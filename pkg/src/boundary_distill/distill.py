"""Boundary-aware distillation: fused targets plus noisy-input distillation.

Two ideas combine here. First, the learning target for each new sample is a
fusion of its one-hot label with the teacher's prediction, which tempers how
hard a sample can drag the decision boundary. Second, a copy of the batch is
scattered with strong Gaussian noise after normalization; on those perturbed
points the student is pulled toward the teacher's outputs, which anchors the
boundary in regions the new samples do not cover.

The teacher is a constant in this module: its outputs enter the loss as
fixed targets and no gradient ever flows into teacher parameters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import NormStats
from .network import (
    PROB_FLOOR,
    NetworkSpec,
    backward,
    cross_entropy_rows,
    forward,
    one_hot,
    softmax,
    validate_distribution,
)

FUSE_VARIANTS = ("literal", "tempered_softmax")
TARGET_RULES = ("one_hot", "teacher", "fused")


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian perturbation applied to normalized inputs.

    mu is the noise mean, delta its standard deviation in standardized
    feature units. delta is deliberately large compared to typical
    augmentation noise; the point is to relocate samples, not to jitter
    them.
    """

    mu: float = 0.0
    delta: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class FuseConfig:
    """How a one-hot label and a teacher prediction are fused.

    variant "literal" renormalizes y + p_t directly; since both terms sum
    to one this is exactly (y + p_t)/2 and any temperature cancels.
    variant "tempered_softmax" applies softmax((y + p_t)/tau) instead,
    where tau genuinely changes the result.
    """

    tau: float = 1.0
    variant: str = "literal"

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.variant not in FUSE_VARIANTS:
            raise ValueError(f"variant must be one of {FUSE_VARIANTS}, got {self.variant!r}")


@dataclass(frozen=True)
class LabelAssignment:
    """Target rule per region: samples the teacher already gets right
    (inner) vs. samples it misclassifies (outer). Default fuses both."""

    inner: str = "fused"
    outer: str = "fused"

    def __post_init__(self) -> None:
        for field_name, rule in (("inner", self.inner), ("outer", self.outer)):
            if rule not in TARGET_RULES:
                raise ValueError(
                    f"{field_name} target must be one of {TARGET_RULES}, got {rule!r}"
                )

    @property
    def uniform_rule(self) -> str | None:
        """The single rule if inner and outer agree, else None."""
        return self.inner if self.inner == self.outer else None


@dataclass(frozen=True)
class DistillLossTerms:
    """Loss decomposition: total = learn_term + weight * distill_term."""

    learn_term: float
    distill_term: float
    weight: float

    @property
    def total(self) -> float:
        return self.learn_term + self.weight * self.distill_term


def fuse_labels(label_dist: np.ndarray, teacher_probs: np.ndarray, config: FuseConfig) -> np.ndarray:
    """Fuse one one-hot label with one teacher prediction."""
    y = np.asarray(label_dist, dtype=np.float64)
    p = np.asarray(teacher_probs, dtype=np.float64)
    if y.shape != p.shape or y.ndim != 1:
        raise ValueError(f"expected matching 1-d vectors, got {y.shape} vs {p.shape}")
    _validate_one_hot(y)
    validate_distribution(p, name="teacher prediction")
    return _fuse_rows(y[None, :], p[None, :], config)[0]


def fuse_labels_batch(labels_one_hot: np.ndarray, teacher_probs: np.ndarray, config: FuseConfig) -> np.ndarray:
    """Row-wise label fusion for a batch."""
    y = np.asarray(labels_one_hot, dtype=np.float64)
    p = np.asarray(teacher_probs, dtype=np.float64)
    if y.shape != p.shape or y.ndim != 2:
        raise ValueError(f"expected matching 2-d arrays, got {y.shape} vs {p.shape}")
    return _fuse_rows(y, p, config)


def _fuse_rows(y: np.ndarray, p: np.ndarray, config: FuseConfig) -> np.ndarray:
    merged = y + p
    if config.variant == "literal":
        # Both addends are distributions, so each row of `merged` sums to 2.
        return merged / merged.sum(axis=1, keepdims=True)
    return softmax(merged / config.tau)


def _validate_one_hot(y: np.ndarray) -> None:
    ones = y == 1.0
    zeros = y == 0.0
    if not (ones | zeros).all() or ones.sum() != 1:
        raise ValueError(f"label distribution must be one-hot, got {y!r}")


def perturb_inputs(
    batch: np.ndarray,
    norm_stats: NormStats,
    noise: NoiseSpec,
    rng: np.random.Generator | None = None,
    zero_noise: bool = False,
) -> np.ndarray:
    """Normalize the batch and add elementwise Gaussian noise.

    Normalization subtracts norm_stats.mean and divides by norm_stats.std
    per feature (stats must come from the base-phase training data). The
    result is NOT clipped to the data range: points escaping the data
    manifold are the point of the exercise.

    `zero_noise=True` is a test hook that skips the draw entirely, so the
    output equals the normalized batch exactly. Otherwise draws come from
    `rng` when given, else from a fresh generator seeded with noise.seed.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("batch must be 2-d")
    std = np.asarray(norm_stats.std, dtype=np.float64)
    if (std == 0).any():
        warnings.warn(
            f"{int((std == 0).sum())} feature(s) have zero std; using 1.0 for them",
            RuntimeWarning,
            stacklevel=2,
        )
        std = np.where(std == 0, 1.0, std)
    normalized = (x - np.asarray(norm_stats.mean, dtype=np.float64)) / std
    if zero_noise:
        return normalized
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    return normalized + rng.normal(noise.mu, noise.delta, size=x.shape)


def classify_inner_outer(teacher_probs: np.ndarray, label_one_hot: np.ndarray) -> str:
    """"inner" when the teacher's argmax matches the label, else "outer".

    Ties resolve to the lowest class index (numpy argmax convention).
    Diagnostic only; the default loss fuses labels for every sample.
    """
    p = np.asarray(teacher_probs, dtype=np.float64)
    y = np.asarray(label_one_hot, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError(f"expected matching 1-d vectors, got {p.shape} vs {y.shape}")
    _validate_one_hot(y)
    validate_distribution(p, name="teacher prediction")
    return "inner" if int(np.argmax(p)) == int(np.argmax(y)) else "outer"


def inner_mask(teacher_probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Boolean mask of rows where the teacher already predicts the label."""
    return np.argmax(teacher_probs, axis=1) == np.asarray(labels)


def _targets_from_teacher(
    teacher_params: np.ndarray,
    spec: NetworkSpec,
    batch: np.ndarray,
    perturbed: np.ndarray | None,
    labels: np.ndarray,
    fuse: FuseConfig,
    assign: LabelAssignment,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Fixed targets for both loss terms, computed from the frozen teacher.

    Returns (clean_targets, perturbed_targets); the second is None when no
    perturbed batch is supplied (weight 0 fast path).
    """
    labels_hot = one_hot(labels, spec.num_classes)
    rule = assign.uniform_rule
    if rule == "one_hot":
        clean_targets = labels_hot
    else:
        teacher_clean, _ = forward(teacher_params, spec, batch)
        if rule == "teacher":
            clean_targets = teacher_clean
        elif rule == "fused":
            clean_targets = fuse_labels_batch(labels_hot, teacher_clean, fuse)
        else:
            fused = fuse_labels_batch(labels_hot, teacher_clean, fuse)
            pick = {"one_hot": labels_hot, "teacher": teacher_clean, "fused": fused}
            mask = inner_mask(teacher_clean, labels)
            clean_targets = np.where(mask[:, None], pick[assign.inner], pick[assign.outer])
    if perturbed is None:
        return clean_targets, None
    teacher_perturbed, _ = forward(teacher_params, spec, perturbed)
    return clean_targets, teacher_perturbed


def _student_objective(
    student_params: np.ndarray,
    spec: NetworkSpec,
    batch: np.ndarray,
    perturbed: np.ndarray | None,
    clean_targets: np.ndarray,
    perturbed_targets: np.ndarray | None,
    weight: float,
) -> tuple[DistillLossTerms, np.ndarray]:
    """Loss terms and student gradient for fixed (teacher-derived) targets."""
    probs, cache = forward(student_params, spec, batch)
    n = probs.shape[0]
    learn = float(cross_entropy_rows(clean_targets, probs).mean())
    dprobs = -(clean_targets / np.clip(probs, PROB_FLOOR, 1.0)) / n
    grad = backward(student_params, spec, cache, dprobs)

    distill = 0.0
    if perturbed is not None and perturbed_targets is not None:
        probs_p, cache_p = forward(student_params, spec, perturbed)
        distill = float(cross_entropy_rows(perturbed_targets, probs_p).mean())
        if weight != 0.0:
            dprobs_p = -weight * (perturbed_targets / np.clip(probs_p, PROB_FLOOR, 1.0)) / n
            grad = grad + backward(student_params, spec, cache_p, dprobs_p)
    return DistillLossTerms(learn_term=learn, distill_term=distill, weight=weight), grad


def distillation_loss(
    student_params: np.ndarray,
    teacher_params: np.ndarray,
    spec: NetworkSpec,
    batch: np.ndarray,
    labels: np.ndarray,
    norm_stats: NormStats,
    noise: NoiseSpec,
    fuse: FuseConfig,
    weight: float,
    assign: LabelAssignment | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[DistillLossTerms, np.ndarray]:
    """Combined loss and its gradient with respect to the student only.

    learn_term:   mean cross-entropy between fused targets and student
                  predictions on the clean batch.
    distill_term: mean cross-entropy between teacher and student
                  predictions on the noise-perturbed batch.
    total:        learn_term + weight * distill_term.

    Teacher outputs are constants; the returned gradient has student
    length and no component for teacher parameters. When weight is 0 the
    perturbed pass is skipped entirely (no noise is drawn), which is what
    makes the fine-tuning collapse ablation exact.
    """
    if assign is None:
        assign = LabelAssignment()
    if weight < 0:
        raise ValueError(f"distillation weight must be >= 0, got {weight}")
    x = np.asarray(batch, dtype=np.float64)
    perturbed = None
    if weight != 0.0:
        perturbed = perturb_inputs(x, norm_stats, noise, rng=rng)
    clean_targets, perturbed_targets = _targets_from_teacher(
        teacher_params, spec, x, perturbed, labels, fuse, assign
    )
    return _student_objective(
        student_params, spec, x, perturbed, clean_targets, perturbed_targets, weight
    )
