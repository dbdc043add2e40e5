"""Feedforward softmax classifier with exact analytic gradients.

All parameters live in one flat float64 vector with a fixed layout
(per layer: weight matrix in row-major order, then biases). The flat
layout is what lets teacher and student models be blended elementwise
during consolidation. Forward/backward are plain numpy; the backward
pass is validated against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Probabilities are clamped to this floor inside logs so that losses and
# loss gradients stay finite even for extremely confident predictions.
PROB_FLOOR = 1e-12

_ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture: (input dim, hidden widths..., num classes) + activation.

    The output layer is always a softmax over the fixed class set; the
    class count never changes between incremental phases.
    """

    layer_sizes: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError(
                f"layer_sizes needs at least (input_dim, num_classes), got {sizes}"
            )
        if any(s <= 0 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(
                f"activation must be one of {_ACTIVATIONS}, got {self.activation!r}"
            )

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @property
    def num_params(self) -> int:
        return sum((fi + 1) * fo for fi, fo in self.layer_dims)


@dataclass(frozen=True)
class ForwardCache:
    """Intermediate values of one forward pass, consumed by backward().

    activations[i] is the input to layer i (activations[0] is the batch);
    pre_activations[i] is the affine output of layer i before its
    nonlinearity (or before softmax for the last layer).
    """

    inputs: np.ndarray
    pre_activations: tuple[np.ndarray, ...]
    activations: tuple[np.ndarray, ...]
    probs: np.ndarray


def init_network(spec: NetworkSpec, seed: int) -> np.ndarray:
    """Deterministic flat parameter vector for the given architecture.

    Weights are uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
    """
    rng = np.random.default_rng(seed)
    parts: list[np.ndarray] = []
    for fan_in, fan_out in spec.layer_dims:
        bound = 1.0 / np.sqrt(fan_in)
        parts.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).ravel())
        parts.append(np.zeros(fan_out))
    return np.concatenate(parts)


def unpack_params(params: np.ndarray, spec: NetworkSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views of the flat vector as per-layer (W, b) pairs. No copies."""
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.size != spec.num_params:
        raise ValueError(
            f"parameter vector has {params.size} entries, spec wants {spec.num_params}"
        )
    layers = []
    offset = 0
    for fan_in, fan_out in spec.layer_dims:
        w = params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params[offset : offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    return layers


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by subtracting the row max."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: np.ndarray, spec: NetworkSpec, batch: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Class probabilities for a batch, plus the cache for backward().

    Rows are processed independently; each output row sums to 1.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(
            f"batch shape {np.shape(batch)} does not match input dim {spec.input_dim}"
        )
    layers = unpack_params(params, spec)
    activations = [x]
    pre_activations = []
    a = x
    for i, (w, b) in enumerate(layers):
        z = a @ w + b
        pre_activations.append(z)
        if i < len(layers) - 1:
            a = np.maximum(z, 0.0) if spec.activation == "relu" else np.tanh(z)
            activations.append(a)
    probs = softmax(pre_activations[-1])
    cache = ForwardCache(
        inputs=x,
        pre_activations=tuple(pre_activations),
        activations=tuple(activations),
        probs=probs,
    )
    return probs, cache


def soft_cross_entropy(target: np.ndarray, predicted: np.ndarray) -> float:
    """-sum_k target_k * log(predicted_k) for one distribution pair."""
    t = np.asarray(target, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError(f"expected matching 1-d distributions, got {t.shape} vs {p.shape}")
    return float(-(t * np.log(np.clip(p, PROB_FLOOR, 1.0))).sum())


def cross_entropy_rows(targets: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """Per-row soft cross-entropy for batched distributions."""
    t = np.asarray(targets, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if t.shape != p.shape or t.ndim != 2:
        raise ValueError(f"expected matching 2-d arrays, got {t.shape} vs {p.shape}")
    return -(t * np.log(np.clip(p, PROB_FLOOR, 1.0))).sum(axis=1)


def backward(
    params: np.ndarray,
    spec: NetworkSpec,
    cache: ForwardCache,
    dprobs: np.ndarray,
) -> np.ndarray:
    """Exact gradient of the scalar batch loss w.r.t. the flat parameters.

    `dprobs` is the gradient of the loss w.r.t. the output probabilities,
    one row per batch row (already scaled by any mean-reduction factor).
    """
    layers = unpack_params(params, spec)
    dprobs = np.asarray(dprobs, dtype=np.float64)
    p = cache.probs
    if dprobs.shape != p.shape:
        raise ValueError(f"dprobs shape {dprobs.shape} != probs shape {p.shape}")

    # Softmax Jacobian applied row-wise: dz = p*g - p*(sum_k p_k g_k).
    tmp = p * dprobs
    dz = tmp - p * tmp.sum(axis=1, keepdims=True)

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore[list-item]
    for i in range(len(layers) - 1, -1, -1):
        a_in = cache.activations[i]
        grads[i] = (a_in.T @ dz, dz.sum(axis=0))
        if i > 0:
            da = dz @ layers[i][0].T
            if spec.activation == "relu":
                dz = da * (cache.pre_activations[i - 1] > 0.0)
            else:
                dz = da * (1.0 - cache.activations[i] ** 2)

    flat = []
    for dw, db in grads:
        flat.append(dw.ravel())
        flat.append(db)
    return np.concatenate(flat)


def loss_and_grad(
    params: np.ndarray,
    spec: NetworkSpec,
    batch: np.ndarray,
    targets: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Mean soft cross-entropy over the batch and its parameter gradient."""
    probs, cache = forward(params, spec, batch)
    n = probs.shape[0]
    loss = float(cross_entropy_rows(targets, probs).mean())
    dprobs = -(np.asarray(targets, dtype=np.float64) / np.clip(probs, PROB_FLOOR, 1.0)) / n
    return loss, backward(params, spec, cache, dprobs)


def sgd_step(params: np.ndarray, gradient: np.ndarray, lr: float) -> np.ndarray:
    """One plain gradient-descent update: params - lr * gradient."""
    params = np.asarray(params, dtype=np.float64)
    gradient = np.asarray(gradient, dtype=np.float64)
    if params.shape != gradient.shape:
        raise ValueError(f"shape mismatch {params.shape} vs {gradient.shape}")
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    return params - lr * gradient


# --- label-distribution helpers -------------------------------------------


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """One-hot rows for integer class labels."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be 1-d")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def is_distribution(vec: np.ndarray, atol: float = 1e-9) -> bool:
    """True when entries lie in [0, 1] and sum to 1 within atol."""
    v = np.asarray(vec, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        return False
    return bool(
        (v >= -atol).all() and (v <= 1.0 + atol).all() and abs(v.sum() - 1.0) <= atol
    )


def validate_distribution(vec: np.ndarray, atol: float = 1e-9, name: str = "distribution") -> None:
    if not is_distribution(vec, atol=atol):
        raise ValueError(f"{name} is not a probability vector within {atol}: {vec!r}")
