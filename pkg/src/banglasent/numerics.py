"""Dense numeric core: activations, losses, initialization, gradient checking.

Matrices are plain numpy float64 arrays throughout; numpy supplies the
storage and BLAS product while this module owns the numeric contracts
(stability, clamping, exact error formulas) the rest of the package and its
tests rely on.
"""

from __future__ import annotations

import enum
import math
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "EPS",
    "LossKind",
    "matmul",
    "sigmoid",
    "tanh_m",
    "softmax",
    "binary_crossentropy",
    "categorical_crossentropy",
    "init_params",
    "grad_check",
]

# Probabilities are clamped to [EPS, 1 - EPS] before any log, so both losses
# are total functions bounded by -ln(EPS).
EPS = 1e-7


class LossKind(enum.Enum):
    BINARY_CROSSENTROPY = "binary_crossentropy"
    CATEGORICAL_CROSSENTROPY = "categorical_crossentropy"

    def check_head(self, n_out: int) -> None:
        """Binary pairs only with a 1-node head, categorical with >= 2 nodes."""
        if self is LossKind.BINARY_CROSSENTROPY and n_out != 1:
            raise ValueError(f"binary cross-entropy needs n_out=1, got {n_out}")
        if self is LossKind.CATEGORICAL_CROSSENTROPY and n_out < 2:
            raise ValueError(
                f"categorical cross-entropy needs n_out>=2, got {n_out}"
            )


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


def sigmoid(x):
    """Logistic function 1 / (1 + e^-x), stable for |x| up to 700."""
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    expx = np.exp(arr[~pos])
    out[~pos] = expx / (1.0 + expx)
    return out if out.ndim else float(out)


def tanh_m(x):
    """Elementwise hyperbolic tangent."""
    out = np.tanh(np.asarray(x, dtype=np.float64))
    return out if out.ndim else float(out)


def softmax(logits, axis: int = -1) -> np.ndarray:
    """Max-subtracted softmax along ``axis``; rows sum to 1 within 1e-12."""
    arr = np.asarray(logits, dtype=np.float64)
    if arr.shape[axis] < 2:
        raise ValueError(
            f"softmax needs at least 2 entries along axis {axis}, "
            f"got shape {arr.shape}"
        )
    shifted = arr - arr.max(axis=axis, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=axis, keepdims=True)


def clamp_prob(p):
    """Clamp probabilities into [EPS, 1 - EPS] ahead of a log."""
    return np.clip(p, EPS, 1.0 - EPS)


def binary_crossentropy(p: float, y: int) -> float:
    """-[y ln p + (1-y) ln(1-p)] with the probability clamped first."""
    if y not in (0, 1):
        raise ValueError(f"binary label must be 0 or 1, got {y}")
    q = float(clamp_prob(p))
    return -(y * math.log(q) + (1 - y) * math.log(1.0 - q))


def categorical_crossentropy(dist, y: int) -> float:
    """-ln dist[y] with the selected probability clamped first."""
    dist = np.asarray(dist, dtype=np.float64)
    if not 0 <= y < dist.shape[-1]:
        raise ValueError(
            f"class index {y} out of range for {dist.shape[-1]} classes"
        )
    return -math.log(float(clamp_prob(dist[y])))


def init_params(shape: tuple[int, ...], seed: int) -> np.ndarray:
    """Glorot-uniform draw on [-L, L], L = sqrt(6 / (fan_in + fan_out))."""
    if any(dim < 1 for dim in shape):
        raise ValueError(f"dimensions must be positive, got {shape}")
    fan_in = shape[0]
    fan_out = shape[1] if len(shape) > 1 else shape[0]
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    rng = np.random.default_rng(seed)
    return rng.uniform(-limit, limit, size=shape)


def grad_check(
    f: Callable[[], float],
    params: Mapping[str, np.ndarray],
    analytic_grads: Mapping[str, np.ndarray],
    eps: float = 1e-5,
) -> float:
    """Max relative error between analytic gradients and central differences.

    ``f`` is evaluated at the current contents of the arrays in ``params``;
    each coordinate is perturbed in place by +-eps and restored. The relative
    error per coordinate is ``|a - n| / max(1e-8, |a| + |n|)``.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    worst = 0.0
    for name, tensor in params.items():
        analytic = np.asarray(analytic_grads[name], dtype=np.float64)
        if analytic.shape != tensor.shape:
            raise ValueError(
                f"{name}: gradient shape {analytic.shape} != {tensor.shape}"
            )
        flat = tensor.reshape(-1)
        grad_flat = analytic.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            f_plus = f()
            flat[idx] = orig - eps
            f_minus = f()
            flat[idx] = orig
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise FloatingPointError(
                    f"non-finite objective while probing {name}[{idx}]"
                )
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = grad_flat[idx]
            rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, rel)
    return worst
