"""Embedding -> dropout -> peephole LSTM -> dense head, with exact BPTT.

The cell follows the gate order input / forget / cell / output:

    i_t = sigmoid(x_t W_xi + h_{t-1} W_hi + c_{t-1} W_ci)
    f_t = sigmoid(x_t W_xf + h_{t-1} W_hf + c_{t-1} W_cf)
    c_t = f_t * c_{t-1} + i_t * tanh(x_t W_xc + h_{t-1} W_hc)
    o_t = sigmoid(x_t W_xo + h_{t-1} W_ho + c_* W_co)
    h_t = o_t * tanh(c_t)

Peephole weights are full hidden x hidden matrices, not the conventional
diagonal vectors. The output gate's peephole source ``c_*`` is the updated
cell by default (``peephole_cell='new'``, the standard formulation) or the
previous cell behind the ``'prev'`` flag. There are no bias terms unless the
optional ``use_bias`` flag is set; biases exist for training convenience
only and are excluded from the numeric oracles.

The classifier consumes only the final hidden state (return-last semantics)
and PAD ids flow through the recurrence like any other id, with no masking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numerics import EPS, LossKind, clamp_prob, init_params, sigmoid, softmax

__all__ = [
    "LstmParams",
    "ModelParams",
    "CellState",
    "ForwardCache",
    "init_model",
    "embed",
    "dropout_apply",
    "dropout_mask",
    "lstm_step",
    "lstm_forward",
    "head_forward",
    "model_forward",
    "model_loss",
    "model_backward",
    "predict_classes",
]

_GATE_TENSORS = (
    "w_xi", "w_hi", "w_ci",
    "w_xf", "w_hf", "w_cf",
    "w_xc", "w_hc",
    "w_xo", "w_ho", "w_co",
)
_BIAS_TENSORS = ("b_i", "b_f", "b_c", "b_o")


@dataclass
class LstmParams:
    """All cell weights. Input weights are (embed_dim, hidden); recurrent and
    peephole weights are (hidden, hidden)."""

    w_xi: np.ndarray
    w_hi: np.ndarray
    w_ci: np.ndarray
    w_xf: np.ndarray
    w_hf: np.ndarray
    w_cf: np.ndarray
    w_xc: np.ndarray
    w_hc: np.ndarray
    w_xo: np.ndarray
    w_ho: np.ndarray
    w_co: np.ndarray
    b_i: np.ndarray | None = None
    b_f: np.ndarray | None = None
    b_c: np.ndarray | None = None
    b_o: np.ndarray | None = None
    peephole_cell: str = "new"

    def __post_init__(self):
        if self.peephole_cell not in ("new", "prev"):
            raise ValueError(
                f"peephole_cell must be 'new' or 'prev', got {self.peephole_cell!r}"
            )
        embed_dim, hidden = self.w_xi.shape
        for name in _GATE_TENSORS:
            mat = getattr(self, name)
            want = (embed_dim, hidden) if name.startswith("w_x") else (hidden, hidden)
            if mat.shape != want:
                raise ValueError(f"{name} has shape {mat.shape}, expected {want}")
        for name in _BIAS_TENSORS:
            vec = getattr(self, name)
            if vec is not None and vec.shape != (hidden,):
                raise ValueError(f"{name} has shape {vec.shape}, expected ({hidden},)")

    @property
    def embed_dim(self) -> int:
        return self.w_xi.shape[0]

    @property
    def hidden(self) -> int:
        return self.w_xi.shape[1]

    @property
    def use_bias(self) -> bool:
        return self.b_i is not None

    def tensors(self) -> dict[str, np.ndarray]:
        out = {name: getattr(self, name) for name in _GATE_TENSORS}
        if self.use_bias:
            out.update({name: getattr(self, name) for name in _BIAS_TENSORS})
        return out


@dataclass
class ModelParams:
    """Full classifier parameters: embedding table, cell weights, dense head."""

    embedding: np.ndarray
    lstm: LstmParams
    head_w: np.ndarray
    head_b: np.ndarray
    n_out: int
    dropout_rate: float = 0.20

    def __post_init__(self):
        if self.n_out not in (1, 2, 3):
            raise ValueError(f"n_out must be 1, 2 or 3, got {self.n_out}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.embedding.shape[1] != self.lstm.embed_dim:
            raise ValueError("embedding width does not match the LSTM input width")
        if self.head_w.shape != (self.lstm.hidden, self.n_out):
            raise ValueError(
                f"head_w has shape {self.head_w.shape}, "
                f"expected ({self.lstm.hidden}, {self.n_out})"
            )
        if self.head_b.shape != (self.n_out,):
            raise ValueError(f"head_b has shape {self.head_b.shape}")

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        """All trainable tensors in a fixed, checkpoint-stable order."""
        out = {"embedding": self.embedding}
        out.update(self.lstm.tensors())
        out["head_w"] = self.head_w
        out["head_b"] = self.head_b
        return out

    def hyper(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "embed_dim": self.lstm.embed_dim,
            "hidden": self.lstm.hidden,
            "n_out": self.n_out,
            "dropout_rate": self.dropout_rate,
            "use_bias": self.lstm.use_bias,
            "peephole_cell": self.lstm.peephole_cell,
        }


@dataclass
class CellState:
    """Hidden and memory-cell vectors; |h| entries never exceed 1."""

    h: np.ndarray
    c: np.ndarray


def init_model(
    vocab_size: int,
    embed_dim: int = 128,
    hidden: int = 128,
    n_out: int = 1,
    seed: int = 0,
    dropout_rate: float = 0.20,
    use_bias: bool = False,
    peephole_cell: str = "new",
) -> ModelParams:
    """Glorot-initialized model; deterministic given the seed.

    Biases and the head bias start at zero.
    """
    names = ["embedding", *_GATE_TENSORS, "head_w"]
    seeds = dict(zip(names, np.random.SeedSequence(seed).generate_state(len(names))))
    shapes = {
        "embedding": (vocab_size, embed_dim),
        "head_w": (hidden, n_out),
    }
    for name in _GATE_TENSORS:
        shapes[name] = (embed_dim, hidden) if name.startswith("w_x") else (hidden, hidden)
    drawn = {n: init_params(shapes[n], int(seeds[n])) for n in names}
    biases = (
        {name: np.zeros(hidden) for name in _BIAS_TENSORS}
        if use_bias
        else {name: None for name in _BIAS_TENSORS}
    )
    lstm = LstmParams(
        **{n: drawn[n] for n in _GATE_TENSORS},
        **biases,
        peephole_cell=peephole_cell,
    )
    return ModelParams(
        embedding=drawn["embedding"],
        lstm=lstm,
        head_w=drawn["head_w"],
        head_b=np.zeros(n_out),
        n_out=n_out,
        dropout_rate=dropout_rate,
    )


def embed(sequence, embedding: np.ndarray) -> np.ndarray:
    """Row lookup per id. PAD (id 0) looks up row 0 like any other id."""
    ids = np.asarray(sequence)
    if ids.size and (ids.min() < 0 or ids.max() >= embedding.shape[0]):
        raise ValueError(
            f"token id out of range for embedding with {embedding.shape[0]} rows"
        )
    return embedding[ids]


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: zeros with probability ``rate``, survivors
    scaled by 1/(1-rate)."""
    return (rng.random(shape) >= rate) / (1.0 - rate)


def dropout_apply(x, rate: float, training: bool, seed: int = 0):
    """Apply inverted dropout in training mode; identity at inference."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"rate must be in [0, 1), got {rate}")
    x = np.asarray(x, dtype=np.float64)
    if not training or rate == 0.0:
        return x
    rng = np.random.default_rng(seed)
    return x * dropout_mask(x.shape, rate, rng)


def _maybe_bias(z: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    return z if b is None else z + b


def lstm_step(x_t: np.ndarray, prev: CellState, p: LstmParams) -> CellState:
    """One gate update. Works on single vectors or on (batch, dim) arrays."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape[-1] != p.embed_dim:
        raise ValueError(
            f"input width {x_t.shape[-1]} does not match embed_dim {p.embed_dim}"
        )
    if prev.h.shape[-1] != p.hidden or prev.c.shape[-1] != p.hidden:
        raise ValueError("state width does not match the hidden size")
    i = sigmoid(_maybe_bias(x_t @ p.w_xi + prev.h @ p.w_hi + prev.c @ p.w_ci, p.b_i))
    f = sigmoid(_maybe_bias(x_t @ p.w_xf + prev.h @ p.w_hf + prev.c @ p.w_cf, p.b_f))
    g = np.tanh(_maybe_bias(x_t @ p.w_xc + prev.h @ p.w_hc, p.b_c))
    c = f * prev.c + i * g
    peep = c if p.peephole_cell == "new" else prev.c
    o = sigmoid(_maybe_bias(x_t @ p.w_xo + prev.h @ p.w_ho + peep @ p.w_co, p.b_o))
    h = o * np.tanh(c)
    if not (np.isfinite(h).all() and np.isfinite(c).all()):
        raise FloatingPointError("non-finite LSTM state")
    return CellState(h=h, c=c)


def lstm_forward(inputs: Sequence[np.ndarray], p: LstmParams) -> CellState:
    """Fold :func:`lstm_step` over a sequence from the zero state and return
    the final state only."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.shape[0] == 0:
        raise ValueError("lstm_forward needs a non-empty sequence")
    lead = inputs.shape[1:-1]  # () for a plain sequence, (batch,) when batched
    state = CellState(h=np.zeros(lead + (p.hidden,)), c=np.zeros(lead + (p.hidden,)))
    for t in range(inputs.shape[0]):
        state = lstm_step(inputs[t], state, p)
    return state


def head_forward(h: np.ndarray, params: ModelParams) -> np.ndarray:
    """Dense head: sigmoid probability for 1 node, softmax row otherwise."""
    z = h @ params.head_w + params.head_b
    if params.n_out == 1:
        return np.asarray(sigmoid(z))
    return softmax(z, axis=-1)


@dataclass
class ForwardCache:
    """Activations captured by a forward pass, consumed by model_backward."""

    ids: np.ndarray          # (batch, steps)
    mask: np.ndarray | None  # (batch, steps, embed) dropout mask, or None
    x: np.ndarray            # (steps, batch, embed) post-dropout inputs
    i: np.ndarray            # (steps, batch, hidden)
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    tanh_c: np.ndarray
    h_all: np.ndarray        # (steps + 1, batch, hidden); h_all[0] is zeros
    c_all: np.ndarray        # (steps + 1, batch, hidden)
    z: np.ndarray            # (batch, n_out) head logits
    probs: np.ndarray        # (batch, n_out)
    params: ModelParams = field(repr=False)


def model_forward(
    params: ModelParams,
    ids,
    training: bool = False,
    rng: np.random.Generator | None = None,
    mask: np.ndarray | None = None,
) -> ForwardCache:
    """Run a batch of id sequences through the full model.

    In training mode a fresh dropout mask is drawn from ``rng`` unless one is
    passed explicitly; at inference the mask is skipped entirely.
    """
    ids = np.atleast_2d(np.asarray(ids))
    batch, steps = ids.shape
    if steps == 0:
        raise ValueError("empty input sequences")
    embedded = embed(ids, params.embedding)  # (batch, steps, embed)
    if training and params.dropout_rate > 0.0:
        if mask is None:
            if rng is None:
                raise ValueError("training mode needs an rng or an explicit mask")
            mask = dropout_mask(embedded.shape, params.dropout_rate, rng)
        x_bte = embedded * mask
    else:
        mask = None
        x_bte = embedded

    p = params.lstm
    hidden = p.hidden
    x = np.ascontiguousarray(x_bte.transpose(1, 0, 2))  # (steps, batch, embed)
    i = np.empty((steps, batch, hidden))
    f = np.empty((steps, batch, hidden))
    g = np.empty((steps, batch, hidden))
    o = np.empty((steps, batch, hidden))
    tanh_c = np.empty((steps, batch, hidden))
    h_all = np.zeros((steps + 1, batch, hidden))
    c_all = np.zeros((steps + 1, batch, hidden))

    for t in range(steps):
        x_t, h_prev, c_prev = x[t], h_all[t], c_all[t]
        i[t] = sigmoid(_maybe_bias(x_t @ p.w_xi + h_prev @ p.w_hi + c_prev @ p.w_ci, p.b_i))
        f[t] = sigmoid(_maybe_bias(x_t @ p.w_xf + h_prev @ p.w_hf + c_prev @ p.w_cf, p.b_f))
        g[t] = np.tanh(_maybe_bias(x_t @ p.w_xc + h_prev @ p.w_hc, p.b_c))
        c_t = f[t] * c_prev + i[t] * g[t]
        peep = c_t if p.peephole_cell == "new" else c_prev
        o[t] = sigmoid(_maybe_bias(x_t @ p.w_xo + h_prev @ p.w_ho + peep @ p.w_co, p.b_o))
        tanh_c[t] = np.tanh(c_t)
        c_all[t + 1] = c_t
        h_all[t + 1] = o[t] * tanh_c[t]

    h_final = h_all[steps]
    z = h_final @ params.head_w + params.head_b
    probs = np.asarray(sigmoid(z)) if params.n_out == 1 else softmax(z, axis=-1)
    return ForwardCache(
        ids=ids, mask=mask, x=x, i=i, f=f, g=g, o=o, tanh_c=tanh_c,
        h_all=h_all, c_all=c_all, z=z, probs=probs, params=params,
    )


def model_loss(cache: ForwardCache, classes) -> float:
    """Mean cross-entropy of the batch under the head implied by n_out."""
    classes = np.asarray(classes, dtype=np.int64)
    probs = cache.probs
    if cache.params.n_out == 1:
        p = clamp_prob(probs[:, 0])
        losses = -(classes * np.log(p) + (1 - classes) * np.log(1.0 - p))
    else:
        p = clamp_prob(probs[np.arange(len(classes)), classes])
        losses = -np.log(p)
    return float(losses.mean())


def _head_logit_grad(cache: ForwardCache, classes: np.ndarray) -> np.ndarray:
    """d(mean loss)/d(head logits); zero where the probability clamp is active."""
    probs = cache.probs
    batch = probs.shape[0]
    if cache.params.n_out == 1:
        p = probs[:, 0]
        inside = (p > EPS) & (p < 1.0 - EPS)
        dz = ((p - classes) * inside)[:, None]
    else:
        py = probs[np.arange(batch), classes]
        inside = (py > EPS) & (py < 1.0 - EPS)
        onehot = np.zeros_like(probs)
        onehot[np.arange(batch), classes] = 1.0
        dz = (probs - onehot) * inside[:, None]
    return dz / batch


def model_backward(
    cache: ForwardCache, classes, loss: LossKind | None = None
) -> dict[str, np.ndarray]:
    """Exact gradients of the mean batch loss for every parameter tensor.

    Backpropagates through the head, all timesteps (including the three
    peephole paths), the dropout mask actually sampled, and the embedding
    lookups. ``loss`` defaults to the kind implied by the head width.
    """
    params = cache.params
    if loss is not None:
        loss.check_head(params.n_out)
    classes = np.asarray(classes, dtype=np.int64)
    p = params.lstm
    steps, batch, _ = cache.x.shape
    prev_peephole = p.peephole_cell == "prev"

    dz = _head_logit_grad(cache, classes)
    h_final = cache.h_all[steps]
    grads: dict[str, np.ndarray] = {
        name: np.zeros_like(tensor) for name, tensor in params.tensors().items()
    }
    grads["head_w"] += h_final.T @ dz
    grads["head_b"] += dz.sum(axis=0)

    dx = np.empty_like(cache.x)
    dh = dz @ params.head_w.T  # gradient flowing into h_t
    dc = np.zeros((batch, p.hidden))  # gradient flowing into c_t from t+1

    for t in range(steps - 1, -1, -1):
        x_t = cache.x[t]
        i_t, f_t, g_t, o_t = cache.i[t], cache.f[t], cache.g[t], cache.o[t]
        h_prev, c_prev = cache.h_all[t], cache.c_all[t]
        tc = cache.tanh_c[t]

        # h_t = o_t * tanh(c_t)
        do = dh * tc
        dc = dc + dh * o_t * (1.0 - tc * tc)
        da_o = do * o_t * (1.0 - o_t)

        peep_src = c_prev if prev_peephole else cache.c_all[t + 1]
        grads["w_xo"] += x_t.T @ da_o
        grads["w_ho"] += h_prev.T @ da_o
        grads["w_co"] += peep_src.T @ da_o
        if p.use_bias:
            grads["b_o"] += da_o.sum(axis=0)
        dpeep = da_o @ p.w_co.T
        if not prev_peephole:
            # the output gate read the updated cell, so fold its gradient in
            # before splitting c_t into its forget/input/candidate parts
            dc = dc + dpeep

        # c_t = f_t * c_{t-1} + i_t * g_t
        di = dc * g_t
        df = dc * c_prev
        dg = dc * i_t
        dc_prev = dc * f_t
        if prev_peephole:
            dc_prev = dc_prev + dpeep

        da_i = di * i_t * (1.0 - i_t)
        da_f = df * f_t * (1.0 - f_t)
        da_g = dg * (1.0 - g_t * g_t)

        grads["w_xi"] += x_t.T @ da_i
        grads["w_hi"] += h_prev.T @ da_i
        grads["w_ci"] += c_prev.T @ da_i
        grads["w_xf"] += x_t.T @ da_f
        grads["w_hf"] += h_prev.T @ da_f
        grads["w_cf"] += c_prev.T @ da_f
        grads["w_xc"] += x_t.T @ da_g
        grads["w_hc"] += h_prev.T @ da_g
        if p.use_bias:
            grads["b_i"] += da_i.sum(axis=0)
            grads["b_f"] += da_f.sum(axis=0)
            grads["b_c"] += da_g.sum(axis=0)

        dx[t] = da_i @ p.w_xi.T + da_f @ p.w_xf.T + da_g @ p.w_xc.T + da_o @ p.w_xo.T
        dh = da_i @ p.w_hi.T + da_f @ p.w_hf.T + da_g @ p.w_hc.T + da_o @ p.w_ho.T
        dc = dc_prev + da_i @ p.w_ci.T + da_f @ p.w_cf.T

    de = dx.transpose(1, 0, 2)  # (batch, steps, embed)
    if cache.mask is not None:
        de = de * cache.mask
    np.add.at(
        grads["embedding"],
        cache.ids.reshape(-1),
        de.reshape(-1, de.shape[-1]),
    )
    return grads


def predict_classes(probs: np.ndarray, n_out: int) -> np.ndarray:
    """Predicted class per row: argmax for multi-node heads (ties to the
    lowest index), threshold at 0.5 for the 1-node head (ties to class 1)."""
    if n_out == 1:
        return (probs[:, 0] >= 0.5).astype(np.int64)
    return probs.argmax(axis=1)
