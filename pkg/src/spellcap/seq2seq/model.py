"""Pre-norm transformer encoder-decoder in plain numpy, float64 throughout.

Forward passes cache every intermediate; backward passes are hand-derived and
return gradients for every parameter tensor, addressable by the same string
paths ``init_parameters`` creates ("encoder.0.attn.wq", "output.bias", ...).
Sources and targets share one embedding table; the output projection maps to
the 29-way character alphabet (EOS + a-z + apostrophe + hyphen).

Shapes use B for batch, S/T for source/target length, D for d_model, H for
heads, F for d_ff, C for output classes.
"""

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from ..errors import ConfigError
from ..tokenizer import BOS_ID, EOS_ID, PAD_ID, target_alphabet

N_CLASSES = len(target_alphabet())


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    n_layers: int = 2
    n_heads: int = 2
    d_model: int = 64
    d_ff: int = 256
    dropout: float = 0.1
    max_src_len: int = 160
    max_tgt_len: int = 48

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        for field in ("vocab_size", "n_layers", "n_heads", "d_model", "d_ff",
                      "max_src_len", "max_tgt_len"):
            if getattr(self, field) <= 0:
                raise ConfigError(f"{field} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout {self.dropout} outside [0, 1)")
        if self.vocab_size < 33:
            raise ConfigError("vocab_size smaller than the base vocabulary")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


def _attn_paths(prefix):
    return [f"{prefix}.{w}" for w in ("wq", "wk", "wv", "wo")]


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Every parameter path with its shape, in canonical (checkpoint) order."""
    d, f = cfg.d_model, cfg.d_ff
    shapes: dict[str, tuple[int, ...]] = {"embedding": (cfg.vocab_size, d)}

    def norm(prefix):
        shapes[f"{prefix}.gain"] = (d,)
        shapes[f"{prefix}.bias"] = (d,)

    def attn(prefix):
        for p in _attn_paths(prefix):
            shapes[p] = (d, d)

    def ffn(prefix):
        shapes[f"{prefix}.w1"] = (d, f)
        shapes[f"{prefix}.b1"] = (f,)
        shapes[f"{prefix}.w2"] = (f, d)
        shapes[f"{prefix}.b2"] = (d,)

    for i in range(cfg.n_layers):
        norm(f"encoder.{i}.ln1")
        attn(f"encoder.{i}.attn")
        norm(f"encoder.{i}.ln2")
        ffn(f"encoder.{i}.ffn")
    norm("encoder.norm")
    for i in range(cfg.n_layers):
        norm(f"decoder.{i}.ln1")
        attn(f"decoder.{i}.self_attn")
        norm(f"decoder.{i}.ln2")
        attn(f"decoder.{i}.cross_attn")
        norm(f"decoder.{i}.ln3")
        ffn(f"decoder.{i}.ffn")
    norm("decoder.norm")
    shapes["output.weight"] = (d, N_CLASSES)
    shapes["output.bias"] = (N_CLASSES,)
    return shapes


def init_parameters(cfg: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """Xavier-uniform weights, zero biases, unit layer-norm gains.

    Identical (cfg, seed) pairs produce bit-identical tensors: draws happen
    in canonical path order from one seeded generator.
    """
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for path, shape in param_shapes(cfg).items():
        leaf = path.rsplit(".", 1)[-1]
        if leaf in ("bias", "b1", "b2"):
            params[path] = np.zeros(shape)
        elif leaf == "gain":
            params[path] = np.ones(shape)
        else:
            limit = math.sqrt(6.0 / (shape[0] + shape[1]))
            params[path] = rng.uniform(-limit, limit, size=shape)
    return params


@lru_cache(maxsize=32)
def _positional_table(max_len: int, d_model: int):
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    idx = np.arange(0, d_model, 2, dtype=np.float64)
    div = np.exp(idx * (-math.log(10000.0) / d_model))
    table = np.zeros((max_len, d_model))
    table[:, 0::2] = np.sin(pos * div)
    table[:, 1::2] = np.cos(pos * div[: table[:, 1::2].shape[1]])
    table.setflags(write=False)
    return table


def positional_encoding(length: int, d_model: int) -> np.ndarray:
    # cache per power-of-two ceiling so batches of varying length share tables
    size = 1 << max(length - 1, 0).bit_length()
    return _positional_table(max(size, 1), d_model)[:length]


# ---------------------------------------------------------------- primitives


def _dropout_f(x, rate, rng):
    if rng is None or rate <= 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def _dropout_b(dy, mask):
    return dy if mask is None else dy * mask


_LN_EPS = 1e-5


def _layer_norm_f(x, gain, bias):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = xc * inv
    return xhat * gain + bias, (xhat, inv, gain)


def _layer_norm_b(dy, cache):
    xhat, inv, gain = cache
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * gain
    dx = inv * (
        dxhat
        - dxhat.mean(-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(-1, keepdims=True)
    )
    return dx, dg, db


def _split_heads(x, n_heads):
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def _attention_f(xq, xkv, p, prefix, n_heads, mask):
    """Multi-head attention; ``mask`` is a broadcastable boolean with True at
    attendable (query, key) pairs."""
    wq, wk, wv, wo = (p[f"{prefix}.{w}"] for w in ("wq", "wk", "wv", "wo"))
    q = _split_heads(xq @ wq, n_heads)
    k = _split_heads(xkv @ wk, n_heads)
    v = _split_heads(xkv @ wv, n_heads)
    scale = 1.0 / math.sqrt(q.shape[-1])
    scores = (q @ k.swapaxes(-1, -2)) * scale
    scores = np.where(mask, scores, -np.inf)
    scores -= scores.max(-1, keepdims=True)
    expd = np.exp(scores)
    weights = expd / expd.sum(-1, keepdims=True)
    ctx = _merge_heads(weights @ v)
    y = ctx @ wo
    cache = (xq, xkv, q, k, v, weights, ctx, scale)
    return y, cache


def _attention_b(dy, cache, p, prefix, grads):
    xq, xkv, q, k, v, weights, ctx, scale = cache
    wq, wk, wv, wo = (p[f"{prefix}.{w}"] for w in ("wq", "wk", "wv", "wo"))
    n_heads = q.shape[1]

    grads[f"{prefix}.wo"] += np.einsum("btd,bte->de", ctx, dy)
    dctx = _split_heads(dy @ wo.T, n_heads)
    dw = dctx @ v.swapaxes(-1, -2)
    dv = weights.swapaxes(-1, -2) @ dctx
    # softmax rows: masked entries carry weight exactly 0, so ds vanishes there
    ds = weights * (dw - (dw * weights).sum(-1, keepdims=True))
    ds *= scale
    dq = ds @ k
    dk = ds.swapaxes(-1, -2) @ q

    dq_m, dk_m, dv_m = _merge_heads(dq), _merge_heads(dk), _merge_heads(dv)
    grads[f"{prefix}.wq"] += np.einsum("btd,bte->de", xq, dq_m)
    grads[f"{prefix}.wk"] += np.einsum("btd,bte->de", xkv, dk_m)
    grads[f"{prefix}.wv"] += np.einsum("btd,bte->de", xkv, dv_m)
    dxq = dq_m @ wq.T
    dxkv = dk_m @ wk.T + dv_m @ wv.T
    return dxq, dxkv


def _ffn_f(x, p, prefix):
    z = x @ p[f"{prefix}.w1"] + p[f"{prefix}.b1"]
    h = np.maximum(z, 0.0)
    y = h @ p[f"{prefix}.w2"] + p[f"{prefix}.b2"]
    return y, (x, z, h)


def _ffn_b(dy, cache, p, prefix, grads):
    x, z, h = cache
    grads[f"{prefix}.w2"] += np.einsum("btf,btd->fd", h, dy)
    grads[f"{prefix}.b2"] += dy.sum((0, 1))
    dh = dy @ p[f"{prefix}.w2"].T
    dz = dh * (z > 0.0)
    grads[f"{prefix}.w1"] += np.einsum("btd,btf->df", x, dz)
    grads[f"{prefix}.b1"] += dz.sum((0, 1))
    return dz @ p[f"{prefix}.w1"].T


def _embed_f(p, cfg, ids, rng):
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise ValueError("token id outside [0, vocab_size)")
    scale = math.sqrt(cfg.d_model)
    x = p["embedding"][ids] * scale
    x = x + positional_encoding(ids.shape[1], cfg.d_model)[None]
    x, mask = _dropout_f(x, cfg.dropout, rng)
    return x, (ids, scale, mask)


def _embed_b(dx, cache, grads):
    ids, scale, mask = cache
    dx = _dropout_b(dx, mask)
    np.add.at(grads["embedding"], ids, dx * scale)


# ------------------------------------------------------------ encoder stack


def _encoder_layer_f(x, p, prefix, cfg, mask, rng):
    a, c_ln1 = _layer_norm_f(x, p[f"{prefix}.ln1.gain"], p[f"{prefix}.ln1.bias"])
    sa, c_att = _attention_f(a, a, p, f"{prefix}.attn", cfg.n_heads, mask)
    sa, m1 = _dropout_f(sa, cfg.dropout, rng)
    x1 = x + sa
    f, c_ln2 = _layer_norm_f(x1, p[f"{prefix}.ln2.gain"], p[f"{prefix}.ln2.bias"])
    ff, c_ffn = _ffn_f(f, p, f"{prefix}.ffn")
    ff, m2 = _dropout_f(ff, cfg.dropout, rng)
    return x1 + ff, (c_ln1, c_att, m1, c_ln2, c_ffn, m2)


def _encoder_layer_b(dy, cache, p, prefix, grads):
    c_ln1, c_att, m1, c_ln2, c_ffn, m2 = cache
    dff = _dropout_b(dy, m2)
    df = _ffn_b(dff, c_ffn, p, f"{prefix}.ffn", grads)
    dx1, dg, db = _layer_norm_b(df, c_ln2)
    grads[f"{prefix}.ln2.gain"] += dg
    grads[f"{prefix}.ln2.bias"] += db
    dx1 += dy
    dsa = _dropout_b(dx1, m1)
    dq, dkv = _attention_b(dsa, c_att, p, f"{prefix}.attn", grads)
    da, dg, db = _layer_norm_b(dq + dkv, c_ln1)
    grads[f"{prefix}.ln1.gain"] += dg
    grads[f"{prefix}.ln1.bias"] += db
    return dx1 + da


def _encode_f(p, cfg, src, src_valid, rng):
    x, c_emb = _embed_f(p, cfg, src, rng)
    mask = src_valid[:, None, None, :]
    layer_caches = []
    for i in range(cfg.n_layers):
        x, cache = _encoder_layer_f(x, p, f"encoder.{i}", cfg, mask, rng)
        layer_caches.append(cache)
    memory, c_norm = _layer_norm_f(x, p["encoder.norm.gain"], p["encoder.norm.bias"])
    return memory, (c_emb, layer_caches, c_norm)


def _encode_b(dmem, caches, p, cfg, grads):
    c_emb, layer_caches, c_norm = caches
    dx, dg, db = _layer_norm_b(dmem, c_norm)
    grads["encoder.norm.gain"] += dg
    grads["encoder.norm.bias"] += db
    for i in reversed(range(cfg.n_layers)):
        dx = _encoder_layer_b(dx, layer_caches[i], p, f"encoder.{i}", grads)
    _embed_b(dx, c_emb, grads)


# ------------------------------------------------------------ decoder stack


def _decoder_layer_f(y, memory, p, prefix, cfg, causal, src_mask, rng):
    a, c_ln1 = _layer_norm_f(y, p[f"{prefix}.ln1.gain"], p[f"{prefix}.ln1.bias"])
    sa, c_self = _attention_f(a, a, p, f"{prefix}.self_attn", cfg.n_heads, causal)
    sa, m1 = _dropout_f(sa, cfg.dropout, rng)
    y1 = y + sa
    c, c_ln2 = _layer_norm_f(y1, p[f"{prefix}.ln2.gain"], p[f"{prefix}.ln2.bias"])
    ca, c_cross = _attention_f(c, memory, p, f"{prefix}.cross_attn", cfg.n_heads, src_mask)
    ca, m2 = _dropout_f(ca, cfg.dropout, rng)
    y2 = y1 + ca
    f, c_ln3 = _layer_norm_f(y2, p[f"{prefix}.ln3.gain"], p[f"{prefix}.ln3.bias"])
    ff, c_ffn = _ffn_f(f, p, f"{prefix}.ffn")
    ff, m3 = _dropout_f(ff, cfg.dropout, rng)
    return y2 + ff, (c_ln1, c_self, m1, c_ln2, c_cross, m2, c_ln3, c_ffn, m3)


def _decoder_layer_b(dy, cache, p, prefix, grads):
    c_ln1, c_self, m1, c_ln2, c_cross, m2, c_ln3, c_ffn, m3 = cache
    dff = _dropout_b(dy, m3)
    df = _ffn_b(dff, c_ffn, p, f"{prefix}.ffn", grads)
    dy2, dg, db = _layer_norm_b(df, c_ln3)
    grads[f"{prefix}.ln3.gain"] += dg
    grads[f"{prefix}.ln3.bias"] += db
    dy2 += dy
    dca = _dropout_b(dy2, m2)
    dc, dmem = _attention_b(dca, c_cross, p, f"{prefix}.cross_attn", grads)
    dy1, dg, db = _layer_norm_b(dc, c_ln2)
    grads[f"{prefix}.ln2.gain"] += dg
    grads[f"{prefix}.ln2.bias"] += db
    dy1 += dy2
    dsa = _dropout_b(dy1, m1)
    dq, dkv = _attention_b(dsa, c_self, p, f"{prefix}.self_attn", grads)
    da, dg, db = _layer_norm_b(dq + dkv, c_ln1)
    grads[f"{prefix}.ln1.gain"] += dg
    grads[f"{prefix}.ln1.bias"] += db
    return dy1 + da, dmem


def _decode_f(p, cfg, memory, src_valid, tgt_in, rng):
    y, c_emb = _embed_f(p, cfg, tgt_in, rng)
    t = tgt_in.shape[1]
    causal = np.tril(np.ones((t, t), dtype=bool))[None, None]
    src_mask = src_valid[:, None, None, :]
    layer_caches = []
    for i in range(cfg.n_layers):
        y, cache = _decoder_layer_f(
            y, memory, p, f"decoder.{i}", cfg, causal, src_mask, rng
        )
        layer_caches.append(cache)
    yn, c_norm = _layer_norm_f(y, p["decoder.norm.gain"], p["decoder.norm.bias"])
    logits = yn @ p["output.weight"] + p["output.bias"]
    return logits, (c_emb, layer_caches, c_norm, yn)


def _decode_b(dlogits, caches, p, cfg, grads):
    c_emb, layer_caches, c_norm, yn = caches
    grads["output.weight"] += np.einsum("btd,btc->dc", yn, dlogits)
    grads["output.bias"] += dlogits.sum((0, 1))
    dyn = dlogits @ p["output.weight"].T
    dy, dg, db = _layer_norm_b(dyn, c_norm)
    grads["decoder.norm.gain"] += dg
    grads["decoder.norm.bias"] += db
    dmem_total = None
    for i in reversed(range(cfg.n_layers)):
        dy, dmem = _decoder_layer_b(dy, layer_caches[i], p, f"decoder.{i}", grads)
        dmem_total = dmem if dmem_total is None else dmem_total + dmem
    _embed_b(dy, c_emb, grads)
    return dmem_total


# ------------------------------------------------------------- batch packing

_CLASS_OF_ID = np.full(64, -1, dtype=np.int64)
for _cls, _tid in enumerate(target_alphabet()):
    _CLASS_OF_ID[_tid] = _cls
_ID_OF_CLASS = np.array(target_alphabet(), dtype=np.int64)


def class_of_id(token_id: int) -> int:
    cls = int(_CLASS_OF_ID[token_id]) if 0 <= token_id < len(_CLASS_OF_ID) else -1
    if cls < 0:
        raise ValueError(f"token id {token_id} is not a decoder output symbol")
    return cls


def id_of_class(cls: int) -> int:
    return int(_ID_OF_CLASS[cls])


def pack_batch(batch):
    """Pad a list of (src_ids, tgt_ids) into arrays.

    tgt sequences are BOS ... EOS; teacher forcing shifts them by one. Label
    positions use class indices with -1 at padding.
    """
    if not batch:
        raise ValueError("empty batch")
    for src, tgt in batch:
        if len(src) == 0:
            raise ValueError("empty source sequence")
        if len(tgt) < 2 or tgt[0] != BOS_ID or tgt[-1] != EOS_ID:
            raise ValueError("target must be BOS ... EOS")
    b = len(batch)
    s = max(len(src) for src, _ in batch)
    t = max(len(tgt) for _, tgt in batch) - 1
    src_arr = np.full((b, s), PAD_ID, dtype=np.int64)
    src_valid = np.zeros((b, s), dtype=bool)
    tgt_in = np.full((b, t), PAD_ID, dtype=np.int64)
    labels = np.full((b, t), -1, dtype=np.int64)
    for i, (src, tgt) in enumerate(batch):
        src_arr[i, : len(src)] = src
        src_valid[i, : len(src)] = True
        tgt_in[i, : len(tgt) - 1] = tgt[:-1]
        labels[i, : len(tgt) - 1] = [class_of_id(x) for x in tgt[1:]]
    return src_arr, src_valid, tgt_in, labels


def _log_softmax(logits):
    shifted = logits - logits.max(-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(-1, keepdims=True))


def _forward(p, cfg, src_arr, src_valid, tgt_in, rng=None):
    if src_arr.shape[1] > cfg.max_src_len:
        raise ValueError(f"source longer than max_src_len={cfg.max_src_len}")
    if tgt_in.shape[1] > cfg.max_tgt_len:
        raise ValueError(f"target longer than max_tgt_len={cfg.max_tgt_len}")
    memory, enc_caches = _encode_f(p, cfg, src_arr, src_valid, rng)
    logits, dec_caches = _decode_f(p, cfg, memory, src_valid, tgt_in, rng)
    return logits, (enc_caches, dec_caches)


def loss_from_logits(logits, labels):
    logp = _log_softmax(logits)
    valid = labels >= 0
    n = int(valid.sum())
    if n == 0:
        raise ValueError("batch has no supervised positions")
    picked = logp[valid, labels[valid]]
    return -picked.sum() / n


def loss(p, cfg: ModelConfig, batch) -> float:
    """Mean NLL of gold next characters over non-padding positions."""
    src_arr, src_valid, tgt_in, labels = pack_batch(batch)
    logits, _ = _forward(p, cfg, src_arr, src_valid, tgt_in)
    return float(loss_from_logits(logits, labels))


def loss_and_gradients(p, cfg: ModelConfig, batch, dropout_rng=None):
    """One forward-backward pass; returns (loss, grads keyed like params)."""
    src_arr, src_valid, tgt_in, labels = pack_batch(batch)
    logits, (enc_caches, dec_caches) = _forward(
        p, cfg, src_arr, src_valid, tgt_in, dropout_rng
    )
    value = float(loss_from_logits(logits, labels))

    valid = labels >= 0
    n = int(valid.sum())
    probs = np.exp(_log_softmax(logits))
    dlogits = probs
    b_idx, t_idx = np.nonzero(valid)
    dlogits[b_idx, t_idx, labels[valid]] -= 1.0
    dlogits[~valid] = 0.0
    dlogits /= n

    grads = {path: np.zeros_like(arr) for path, arr in p.items()}
    dmem = _decode_b(dlogits, dec_caches, p, cfg, grads)
    _encode_b(dmem, enc_caches, p, cfg, grads)
    return value, grads


def gradients(p, cfg: ModelConfig, batch) -> dict[str, np.ndarray]:
    """Exact reverse-mode gradient of ``loss`` for every parameter tensor."""
    return loss_and_gradients(p, cfg, batch)[1]


# --------------------------------------------------------- inference surface


def encode(p, cfg: ModelConfig, src_ids) -> np.ndarray:
    """Contextual memory [len(src), d_model] for one source sequence."""
    if len(src_ids) == 0:
        raise ValueError("empty source sequence")
    if len(src_ids) > cfg.max_src_len:
        raise ValueError(f"source longer than max_src_len={cfg.max_src_len}")
    arr = np.asarray([src_ids], dtype=np.int64)
    valid = np.ones_like(arr, dtype=bool)
    memory, _ = _encode_f(p, cfg, arr, valid, None)
    return memory[0]


def decoder_forward(p, cfg: ModelConfig, memory, tgt_prefix) -> np.ndarray:
    """Next-character logits [len(prefix), n_classes] for one prefix."""
    if len(tgt_prefix) == 0 or tgt_prefix[0] != BOS_ID:
        raise ValueError("target prefix must start with BOS")
    mem = np.asarray(memory, dtype=np.float64)[None]
    valid = np.ones(mem.shape[:2], dtype=bool)
    tgt = np.asarray([tgt_prefix], dtype=np.int64)
    logits, _ = _decode_f(p, cfg, mem, valid, tgt, None)
    return logits[0]


def forward_details(p, cfg: ModelConfig, src_ids, tgt_ids):
    """Attention maps and logits for one pair, for inspection and tests."""
    src_arr, src_valid, tgt_in, labels = pack_batch([(src_ids, tgt_ids)])
    memory, enc_caches = _encode_f(p, cfg, src_arr, src_valid, None)
    logits, dec_caches = _decode_f(p, cfg, memory, src_valid, tgt_in, None)
    _, enc_layers, _ = enc_caches
    _, dec_layers, _, _ = dec_caches
    return {
        "memory": memory[0],
        "logits": logits[0],
        "labels": labels[0],
        "enc_attn": [c[1][5][0] for c in enc_layers],
        "dec_self_attn": [c[1][5][0] for c in dec_layers],
        "dec_cross_attn": [c[4][5][0] for c in dec_layers],
    }
