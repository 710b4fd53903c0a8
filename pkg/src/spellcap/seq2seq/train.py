"""Adam training loop with seeded shuffling, early stopping and resume.

Epoch e draws its shuffle and dropout noise from ``default_rng([seed, e])``,
so resuming from a saved state replays the exact remaining epochs: one epoch
plus one resumed epoch equals two straight epochs bit for bit (the resume
container stores float64).
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import kernels
from ..errors import ConfigError, NumericError
from ..tokenizer import char_encode
from .model import ModelConfig, loss_and_gradients, loss_from_logits, pack_batch, _forward


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 10
    seed: int = 0
    patience: int | None = None

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("betas must lie in [0, 1)")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("patience must be >= 1 when set")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        return cls(**obj)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    dev_loss: float


@dataclass
class TrainState:
    """Everything needed to continue training where it stopped."""

    adam_m: dict[str, np.ndarray]
    adam_v: dict[str, np.ndarray]
    adam_t: int = 0
    next_epoch: int = 0
    best_dev: float = math.inf
    epochs_since_improve: int = 0
    best_params: dict[str, np.ndarray] | None = None
    history: list[EpochStats] = field(default_factory=list)

    @classmethod
    def fresh(cls, params) -> "TrainState":
        return cls(
            adam_m={k: np.zeros_like(v) for k, v in params.items()},
            adam_v={k: np.zeros_like(v) for k, v in params.items()},
        )


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    history: list[EpochStats]
    state: TrainState
    best_epoch: int | None
    stopped_early: bool


def adam_step(params, grads, state: TrainState, cfg: TrainConfig) -> None:
    """Bias-corrected Adam update, in place, one shared step counter."""
    state.adam_t += 1
    bc1 = 1.0 - cfg.beta1 ** state.adam_t
    bc2 = 1.0 - cfg.beta2 ** state.adam_t
    for path, p in params.items():
        kernels.adam_update(
            p.reshape(-1),
            grads[path].reshape(-1),
            state.adam_m[path].reshape(-1),
            state.adam_v[path].reshape(-1),
            cfg.learning_rate,
            cfg.beta1,
            cfg.beta2,
            cfg.eps,
            bc1,
            bc2,
        )


def evaluate(params, model_cfg: ModelConfig, pairs, batch_size: int = 32) -> float:
    """Dataset-level mean NLL per supervised position (batch-split invariant)."""
    total = 0.0
    count = 0
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start : start + batch_size]
        src_arr, src_valid, tgt_in, labels = pack_batch(chunk)
        logits, _ = _forward(params, model_cfg, src_arr, src_valid, tgt_in)
        n = int((labels >= 0).sum())
        total += float(loss_from_logits(logits, labels)) * n
        count += n
    if count == 0:
        raise ValueError("no supervised positions in evaluation set")
    return total / count


def pairs_from_samples(samples, bpe) -> list[tuple[list[int], list[int]]]:
    """(BPE of the rank-1 hypothesis text, character-encoded gold) per sample."""
    from ..tokenizer import bpe_encode

    pairs = []
    for s in samples:
        src = bpe_encode(bpe, s.nbest[0].text())
        pairs.append((src, char_encode(s.gold)))
    return pairs


def train(params, model_cfg: ModelConfig, train_pairs, dev_pairs, cfg: TrainConfig,
          state: TrainState | None = None) -> TrainResult:
    """Run (or continue) training; mutates ``params`` in place.

    With a non-empty dev set the result carries the best-dev parameters and
    early stopping kicks in after ``cfg.patience`` epochs without improvement.
    An empty dev set means final-epoch parameters win and dev_loss is NaN.
    """
    if not train_pairs:
        raise ValueError("empty training set")
    if state is None:
        state = TrainState.fresh(params)
    n = len(train_pairs)
    stopped_early = False

    for epoch in range(state.next_epoch, cfg.epochs):
        rng = np.random.default_rng([cfg.seed, epoch])
        perm = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            batch = [train_pairs[i] for i in perm[start : start + cfg.batch_size]]
            value, grads = loss_and_gradients(
                params, model_cfg, batch, dropout_rng=rng
            )
            if not math.isfinite(value):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            adam_step(params, grads, state, cfg)
            batch_losses.append(value)
        train_loss = float(np.mean(batch_losses))
        if dev_pairs:
            dev_loss = evaluate(params, model_cfg, dev_pairs, cfg.batch_size)
            if not math.isfinite(dev_loss):
                raise NumericError(f"non-finite dev loss at epoch {epoch}")
        else:
            dev_loss = math.nan
        state.history.append(EpochStats(epoch, train_loss, dev_loss))
        state.next_epoch = epoch + 1
        if dev_pairs:
            if dev_loss < state.best_dev:
                state.best_dev = dev_loss
                state.epochs_since_improve = 0
                state.best_params = {k: v.copy() for k, v in params.items()}
            else:
                state.epochs_since_improve += 1
                if cfg.patience is not None and state.epochs_since_improve >= cfg.patience:
                    stopped_early = True
                    break

    if dev_pairs and state.best_params is not None:
        out_params = state.best_params
        best_epoch = min(
            (h.epoch for h in state.history if h.dev_loss == state.best_dev),
            default=None,
        )
    else:
        out_params = params
        best_epoch = None
    return TrainResult(
        params=out_params,
        history=list(state.history),
        state=state,
        best_epoch=best_epoch,
        stopped_early=stopped_early,
    )
