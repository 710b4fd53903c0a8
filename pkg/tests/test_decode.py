import numpy as np
import pytest

from spellcap import tokenizer as tk
from spellcap.seq2seq import (
    ModelConfig,
    beam_decode,
    greedy_decode,
    init_parameters,
    predict_name,
)
from spellcap.seq2seq.model import _log_softmax, decoder_forward, encode, id_of_class
from spellcap.tokenizer import BOS_ID, char_decode


CFG = ModelConfig(
    vocab_size=40, n_layers=2, n_heads=2, d_model=8, d_ff=16,
    dropout=0.0, max_src_len=32, max_tgt_len=10,
)


def random_sources(seed, n):
    rng = np.random.default_rng(seed)
    return [
        list(rng.integers(4, 36, size=int(rng.integers(2, 9)))) for _ in range(n)
    ]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_beam_width_one_equals_greedy(seed):
    params = init_parameters(CFG, seed=seed)
    for src in random_sources(seed + 10, 12):
        g = greedy_decode(params, CFG, src)
        b = beam_decode(params, CFG, src, 1)
        assert len(b) == 1
        assert b[0].name == g.name
        assert b[0].logprob == g.logprob
        assert b[0].reached_eos == g.reached_eos


def exhaustive_best(params, cfg, src, max_len):
    """Score every target sequence up to max_len steps; return the optimum."""
    memory = encode(params, cfg, src)

    def step(prefix):
        return _log_softmax(decoder_forward(params, cfg, memory, prefix)[-1])

    best = (-np.inf, None)
    stack = [([BOS_ID], 0.0)]
    while stack:
        prefix, score = stack.pop()
        logp = step(prefix)
        for cls in range(logp.shape[0]):
            total = score + float(logp[cls])
            seq = prefix + [id_of_class(cls)]
            if cls == 0:
                best = max(best, (total, char_decode(seq)))
            elif len(seq) - 1 == max_len:
                best = max(best, (total, char_decode(seq)))
            else:
                stack.append((seq, total))
    return best


@pytest.mark.parametrize("seed", [3, 4])
def test_wide_beam_matches_exhaustive_search(seed):
    # a beam wide enough to hold every candidate must find the true optimum;
    # pool size at step 2 is 28 live prefixes * 29 classes = 812
    params = init_parameters(CFG, seed=seed)
    for src in random_sources(seed + 20, 4):
        want_score, want_name = exhaustive_best(params, CFG, src, max_len=2)
        top = beam_decode(params, CFG, src, 900, max_len=2)[0]
        assert abs(top.logprob - want_score) < 1e-9
        assert top.name == want_name


def test_beam_results_ranked_descending():
    params = init_parameters(CFG, seed=9)
    for src in random_sources(42, 8):
        results = beam_decode(params, CFG, src, 4)
        scores = [r.logprob for r in results]
        assert scores == sorted(scores, reverse=True)
        assert 1 <= len(results) <= 4


def test_logprobs_nonpositive_and_sane():
    params = init_parameters(CFG, seed=5)
    src = random_sources(7, 1)[0]
    g = greedy_decode(params, CFG, src)
    assert g.logprob <= 0.0
    if g.reached_eos:
        # roughly uniform model: total close to (len+1) * log(1/29)
        steps = len(g.name) + 1
        assert g.logprob == pytest.approx(-steps * np.log(29), rel=0.5)


def test_truncation_at_max_len():
    params = init_parameters(CFG, seed=11)
    src = random_sources(13, 1)[0]
    g = greedy_decode(params, CFG, src, max_len=2)
    assert len(g.name) <= 2
    results = beam_decode(params, CFG, src, 3, max_len=2)
    assert all(len(r.name) <= 2 for r in results)
    # a truncated result is flagged
    if not g.reached_eos:
        assert len(g.name) == 2


def test_beam_width_validation():
    params = init_parameters(CFG, seed=0)
    with pytest.raises(ValueError):
        beam_decode(params, CFG, [4, 5], 0)


def test_predict_name_pipeline():
    bpe = tk.learn_bpe(["vera v e r a", "jon j o n"], 4)
    cfg = ModelConfig(
        vocab_size=max(bpe.vocab.values()) + 1, n_layers=1, n_heads=2,
        d_model=8, d_ff=16, dropout=0.0, max_src_len=32, max_tgt_len=8,
    )
    params = init_parameters(cfg, seed=2)
    pred = predict_name(params, cfg, bpe, "vera v e r a")
    assert pred.source == "seq2seq"
    assert pred.confidence <= 0.0
    norm = predict_name(params, cfg, bpe, "vera v e r a", length_normalize=True)
    assert norm.confidence >= pred.confidence  # dividing by steps shrinks magnitude
    with pytest.raises(ValueError, match="empty source"):
        predict_name(params, cfg, bpe, "")
