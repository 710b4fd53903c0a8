"""Byte-pair-encoding tokenizer over lowercase ASR text, plus the character
vocabulary used on the decoder side.

One id space serves both directions. Ids 0-3 are the specials (PAD, BOS, EOS,
UNK), ids 4-31 the characters a-z, apostrophe, hyphen, id 32 the word-boundary
marker, and merged tokens follow in learned order. Merges are learned from
greedy highest-frequency adjacent pairs, ties broken by the lexicographically
smallest (left, right) pair. The boundary marker terminates every word, which
keeps merges from crossing word boundaries; the marker itself never merges.

Encoding appends the marker token after each word and then drops a single
standalone trailing marker, so ``bpe_encode(m, "ab")`` is ``[id(a), id(b)]``
while ``bpe_decode(bpe_encode(m, "a b"))`` still recovers ``"a b"``.
"""

from collections import Counter
from dataclasses import dataclass, field

from .errors import DataFormatError

PAD_TOKEN = "<pad>"
BOS_TOKEN = "<bos>"
EOS_TOKEN = "<eos>"
UNK_TOKEN = "<unk>"
EOW_TOKEN = "</w>"

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3

TARGET_CHARS = "abcdefghijklmnopqrstuvwxyz'-"

BASE_TOKENS = (
    [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN]
    + list(TARGET_CHARS)
    + [EOW_TOKEN]
)

CHAR_IDS = {c: BASE_TOKENS.index(c) for c in TARGET_CHARS}
EOW_ID = BASE_TOKENS.index(EOW_TOKEN)


@dataclass
class BpeModel:
    """Learned merge list plus the full token -> id map."""

    vocab: dict[str, int]
    merges: list[tuple[str, str]]
    id_to_token: dict[int, str] = field(init=False, repr=False)
    _merge_rank: dict[tuple[str, str], int] = field(init=False, repr=False)

    def __post_init__(self):
        self.id_to_token = {i: t for t, i in self.vocab.items()}
        self._merge_rank = {pair: k for k, pair in enumerate(self.merges)}

    @classmethod
    def from_parts(cls, vocab: dict[str, int], merges: list[tuple[str, str]]) -> "BpeModel":
        """Build a model from raw parts, validating the invariants."""
        for tok, want in zip(BASE_TOKENS, range(len(BASE_TOKENS))):
            if vocab.get(tok) != want:
                raise DataFormatError(f"base token {tok!r} missing or misnumbered")
        ids = list(vocab.values())
        if len(set(ids)) != len(ids):
            raise DataFormatError("duplicate ids in vocab")
        for left, right in merges:
            if left not in vocab or right not in vocab:
                raise DataFormatError(f"merge ({left!r}, {right!r}) references unknown token")
            if left + right not in vocab:
                raise DataFormatError(f"merged token {left + right!r} missing from vocab")
        return cls(vocab=dict(vocab), merges=list(merges))

    def to_manifest(self) -> dict:
        """JSON-ready dict (used inside model checkpoints)."""
        return {
            "vocab": dict(self.vocab),
            "merges": [list(p) for p in self.merges],
        }

    @classmethod
    def from_manifest(cls, obj: dict) -> "BpeModel":
        merges = [tuple(p) for p in obj["merges"]]
        return cls.from_parts(obj["vocab"], merges)


def _base_vocab() -> dict[str, int]:
    return {tok: i for i, tok in enumerate(BASE_TOKENS)}


def _word_symbols(word: str) -> list[str]:
    return [c if c in CHAR_IDS else UNK_TOKEN for c in word]


def _merge_word(syms: list[str], left: str, right: str, merged: str) -> list[str]:
    out = []
    i = 0
    n = len(syms)
    while i < n:
        if i + 1 < n and syms[i] == left and syms[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(syms[i])
            i += 1
    return out


def learn_bpe(corpus: list[str], n_merges: int) -> BpeModel:
    """Learn up to ``n_merges`` merges from lowercase text lines.

    Stops early once no adjacent pair is left to merge. Raises ValueError on a
    corpus with no words.
    """
    if n_merges < 0:
        raise ValueError("n_merges must be >= 0")
    word_freq = Counter()
    for line in corpus:
        word_freq.update(line.split())
    if not word_freq:
        raise ValueError("empty corpus")

    vocab = _base_vocab()
    seqs = {w: _word_symbols(w) for w in word_freq}
    merges: list[tuple[str, str]] = []

    for _ in range(n_merges):
        counts = Counter()
        for w, f in word_freq.items():
            s = seqs[w]
            for pair in zip(s, s[1:]):
                counts[pair] += f
        if not counts:
            break
        best = min(counts, key=lambda p: (-counts[p], p))
        merged = best[0] + best[1]
        merges.append(best)
        if merged not in vocab:
            vocab[merged] = len(vocab)
        for w, s in seqs.items():
            seqs[w] = _merge_word(s, best[0], best[1], merged)
    return BpeModel(vocab=vocab, merges=merges)


def _apply_merges(syms: list[str], model: BpeModel) -> list[str]:
    # Walk ranks upward; a pair revealed with a rank at or below one already
    # passed stays unmerged, mirroring a single in-order sweep of the list.
    ranks = model._merge_rank
    done = -1
    while True:
        best = None
        for pair in zip(syms, syms[1:]):
            r = ranks.get(pair)
            if r is not None and r > done and (best is None or r < best):
                best = r
        if best is None:
            return syms
        left, right = model.merges[best]
        syms = _merge_word(syms, left, right, left + right)
        done = best


def bpe_encode(model: BpeModel, text: str) -> list[int]:
    """Encode whitespace-separated lowercase text into token ids.

    Characters outside a-z, apostrophe and hyphen map to UNK. The boundary
    marker appears between words but a lone trailing one is dropped.
    """
    ids: list[int] = []
    for word in text.split():
        for tok in _apply_merges(_word_symbols(word), model):
            ids.append(model.vocab[tok])
        ids.append(EOW_ID)
    if ids and ids[-1] == EOW_ID:
        ids.pop()
    return ids


def bpe_decode(model: BpeModel, ids: list[int]) -> str:
    """Invert bpe_encode; boundary markers become spaces."""
    parts = []
    for i in ids:
        tok = model.id_to_token.get(i)
        if tok is None:
            raise ValueError(f"invalid token id {i}")
        parts.append(tok)
    return "".join(parts).replace(EOW_TOKEN, " ").rstrip(" ")


def char_encode(name: str) -> list[int]:
    """Wrap a name's characters in BOS/EOS using the shared id space."""
    if not name:
        raise ValueError("empty name")
    ids = [BOS_ID]
    for c in name:
        if c not in CHAR_IDS:
            raise ValueError(f"unencodable name: {c!r} not in character vocabulary")
        ids.append(CHAR_IDS[c])
    ids.append(EOS_ID)
    return ids


def char_decode(ids: list[int]) -> str:
    """Strip BOS, read characters up to EOS (or the end for truncated input)."""
    if not ids or ids[0] != BOS_ID:
        raise ValueError("character sequence must start with BOS")
    chars = []
    for i in ids[1:]:
        if i == EOS_ID:
            break
        tok = BASE_TOKENS[i] if 0 <= i < len(BASE_TOKENS) else None
        if tok is None or tok not in CHAR_IDS:
            raise ValueError(f"invalid token id {i} in character sequence")
        chars.append(tok)
    return "".join(chars)


def target_alphabet() -> list[int]:
    """Decoder output classes as shared ids: EOS first, then the characters."""
    return [EOS_ID] + [CHAR_IDS[c] for c in TARGET_CHARS]


def save_vocab(model: BpeModel, path: str) -> None:
    """One ``token<TAB>id`` line per entry, in id order."""
    with open(path, "w", encoding="utf-8") as f:
        for tok, i in sorted(model.vocab.items(), key=lambda kv: kv[1]):
            f.write(f"{tok}\t{i}\n")


def load_vocab(path: str) -> dict[str, int]:
    vocab: dict[str, int] = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            tok, sep, num = line.rpartition("\t")
            if not sep or not num.isdigit():
                raise DataFormatError("expected token<TAB>id", line_no)
            if tok in vocab:
                raise DataFormatError(f"duplicate token {tok!r}", line_no)
            vocab[tok] = int(num)
    return vocab


def save_merges(model: BpeModel, path: str) -> None:
    """One ``left right`` line per merge, in learned order."""
    with open(path, "w", encoding="utf-8") as f:
        for left, right in model.merges:
            f.write(f"{left} {right}\n")


def load_merges(path: str) -> list[tuple[str, str]]:
    merges: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise DataFormatError("expected exactly two space-separated tokens", line_no)
            merges.append((parts[0], parts[1]))
    return merges


def load_model(vocab_path: str, merges_path: str) -> BpeModel:
    return BpeModel.from_parts(load_vocab(vocab_path), load_merges(merges_path))
