"""Single command-line entry point for the say-and-spell toolkit.

Subcommands: generate (synthetic datasets), train (BPE + transformer),
predict (checkpoint inference), baseline (rule-based extractor), and eval
(error metrics, error-vs-rejection CSV/SVG). Option precedence per value is
built-in default < SPELLCAP_SEED (seeds only) < config file < command flag.

Exit codes: 0 success, 2 configuration or contract error, 3 I/O or data
format error, 4 numeric failure during training.
"""

import argparse
import os
import sys
from collections import Counter
from pathlib import Path

from .baseline import Prediction, baseline_predict, edit_distance_confidence
from .datagen import (
    PATTERNS,
    NoiseConfig,
    default_lexicon_path,
    generate_dataset,
    load_dataset,
    load_lexicon,
    parse_dataset_lines,
    save_dataset,
    train_dev_split,
)
from .errors import ConfigError, DataFormatError, NumericError
from .evalharness import (
    ScoredResult,
    emit_csv,
    emit_plot,
    er_curve,
    exact_match_error,
    load_results,
    save_results,
)
from .tokenizer import learn_bpe


def _coerce(kind, key, value):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from None


def parse_kv_file(path) -> dict:
    """Flat key=value lines; blank lines and #-comments are skipped."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path} line {line_no}: expected key=value, "
                                  f"got {line!r}")
            out[key.strip()] = value.strip()
    return out


_NOISE_FLOATS = (
    "letter_sub_prob", "filler_prob", "nato_prob", "nato_variant_prob",
    "fullname_prob", "name_drop_prob", "conf_clean", "conf_noisy", "jitter",
    "label_error_prob",
)


def noise_config_from_file(path) -> NoiseConfig:
    kwargs = {}
    for key, value in parse_kv_file(path).items():
        if key in _NOISE_FLOATS:
            kwargs[key] = _coerce(float, key, value)
        elif key == "nbest_size":
            kwargs[key] = _coerce(int, key, value)
        elif key == "pattern_weights":
            kwargs[key] = tuple(_coerce(float, key, x) for x in value.split(","))
        elif key == "confusion_sets":
            kwargs[key] = tuple(tuple(group) for group in value.split(","))
        else:
            raise ConfigError(f"unknown noise config key {key!r}")
    return NoiseConfig(**kwargs)


_MODEL_INTS = ("n_layers", "n_heads", "d_model", "d_ff", "max_src_len", "max_tgt_len")


def model_settings_from_file(path):
    """Returns (ModelConfig kwargs sans vocab_size, n_merges)."""
    kwargs = {}
    n_merges = 1000
    if path:
        for key, value in parse_kv_file(path).items():
            if key in _MODEL_INTS:
                kwargs[key] = _coerce(int, key, value)
            elif key == "dropout":
                kwargs[key] = _coerce(float, key, value)
            elif key == "n_merges":
                n_merges = _coerce(int, key, value)
            else:
                raise ConfigError(f"unknown model config key {key!r}")
    if n_merges < 0:
        raise ConfigError(f"n_merges must be >= 0, got {n_merges}")
    return kwargs, n_merges


_TRAIN_INTS = ("batch_size", "epochs", "seed", "patience")
_TRAIN_FLOATS = ("learning_rate", "beta1", "beta2", "eps")


def train_settings_from_file(path) -> dict:
    kwargs = {}
    if path:
        for key, value in parse_kv_file(path).items():
            if key in _TRAIN_INTS:
                kwargs[key] = _coerce(int, key, value)
            elif key in _TRAIN_FLOATS:
                kwargs[key] = _coerce(float, key, value)
            else:
                raise ConfigError(f"unknown train config key {key!r}")
    return kwargs


def _env_seed():
    raw = os.environ.get("SPELLCAP_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"SPELLCAP_SEED must be an integer, got {raw!r}") from None


def _resolve_seed(flag, file_value=None, default=0) -> int:
    if flag is not None:
        return flag
    if file_value is not None:
        return file_value
    env = _env_seed()
    return env if env is not None else default


# ----------------------------------------------------------- subcommands


def cmd_generate(args) -> int:
    if args.n < 1:
        raise ConfigError(f"--n must be >= 1, got {args.n}")
    if args.dev_out and not 0.0 < args.dev_fraction < 1.0:
        raise ConfigError(f"--dev-fraction must be in (0, 1), got {args.dev_fraction}")
    lex = load_lexicon(args.lexicon or default_lexicon_path())
    cfg = noise_config_from_file(args.noise) if args.noise else NoiseConfig()
    seed = _resolve_seed(args.seed)
    tagged = generate_dataset(lex, args.n, cfg, seed, with_patterns=True)
    samples = [s for s, _ in tagged]
    mix = Counter(p for _, p in tagged)
    if args.dev_out:
        train, dev = train_dev_split(samples, args.dev_fraction, seed)
        save_dataset(train, args.out)
        save_dataset(dev, args.dev_out)
        print(f"wrote {len(train)} samples to {args.out}, "
              f"{len(dev)} to {args.dev_out}")
    else:
        save_dataset(samples, args.out)
        print(f"wrote {len(samples)} samples to {args.out}")
    print("pattern mix: " + " ".join(f"{p}={mix.get(p, 0)}" for p in PATTERNS))
    return 0


def cmd_train(args) -> int:
    from .seq2seq import (
        ModelConfig,
        TrainConfig,
        init_parameters,
        load_train_state,
        pairs_from_samples,
        save_checkpoint,
        save_train_state,
        train,
    )

    samples = load_dataset(args.train)
    dev_samples = load_dataset(args.dev) if args.dev else []
    train_kwargs = train_settings_from_file(args.train_config)
    train_kwargs["seed"] = _resolve_seed(args.seed, train_kwargs.get("seed"))
    if args.epochs is not None:
        train_kwargs["epochs"] = args.epochs
    if args.batch_size is not None:
        train_kwargs["batch_size"] = args.batch_size
    if args.learning_rate is not None:
        train_kwargs["learning_rate"] = args.learning_rate
    train_cfg = TrainConfig(**train_kwargs)

    if args.resume:
        if args.model_config:
            raise ConfigError("--model-config cannot be combined with --resume")
        params, model_cfg, state, bpe = load_train_state(args.resume)
        if bpe is None:
            raise ConfigError(f"{args.resume} carries no tokenizer")
    else:
        model_kwargs, n_merges = model_settings_from_file(args.model_config)
        texts = [s.nbest[0].text() for s in samples]
        bpe = learn_bpe(texts, n_merges)
        model_cfg = ModelConfig(vocab_size=len(bpe.vocab), **model_kwargs)
        params = init_parameters(model_cfg, seed=train_cfg.seed)
        state = None

    train_pairs = pairs_from_samples(samples, bpe)
    dev_pairs = pairs_from_samples(dev_samples, bpe)
    result = train(params, model_cfg, train_pairs, dev_pairs, train_cfg, state=state)

    save_checkpoint(args.out, result.params, model_cfg, bpe=bpe)
    save_train_state(args.out + ".resume", params, model_cfg, result.state, bpe=bpe)
    history_path = args.history or args.out + ".history.csv"
    with open(history_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,dev_loss\n")
        for h in result.history:
            fh.write(f"{h.epoch},{h.train_loss:.6f},{h.dev_loss:.6f}\n")
    best = "final" if result.best_epoch is None else f"epoch {result.best_epoch}"
    print(f"trained {len(result.history)} epochs ({best} parameters kept)"
          + (", stopped early" if result.stopped_early else ""))
    print(f"wrote {args.out}, {args.out}.resume, {history_path}")
    return 0


def _read_input_lines(spec_path) -> list:
    if spec_path == "-":
        return sys.stdin.read().splitlines()
    with open(spec_path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def cmd_predict(args) -> int:
    from .seq2seq import load_checkpoint, predict_name

    ck = load_checkpoint(args.checkpoint)
    if ck.bpe is None:
        raise ConfigError(f"{args.checkpoint} carries no tokenizer; "
                          "cannot encode input text")
    if args.beam_width < 1:
        raise ConfigError(f"--beam-width must be >= 1, got {args.beam_width}")
    lines = _read_input_lines(args.input)
    stripped = [l for l in lines if l.strip()]
    if stripped and "|" in stripped[0]:
        items = [(s.nbest[0].text(), s.gold)
                 for s in parse_dataset_lines(lines, where=args.input)]
    else:
        items = [(l.strip(), "-") for l in stripped]
    results = []
    for text, gold in items:
        pred = predict_name(ck.params, ck.config, ck.bpe, text,
                            beam_width=args.beam_width,
                            length_normalize=args.length_normalize)
        results.append(ScoredResult(pred, gold))
    save_results(results, args.out)
    print(f"wrote {len(results)} predictions to {args.out}")
    return 0


def cmd_baseline(args) -> int:
    samples = load_dataset(args.input)
    results = []
    for s in samples:
        pred = baseline_predict(list(s.nbest))
        if args.confidence == "editdist":
            conf = edit_distance_confidence(pred, s.nbest[0])
            pred = Prediction(pred.name, conf, "baseline")
        results.append(ScoredResult(pred, s.gold))
    save_results(results, args.out)
    print(f"wrote {len(results)} baseline predictions to {args.out}")
    return 0


def _curve_paths(base: str, labels) -> list:
    if len(labels) == 1:
        return [base]
    p = Path(base)
    return [str(p.with_name(f"{p.stem}.{label}{p.suffix}")) for label in labels]


def cmd_eval(args) -> int:
    loaded = []
    labels = []
    seen = Counter()
    for path in args.results:
        try:
            results = load_results(path)
        except DataFormatError as e:
            if "no results" in str(e):
                raise ConfigError(str(e)) from None
            raise
        label = Path(path).stem
        seen[label] += 1
        if seen[label] > 1:
            label = f"{label}.{seen[label]}"
        loaded.append(results)
        labels.append(label)
        print(f"{path} error_rate {exact_match_error(results):.4f} "
              f"({len(results)} results)")
    if args.er_curve or args.plot:
        curves = [er_curve(r, n_points=args.n_points) for r in loaded]
        if args.er_curve:
            for curve, out in zip(curves, _curve_paths(args.er_curve, labels)):
                emit_csv(curve, out)
                print(f"wrote {out}")
        if args.plot:
            emit_plot(list(zip(labels, curves)), args.plot)
            print(f"wrote {args.plot}")
    return 0


# ----------------------------------------------------------- wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spellcap",
        description="Capture spelled names from noisy transcripts: generate "
                    "data, train and run the transducer, run the rule-based "
                    "extractor, and evaluate error-vs-rejection tradeoffs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic labeled dataset")
    g.add_argument("--lexicon", help="name list file (default: bundled 200 names)")
    g.add_argument("--n", type=int, default=1000, help="sample count")
    g.add_argument("--noise", help="key=value noise config file")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", required=True, help="dataset file to write")
    g.add_argument("--dev-out", help="also write a held-out split here")
    g.add_argument("--dev-fraction", type=float, default=0.1,
                   help="fraction for --dev-out (default 0.1)")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="learn BPE and train the transducer")
    t.add_argument("--train", required=True, help="training dataset file")
    t.add_argument("--dev", help="validation dataset file (best-epoch tracking)")
    t.add_argument("--out", required=True, help="checkpoint file to write")
    t.add_argument("--model-config", help="key=value model settings")
    t.add_argument("--train-config", help="key=value optimizer settings")
    t.add_argument("--resume", help="resume container from a previous run "
                                    "(the OUT.resume file)")
    t.add_argument("--history", help="per-epoch loss CSV (default OUT.history.csv)")
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--learning-rate", type=float, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="decode names with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True,
                   help="dataset file, or - for stdin (dataset lines or raw text)")
    p.add_argument("--out", required=True, help="results file to write")
    p.add_argument("--beam-width", type=int, default=1)
    p.add_argument("--length-normalize", action="store_true",
                   help="divide log-probability confidence by emitted length")
    p.set_defaults(func=cmd_predict)

    b = sub.add_parser("baseline", help="run the rule-based extractor")
    b.add_argument("--input", required=True, help="dataset file")
    b.add_argument("--out", required=True, help="results file to write")
    b.add_argument("--confidence", choices=("avg", "editdist"), default="avg",
                   help="letter-average or edit-distance confidence")
    b.set_defaults(func=cmd_baseline)

    e = sub.add_parser("eval", help="score results files, emit ER curve artifacts")
    e.add_argument("results", nargs="+", help="results files from predict/baseline")
    e.add_argument("--er-curve", help="CSV output (suffixed per file when many)")
    e.add_argument("--plot", help="SVG output overlaying all curves")
    e.add_argument("--n-points", type=int, default=101)
    e.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DataFormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
