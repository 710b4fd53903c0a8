"""Say-and-spell name capture.

Subpackages and modules: ``tokenizer`` (BPE + character vocab), ``baseline``
(rule-based letter extractor), ``seq2seq`` (numpy transformer), ``datagen``
(synthetic spelled-name utterances), ``evalharness`` (edit distance, WER,
error-rejection curves), ``cli`` (the ``spellcap`` command).
"""

__version__ = "0.1.0"
