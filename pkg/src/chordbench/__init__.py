"""chordbench: a self-contained toolkit for chord recognition experiments.

Subsystems:

- :mod:`chordbench.labels` -- chord-label parsing and pitch-class algebra
- :mod:`chordbench.annotations` -- timed annotation IO (.lab / CSV / ARFF)
- :mod:`chordbench.metrics` -- single-chord and duration-weighted sequence metrics
- :mod:`chordbench.stats` -- occurrence and transition statistics
- :mod:`chordbench.features` -- constant-Q / chroma feature pipeline
- :mod:`chordbench.synth` -- synthetic chord-annotated audio datasets
- :mod:`chordbench.templates` -- chroma-template baseline recognizer
- :mod:`chordbench.labeler` -- trainable self-attention sequence labeler
- :mod:`chordbench.harness` -- cross-validation experiment harness
"""

__version__ = "0.1.0"
