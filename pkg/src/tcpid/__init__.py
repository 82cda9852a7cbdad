"""Passive identification of TCP congestion-control algorithms.

Subpackages:
    ccsim       event-driven single-flow simulator for six CC algorithms
    features    receiver-side feature extraction from packet traces
    preprocess  resampling, smoothing, windowing, normalization, dataset files
    models      from-scratch LSTM and dense classifiers (numpy only)
    evaluation  confusion matrices, per-class metrics, channel ablations
    cli         command-line front end
"""

__version__ = "0.1.0"
