"""Control-flow refinement and expected-runtime analysis for
probabilistic integer programs."""

__version__ = "0.1.0"
