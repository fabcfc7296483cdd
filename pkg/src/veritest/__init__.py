"""Property-driven test generation for black-box classifiers.

The package trains a white-box stand-in (decision tree or small ReLU
network) on a black-box model's predictions, compiles assume/assert
properties plus the stand-in into SMT-LIB constraints, and turns solver
models into confirmed counterexample test suites.
"""

__version__ = "0.1.0"
