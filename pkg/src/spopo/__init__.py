"""Quantum dynamics of synchronously pumped, quasi-degenerate pulsed OPOs.

The pipeline: dispersion parameters -> nonlinear coupling matrix over the
signal comb (``phasematch``) -> pump/signal supermode bases and coupling
tensors (``supermode``) -> Lindblad open-system models (``model``) -> master
equation / quantum trajectories / spectra (``dynamics``) -> derived
observables (``analysis``).  The ``cli`` module orchestrates runs from a JSON
config into deterministic CSV/JSON artifacts.
"""

__version__ = "0.1.0"

from . import analysis, config, dynamics, hilbert, model, phasematch, supermode  # noqa: F401
