"""Quantum Markov states on Cayley trees: finite-volume states, entropy and mixing."""
__version__ = "0.1.0"

from .errors import QMSError  # noqa: E402
from .tree import TreeShape, ball, level_set, slab  # noqa: E402
from .model import ModelSpec, TransitionRule, custom_model, trace_state_model  # noqa: E402
from .ising import ising_model, ising_closed_form  # noqa: E402
from .entropy import build_ledger, level_entropy, mean_entropy  # noqa: E402

__all__ = [
    "QMSError", "TreeShape", "ball", "level_set", "slab", "ModelSpec", "TransitionRule",
    "custom_model", "trace_state_model", "ising_model", "ising_closed_form",
    "build_ledger", "level_entropy", "mean_entropy",
]
