from . import ops
from .autograd import BACKWARD_RULES, Gradients, backward
from .engine import Matrix, Node, Tape, as_matrix
from .gradcheck import grad_check

__all__ = [
    "BACKWARD_RULES",
    "Gradients",
    "Matrix",
    "Node",
    "Tape",
    "as_matrix",
    "backward",
    "grad_check",
    "ops",
]
