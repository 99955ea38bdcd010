"""Differentiable quantum circuit tapes: simulation, transforms, gradients, compilation."""

from .expr import Const, Expr, Input, backprop, evaluate, jacobian
from .ir import Hamiltonian, Operation, PauliWord, Tape
from .sim import Device

__all__ = [
    "Const", "Device", "Expr", "Hamiltonian", "Input", "Operation", "PauliWord", "Tape",
    "backprop", "evaluate", "jacobian",
]
__version__ = "0.1.0"
