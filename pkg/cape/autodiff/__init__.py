"""Minimal dense tensors with reverse-mode automatic differentiation."""

from cape.autodiff import ops
from cape.autodiff.gradcheck import grad_check, grad_check_report
from cape.autodiff.nn import MLP2, Activation, LayerNorm, Linear, Module, mlp2
from cape.autodiff.tensor import GradTape, Tensor, TapeNode, active_tape

__all__ = [
    "Activation",
    "GradTape",
    "LayerNorm",
    "Linear",
    "MLP2",
    "Module",
    "TapeNode",
    "Tensor",
    "active_tape",
    "grad_check",
    "grad_check_report",
    "mlp2",
    "ops",
]
