"""Central finite-difference verification of tape gradients."""

from collections.abc import Callable, Mapping, Sequence

import numpy as np

from cape.autodiff.tensor import GradTape, Tensor
from cape.exceptions import NonScalarError

ScalarFn = Callable[[], Tensor]


def _scalar(value: Tensor) -> float:
    if value.size != 1:
        raise NonScalarError(value.shape)
    return value.item()


def grad_check_report(
    f: ScalarFn,
    params: Mapping[str, Tensor] | Sequence[Tensor],
    eps: float = 1e-5,
) -> dict[str, float]:
    """Compare analytic and central-difference gradients per parameter.

    Args:
        f: Zero-argument function reading ``params`` and returning a scalar tensor.
        params: Parameters to perturb, by name or position.
        eps: Finite-difference step.

    Returns:
        Mapping of parameter name to the maximum over its coordinates of
        ``|analytic - numeric| / max(1, |analytic|)``.

    Raises:
        NonScalarError: If ``f`` does not return a single value.
        ValueError: If ``eps`` is not positive.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    named = dict(params) if isinstance(params, Mapping) else {
        f"param{i}": p for i, p in enumerate(params)
    }

    for p in named.values():
        p.grad = None
    with GradTape() as tape:
        out = f()
        _scalar(out)
        tape.backward(out)
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in named.items()
    }

    errors: dict[str, float] = {}
    for name, p in named.items():
        flat = p.data.reshape(-1)
        grad_flat = analytic[name].reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            f_plus = _scalar(f())
            flat[i] = original - eps
            f_minus = _scalar(f())
            flat[i] = original
            numeric = (f_plus - f_minus) / (2.0 * eps)
            err = abs(grad_flat[i] - numeric) / max(1.0, abs(grad_flat[i]))
            worst = max(worst, float(err))
        errors[name] = worst
    return errors


def grad_check(
    f: ScalarFn,
    params: Mapping[str, Tensor] | Sequence[Tensor],
    eps: float = 1e-5,
) -> float:
    """Return the maximum relative gradient error over all parameters."""
    report = grad_check_report(f, params, eps)
    return max(report.values(), default=0.0)
