"""Central finite-difference gradient checks."""
import numpy as np

from .tensor import backward


def numerical_grad(fn, tensor, h=1e-6):
    """d fn() / d tensor by central differences; ``fn`` returns a scalar Tensor."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = fn().item()
        flat[i] = old - h
        fm = fn().item()
        flat[i] = old
        grad.reshape(-1)[i] = (fp - fm) / (2 * h)
    return grad


def relative_error(a, b, floor=1e-8):
    """Max |a - b| / max(|a|, |b|, floor) elementwise."""
    a, b = np.asarray(a), np.asarray(b)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale)) if a.size else 0.0


def check_gradients(fn, tensors, h=1e-6, floor=1e-3):
    """Largest relative error between analytic and numerical gradients.

    ``floor`` bounds the denominator so entries whose true gradient is ~0
    are compared in absolute terms: central differences at h = 1e-6 carry
    roughly 1e-10 of round-off, which swamps a relative test on such entries.
    """
    for t in tensors:
        t.grad = None
    backward(fn())
    worst = 0.0
    for t in tensors:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numerical_grad(fn, t, h)
        worst = max(worst, relative_error(analytic, numeric, floor))
    return worst
