"""Finite-difference verification of analytic gradients.

The harness runs one analytic backward pass, then perturbs input elements
with central differences and reports the worst relative error. It is the
independent oracle the differentiable ops are checked against, so it never
calls into any backward code itself.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def finite_difference_check(fn, inputs, h: float = 1e-5, max_elements: int | None = None, rng=None) -> float:
    """Compare analytic gradients of ``fn(*inputs)`` against central differences.

    ``fn`` must return a scalar Tensor (compose with sum if needed) and
    ``inputs`` are Tensors whose gradients are checked. Relative error uses
    an absolute floor of 1e-8. When ``max_elements`` is given, a random
    subset of that many elements per input is probed (seeded via ``rng``).
    Returns the worst relative error over all probed elements.
    """
    inputs = list(inputs)
    for t in inputs:
        if not isinstance(t, Tensor):
            raise TypeError("inputs must be Tensors")
        t.requires_grad = True
        t.grad = None

    out = fn(*inputs)
    if not isinstance(out, Tensor) or out.size != 1:
        raise ValueError("fn must return a scalar Tensor")
    if not np.all(np.isfinite(out.data)):
        raise FloatingPointError("fn produced a non-finite output")
    out.backward()
    analytic = []
    for t in inputs:
        if t.grad is None:
            raise RuntimeError("analytic gradient missing for an input; op did not propagate")
        analytic.append(t.grad.copy())
        t.grad = None

    if rng is None:
        rng = np.random.default_rng(0)

    worst = 0.0
    for t, an in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        n = flat.size
        if max_elements is not None and n > max_elements:
            idxs = rng.choice(n, size=max_elements, replace=False)
        else:
            idxs = range(n)
        for i in idxs:
            saved = flat[i]
            flat[i] = saved + h
            f_plus = float(fn(*inputs).data)
            flat[i] = saved - h
            f_minus = float(fn(*inputs).data)
            flat[i] = saved
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise FloatingPointError("fn produced a non-finite output during perturbation")
            fd = (f_plus - f_minus) / (2.0 * h)
            a = an.reshape(-1)[i]
            err = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
            if err > worst:
                worst = err
    return worst


def check_op(fn, shapes, h: float = 1e-5, seed: int = 0, scale: float = 1.0, max_elements: int | None = None) -> float:
    """Build float64 random inputs of the given shapes and run the check."""
    rng = np.random.default_rng(seed)
    inputs = [Tensor(scale * rng.standard_normal(s), requires_grad=True) for s in shapes]
    return finite_difference_check(fn, inputs, h=h, max_elements=max_elements, rng=rng)
