"""Adam optimizer with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


class MissingGradError(RuntimeError):
    """A parameter had no gradient at update time; names the parameter."""


@dataclass
class AdamState:
    """Per-parameter moment estimates plus the shared step counter."""

    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state: AdamState):
    """One bias-corrected Adam update, in place on the parameter arrays.

    ``params`` is a list of (name, ndarray); ``grads`` aligns with it.
    Raises MissingGradError naming the parameter when a gradient is absent.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for (name, p), g in zip(params, grads):
        if g is None:
            raise MissingGradError(f"parameter {name!r} has no gradient")
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        mhat = m / c1
        vhat = v / c2
        p -= (state.lr * mhat / (np.sqrt(vhat) + state.eps)).astype(p.dtype)
    return params, state


class Adam:
    """Convenience wrapper binding AdamState to a list of named tensors."""

    def __init__(self, named_params, lr: float = 2e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
        self.params: list[tuple[str, Tensor]] = list(named_params)
        seen = set()
        for name, _ in self.params:
            if name in seen:
                raise ValueError(f"duplicate parameter name {name!r}")
            seen.add(name)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        self.weight_decay = weight_decay

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float):
        self.state.lr = float(value)

    def zero_grad(self):
        for _, p in self.params:
            p.grad = None

    def step(self):
        grads = []
        for name, p in self.params:
            g = p.grad
            if g is None:
                raise MissingGradError(f"parameter {name!r} has no gradient")
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            grads.append(g)
        adam_step([(name, p.data) for name, p in self.params], grads, self.state)
