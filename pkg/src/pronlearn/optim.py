"""Optimizers over a ParameterSet: SGD with momentum and Adam."""

from __future__ import annotations

import numpy as np

from .layers import ParameterSet


class SGD:
    def __init__(self, params: ParameterSet, lr: float, momentum: float = 0.0):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self._velocity = {name: np.zeros_like(t.data) for name, t in params.items()}

    def step(self):
        for name, t in self.params.items():
            if t.grad is None:
                continue
            if self.momentum:
                v = self._velocity[name]
                v *= self.momentum
                v -= self.lr * t.grad
                t.data = t.data + v
            else:
                t.data = t.data - self.lr * t.grad

    def zero_grad(self):
        self.params.zero_grad()


class Adam:
    def __init__(self, params: ParameterSet, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self._v = {name: np.zeros_like(t.data) for name, t in params.items()}
        self._t = 0

    def step(self):
        self._t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self._t
        bias2 = 1.0 - b2 ** self._t
        for name, t in self.params.items():
            if t.grad is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1 - b1) * t.grad
            v *= b2
            v += (1 - b2) * t.grad * t.grad
            t.data = t.data - self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)

    def zero_grad(self):
        self.params.zero_grad()
