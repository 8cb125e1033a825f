"""First-order optimizers over ``{name: ndarray}`` parameter dicts.

Updates are written into the parameter arrays in place, so networks that
hand out references to their arrays see the new values directly.
"""

import numpy as np

DEFAULT_LR = 1e-4
DEFAULT_CLIP = 5.0


def global_norm(grads):
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads, max_norm):
    """Rescale all gradients together when their global L2 norm exceeds ``max_norm``."""
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    norm = global_norm(grads)
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


class Optimizer:
    """Base class: shape checks, optional clipping and the step counter."""

    def __init__(self, lr=DEFAULT_LR, clip_norm=None):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = lr
        self.clip_norm = clip_norm
        self.t = 0
        self._state = {}

    def _check(self, params, grads):
        if params.keys() != grads.keys():
            raise ValueError("parameter and gradient names differ")
        for k in params:
            if params[k].shape != grads[k].shape:
                raise ValueError(
                    f"shape mismatch for {k}: {params[k].shape} vs {grads[k].shape}"
                )
            st = self._state.get(k)
            if st is not None and st[0].shape != params[k].shape:
                raise ValueError(f"optimizer state for {k} has the wrong shape")

    def step(self, params, grads):
        self._check(params, grads)
        if self.clip_norm is not None:
            grads = clip_gradients(grads, self.clip_norm)
        self.t += 1
        for k, p in params.items():
            p -= self._update(k, grads[k])
        return params

    def _update(self, name, g):
        raise NotImplementedError


class SGD(Optimizer):
    """Plain gradient descent, ``p -= lr * g``."""

    def _update(self, name, g):
        return self.lr * g


class Adam(Optimizer):
    """Bias-corrected Adam with the usual default constants."""

    def __init__(self, lr=DEFAULT_LR, beta1=0.9, beta2=0.999, eps=1e-8, clip_norm=None):
        super().__init__(lr, clip_norm)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def _update(self, name, g):
        if name not in self._state:
            self._state[name] = (np.zeros_like(g), np.zeros_like(g))
        m, v = self._state[name]
        m *= self.beta1
        m += (1.0 - self.beta1) * g
        v *= self.beta2
        v += (1.0 - self.beta2) * g * g
        m_hat = m / (1.0 - self.beta1 ** self.t)
        v_hat = v / (1.0 - self.beta2 ** self.t)
        return self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class RMSprop(Optimizer):
    """RMSprop: ``s = decay*s + (1-decay)*g^2``, ``p -= lr*g/(sqrt(s)+eps)``."""

    def __init__(self, lr=DEFAULT_LR, decay=0.9, eps=1e-8, clip_norm=None):
        super().__init__(lr, clip_norm)
        self.decay = decay
        self.eps = eps

    def _update(self, name, g):
        if name not in self._state:
            self._state[name] = (np.zeros_like(g),)
        (s,) = self._state[name]
        s *= self.decay
        s += (1.0 - self.decay) * g * g
        return self.lr * g / (np.sqrt(s) + self.eps)


def adam_step(state, params, grads):
    """Functional form: apply one step of an :class:`Adam` instance."""
    return state.step(params, grads), state


def rmsprop_step(state, params, grads):
    return state.step(params, grads), state


OPTIMIZERS = {"adam": Adam, "rmsprop": RMSprop, "sgd": SGD}


def make_optimizer(name, lr=DEFAULT_LR, clip_norm=None, **kwargs):
    try:
        cls = OPTIMIZERS[name]
    except KeyError:
        raise ValueError(f"unknown optimizer {name!r}; expected one of {sorted(OPTIMIZERS)}") from None
    return cls(lr=lr, clip_norm=clip_norm, **kwargs)
