"""Activations, dense layers, losses and their hand-written gradients.

Anything that exposes ``parameters()``, ``penalized()``, ``forward(inputs)``
and ``backward(cache, d_out)`` can be trained and gradient-checked with the
functions here; :class:`demzsl.model.DemModel` is the main such network.
"""

from dataclasses import dataclass

import numpy as np

TANH_SCALE = 1.7159
TANH_SLOPE = 2.0 / 3.0
LOSSES = ("ls", "hinge")
DEFAULT_MARGIN = 0.1


def relu(x):
    return np.maximum(x, 0.0)


def scaled_tanh(x):
    """Element-wise ``1.7159 * tanh(2x/3)``."""
    return TANH_SCALE * np.tanh(TANH_SLOPE * np.asarray(x, dtype=np.float64))


def identity(x):
    return np.asarray(x, dtype=np.float64)


def _d_relu(pre, out):
    # subgradient 0 at exactly 0
    return (pre > 0.0).astype(np.float64)


def _d_scaled_tanh(pre, out):
    t = out / TANH_SCALE
    return TANH_SCALE * TANH_SLOPE * (1.0 - t * t)


def _d_identity(pre, out):
    return np.ones_like(pre)


ACTIVATIONS = {
    "relu": (relu, _d_relu),
    "scaled_tanh": (scaled_tanh, _d_scaled_tanh),
    "identity": (identity, _d_identity),
}


def activate(name, pre):
    return ACTIVATIONS[name][0](pre)


def activation_grad(name, pre, out, d_out):
    """Backpropagate ``d_out`` through activation ``name``."""
    return d_out * ACTIVATIONS[name][1](pre, out)


@dataclass
class DenseLayer:
    """``act(weight @ x + bias)`` with weight stored ``out_dim x in_dim``."""

    weight: np.ndarray
    bias: np.ndarray = None
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2:
            raise ValueError("weight must be 2-D")
        if self.bias is not None and self.bias.shape != (self.weight.shape[0],):
            raise ValueError(
                f"bias shape {self.bias.shape} does not match out_dim "
                f"{self.weight.shape[0]}"
            )

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]

    def forward(self, x):
        if x.shape[0] != self.in_dim:
            raise ValueError(
                f"dimension mismatch: layer expects {self.in_dim} rows, got {x.shape[0]}"
            )
        pre = self.weight @ x
        if self.bias is not None:
            pre = pre + self.bias[:, None]
        out = activate(self.activation, pre)
        return out, (x, pre, out)

    def backward(self, cache, d_out):
        """Return ``(d_x, d_weight, d_bias)``; ``d_bias`` is None without bias."""
        x, pre, out = cache
        d_pre = activation_grad(self.activation, pre, out, d_out)
        d_w = d_pre @ x.T
        d_b = d_pre.sum(axis=1) if self.bias is not None else None
        return self.weight.T @ d_pre, d_w, d_b


def uniform_init(rng, out_dim, in_dim):
    bound = 1.0 / np.sqrt(in_dim)
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


# -- losses ------------------------------------------------------------------


def _check_lambda(lam):
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")


def weight_penalty(params, names):
    return sum(float(np.sum(params[n] ** 2)) for n in names)


def embedding_loss(embedded, visual, params=(), lam=0.0):
    """Least-square embedding loss plus squared-Frobenius weight penalty.

    ``(1/N) sum_i ||visual_i - embedded_i||^2 + lam * sum_p ||p||_F^2``
    where samples are columns and ``params`` lists the weight matrices
    (biases are never penalised).
    """
    embedded = np.asarray(embedded, dtype=np.float64)
    visual = np.asarray(visual, dtype=np.float64)
    if embedded.shape != visual.shape:
        raise ValueError(f"shape mismatch: {embedded.shape} vs {visual.shape}")
    _check_lambda(lam)
    n = visual.shape[1]
    fit = float(np.sum((visual - embedded) ** 2)) / n
    return fit + lam * sum(float(np.sum(np.asarray(p) ** 2)) for p in params)


def embedding_loss_grad(embedded, visual):
    """Gradient of the data term of :func:`embedding_loss` w.r.t. ``embedded``."""
    n = visual.shape[1]
    return (2.0 / n) * (embedded - visual)


def _hinge_terms(embedded, visual, labels, margin):
    embedded = np.asarray(embedded, dtype=np.float64)
    visual = np.asarray(visual, dtype=np.float64)
    labels = np.asarray(labels)
    n_cls = embedded.shape[1]
    if embedded.shape[0] != visual.shape[0]:
        raise ValueError(
            f"dimension mismatch: prototypes {embedded.shape}, visual {visual.shape}"
        )
    if labels.shape != (visual.shape[1],):
        raise ValueError("need exactly one label per visual sample")
    if labels.size and (labels.min() < 0 or labels.max() >= n_cls):
        raise ValueError(f"labels out of range [0, {n_cls})")
    if margin <= 0:
        raise ValueError(f"margin must be positive, got {margin}")
    diff = visual.T[:, None, :] - embedded.T[None, :, :]
    dist = np.einsum("ncd,ncd->nc", diff, diff)
    rows = np.arange(labels.size)
    slack = margin + dist[rows, labels][:, None] - dist
    slack[rows, labels] = 0.0
    return embedded, visual, labels, slack


def hinge_ranking_loss(embedded, visual, labels, margin=DEFAULT_MARGIN):
    """Ranking hinge over all wrong classes with squared-Euclidean scores.

    Parameters
    ----------
    embedded : ndarray, shape (D, C)
        One embedded prototype per training class.
    visual : ndarray, shape (D, N)
    labels : ndarray of int, shape (N,)
        Column index into ``embedded`` of each sample's class.
    margin : float
    """
    _, visual, _, slack = _hinge_terms(embedded, visual, labels, margin)
    return float(np.maximum(slack, 0.0).sum()) / visual.shape[1]


def hinge_ranking_loss_grads(embedded, visual, labels, margin=DEFAULT_MARGIN):
    """Gradients of :func:`hinge_ranking_loss` w.r.t. both arguments.

    Returns ``(d_embedded, d_visual)``. The visual-side gradient is what a
    visual -> semantic model needs, where the samples move and the
    prototypes are fixed.
    """
    embedded, visual, labels, slack = _hinge_terms(embedded, visual, labels, margin)
    n = visual.shape[1]
    active = (slack > 0.0).astype(np.float64)       # (N, C), zero on true class
    pull = active.sum(axis=1)                        # active pairs per sample
    weight = -active
    weight[np.arange(n), labels] = pull
    # loss = (1/N) sum_ic weight_ic * ||x_i - e_c||^2 + const
    d_emb = 2.0 * (embedded * weight.sum(axis=0) - visual @ weight) / n
    d_vis = 2.0 * (visual * weight.sum(axis=1) - embedded @ weight.T) / n
    return d_emb, d_vis


def hinge_ranking_loss_grad(embedded, visual, labels, margin=DEFAULT_MARGIN):
    """Gradient of :func:`hinge_ranking_loss` w.r.t. the prototypes."""
    return hinge_ranking_loss_grads(embedded, visual, labels, margin)[0]


# -- generic objective / gradient over a network -----------------------------


def objective(network, inputs, target, loss="ls", lam=0.0, labels=None,
              margin=DEFAULT_MARGIN):
    """Scalar training objective of ``network`` on one batch.

    For ``loss='ls'`` the inputs are per-sample semantic inputs and
    ``target`` the matching visual features. For ``loss='hinge'`` the
    inputs hold one entry per training class, ``target`` holds the visual
    features and ``labels`` maps each feature column to its class column.
    Networks with ``direction == 'v2s'`` swap roles under the hinge loss:
    inputs are the samples and ``target`` the fixed class prototypes.
    """
    _check_lambda(lam)
    out, _ = network.forward(inputs)
    params = network.parameters()
    penalty = lam * weight_penalty(params, network.penalized())
    if loss == "ls":
        return embedding_loss(out, target) + penalty
    if loss == "hinge":
        protos, samples = _hinge_roles(network, out, target)
        return hinge_ranking_loss(protos, samples, labels, margin) + penalty
    raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")


def _hinge_roles(network, out, target):
    if getattr(network, "direction", "s2v") == "v2s":
        return target, out
    return out, target


def backward(network, inputs, target, loss="ls", lam=0.0, labels=None,
             margin=DEFAULT_MARGIN):
    """Loss value and exact gradients for every parameter of ``network``.

    Returns
    -------
    value : float
    grads : dict
        Same keys and shapes as ``network.parameters()``.
    """
    _check_lambda(lam)
    out, cache = network.forward(inputs)
    if loss == "ls":
        if out.shape != np.shape(target):
            raise ValueError(f"shape mismatch: output {out.shape}, target {np.shape(target)}")
        value = embedding_loss(out, target)
        d_out = embedding_loss_grad(out, target)
    elif loss == "hinge":
        protos, samples = _hinge_roles(network, out, target)
        value = hinge_ranking_loss(protos, samples, labels, margin)
        d_protos, d_samples = hinge_ranking_loss_grads(protos, samples, labels, margin)
        d_out = d_protos if protos is out else d_samples
    else:
        raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    grads = network.backward(cache, d_out)
    params = network.parameters()
    if lam:
        for name in network.penalized():
            grads[name] = grads[name] + 2.0 * lam * params[name]
        value += lam * weight_penalty(params, network.penalized())
    return value, grads


def grad_check(network, inputs, target, loss="ls", lam=0.0, step=1e-5,
               labels=None, margin=DEFAULT_MARGIN, max_coords=None, seed=0):
    """Compare analytic gradients with central finite differences.

    Every parameter coordinate is probed unless the network has more than
    ``max_coords`` of them, in which case a seeded random subset of
    ``max_coords`` coordinates (at least 200) is probed.

    Returns
    -------
    float
        ``max |g_a - g_n| / max(|g_a|, |g_n|, 1e-12)`` over probed coordinates.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    _, grads = backward(network, inputs, target, loss, lam, labels, margin)
    params = network.parameters()
    coords = [(name, idx) for name, p in params.items() for idx in np.ndindex(p.shape)]
    if max_coords is not None and len(coords) > max_coords:
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(coords), size=max(max_coords, 200), replace=False)
        coords = [coords[i] for i in np.sort(pick)]

    def f():
        return objective(network, inputs, target, loss, lam, labels, margin)

    worst = 0.0
    for name, idx in coords:
        p = params[name]
        orig = p[idx]
        p[idx] = orig + step
        f_plus = f()
        p[idx] = orig - step
        f_minus = f()
        p[idx] = orig
        g_num = (f_plus - f_minus) / (2.0 * step)
        g_an = grads[name][idx]
        err = abs(g_an - g_num) / max(abs(g_an), abs(g_num), 1e-12)
        worst = max(worst, err)
    return worst
