"""Federated fronthaul-traffic forecasting.

Near-RT RIC clients fit a shared one-step-ahead load predictor on their own
traffic windows; a Non-RT RIC server averages the clients' parameter deltas.
The predictor is a gated recurrent network over the lookback window (default)
or a windowed feed-forward net.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import (
    EmptyShard,
    NoClients,
    SeriesTooShort,
    ShapeMismatch,
    WrongWindowLength,
)
from .nn import ModelParams, mlp_backward, mlp_forward, mlp_init
from .traffic import denormalize, normalize


def make_windows(series, lookback):
    """Sliding windows of ``lookback`` samples and the sample that follows each."""
    s = np.asarray(series, dtype=float)
    if s.ndim != 1:
        raise ValueError("make_windows expects a 1-D series")
    if s.size <= lookback:
        raise SeriesTooShort(f"series of length {s.size} needs more than {lookback} samples")
    idx = np.arange(lookback)[None, :] + np.arange(s.size - lookback)[:, None]
    return s[idx], s[lookback:].copy()


# -- gated recurrent unit -------------------------------------------------------

def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def gru_init(hidden, rng, n_in=1, n_out=1) -> ModelParams:
    lim = 1.0 / np.sqrt(hidden)
    vec = np.concatenate([
        rng.uniform(-lim, lim, size=n_in * 3 * hidden),
        rng.uniform(-lim, lim, size=hidden * 3 * hidden),
        np.zeros(3 * hidden),
        rng.uniform(-lim, lim, size=hidden * n_out),
        np.zeros(n_out),
    ])
    return ModelParams(vec, (n_in, hidden, n_out), "gru")


def gru_parts(p: ModelParams):
    n_in, H, n_out = p.shape
    v = p.vector
    sizes = [n_in * 3 * H, H * 3 * H, 3 * H, H * n_out, n_out]
    offs = np.cumsum([0] + sizes)
    W = v[offs[0]:offs[1]].reshape(n_in, 3 * H)
    U = v[offs[1]:offs[2]].reshape(H, 3 * H)
    b = v[offs[2]:offs[3]]
    Wo = v[offs[3]:offs[4]].reshape(H, n_out)
    bo = v[offs[4]:offs[5]]
    return W, U, b, Wo, bo


def _gru_inputs(p, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[..., None]
    if X.ndim != 3 or X.shape[2] != p.shape[0]:
        raise ShapeMismatch("GRU input must be (batch, steps) or (batch, steps, features)")
    return X


def gru_forward(p: ModelParams, X, keep=False):
    W, U, b, Wo, bo = gru_parts(p)
    H = p.shape[1]
    X = _gru_inputs(p, X)
    B, T, _ = X.shape
    XW = X @ W + b  # (B, T, 3H)
    Uzr, Un = U[:, :2 * H], U[:, 2 * H:]
    h = np.zeros((B, H))
    cache = []
    for t in range(T):
        a = XW[:, t, :]
        zr = _sigmoid(a[:, :2 * H] + h @ Uzr)
        z, r = zr[:, :H], zr[:, H:]
        rh = r * h
        n = np.tanh(a[:, 2 * H:] + rh @ Un)
        h_new = n + z * (h - n)
        if keep:
            cache.append((h, z, r, n, rh))
        h = h_new
    y = h @ Wo + bo
    return (y, h, cache, X) if keep else y


def gru_backward(p: ModelParams, X, dy, forward=None):
    """Gradient of sum(dy * output) with respect to the flat parameter vector.

    ``forward`` reuses a cached ``gru_forward(..., keep=True)`` result.
    """
    W, U, b, Wo, bo = gru_parts(p)
    H = p.shape[1]
    y, hT, cache, X = forward if forward is not None else gru_forward(p, X, keep=True)
    dy = np.asarray(dy, dtype=float).reshape(y.shape)
    gW = np.zeros_like(W)
    gU = np.zeros_like(U)
    gb = np.zeros_like(b)
    gWo = hT.T @ dy
    gbo = dy.sum(axis=0)
    Uzr, Un = U[:, :2 * H], U[:, 2 * H:]
    dh = dy @ Wo.T
    da = np.empty((X.shape[0], 3 * H))
    for t in range(len(cache) - 1, -1, -1):
        h, z, r, n, rh = cache[t]
        dn = dh * (1.0 - z)
        dh_prev = dh * z
        dan = dn * (1.0 - n * n)
        gU[:, 2 * H:] += rh.T @ dan
        drh = dan @ Un.T
        dh_prev += drh * r
        da[:, :H] = dh * (h - n) * z * (1.0 - z)
        da[:, H:2 * H] = drh * h * r * (1.0 - r)
        da[:, 2 * H:] = dan
        gU[:, :2 * H] += h.T @ da[:, :2 * H]
        dh_prev += da[:, :2 * H] @ Uzr.T
        gW += X[:, t, :].T @ da
        gb += da.sum(axis=0)
        dh = dh_prev
    return np.concatenate([gW.ravel(), gU.ravel(), gb, gWo.ravel(), gbo])


# -- model-agnostic helpers ------------------------------------------------------

def init_model(arch, lookback, hidden, rng) -> ModelParams:
    if arch == "gru":
        return gru_init(hidden, rng)
    if arch == "window":
        return mlp_init((lookback, hidden, 1), rng)
    raise ValueError(f"unknown forecaster architecture {arch!r}")


def model_predict(p: ModelParams, windows) -> np.ndarray:
    windows = np.atleast_2d(np.asarray(windows, dtype=float))
    if p.kind == "gru":
        return gru_forward(p, windows)[:, 0]
    if windows.shape[1] != p.shape[0]:
        raise ShapeMismatch("window length does not match the network input")
    return mlp_forward(p, windows)[:, 0]


def mse(p: ModelParams, windows, targets) -> float:
    err = model_predict(p, windows) - np.asarray(targets, dtype=float)
    return float(np.mean(err * err))


def loss_and_gradient(p: ModelParams, windows, targets) -> tuple[float, np.ndarray]:
    """Shard MSE and its gradient from a single forward pass."""
    windows = np.atleast_2d(np.asarray(windows, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    if windows.shape[0] == 0:
        raise EmptyShard("client has no training windows")
    if p.kind == "gru":
        fwd = gru_forward(p, windows, keep=True)
        err = fwd[0][:, 0] - targets
        grad = gru_backward(p, windows, (2.0 * err / len(targets))[:, None], forward=fwd)
        return float(np.mean(err * err)), grad
    grad, loss = mlp_backward(p, windows, targets[:, None])
    return loss, grad


def local_gradient(p: ModelParams, windows, targets) -> np.ndarray:
    """Mean over the shard of the gradient of the squared prediction error."""
    return loss_and_gradient(p, windows, targets)[1]


def client_delta(local_params, global_params) -> np.ndarray:
    a = np.asarray(getattr(local_params, "vector", local_params), dtype=float)
    b = np.asarray(getattr(global_params, "vector", global_params), dtype=float)
    if a.shape != b.shape:
        raise ShapeMismatch("client and global parameters differ in size")
    return a - b


def aggregate(deltas) -> np.ndarray:
    """Arithmetic mean of the client deltas.

    Computed as an offset from the first delta so that identical deltas average
    to themselves bit for bit.
    """
    deltas = [np.asarray(d, dtype=float) for d in deltas]
    if not deltas:
        raise NoClients("no client deltas to aggregate")
    ref = deltas[0]
    if any(d.shape != ref.shape for d in deltas):
        raise ShapeMismatch("client deltas differ in size")
    offset = np.zeros_like(ref)
    for d in deltas[1:]:
        offset += d - ref
    return ref + offset / len(deltas)


def global_update(params, phi, alpha):
    vec = np.asarray(getattr(params, "vector", params), dtype=float)
    phi = np.asarray(phi, dtype=float)
    if vec.shape != phi.shape:
        raise ShapeMismatch("aggregate and global parameters differ in size")
    new = vec + alpha * phi
    if isinstance(params, ModelParams):
        return ModelParams(new, params.shape, params.kind)
    return new


def fl_train(clients, init: ModelParams, rounds=150, alpha=1.0, client_lr=0.3, tol=1e-6,
             callback=None):
    """Federated rounds of one local gradient step per client and delta averaging.

    ``clients`` is a list of (windows, targets) shards. Stops when the largest
    aggregated delta component falls below ``tol`` or the round budget is spent.
    Returns the global parameters and the per-round mean client training loss.
    """
    if not clients:
        raise NoClients("federated training needs at least one client")
    params = init.copy()
    history = []
    for rnd in range(rounds):
        deltas, losses = [], []
        for windows, targets in clients:
            loss, g = loss_and_gradient(params, windows, targets)
            losses.append(loss)
            local = params.vector - client_lr * g
            deltas.append(client_delta(local, params.vector))
        phi = aggregate(deltas)
        params = global_update(params, phi, alpha)
        history.append(float(np.mean(losses)))
        if callback is not None:
            callback(rnd, params, history[-1])
        if np.max(np.abs(phi)) < tol:
            break
    return params, history


def predict_route_info(model: ModelParams, windows, bounds, lookback=None) -> np.ndarray:
    """Next-second load forecast (Mbps, clamped at zero) for each raw window."""
    windows = np.atleast_2d(np.asarray(windows, dtype=float))
    lookback = lookback or (model.shape[0] if model.kind == "mlp" else windows.shape[1])
    if windows.shape[1] != lookback:
        raise WrongWindowLength(f"window of length {windows.shape[1]}, expected {lookback}")
    lo, hi = bounds
    pred = model_predict(model, normalize(windows, lo, hi))
    return np.maximum(denormalize(pred, lo, hi), 0.0)


def last_value_mse(windows, targets) -> float:
    windows = np.atleast_2d(windows)
    err = windows[:, -1] - np.asarray(targets, dtype=float)
    return float(np.mean(err * err))


class FederatedForecaster(RegressorMixin, BaseEstimator):
    """One-step-ahead fronthaul load forecaster trained by federated averaging.

    ``fit`` takes one entry per Near-RT RIC client: a 2-D array of per-path
    load series (paths x seconds, Mbps). Each client normalizes with its own
    bounds; ``predict`` maps raw windows through the bounds of ``domain``.
    """

    def __init__(self, arch="gru", hidden=64, lookback=60, rounds=150, alpha=1.0, client_lr=0.3,
                 tol=1e-6, window_stride=10, max_windows=256, holdout=0.2, random_state=0):
        self.arch = arch
        self.hidden = hidden
        self.lookback = lookback
        self.rounds = rounds
        self.alpha = alpha
        self.client_lr = client_lr
        self.tol = tol
        self.window_stride = window_stride
        self.max_windows = max_windows
        self.holdout = holdout
        self.random_state = random_state

    def _shards(self, series_list):
        train, test = [], []
        for s, (lo, hi) in zip(series_list, self.bounds_):
            cut = int(round(s.shape[1] * (1.0 - self.holdout)))
            tw, tt, hw, ht = [], [], [], []
            for row in normalize(s, lo, hi):
                w, t = make_windows(row[:cut], self.lookback)
                tw.append(w[::self.window_stride])
                tt.append(t[::self.window_stride])
                if cut < row.size:
                    w, t = make_windows(row[max(cut - self.lookback, 0):], self.lookback)
                    hw.append(w)
                    ht.append(t)
            W, T = np.concatenate(tw), np.concatenate(tt)
            if W.shape[0] > self.max_windows:
                keep = np.linspace(0, W.shape[0] - 1, self.max_windows).round().astype(int)
                W, T = W[keep], T[keep]
            train.append((W, T))
            if hw:
                test.append((np.concatenate(hw), np.concatenate(ht)))
        return train, test

    def fit(self, X, y=None):
        series = [check_array(s, ensure_min_features=self.lookback + 1) for s in X]
        self.fit_bounds_only(series)
        train, test = self._shards(series)
        rng = np.random.default_rng(self.random_state)
        init = init_model(self.arch, self.lookback, self.hidden, rng)
        self.params_, self.loss_history_ = fl_train(
            train, init, self.rounds, self.alpha, self.client_lr, self.tol)
        self.n_rounds_ = len(self.loss_history_)
        self.heldout_mse_ = [mse(self.params_, w, t) for w, t in test]
        self.heldout_last_value_mse_ = [last_value_mse(w, t) for w, t in test]
        return self

    def fit_bounds_only(self, X):
        """Per-client normalization bounds from the training part; used with a loaded checkpoint."""
        series = [check_array(s, ensure_min_features=self.lookback + 1) for s in X]
        if not series:
            raise NoClients("no client traffic matrices")
        self.bounds_ = []
        for s in series:
            cut = int(round(s.shape[1] * (1.0 - self.holdout)))
            self.bounds_.append((float(s[:, :cut].min()), float(s[:, :cut].max())))
        return self

    def domain_bounds(self, domain=None):
        check_is_fitted(self, "params_")
        if domain is None:
            return (min(b[0] for b in self.bounds_), max(b[1] for b in self.bounds_))
        return self.bounds_[domain]

    def predict(self, X, domain=None):
        check_is_fitted(self, "params_")
        X = check_array(X)
        return predict_route_info(self.params_, X, self.domain_bounds(domain), self.lookback)


def forecast_series(model: ModelParams, series, bounds, lookback, chunk=4096) -> np.ndarray:
    """Rolling one-step forecasts for a (paths, seconds) load array.

    Column s holds the forecast for second s made from seconds [s - lookback, s);
    columns before ``lookback`` are NaN (not enough history recorded yet).
    """
    series = np.atleast_2d(np.asarray(series, dtype=float))
    n_paths, n = series.shape
    out = np.full((n_paths, n), np.nan)
    if n <= lookback:
        return out
    lo, hi = bounds
    wins = [make_windows(normalize(row, lo, hi), lookback)[0] for row in series]
    W = np.concatenate(wins)
    pred = np.concatenate([model_predict(model, W[k:k + chunk]) for k in range(0, len(W), chunk)])
    out[:, lookback:] = np.maximum(denormalize(pred, lo, hi), 0.0).reshape(n_paths, n - lookback)
    return out
