"""Shared test oracles: finite-difference gradient checking."""
from __future__ import annotations

import numpy as np

FD_H = 1e-5


def rel_err(a: np.ndarray, n: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-4)
    return float(np.max(np.abs(a - n) / denom))


def _loss_fn(layer, x, probe, prep=None):
    def f():
        if prep is not None:
            prep(layer)
        out = float(np.sum(layer.forward(x, train=True) * probe))
        return out + layer.l2_penalty()
    return f


def check_layer_gradients(layer, x, rng, n_param_coords=40, prep=None):
    """Central finite differences vs analytic backward for one layer.

    Returns the max relative error over the input gradient and a sampled
    subset of each parameter tensor's coordinates. `prep` runs before
    every forward (re-seeding dropout RNGs keeps masks reproducible).

    A coordinate whose difference quotient disagrees is re-evaluated at
    h/10: if the disagreement vanishes the step was straddling a ReLU
    kink / pool tie (an artifact of the probe, not a gradient bug); a
    genuine analytic error persists at both step sizes.
    """
    x = np.asarray(x, dtype=np.float64)
    if prep is not None:
        prep(layer)
    y = layer.forward(x, train=True)
    probe = rng.normal(size=y.shape)
    gx = layer.backward(probe)
    param_grads = {k: v.copy() for k, v in layer.grads().items()}
    f = _loss_fn(layer, x, probe, prep)

    def diff_at(flat, i, h):
        orig = flat[i]
        flat[i] = orig + h
        hi = f()
        flat[i] = orig - h
        lo = f()
        flat[i] = orig
        return (hi - lo) / (2 * h)

    def coord_err(flat, i, analytic):
        e = rel_err(np.float64(analytic), np.float64(diff_at(flat, i, FD_H)))
        if e > 1e-4:
            e = rel_err(np.float64(analytic),
                        np.float64(diff_at(flat, i, FD_H / 10)))
        return e

    worst = 0.0
    flat_x = x.reshape(-1)
    flat_gx = np.asarray(gx).reshape(-1)
    for i in range(flat_x.size):
        worst = max(worst, coord_err(flat_x, i, flat_gx[i]))

    for name, p in layer.params().items():
        flat_p = p.reshape(-1)
        size = flat_p.size
        coords = (np.arange(size) if size <= n_param_coords
                  else rng.choice(size, n_param_coords, replace=False))
        for i in coords:
            ana = param_grads[name].reshape(-1)[i]
            worst = max(worst, coord_err(flat_p, i, ana))
    return worst


def away_from_kinks(rng, shape, margin=0.05):
    """Random input bounded away from 0 so ReLU-style kinks and pool ties
    cannot sit inside the finite-difference step."""
    x = rng.normal(size=shape)
    return x + np.sign(x) * margin


def oracle_aggregate(predictions, thresholds: dict, refractory_s: float,
                     negative: str = "Negative"):
    """Brute-force event scan, written independently of the runtime
    automaton: at each index, recount the trailing same-label run from
    scratch and apply refractory by skipping forward.

    Returns (label, onset_t, emit_t) tuples.
    """
    events = []
    blocked_until = -np.inf
    consumed_from = 0  # runs cannot extend across an emitted event
    for i, p in enumerate(predictions):
        if p.t < blocked_until - 1e-12 or p.label == negative:
            continue
        run = []
        j = i
        while j >= consumed_from and predictions[j].label == p.label \
                and predictions[j].t >= blocked_until - 1e-12:
            run.append(j)
            j -= 1
        if len(run) == thresholds.get(p.label, 5):
            onset = predictions[run[-1]].t
            events.append((p.label, onset, p.t))
            blocked_until = p.t + refractory_s
            consumed_from = i + 1
    return events
