import hashlib
from dataclasses import dataclass, field

import numpy as np

from egpmda.utils.errors import ShapeError


def make_rng(seed, *salt):
    """Philox (counter-based) generator keyed by seed and optional string salts"""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for item in salt:
        digest = hashlib.blake2b(str(item).encode('utf-8'), digest_size=8).digest()
        entropy.append(int.from_bytes(digest, 'little'))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def glorot_uniform(rng, fan_in, fan_out, shape=None):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape if shape is not None else (fan_in, fan_out))


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state):
    """One bias-corrected Adam update; returns the new parameter mapping"""
    state.step += 1
    t = state.step
    updated = {}
    for name, value in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(value)
        if g.shape != value.shape:
            raise ShapeError(f'adam_step: gradient of {name} has shape {g.shape}, '
                             f'parameter has {value.shape}')
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(value)
            v = np.zeros_like(value)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        updated[name] = value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        state.m[name] = m
        state.v[name] = v
    return updated


def numerical_gradient(loss_fn, params, name, eps=1e-5):
    """Central differences of loss_fn(params) with respect to params[name]"""
    value = params[name] = np.ascontiguousarray(params[name], dtype=np.float64)
    flat = value.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        plus = loss_fn(params)
        flat[i] = original - eps
        minus = loss_fn(params)
        flat[i] = original
        grad[i] = (plus - minus) / (2.0 * eps)
    return grad.reshape(value.shape)


def relative_error(analytic, numeric, floor=1e-3):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))


def check_gradients(loss_fn, params, grads, eps=1e-5, names=None, floor=1e-3):
    """Max relative error per parameter between grads and central differences.

    params is perturbed in place one entry at a time and restored.
    """
    report = {}
    for name in names or params:
        numeric = numerical_gradient(loss_fn, params, name, eps)
        report[name] = relative_error(grads[name], numeric, floor)
    return report
