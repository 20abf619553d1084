"""Reverse-mode differentiation over dense float64 arrays.

A ``Tape`` records every primitive applied to tensors that need gradients.
Primitives are plain functions: given only ndarrays they return an ndarray,
given at least one ``Tensor`` they return a ``Tensor`` recorded on the
input's tape. ``backward`` walks the record in reverse order, which is a
reverse topological order because a node is appended only after its inputs
exist.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from egpmda.utils.errors import NumericsError, ShapeError

BCE_CLAMP = 1e-12
GELU_C = np.sqrt(2.0 / np.pi)
GELU_K = 0.044715


class Tensor:
    __slots__ = ('data', 'tape', 'index', 'requires_grad', 'name')

    def __init__(self, data, tape=None, index=None, requires_grad=False, name=None):
        self.data = data
        self.tape = tape
        self.index = index
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f'Tensor(shape={self.data.shape}, name={self.name!r}, grad={self.requires_grad})'


class _Node:
    __slots__ = ('op', 'out', 'inputs', 'backward')

    def __init__(self, op, out, inputs, backward):
        self.op = op
        self.out = out
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Ordered record of primitive applications"""

    def __init__(self, enabled=True):
        self.enabled = enabled
        self.nodes = []
        self.params = {}
        self._counter = 0

    def _next_index(self):
        self._counter += 1
        return self._counter

    def param(self, name, array):
        data = np.array(array, dtype=np.float64)
        tensor = Tensor(data, self, self._next_index(), requires_grad=self.enabled, name=name)
        self.params[name] = tensor
        return tensor

    def bind(self, params):
        """Register a whole parameter mapping; returns name -> Tensor"""
        return {name: self.param(name, value) for name, value in params.items()}

    def constant(self, array):
        return Tensor(np.asarray(array, dtype=np.float64), self)

    def record(self, op, data, inputs, backward):
        needs_grad = self.enabled and any(
            isinstance(x, Tensor) and x.requires_grad for x in inputs
        )
        if not needs_grad:
            return Tensor(data, self)
        out = Tensor(data, self, self._next_index(), requires_grad=True)
        self.nodes.append(_Node(op, out.index, inputs, backward))
        return out


def backward(tape, loss):
    """Gradients of a scalar loss for every parameter on the tape"""
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        raise ShapeError('backward needs a scalar loss tensor', code='NON_SCALAR_LOSS')

    grads = {}
    if loss.requires_grad:
        grads[loss.index] = np.ones_like(loss.data)

    for node in reversed(tape.nodes):
        g = grads.pop(node.out, None)
        if g is None:
            continue
        for inp, gi in zip(node.inputs, node.backward(g)):
            if gi is None or not isinstance(inp, Tensor) or not inp.requires_grad:
                continue
            if inp.index in grads:
                grads[inp.index] = grads[inp.index] + gi
            else:
                grads[inp.index] = gi

    result = {}
    for name, tensor in tape.params.items():
        g = grads.get(tensor.index)
        if g is None:
            g = np.zeros_like(tensor.data)
        result[name] = np.asarray(g, dtype=np.float64).reshape(tensor.data.shape)
    return result


def _data(x):
    if isinstance(x, Tensor):
        return x.data
    return np.asarray(x, dtype=np.float64)


value = _data


def _result(op, data, inputs, backward_fn):
    if not np.all(np.isfinite(data)):
        raise NumericsError(f'{op} produced non-finite values', code='NON_FINITE')
    tape = None
    has_tensor = False
    for x in inputs:
        if isinstance(x, Tensor):
            has_tensor = True
            if x.tape is not None:
                tape = x.tape
                break
    if not has_tensor:
        return data
    if tape is None:
        return Tensor(data)
    return tape.record(op, data, inputs, backward_fn)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _sigmoid(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def add(a, b):
    ad, bd = _data(a), _data(b)
    out = ad + bd
    return _result('add', out, (a, b),
                   lambda g: (_unbroadcast(g, ad.shape), _unbroadcast(g, bd.shape)))


def mul(a, b):
    ad, bd = _data(a), _data(b)
    out = ad * bd
    return _result('mul', out, (a, b),
                   lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def scale(x, factor):
    xd = _data(x)
    factor = float(factor)
    return _result('scale', xd * factor, (x,), lambda g: (g * factor,))


def sum_all(x):
    xd = _data(x)
    return _result('sum_all', np.array(xd.sum()), (x,),
                   lambda g: (np.broadcast_to(g, xd.shape).copy(),))


def reshape(x, shape):
    xd = _data(x)
    return _result('reshape', xd.reshape(shape), (x,), lambda g: (g.reshape(xd.shape),))


def matmul(a, b):
    ad, bd = _data(a), _data(b)
    if ad.ndim != 2 or bd.ndim != 2 or ad.shape[1] != bd.shape[0]:
        raise ShapeError(f'matmul: cannot multiply {ad.shape} by {bd.shape}')
    return _result('matmul', ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def linear(x, w, b):
    """x @ w + b for a row batch x"""
    xd, wd, bd = _data(x), _data(w), _data(b)
    if xd.ndim != 2 or xd.shape[1] != wd.shape[0] or bd.shape != (wd.shape[1],):
        raise ShapeError(f'linear: input {xd.shape}, weight {wd.shape}, bias {bd.shape}')
    return _result('linear', xd @ wd + bd, (x, w, b),
                   lambda g: (g @ wd.T, xd.T @ g, g.sum(axis=0)))


def gather_rows(x, index):
    xd = _data(x)
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= xd.shape[0]):
        raise ShapeError(f'gather_rows: index out of range for {xd.shape[0]} rows')

    def _backward(g):
        gx = np.zeros_like(xd)
        np.add.at(gx, index, g)
        return (gx,)

    return _result('gather_rows', xd[index], (x,), _backward)


def concat(parts, axis=1):
    datas = [_data(p) for p in parts]
    sizes = np.cumsum([d.shape[axis] for d in datas])[:-1]
    return _result('concat', np.concatenate(datas, axis=axis), tuple(parts),
                   lambda g: tuple(np.split(g, sizes, axis=axis)))


def scatter_sum(x, index, size):
    """Sum rows of x into `size` buckets; fixed (sequential) accumulation order"""
    xd = _data(x)
    index = np.asarray(index, dtype=np.int64)
    out = np.zeros((size,) + xd.shape[1:])
    np.add.at(out, index, xd)
    return _result('scatter_sum', out, (x,), lambda g: (g[index],))


def gelu(x):
    """GELU, tanh approximation"""
    xd = _data(x)
    u = GELU_C * (xd + GELU_K * xd ** 3)
    t = np.tanh(u)
    out = 0.5 * xd * (1.0 + t)

    def _backward(g):
        du = GELU_C * (1.0 + 3.0 * GELU_K * xd ** 2)
        return (g * (0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t ** 2) * du),)

    return _result('gelu', out, (x,), _backward)


def sigmoid(x):
    xd = _data(x)
    out = _sigmoid(xd)
    return _result('sigmoid', out, (x,), lambda g: (g * out * (1.0 - out),))


def conv1d_single_filter(x, kernel, bias):
    """Valid 1-D convolution of (l, c) rows with one (k, c) filter, stride 1.

    Accepts a single matrix (l, c) or a batch (n, l, c); returns (l-k+1,) or
    (n, l-k+1).
    """
    xd, kd, bd = _data(x), _data(kernel), _data(bias)
    single = xd.ndim == 2
    xb = xd[None] if single else xd
    if xb.ndim != 3 or kd.ndim != 2 or kd.shape[1] != xb.shape[2]:
        raise ShapeError(f'conv1d: input {xd.shape} does not match kernel {kd.shape}')
    if bd.shape != (1,):
        raise ShapeError(f'conv1d: bias must have shape (1,), got {bd.shape}')
    k = kd.shape[0]
    length = xb.shape[1]
    if length < k:
        raise ShapeError(f'conv1d: sequence length {length} is shorter than kernel {k}')

    width = length - k + 1
    # windows[n, i, c, a] == xb[n, i + a, c]
    windows = sliding_window_view(xb, k, axis=1)
    out = np.einsum('nwca,ac->nw', windows, kd) + bd[0]

    def _backward(g):
        gb = g[None] if single else g
        gk = np.einsum('nwca,nw->ac', windows, gb)
        gx = np.zeros_like(xb)
        for a in range(k):
            gx[:, a:a + width, :] += gb[:, :, None] * kd[a][None, None, :]
        return (gx[0] if single else gx, gk, np.array([gb.sum()]))

    return _result('conv1d', out[0] if single else out, (x, kernel, bias), _backward)


def _segment_starts(segment_ids, n):
    segment_ids = np.asarray(segment_ids)
    if segment_ids.shape[0] != n:
        raise ShapeError(f'segment ids ({segment_ids.shape[0]}) do not match values ({n})')
    if n and np.any(np.diff(segment_ids) < 0):
        raise NumericsError('segment ids must be sorted', code='UNSORTED_SEGMENTS')
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    starts = np.flatnonzero(np.r_[True, segment_ids[1:] != segment_ids[:-1]])
    counts = np.diff(np.r_[starts, n])
    return starts, counts


def segmented_softmax(values, segment_ids):
    """Softmax within runs of equal (sorted) segment ids along axis 0"""
    v = _data(values)
    starts, counts = _segment_starts(segment_ids, v.shape[0])
    if v.shape[0] == 0:
        return _result('segmented_softmax', v.copy(), (values,), lambda g: (g,))

    maxes = np.maximum.reduceat(v, starts, axis=0)
    e = np.exp(v - np.repeat(maxes, counts, axis=0))
    sums = np.add.reduceat(e, starts, axis=0)
    out = e / np.repeat(sums, counts, axis=0)

    def _backward(g):
        inner = np.add.reduceat(g * out, starts, axis=0)
        return (out * (g - np.repeat(inner, counts, axis=0)),)

    return _result('segmented_softmax', out, (values,), _backward)


def head_matmul(x, w):
    """Per-head product: (E, h, d) x (h, d, f) -> (E, h, f)"""
    xd, wd = _data(x), _data(w)
    if xd.ndim != 3 or wd.ndim != 3 or xd.shape[1:] != wd.shape[:2]:
        raise ShapeError(f'head_matmul: {xd.shape} by {wd.shape}')
    out = np.einsum('ehd,hdf->ehf', xd, wd)
    return _result('head_matmul', out, (x, w),
                   lambda g: (np.einsum('ehf,hdf->ehd', g, wd), np.einsum('ehd,ehf->hdf', xd, g)))


def head_dot(a, b):
    """Per-head inner product: (E, h, d) . (E, h, d) -> (E, h)"""
    ad, bd = _data(a), _data(b)
    if ad.shape != bd.shape or ad.ndim != 3:
        raise ShapeError(f'head_dot: {ad.shape} vs {bd.shape}')
    out = np.einsum('ehd,ehd->eh', ad, bd)
    return _result('head_dot', out, (a, b),
                   lambda g: (g[..., None] * bd, g[..., None] * ad))


def gate_blend(update, prev, alpha, mask):
    """Residual gate: g*update + (1-g)*prev on masked rows, prev elsewhere; g = sigmoid(alpha)"""
    ud, pd, ad = _data(update), _data(prev), _data(alpha)
    if ud.shape != pd.shape or ad.shape != (1,):
        raise ShapeError(f'gate_blend: update {ud.shape}, prev {pd.shape}, alpha {ad.shape}')
    mask = np.asarray(mask, dtype=bool)
    gate = _sigmoid(ad)[0]
    m = mask[:, None]
    out = np.where(m, gate * ud + (1.0 - gate) * pd, pd)

    def _backward(g):
        gu = np.where(m, gate * g, 0.0)
        gp = np.where(m, (1.0 - gate) * g, g)
        ga = np.array([(g * (ud - pd))[mask].sum() * gate * (1.0 - gate)])
        return (gu, gp, ga)

    return _result('gate_blend', out, (update, prev, alpha), _backward)


def bce_loss(scores, labels):
    """Summed binary cross entropy; scores clamped to [1e-12, 1-1e-12]"""
    s = _data(scores)
    y = np.asarray(labels, dtype=np.float64)
    if s.shape != y.shape:
        raise ShapeError(f'bce_loss: scores {s.shape} vs labels {y.shape}')
    if not np.all((y == 0.0) | (y == 1.0)):
        raise NumericsError('labels must be 0 or 1', code='INVALID_LABEL')
    c = np.clip(s, BCE_CLAMP, 1.0 - BCE_CLAMP)
    loss = -np.sum(y * np.log(c) + (1.0 - y) * np.log(1.0 - c))
    inside = (s >= BCE_CLAMP) & (s <= 1.0 - BCE_CLAMP)

    def _backward(g):
        return (-(y / c - (1.0 - y) / (1.0 - c)) * inside * g,)

    return _result('bce_loss', np.array(loss), (scores,), _backward)
