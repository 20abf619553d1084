"""1-mer sequence embedding for the miRNA encoder branch"""
import numpy as np

from egpmda.graph.features import SEQUENCE_ALPHABET
from egpmda.utils.errors import LoadError, ShapeError

PLACEHOLDER = np.full(4, 0.25)
_ONE_HOT = {base: np.eye(4)[i] for i, base in enumerate(SEQUENCE_ALPHABET)}


def embed_sequence_1mer(seq, max_len):
    """(max_len, 4) one-hot rows for A, U, C, G; 'N' padding rows are 0.25 each"""
    if len(seq) > max_len:
        raise ShapeError(f'sequence of length {len(seq)} exceeds max_len {max_len}',
                         code='SEQUENCE_TOO_LONG')
    out = np.tile(PLACEHOLDER, (max_len, 1))
    for position, base in enumerate(seq):
        row = _ONE_HOT.get(base)
        if row is None:
            raise LoadError(f'illegal base {base!r} at position {position}', code='ILLEGAL_BASE',
                            details={'position': position})
        out[position] = row
    return out


def block_lengths(seq_lengths, kernel_size):
    """Frozen (l_s, l_m1, l_m2): each block at least one row, total at least kernel_size"""
    lengths = [max(int(l), 1) for l in seq_lengths]
    short = kernel_size - sum(lengths)
    if short > 0:
        lengths[-1] += short
    return tuple(lengths)


def sequence_tensor(sequences, lengths):
    """(n, l_s+l_m1+l_m2, 4) concatenated blocks, one row block per sequence slot"""
    total = sum(lengths)
    out = np.empty((len(sequences), total, 4))
    for i, triple in enumerate(sequences):
        out[i] = np.concatenate([embed_sequence_1mer(s, l) for s, l in zip(triple, lengths)])
    return out
