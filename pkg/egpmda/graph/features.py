"""Raw node features: miRNA sequences and disease/PCG text vectors"""
import hashlib
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from egpmda.graph.types import NodeType
from egpmda.utils.errors import LoadError

logger = logging.getLogger(__name__)

SEQUENCE_ALPHABET = 'AUCG'
DEFAULT_D_B = 64
HASH_KEY = b'egpmda-text-3gram'
NGRAM = 3


def validate_sequence(seq, where=''):
    for position, base in enumerate(seq):
        if base not in SEQUENCE_ALPHABET:
            raise LoadError(f'{where}illegal base {base!r} at position {position}',
                            code='ILLEGAL_BASE', details={'position': position})
    return seq


def _hash_half(text, width):
    vector = np.zeros(width)
    text = f' {text.strip().lower()} '
    if len(text.strip()) == 0:
        return vector
    for i in range(len(text) - NGRAM + 1):
        gram = text[i:i + NGRAM].encode('utf-8')
        digest = hashlib.blake2b(gram, key=HASH_KEY, digest_size=8).digest()
        vector[int.from_bytes(digest, 'little') % width] += 1.0
    norm = np.linalg.norm(vector)
    return vector / norm if norm > 0 else vector


def hashed_text_embedding(name, note, d_b=DEFAULT_D_B):
    """Character 3-gram counts hashed into d_b buckets per text, each half L2-normalized"""
    return np.concatenate([_hash_half(name or '', d_b), _hash_half(note or '', d_b)])


@dataclass(frozen=True, eq=False)
class NodeFeatures:
    d_b: int
    # one (stem_loop, mature_1, mature_2) triple per miRNA ordinal
    sequences: tuple
    # node type value -> (n, 2*d_b) matrix for disease and PCG
    text: dict

    @property
    def seq_lengths(self):
        if not self.sequences:
            return (0, 0, 0)
        return tuple(max(len(triple[i]) for triple in self.sequences) for i in range(3))


def load_sequences(path, table):
    """Read mirna_seq.tsv; rows are aligned to miRNA ordinals"""
    frame = read_tsv(path, ['id', 'stem_loop', 'mature_1'])
    if 'mature_2' not in frame.columns:
        frame['mature_2'] = ''

    sequences = {}
    unresolved = 0
    for row in frame.itertuples(index=False):
        ordinal = table.resolve(row.id, NodeType.MIRNA)
        if ordinal is None:
            unresolved += 1
            continue
        where = f'{path}: {row.id}: '
        sequences[ordinal] = (
            validate_sequence(row.stem_loop.strip().upper(), where),
            validate_sequence(row.mature_1.strip().upper(), where),
            validate_sequence(row.mature_2.strip().upper(), where)
        )

    n = table.count(NodeType.MIRNA)
    missing = n - len(sequences)
    if unresolved:
        logger.info(f'{path}: {unresolved} sequence rows name unknown miRNAs, dropped')
    if missing:
        logger.warning(f'{missing} miRNAs have no sequences; their blocks are all placeholder')
    return tuple(sequences.get(i, ('', '', '')) for i in range(n))


def load_embeddings(path, table, node_type):
    """Read embeddings_<type>.tsv into {ordinal: vector}; returns (vectors, width)"""
    frame = read_tsv(path, ['id', 'vector'], header=None)
    vectors = {}
    width = None
    for row in frame.itertuples(index=False):
        ordinal = table.resolve(row.id, node_type)
        if ordinal is None:
            continue
        try:
            vector = np.array([float(v) for v in row.vector.split(',')], dtype=np.float64)
        except ValueError:
            raise LoadError(f'{path}: {row.id}: embedding is not a list of floats',
                            code='BAD_EMBEDDING')
        if not np.all(np.isfinite(vector)):
            raise LoadError(f'{path}: {row.id}: embedding has non-finite values', code='BAD_EMBEDDING')
        if width is None:
            width = vector.size
        if vector.size != width or width % 2:
            raise LoadError(f'{path}: {row.id}: embedding length {vector.size}, expected {width} (even)',
                            code='BAD_EMBEDDING')
        vectors[ordinal] = vector
    return vectors, width


def build_text_matrix(table, node_type, d_b, embeddings=None):
    """Precomputed vectors where present, hashed name/note fallback elsewhere"""
    embeddings = embeddings or {}
    n = table.count(node_type)
    matrix = np.zeros((n, 2 * d_b))
    fallback = 0
    for ordinal, entry in enumerate(table.entries[node_type]):
        vector = embeddings.get(ordinal)
        if vector is None:
            vector = hashed_text_embedding(entry.name, entry.note, d_b)
            fallback += 1
        elif vector.size != 2 * d_b:
            raise LoadError(f'{entry.node_id}: embedding length {vector.size} != 2*d_B ({2 * d_b})',
                            code='BAD_EMBEDDING')
        matrix[ordinal] = vector
    if fallback and embeddings:
        logger.warning(f'{fallback} {node_type.value} nodes lack embeddings; hashed text used')
    return matrix


def read_tsv(path, required, header='infer'):
    try:
        if header is None:
            frame = pd.read_csv(path, sep='\t', dtype=str, keep_default_na=False,
                                header=None, names=required, usecols=range(len(required)))
        else:
            frame = pd.read_csv(path, sep='\t', dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise LoadError(f'{path}: file not found', code='FILE_NOT_FOUND')
    except pd.errors.EmptyDataError:
        raise LoadError(f'{path}: file is empty (a header row is required)', code='BAD_HEADER')
    except pd.errors.ParserError as err:
        raise LoadError(f'{path}: malformed TSV ({err})', code='BAD_TSV', details={'reason': str(err)})
    except UnicodeDecodeError as err:
        raise LoadError(f'{path}: not UTF-8 text at byte {err.start}', code='BAD_TSV',
                        details={'position': err.start})
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise LoadError(f"{path}: missing columns {', '.join(missing)}", code='BAD_HEADER')
    return frame
