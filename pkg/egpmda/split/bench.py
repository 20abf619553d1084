"""Time-based benchmark split, negative sampling and the nine-region map"""
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from marshmallow import Schema, ValidationError, fields, post_load, validate

from egpmda.graph.features import read_tsv
from egpmda.graph.types import NodeType
from egpmda.numerics.optim import make_rng
from egpmda.utils.errors import SplitError

logger = logging.getLogger(__name__)

PARTITIONS = ('train', 'val', 'test')
DEFAULT_Y1 = 2019
DEFAULT_Y2 = 2020


@dataclass(frozen=True)
class MdaRecord:
    mirna: int
    disease: int
    pmid: str
    year: int


def load_mda_records(path, table):
    """Read mda.tsv; rows with unresolvable endpoints or no usable year are dropped"""
    frame = read_tsv(path, ['mirna_id', 'disease_id', 'pmid', 'year'])
    records = []
    unresolved = no_year = 0
    for row in frame.itertuples(index=False):
        m = table.resolve(row.mirna_id.strip(), NodeType.MIRNA)
        d = table.resolve(row.disease_id.strip(), NodeType.DISEASE)
        if m is None or d is None:
            unresolved += 1
            continue
        try:
            year = int(row.year.strip())
        except ValueError:
            year = 0
        if year <= 0:
            no_year += 1
            continue
        records.append(MdaRecord(m, d, row.pmid.strip(), year))
    logger.info(f'{path}: {len(records)} MDA records, {unresolved} unresolved, {no_year} without a year')
    return records, {'unresolved': unresolved, 'no_year': no_year}


def split_by_time(records, y1=DEFAULT_Y1, y2=DEFAULT_Y2):
    """Positive pairs per partition by the earliest evidence year of each pair"""
    if not records:
        raise SplitError('no MDA records to split', code='EMPTY_RECORDS')
    if y1 > y2:
        raise SplitError(f'y1 ({y1}) must not be after y2 ({y2})', code='BAD_BOUNDARIES')
    earliest = {}
    for record in records:
        pair = (record.mirna, record.disease)
        if pair not in earliest or record.year < earliest[pair]:
            earliest[pair] = record.year

    partitions = {name: [] for name in PARTITIONS}
    for pair, year in earliest.items():
        if year < y1:
            partitions['train'].append(pair)
        elif year <= y2:
            partitions['val'].append(pair)
        else:
            partitions['test'].append(pair)
    return {name: sorted(pairs) for name, pairs in partitions.items()}


def sample_negatives(positives_all, n_mirna, n_disease, count, seed, *salt):
    """Uniform draw without replacement from the complement of every verified pair"""
    if count == 0:
        return []
    linear = np.array(sorted({m * n_disease + d for m, d in positives_all}), dtype=np.int64)
    available = n_mirna * n_disease - linear.size
    if count > available:
        raise SplitError(f'requested {count} negatives but only {available} unverified pairs exist',
                         code='TOO_MANY_NEGATIVES', details={'requested': count, 'available': available})
    complement = np.setdiff1d(np.arange(n_mirna * n_disease, dtype=np.int64), linear, assume_unique=True)
    rng = make_rng(seed, 'negatives', *salt)
    chosen = rng.choice(complement, size=count, replace=False)
    return [(int(i // n_disease), int(i % n_disease)) for i in chosen]


def lower_median(values):
    values = sorted(v for v in values if v >= 1)
    if not values:
        return 0
    return int(values[(len(values) - 1) // 2])


def _band(degree, median):
    if degree == 0:
        return '0'
    return 'L' if degree <= median else 'M'


@dataclass
class RegionMap:
    mirna_degree: np.ndarray
    disease_degree: np.ndarray
    mirna_median: int
    disease_median: int

    @classmethod
    def build(cls, known_positives, n_mirna, n_disease):
        """Known degrees count train+val positives only"""
        mirna_degree = np.zeros(n_mirna, dtype=np.int64)
        disease_degree = np.zeros(n_disease, dtype=np.int64)
        for m, d in known_positives:
            mirna_degree[m] += 1
            disease_degree[d] += 1
        return cls(mirna_degree, disease_degree,
                   lower_median(mirna_degree.tolist()), lower_median(disease_degree.tolist()))

    def classify(self, mirna, disease):
        return (f'{_band(int(self.mirna_degree[mirna]), self.mirna_median)}-'
                f'{_band(int(self.disease_degree[disease]), self.disease_median)}')


def classify_regions(region_map, pairs):
    return [region_map.classify(m, d) for m, d in pairs]


REGION_TAGS = tuple(f'{a}-{b}' for a in '0LM' for b in '0LM')


@dataclass
class SplitManifest:
    # partition -> list of [mirna, disease, label]; positives first
    partitions: dict
    regions: dict
    seed: int
    y1: int
    y2: int
    negative_ratio_train: int
    negative_ratio_test: int
    n_mirna: int
    n_disease: int
    mirna_median: int
    disease_median: int
    dropped: dict = field(default_factory=dict)

    def arrays(self, partition):
        rows = np.asarray(self.partitions[partition], dtype=np.int64).reshape(-1, 3)
        return rows[:, 0], rows[:, 1], rows[:, 2]

    def positives(self, *partitions):
        return [(m, d) for p in partitions for m, d, label in self.partitions[p] if label == 1]

    def negatives(self, *partitions):
        return [(m, d) for p in partitions for m, d, label in self.partitions[p] if label == 0]

    def verified(self):
        return set(self.positives(*PARTITIONS))

    def balanced_test(self):
        """Test positives plus the first |positives| test negatives in draw order"""
        positives = [row for row in self.partitions['test'] if row[2] == 1]
        negatives = [row for row in self.partitions['test'] if row[2] == 0]
        return positives + negatives[:len(positives)]

    def region_of(self, partition):
        return dict(zip(((m, d) for m, d, _ in self.partitions[partition]), self.regions[partition]))

    def region_map(self):
        return RegionMap.build(self.positives('train', 'val'), self.n_mirna, self.n_disease)


def build_manifest(records, n_mirna, n_disease, seed=0, y1=DEFAULT_Y1, y2=DEFAULT_Y2,
                   negative_ratio_train=1, negative_ratio_test=100, dropped=None):
    positives = split_by_time(records, y1, y2)
    verified = {pair for pairs in positives.values() for pair in pairs}

    wanted = {
        'train': negative_ratio_train * len(positives['train']),
        'val': negative_ratio_train * len(positives['val']),
        'test': negative_ratio_test * len(positives['test'])
    }
    # one draw for all partitions keeps partition negatives disjoint
    drawn = sample_negatives(verified, n_mirna, n_disease, sum(wanted.values()), seed)
    negatives = {}
    start = 0
    for name in PARTITIONS:
        block = drawn[start:start + wanted[name]]
        negatives[name] = block if name == 'test' else sorted(block)
        start += wanted[name]

    region_map = RegionMap.build(positives['train'] + positives['val'], n_mirna, n_disease)
    partitions = {}
    regions = {}
    for name in PARTITIONS:
        rows = [[m, d, 1] for m, d in positives[name]] + [[m, d, 0] for m, d in negatives[name]]
        partitions[name] = rows
        regions[name] = [region_map.classify(m, d) for m, d, _ in rows]
        logger.info(f'{name}: {len(positives[name])} positives, {len(negatives[name])} negatives')
    logger.info(f'known-degree medians: miRNA {region_map.mirna_median}, disease {region_map.disease_median}')

    return SplitManifest(
        partitions=partitions,
        regions=regions,
        seed=seed,
        y1=y1,
        y2=y2,
        negative_ratio_train=negative_ratio_train,
        negative_ratio_test=negative_ratio_test,
        n_mirna=n_mirna,
        n_disease=n_disease,
        mirna_median=region_map.mirna_median,
        disease_median=region_map.disease_median,
        dropped=dropped or {}
    )


class SplitManifestSchema(Schema):
    partitions = fields.Dict(keys=fields.Str(validate=validate.OneOf(PARTITIONS)),
                             values=fields.List(fields.List(fields.Int())), required=True)
    regions = fields.Dict(keys=fields.Str(), values=fields.List(fields.Str(validate=validate.OneOf(REGION_TAGS))),
                          required=True)
    seed = fields.Int(required=True)
    y1 = fields.Int(required=True)
    y2 = fields.Int(required=True)
    negative_ratio_train = fields.Int(required=True)
    negative_ratio_test = fields.Int(required=True)
    n_mirna = fields.Int(required=True)
    n_disease = fields.Int(required=True)
    mirna_median = fields.Int(required=True)
    disease_median = fields.Int(required=True)
    dropped = fields.Dict(keys=fields.Str(), values=fields.Int(), load_default=dict)

    @post_load
    def make_manifest(self, data, **kwargs):
        return SplitManifest(**data)


def save_manifest(manifest, path):
    with open(path, 'w') as fh:
        json.dump(SplitManifestSchema().dump(manifest), fh, sort_keys=True, indent=1)
        fh.write('\n')
    logger.info(f'manifest written to {path}')


def load_manifest(path):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise SplitError(f'{path}: manifest not found', code='FILE_NOT_FOUND')
    try:
        return SplitManifestSchema().load(payload)
    except ValidationError as err:
        raise SplitError(f'{path}: invalid manifest', code='BAD_MANIFEST', details=err.messages)
