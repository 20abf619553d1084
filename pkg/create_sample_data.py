#!/usr/bin/env python3
"""
Script to write a small synthetic dataset in the input table layout
"""
import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import click
import numpy as np
import pandas as pd
from dotenv import load_dotenv

from egpmda.graph.features import SEQUENCE_ALPHABET
from egpmda.numerics.optim import make_rng

# Load environment variables
load_dotenv()

DISEASE_WORDS = ['carcinoma', 'lymphoma', 'fibrosis', 'neuropathy', 'leukemia', 'sclerosis', 'glioma',
                 'hepatitis', 'arthritis', 'melanoma']
ORGANS = ['lung', 'liver', 'breast', 'colon', 'kidney', 'brain', 'skin', 'heart', 'bone', 'blood']


def _sequence(rng, length):
    return ''.join(rng.choice(list(SEQUENCE_ALPHABET), size=length))


def _write(frame, data_dir, name):
    frame.to_csv(os.path.join(data_dir, name), sep='\t', index=False)


def create_sample_data(data_dir, n_mirna=40, n_disease=24, n_pcg=16, clusters=4, seed=0):
    """Every table load_dataset reads, with cluster-structured associations"""
    rng = make_rng(seed, 'sample-data')
    os.makedirs(data_dir, exist_ok=True)

    mirna_cluster = np.arange(n_mirna) % clusters
    disease_cluster = np.arange(n_disease) % clusters
    pcg_cluster = np.arange(n_pcg) % clusters

    mirnas = pd.DataFrame({
        'id': [f'MIMAT{i:07d}' for i in range(n_mirna)],
        'name': [f'hsa-mir-{100 + i}' for i in range(n_mirna)],
        'aliases': [f'hsa-miR-{100 + i}-5p|mir-{100 + i}' for i in range(n_mirna)]
    })
    diseases = pd.DataFrame({
        'id': [f'D{i:06d}' for i in range(n_disease)],
        'name': [f'{ORGANS[i % len(ORGANS)]} {DISEASE_WORDS[disease_cluster[i]]}' for i in range(n_disease)],
        'aliases': [f'{DISEASE_WORDS[disease_cluster[i]]} {i}' for i in range(n_disease)],
        'note': [f'A {DISEASE_WORDS[disease_cluster[i]]} affecting the {ORGANS[i % len(ORGANS)]}'
                 for i in range(n_disease)]
    })
    pcgs = pd.DataFrame({
        'id': [f'ENSG{i:011d}' for i in range(n_pcg)],
        'name': [f'GENE{i}' for i in range(n_pcg)],
        'aliases': ['' for _ in range(n_pcg)],
        'note': [f'protein coding gene in pathway {pcg_cluster[i]}' for i in range(n_pcg)]
    })
    _write(mirnas, data_dir, 'nodes_mirna.tsv')
    _write(diseases, data_dir, 'nodes_disease.tsv')
    _write(pcgs, data_dir, 'nodes_pcg.tsv')

    # Sequences share a per-cluster seed motif
    motifs = [_sequence(rng, 8) for _ in range(clusters)]
    sequences = []
    for i in range(n_mirna):
        mature = motifs[mirna_cluster[i]] + _sequence(rng, int(rng.integers(12, 16)))
        stem = _sequence(rng, 10) + mature + _sequence(rng, int(rng.integers(20, 40)))
        sequences.append({'id': mirnas['id'][i], 'stem_loop': stem, 'mature_1': mature,
                          'mature_2': _sequence(rng, 20) if i % 3 else ''})
    _write(pd.DataFrame(sequences), data_dir, 'mirna_seq.tsv')

    # miRNA families and PCG groups follow the clusters; father-son links within a cluster
    _write(pd.DataFrame({'group': [f'fam-{c}' for c in mirna_cluster], 'member_id': mirnas['id']}),
           data_dir, 'groups_family.tsv')
    _write(pd.DataFrame({'group': [f'grp-{c}' for c in pcg_cluster], 'member_id': pcgs['id']}),
           data_dir, 'groups_group.tsv')
    father_son = [(diseases['id'][i], diseases['id'][i + clusters]) for i in range(n_disease - clusters)
                  if i % 2 == 0]
    _write(pd.DataFrame(father_son, columns=['src_id', 'dst_id']), data_dir, 'edges_father-son.tsv')

    mirna_pcg = [(mirnas['id'][m], pcgs['id'][p]) for m in range(n_mirna) for p in range(n_pcg)
                 if mirna_cluster[m] == pcg_cluster[p] and rng.random() < 0.5]
    pcg_disease = [(pcgs['id'][p], diseases['id'][d]) for p in range(n_pcg) for d in range(n_disease)
                   if pcg_cluster[p] == disease_cluster[d] and rng.random() < 0.5]
    _write(pd.DataFrame(mirna_pcg, columns=['src_id', 'dst_id']), data_dir, 'edges_mirna-pcg.tsv')
    _write(pd.DataFrame(pcg_disease, columns=['src_id', 'dst_id']), data_dir, 'edges_pcg-disease.tsv')

    # Associations: mostly within a cluster, spread over 2010-2021
    mda = []
    for m in range(n_mirna):
        for d in range(n_disease):
            p = 0.35 if mirna_cluster[m] == disease_cluster[d] else 0.01
            if rng.random() < p:
                mda.append({'mirna_id': mirnas['id'][m], 'disease_id': diseases['id'][d],
                            'pmid': str(20000000 + len(mda)), 'year': str(int(rng.integers(2010, 2022)))})
    _write(pd.DataFrame(mda, columns=['mirna_id', 'disease_id', 'pmid', 'year']), data_dir, 'mda.tsv')
    return {'mirna': n_mirna, 'disease': n_disease, 'pcg': n_pcg, 'associations': len(mda)}


@click.command()
@click.option('--out', 'data_dir', default=lambda: os.getenv('EGP_DATA_DIR', 'data'), show_default='EGP_DATA_DIR')
@click.option('--seed', type=int, default=0)
def main(data_dir, seed):
    counts = create_sample_data(data_dir, seed=seed)
    print(f'Sample data written to {data_dir}: {counts}')


if __name__ == '__main__':
    main()
