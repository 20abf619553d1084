import difflib
from dataclasses import dataclass, field
from enum import Enum

from egpmda.utils.errors import LoadError, NodeNotFound, RelationLookupError

SELF_KIND = 'self'
REVERSE_PREFIX = 'rev_'


class NodeType(str, Enum):
    MIRNA = 'miRNA'
    DISEASE = 'disease'
    PCG = 'PCG'

    @property
    def slug(self):
        return self.value.lower()

    @classmethod
    def parse(cls, value):
        for node_type in cls:
            if value in (node_type.value, node_type.slug, node_type.name):
                return node_type
        raise LoadError(f'unknown node type {value!r}', code='UNKNOWN_NODE_TYPE')


NODE_TYPES = (NodeType.MIRNA, NodeType.DISEASE, NodeType.PCG)


@dataclass(frozen=True, order=True)
class MetaRelation:
    source_type: NodeType
    edge_kind: str
    target_type: NodeType

    @property
    def key(self):
        return f'{self.source_type.value}__{self.edge_kind}__{self.target_type.value}'

    @property
    def is_self_loop(self):
        return self.edge_kind == SELF_KIND

    @classmethod
    def from_key(cls, key):
        parts = key.split('__')
        if len(parts) != 3:
            raise RelationLookupError(f'malformed meta-relation key {key!r}')
        return cls(NodeType.parse(parts[0]), parts[1], NodeType.parse(parts[2]))

    def __str__(self):
        return f'<{self.source_type.value}, {self.edge_kind}, {self.target_type.value}>'


@dataclass(frozen=True)
class EdgeSource:
    """An input edge table and the meta-relation(s) it feeds"""
    kind: str
    source_type: NodeType
    target_type: NodeType
    edge_kind: str
    intra: bool = False
    needs_pcg: bool = False

    @property
    def forward(self):
        return MetaRelation(self.source_type, self.edge_kind, self.target_type)

    @property
    def reverse(self):
        return MetaRelation(self.target_type, REVERSE_PREFIX + self.edge_kind, self.source_type)


EDGE_SOURCES = {
    'family': EdgeSource('family', NodeType.MIRNA, NodeType.MIRNA, 'family', intra=True),
    'father-son': EdgeSource('father-son', NodeType.DISEASE, NodeType.DISEASE, 'father-son', intra=True),
    'group': EdgeSource('group', NodeType.PCG, NodeType.PCG, 'group', intra=True, needs_pcg=True),
    'mirna-pcg': EdgeSource('mirna-pcg', NodeType.MIRNA, NodeType.PCG, 'association', needs_pcg=True),
    'pcg-disease': EdgeSource('pcg-disease', NodeType.PCG, NodeType.DISEASE, 'association', needs_pcg=True),
}
MDA_SOURCE = EdgeSource('mda', NodeType.MIRNA, NodeType.DISEASE, 'association')
# group-membership tables expanded into cliques
GROUP_KINDS = ('family', 'group')


def edge_source(kind):
    if kind == MDA_SOURCE.kind:
        return MDA_SOURCE
    try:
        return EDGE_SOURCES[kind]
    except KeyError:
        raise RelationLookupError(f'unknown edge kind {kind!r}', code='UNKNOWN_EDGE_KIND')


def source_enabled(source, include_mda, use_intra_edges, use_pcg):
    if source is MDA_SOURCE:
        return include_mda
    if source.intra and not use_intra_edges:
        return False
    if source.needs_pcg and not use_pcg:
        return False
    return True


def meta_relations(include_mda=False, use_intra_edges=True, use_pcg=True):
    """The closed meta-relation registry for a set of graph switches, in canonical order"""
    registry = []
    for source in list(EDGE_SOURCES.values()) + [MDA_SOURCE]:
        if not source_enabled(source, include_mda, use_intra_edges, use_pcg):
            continue
        registry.append(source.forward)
        if not source.intra:
            registry.append(source.reverse)
    for node_type in NODE_TYPES:
        registry.append(MetaRelation(node_type, SELF_KIND, node_type))
    return tuple(registry)


@dataclass(frozen=True)
class NodeEntry:
    node_id: str
    type: NodeType
    name: str
    aliases: tuple = ()
    note: str = ''


@dataclass
class NodeTable:
    """Entries per node type with dense ordinals and a primary-ID/alias index"""
    entries: dict = field(default_factory=lambda: {t: [] for t in NODE_TYPES})
    primary: dict = field(default_factory=lambda: {t: {} for t in NODE_TYPES})
    aliases: dict = field(default_factory=lambda: {t: {} for t in NODE_TYPES})

    def add(self, entry):
        t = entry.type
        primary = self.primary[t]
        aliases = self.aliases[t]
        if entry.node_id in primary:
            raise LoadError(f'duplicate primary ID {entry.node_id}', code='DUPLICATE_ID',
                            details={'id': entry.node_id})
        if entry.node_id in aliases:
            owner = self.entries[t][aliases[entry.node_id]].node_id
            raise LoadError(f"alias '{entry.node_id}' maps to both {owner} and {entry.node_id}",
                            code='ALIAS_COLLISION', details={'alias': entry.node_id})

        ordinal = len(self.entries[t])
        for alias in entry.aliases:
            if alias == entry.node_id:
                continue
            owner = aliases.get(alias, primary.get(alias))
            if owner is not None:
                raise LoadError(f"alias '{alias}' maps to both {self.entries[t][owner].node_id} "
                                f'and {entry.node_id}', code='ALIAS_COLLISION', details={'alias': alias})

        self.entries[t].append(entry)
        primary[entry.node_id] = ordinal
        for alias in entry.aliases:
            if alias != entry.node_id:
                aliases[alias] = ordinal
        return ordinal

    def count(self, node_type):
        return len(self.entries[node_type])

    def entry(self, node_type, ordinal):
        return self.entries[node_type][ordinal]

    def id_of(self, node_type, ordinal):
        return self.entries[node_type][ordinal].node_id

    def resolve(self, symbol, node_type):
        """Primary ID first, then alias -> primary ID transfer; None when unknown"""
        ordinal = self.primary[node_type].get(symbol)
        if ordinal is None:
            ordinal = self.aliases[node_type].get(symbol)
        return ordinal

    def near_misses(self, symbol, node_type, n=5):
        candidates = list(self.primary[node_type]) + list(self.aliases[node_type])
        return difflib.get_close_matches(symbol, candidates, n=n, cutoff=0.6)

    def require(self, symbol, node_type):
        """resolve() that raises NodeNotFound with near-miss suggestions"""
        ordinal = self.resolve(symbol, node_type)
        if ordinal is None:
            near = self.near_misses(symbol, node_type)
            hint = f"; did you mean {', '.join(near)}?" if near else ''
            raise NodeNotFound(f'unknown {node_type.value} {symbol!r}{hint}', details={'near_misses': near})
        return ordinal

    @classmethod
    def merge(cls, *tables):
        merged = cls()
        for table in tables:
            for node_type in NODE_TYPES:
                for entry in table.entries[node_type]:
                    merged.add(entry)
        return merged

    def rows(self, node_type):
        return [[e.node_id, e.name, list(e.aliases), e.note] for e in self.entries[node_type]]
