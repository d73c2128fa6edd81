"""
Knowledge graph data model.
Directed labeled multigraph with per-statement polarity and the subclass
semantics the walk generator and entailment logic depend on.
"""
import logging
import sys
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Set, Tuple

import networkx as nx

from .errors import GraphError
from .vocabulary import SUBCLASS_OF, SUBCLASS_TOKEN, SUPERCLASS_TOKEN

logger = logging.getLogger(__name__)


class NodeKind(str, Enum):
    IRI = "iri"
    BLANK = "blank"
    LITERAL = "literal"


class Polarity(str, Enum):
    """Statement polarity. Values match the annotation file tokens."""
    POSITIVE = "pos"
    NEGATIVE = "neg"

    @property
    def prefix(self) -> str:
        return "P" if self is Polarity.POSITIVE else "N"


class EdgeKind(str, Enum):
    SUBCLASS_OF = "subClassOf"
    OTHER = "other"


@dataclass(frozen=True)
class NodeId:
    """
    Graph vertex. IRIs keep their text verbatim, blank nodes keep their
    label without the `_:` prefix, literals keep their lexical form.
    """
    kind: NodeKind
    value: str

    def __post_init__(self):
        object.__setattr__(self, "value", sys.intern(self.value))

    @classmethod
    def iri(cls, value: str) -> "NodeId":
        return cls(NodeKind.IRI, value)

    @classmethod
    def blank(cls, label: str) -> "NodeId":
        return cls(NodeKind.BLANK, label[2:] if label.startswith("_:") else label)

    @classmethod
    def literal(cls, value: str) -> "NodeId":
        return cls(NodeKind.LITERAL, value)

    @property
    def is_literal(self) -> bool:
        return self.kind is NodeKind.LITERAL

    @property
    def token(self) -> str:
        """Walk / vocabulary token for this node."""
        if self.kind is NodeKind.BLANK:
            return f"_:{self.value}"
        if self.kind is NodeKind.LITERAL:
            return f'"{self.value}"'
        return self.value

    def __str__(self) -> str:
        return self.token


@dataclass(frozen=True)
class EdgeLabel:
    predicate: str

    @property
    def builtin(self) -> EdgeKind:
        return EdgeKind.SUBCLASS_OF if self.predicate == SUBCLASS_OF else EdgeKind.OTHER

    @property
    def is_subclass(self) -> bool:
        return self.predicate == SUBCLASS_OF


@dataclass(frozen=True)
class Statement:
    subject: NodeId
    predicate: EdgeLabel
    object: NodeId
    polarity: Polarity = Polarity.POSITIVE

    @classmethod
    def of(
        cls,
        subject: str,
        predicate: str,
        obj: str,
        polarity: Polarity = Polarity.POSITIVE,
    ) -> "Statement":
        """Shorthand for statements between two IRIs."""
        return cls(NodeId.iri(subject), EdgeLabel(predicate), NodeId.iri(obj), polarity)


# (token, node) pair returned by neighbor queries
Hop = Tuple[str, NodeId]


def _hop_key(item: Tuple[str, NodeId, str]) -> Tuple[str, str, str]:
    predicate, node, _ = item
    return (predicate, node.value, node.kind.value)


class KnowledgeGraph:
    """
    In-memory graph. Built once by a single writer, then frozen and shared
    read-only between walk workers.
    """

    def __init__(self):
        self._statements: Dict[Statement, None] = {}
        self._out: Dict[NodeId, List[Statement]] = defaultdict(list)
        self._in: Dict[NodeId, List[Statement]] = defaultdict(list)
        self._hierarchy = nx.DiGraph()
        self.root_entities: Set[NodeId] = set()
        self._frozen = False
        self._neighbor_cache: Dict[Tuple[NodeId, Polarity], List[Hop]] = {}

    def __repr__(self) -> str:
        return (
            f"KnowledgeGraph(statements={len(self._statements)}, "
            f"roots={len(self.root_entities)}, frozen={self._frozen})"
        )

    # --- Build phase ---

    def add_statement(self, st: Statement) -> "KnowledgeGraph":
        """Insert a statement. Exact duplicates collapse to one edge."""
        if self._frozen:
            raise GraphError("Knowledge graph is frozen; statements can only be added at build time")
        if st.predicate.is_subclass and st.polarity is Polarity.NEGATIVE:
            raise GraphError(
                f"Negative polarity is not allowed on subClassOf edges: "
                f"{st.subject.token} -> {st.object.token}"
            )
        if st in self._statements:
            return self

        self._statements[st] = None
        self._out[st.subject].append(st)
        self._in[st.object].append(st)
        if st.predicate.is_subclass:
            self._hierarchy.add_edge(st.subject, st.object)
        return self

    def add_statements(self, statements: Iterable[Statement]) -> "KnowledgeGraph":
        for st in statements:
            self.add_statement(st)
        return self

    def add_root_entity(self, node: NodeId) -> "KnowledgeGraph":
        if self._frozen:
            raise GraphError("Knowledge graph is frozen; root entities are fixed")
        if node not in self._out and node not in self._in:
            raise GraphError(f"Root entity {node.token} does not occur in any statement")
        self.root_entities.add(node)
        return self

    def freeze(self) -> "KnowledgeGraph":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    @classmethod
    def from_statements(
        cls,
        statements: Iterable[Statement],
        root_entities: Iterable[NodeId] = (),
    ) -> "KnowledgeGraph":
        kg = cls()
        kg.add_statements(statements)
        for node in root_entities:
            kg.add_root_entity(node)
        return kg.freeze()

    def filtered(
        self,
        keep: Callable[[Statement], bool],
        rewrite: Optional[Callable[[Statement], Statement]] = None,
    ) -> "KnowledgeGraph":
        """New frozen graph holding the (optionally rewritten) statements passing `keep`."""
        kg = KnowledgeGraph()
        for st in self._statements:
            if keep(st):
                kg.add_statement(rewrite(st) if rewrite else st)
        for node in sorted(self.root_entities, key=lambda n: n.value):
            if node in kg._out or node in kg._in:
                kg.add_root_entity(node)
        return kg.freeze()

    # --- Queries ---

    @property
    def statements(self) -> List[Statement]:
        """Statements in insertion order."""
        return list(self._statements)

    def __len__(self) -> int:
        return len(self._statements)

    def __contains__(self, st: Statement) -> bool:
        return st in self._statements

    def nodes(self) -> Set[NodeId]:
        return {n for n, sts in self._out.items() if sts} | {n for n, sts in self._in.items() if sts}

    def out_degree(self, node: NodeId) -> int:
        return len(self._out.get(node, ()))

    def in_degree(self, node: NodeId) -> int:
        return len(self._in.get(node, ()))

    def out_statements(self, node: NodeId) -> List[Statement]:
        return list(self._out.get(node, ()))

    def in_statements(self, node: NodeId) -> List[Statement]:
        return list(self._in.get(node, ()))

    def sorted_roots(self) -> List[NodeId]:
        return sorted(self.root_entities, key=lambda n: (n.value, n.kind.value))

    def assertions(self, node: NodeId, polarity: Polarity) -> List[Hop]:
        """
        First-hop candidates of a walk: outgoing non-subclass statements of the
        given polarity, literals excluded, in deterministic order.
        """
        items = [
            (st.predicate.predicate, st.object, st.predicate.predicate)
            for st in self._out.get(node, ())
            if not st.predicate.is_subclass
            and st.polarity is polarity
            and not st.object.is_literal
        ]
        items.sort(key=_hop_key)
        return [(token, target) for _, target, token in items]

    def neighbors(self, node: NodeId, status: Polarity) -> List[Hop]:
        """
        Direction-legal neighbors of `node` for a walk of the given status.
        Positive walks climb subclass edges (token `subClassOf`), negative walks
        descend them (token `superClassOf`). Visited filtering is the caller's job.
        """
        key = (node, status)
        if self._frozen and key in self._neighbor_cache:
            return self._neighbor_cache[key]

        items: List[Tuple[str, NodeId, str]] = []
        for st in self._out.get(node, ()):
            if st.object.is_literal:
                continue
            if st.predicate.is_subclass:
                if status is Polarity.POSITIVE:
                    items.append((SUBCLASS_OF, st.object, SUBCLASS_TOKEN))
            elif status is Polarity.NEGATIVE or st.polarity is Polarity.POSITIVE:
                items.append((st.predicate.predicate, st.object, st.predicate.predicate))

        if status is Polarity.NEGATIVE:
            for st in self._in.get(node, ()):
                if st.predicate.is_subclass and not st.subject.is_literal:
                    items.append((SUBCLASS_OF, st.subject, SUPERCLASS_TOKEN))

        items.sort(key=_hop_key)
        hops = [(token, target) for _, target, token in items]
        if self._frozen:
            self._neighbor_cache[key] = hops
        return hops

    def superclasses(self, cls: NodeId) -> Set[NodeId]:
        """Reflexive-transitive superclass closure."""
        if cls not in self._hierarchy:
            return {cls}
        return {cls} | nx.descendants(self._hierarchy, cls)

    def subclasses(self, cls: NodeId) -> Set[NodeId]:
        """Reflexive-transitive subclass closure."""
        if cls not in self._hierarchy:
            return {cls}
        return {cls} | nx.ancestors(self._hierarchy, cls)

    def direct_annotations(self, entity: NodeId, polarity: Polarity) -> List[NodeId]:
        return [target for _, target in self.assertions(entity, polarity)]

    def entailed_annotations(self, entity: NodeId, polarity: Polarity) -> Set[NodeId]:
        """
        Classes entailed for `entity`: positive assertions propagate up the
        hierarchy, negative assertions propagate down (reverse inheritance).
        """
        closure = self.superclasses if polarity is Polarity.POSITIVE else self.subclasses
        entailed: Set[NodeId] = set()
        for cls in self.direct_annotations(entity, polarity):
            entailed |= closure(cls)
        return entailed


# --- Functional helpers ---

def add_statement(kg: KnowledgeGraph, st: Statement) -> KnowledgeGraph:
    return kg.add_statement(st)


def neighbors(kg: KnowledgeGraph, node: NodeId, status: Polarity) -> List[Hop]:
    return kg.neighbors(node, status)


def entailed_annotations(kg: KnowledgeGraph, entity: NodeId, polarity: Polarity) -> Set[NodeId]:
    return kg.entailed_annotations(entity, polarity)
