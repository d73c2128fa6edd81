"""
Ingest Service
Parses ontology triples, annotation tables and pair datasets into a
KnowledgeGraph, folding reified negative property assertions into
negative statements. Also writes graphs back out in the same formats.
"""
import csv
import io
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from pydantic import ValidationError

from ..core.errors import ParseError
from ..core.graph import EdgeLabel, KnowledgeGraph, NodeId, NodeKind, Polarity, Statement
from ..core.schemas import AnnotationRecord, KGSummary, PairDataset, PairRecord
from ..core.vocabulary import (
    ASSERTION_PROPERTY,
    NEGATIVE_PROPERTY_ASSERTION,
    RDF_TYPE,
    REIFICATION_PROPERTIES,
    SOURCE_INDIVIDUAL,
    SUBCLASS_OF,
    TARGET_INDIVIDUAL,
    negated_predicate,
)
from .prometheus import get_metrics_collector

logger = logging.getLogger(__name__)

TextInput = Union[str, bytes]

ANNOTATION_HEADER = ["entity", "property", "class", "polarity"]
PAIRS_HEADER = ["entityA", "entityB", "label"]


@dataclass(frozen=True)
class RawTriple:
    """A parsed triple, before polarity is assigned. `datatype` keeps a literal's suffix verbatim."""
    subject: NodeId
    predicate: str
    object: NodeId
    line: int = 0
    datatype: str = ""


# --- N-Triples subset ---

_IRI_CHARS = r'[^<>"{}|^`\\\x00-\x20]*'
_IRI = re.compile(rf"<({_IRI_CHARS})>")
_BLANK = re.compile(r"_:([A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?)")
_LITERAL = re.compile(r'"((?:[^"\\\n\r]|\\.)*)"')
_LITERAL_SUFFIX = re.compile(rf"@[A-Za-z]+(?:-[A-Za-z0-9]+)*|\^\^<{_IRI_CHARS}>")
_ESCAPE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))")
_SIMPLE_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t", "b": "\b", "f": "\f", "'": "'"}


def _decode(data: TextInput, source: str) -> str:
    if isinstance(data, str):
        return data
    try:
        return bytes(data).decode("utf-8")
    except UnicodeDecodeError as e:
        line = data.count(b"\n", 0, e.start) + 1
        column = e.start - (data.rfind(b"\n", 0, e.start) + 1) + 1
        raise ParseError("invalid UTF-8 byte sequence", line=line, column=column, source=source) from e


class _LineScanner:
    """Cursor over one line of N-Triples."""

    def __init__(self, text: str, lineno: int, source: str):
        self.text = text
        self.lineno = lineno
        self.source = source
        self.pos = 0

    def error(self, message: str, pos: Optional[int] = None) -> ParseError:
        column = (self.pos if pos is None else pos) + 1
        return ParseError(message, line=self.lineno, column=column, source=self.source)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def iri(self, role: str) -> str:
        match = _IRI.match(self.text, self.pos)
        if not match:
            if self.peek() == "<":
                raise self.error(f"malformed IRI in {role}")
            raise self.error(f"expected IRI as {role}" if self.peek() else f"missing {role}")
        self.pos = match.end()
        return match.group(1)

    def node(self, role: str, allow_literal: bool) -> Tuple[NodeId, str]:
        ch = self.peek()
        if ch == "<":
            return NodeId.iri(self.iri(role)), ""
        if ch == "_":
            match = _BLANK.match(self.text, self.pos)
            if not match:
                raise self.error(f"malformed blank node label in {role}")
            self.pos = match.end()
            return NodeId.blank(match.group(1)), ""
        if ch == '"' and allow_literal:
            start = self.pos
            match = _LITERAL.match(self.text, self.pos)
            if not match:
                raise self.error("unterminated literal", start)
            self.pos = match.end()
            lexical = self._unescape(match.group(1), start + 1)
            suffix = ""
            suffix_match = _LITERAL_SUFFIX.match(self.text, self.pos)
            if suffix_match:
                suffix = suffix_match.group(0)
                self.pos = suffix_match.end()
            elif self.peek() in ("@", "^"):
                raise self.error("malformed literal suffix")
            return NodeId.literal(lexical), suffix
        if not ch:
            raise self.error(f"missing {role}")
        expected = "IRI, blank node or literal" if allow_literal else "IRI or blank node"
        raise self.error(f"expected {expected} as {role}")

    def _unescape(self, body: str, offset: int) -> str:
        def replace(match: re.Match) -> str:
            short, long_, simple = match.groups()
            if simple is not None:
                if simple not in _SIMPLE_ESCAPES:
                    raise self.error(f"unknown escape \\{simple}", offset + match.start())
                return _SIMPLE_ESCAPES[simple]
            code = int(short or long_, 16)
            if code > 0x10FFFF or 0xD800 <= code <= 0xDFFF:
                raise self.error("escape is not a valid code point", offset + match.start())
            return chr(code)

        return _ESCAPE.sub(replace, body)


def _parse_line(text: str, lineno: int, source: str) -> Optional[RawTriple]:
    scanner = _LineScanner(text, lineno, source)
    scanner.skip_ws()
    if scanner.at_end() or scanner.peek() == "#":
        return None

    subject, _ = scanner.node("subject", allow_literal=False)
    scanner.skip_ws()
    predicate = scanner.iri("predicate")
    scanner.skip_ws()
    obj, suffix = scanner.node("object", allow_literal=True)
    scanner.skip_ws()
    if scanner.peek() != ".":
        raise scanner.error("missing final '.'")
    scanner.pos += 1
    scanner.skip_ws()
    if not scanner.at_end() and scanner.peek() != "#":
        raise scanner.error("unexpected text after '.'")
    return RawTriple(subject, predicate, obj, lineno, suffix)


def parse_ntriples(data: TextInput, source: str = "<ntriples>") -> List[RawTriple]:
    """One RawTriple per statement line, in file order. Errors carry line and column."""
    text = _decode(data, source)
    triples = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if line.endswith("\r"):
            line = line[:-1]
        triple = _parse_line(line, lineno, source)
        if triple is not None:
            triples.append(triple)
    logger.debug(f"Parsed {len(triples)} triples from {source}")
    return triples


# --- Negative assertion folding ---

def fold_negative_assertions(triples: Sequence[RawTriple], source: str = "<ntriples>") -> List[Statement]:
    """
    Replace every owl:NegativePropertyAssertion cluster by one negative
    statement; every other triple becomes a positive statement verbatim.
    """
    clusters: Dict[NodeId, Dict[str, RawTriple]] = {}
    for triple in triples:
        if triple.predicate == RDF_TYPE and triple.object == NodeId.iri(NEGATIVE_PROPERTY_ASSERTION):
            clusters.setdefault(triple.subject, {})["type"] = triple

    for triple in triples:
        role = REIFICATION_PROPERTIES.get(triple.predicate)
        if role is None:
            continue
        parts = clusters.get(triple.subject)
        if parts is None:
            raise ParseError(
                f"reification triple without an owl:NegativePropertyAssertion type for {triple.subject.token}",
                line=triple.line,
                source=source,
            )
        previous = parts.get(role)
        if previous is not None and previous.object != triple.object:
            raise ParseError(
                f"conflicting {role} in negative assertion {triple.subject.token}",
                line=triple.line,
                source=source,
            )
        parts[role] = triple

    folded: Dict[NodeId, Statement] = {}
    for node, parts in clusters.items():
        type_line = parts["type"].line
        missing = [role for role in ("source", "property", "target") if role not in parts]
        if missing:
            raise ParseError(
                f"incomplete negative assertion {node.token} (missing {', '.join(missing)})",
                line=type_line,
                source=source,
            )
        s, p, o = (parts[role].object for role in ("source", "property", "target"))
        if s.is_literal or o.is_literal:
            raise ParseError(f"negative assertion {node.token} has a literal individual", line=type_line, source=source)
        if p.kind is not NodeKind.IRI:
            raise ParseError(f"negative assertion {node.token} needs an IRI property", line=type_line, source=source)
        if p.value == SUBCLASS_OF:
            raise ParseError(f"negative assertion {node.token} negates subClassOf", line=type_line, source=source)
        folded[node] = Statement(s, EdgeLabel(p.value), o, Polarity.NEGATIVE)

    statements: List[Statement] = []
    for triple in triples:
        if triple.subject in clusters:
            if triple.predicate == RDF_TYPE and triple.object == NodeId.iri(NEGATIVE_PROPERTY_ASSERTION):
                statements.append(folded[triple.subject])
                continue
            if triple.predicate in REIFICATION_PROPERTIES:
                continue
        statements.append(Statement(triple.subject, EdgeLabel(triple.predicate), triple.object, Polarity.POSITIVE))

    n_negative = len(folded)
    if n_negative:
        logger.info(f"Folded {n_negative} negative property assertions")
    return statements


# --- Tabular inputs ---

def _tsv_rows(text: str) -> Iterable[Tuple[int, List[str]]]:
    reader = csv.reader(io.StringIO(text), delimiter="\t", quoting=csv.QUOTE_NONE)
    for row in reader:
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        yield reader.line_num, [cell.strip() for cell in row]


def _field_column(row: List[str], index: int) -> int:
    return sum(len(cell) + 1 for cell in row[:index]) + 1


def _read_table(data: TextInput, header: List[str], source: str) -> Iterable[Tuple[int, List[str]]]:
    text = _decode(data, source)
    rows = _tsv_rows(text)
    first = next(rows, None)
    if first is None:
        raise ParseError(f"missing header {' '.join(header)}", line=1, source=source)
    lineno, cells = first
    if cells != header:
        raise ParseError(f"expected header {'<TAB>'.join(header)}", line=lineno, column=1, source=source)
    for lineno, cells in rows:
        if len(cells) != len(header):
            raise ParseError(
                f"expected {len(header)} columns, found {len(cells)}", line=lineno, column=1, source=source
            )
        yield lineno, cells


def _validation_to_parse_error(
    e: ValidationError, row: List[str], columns: List[str], lineno: int, source: str
) -> ParseError:
    first = e.errors()[0]
    loc = str(first["loc"][0]) if first["loc"] else ""
    index = columns.index(loc) if loc in columns else 0
    message = first["msg"].removeprefix("Value error, ")
    return ParseError(message, line=lineno, column=_field_column(row, index), source=source)


def parse_annotations(data: TextInput, source: str = "<annotations>") -> List[AnnotationRecord]:
    """Annotation TSV with header `entity property class polarity`."""
    records = []
    fields = ["entity", "property", "class", "polarity"]
    for lineno, cells in _read_table(data, ANNOTATION_HEADER, source):
        try:
            records.append(AnnotationRecord.model_validate(dict(zip(fields, cells))))
        except ValidationError as e:
            raise _validation_to_parse_error(e, cells, ["entity", "property", "cls", "polarity"], lineno, source) from e
    logger.debug(f"Parsed {len(records)} annotation records from {source}")
    return records


def parse_pairs(data: TextInput, source: str = "<pairs>") -> PairDataset:
    """Pair TSV with header `entityA entityB label`. Duplicate unordered pairs are rejected."""
    records: List[PairRecord] = []
    seen: Set[Tuple[str, str]] = set()
    for lineno, cells in _read_table(data, PAIRS_HEADER, source):
        try:
            record = PairRecord(entity_a=cells[0], entity_b=cells[1], label=cells[2])
        except ValidationError as e:
            raise _validation_to_parse_error(e, cells, ["entity_a", "entity_b", "label"], lineno, source) from e
        if record.unordered_key in seen:
            raise ParseError(
                f"duplicate unordered pair {record.entity_a} / {record.entity_b}", line=lineno, column=1, source=source
            )
        seen.add(record.unordered_key)
        records.append(record)
    return PairDataset(pairs=records)


# --- Assembly ---

def _relabel_blanks(statements: Sequence[Statement]) -> List[Statement]:
    mapping: Dict[NodeId, NodeId] = {}

    def relabel(node: NodeId) -> NodeId:
        if node.kind is not NodeKind.BLANK:
            return node
        if node not in mapping:
            mapping[node] = NodeId.blank(f"b{len(mapping)}")
        return mapping[node]

    return [Statement(relabel(st.subject), st.predicate, relabel(st.object), st.polarity) for st in statements]


def assemble_kg(
    triples: Sequence[Union[RawTriple, Statement]],
    annotations: Sequence[AnnotationRecord],
    source: str = "<ntriples>",
) -> KnowledgeGraph:
    """
    Build the frozen graph: ontology statements first, then one statement per
    annotation. Root entities are the annotated entities.
    """
    if triples and isinstance(triples[0], RawTriple):
        ontology = fold_negative_assertions(triples, source=source)
    else:
        ontology = list(triples)
    ontology = _relabel_blanks(ontology)

    kg = KnowledgeGraph()
    kg.add_statements(ontology)
    known = kg.nodes()

    absent: Dict[str, None] = {}
    roots: Dict[NodeId, None] = {}
    for record in annotations:
        st = Statement.of(record.entity, record.property, record.cls, record.polarity)
        if st.object not in known:
            absent[record.cls] = None
        kg.add_statement(st)
        roots[st.subject] = None

    if absent:
        sample = ", ".join(list(absent)[:5])
        logger.warning(f"{len(absent)} annotation classes are absent from the ontology (e.g. {sample}); added as fresh nodes")
        get_metrics_collector().record_parse_warning("annotation_class_absent", len(absent))

    for node in roots:
        kg.add_root_entity(node)
    kg.freeze()
    logger.info(f"Assembled {kg!r}")
    return kg


def load_graph(ontology: Union[str, Path], annotations: Union[str, Path]) -> KnowledgeGraph:
    ontology, annotations = Path(ontology), Path(annotations)
    triples = parse_ntriples(ontology.read_bytes(), source=str(ontology))
    records = parse_annotations(annotations.read_bytes(), source=str(annotations))
    return assemble_kg(triples, records, source=str(ontology))


def load_pairs(path: Union[str, Path]) -> PairDataset:
    path = Path(path)
    return parse_pairs(path.read_bytes(), source=str(path))


# --- Serialization ---

def _escape_literal(value: str) -> str:
    out = []
    for ch in value:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return "".join(out)


def format_term(node: NodeId) -> str:
    if node.kind is NodeKind.IRI:
        return f"<{node.value}>"
    if node.kind is NodeKind.BLANK:
        return f"_:{node.value}"
    return f'"{_escape_literal(node.value)}"'


def _is_annotation_row(kg: KnowledgeGraph, st: Statement, reify_negatives: bool) -> bool:
    if reify_negatives and st.polarity is Polarity.NEGATIVE:
        return False
    return (
        st.subject in kg.root_entities
        and st.subject.kind is NodeKind.IRI
        and st.object.kind is NodeKind.IRI
        and not st.predicate.is_subclass
    )


def serialize_graph(kg: KnowledgeGraph, reify_negatives: bool = False) -> Tuple[str, str]:
    """
    Write a graph as (N-Triples text, annotation TSV text). Statements about
    root entities go to the TSV; other negatives (all of them with
    `reify_negatives`) become reification clusters.
    """
    taken = {n.value for n in kg.nodes() if n.kind is NodeKind.BLANK}
    counter = 0

    def fresh_blank() -> str:
        nonlocal counter
        while f"neg{counter}" in taken:
            counter += 1
        label = f"neg{counter}"
        counter += 1
        return f"_:{label}"

    nt_lines: List[str] = []
    tsv_lines: List[str] = ["\t".join(ANNOTATION_HEADER)]
    for st in kg.statements:
        if _is_annotation_row(kg, st, reify_negatives):
            tsv_lines.append("\t".join([st.subject.value, st.predicate.predicate, st.object.value, st.polarity.value]))
            continue
        s, p, o = format_term(st.subject), f"<{st.predicate.predicate}>", format_term(st.object)
        if st.polarity is Polarity.POSITIVE:
            nt_lines.append(f"{s} {p} {o} .")
            continue
        b = fresh_blank()
        nt_lines.append(f"{b} <{RDF_TYPE}> <{NEGATIVE_PROPERTY_ASSERTION}> .")
        nt_lines.append(f"{b} <{SOURCE_INDIVIDUAL}> {s} .")
        nt_lines.append(f"{b} <{ASSERTION_PROPERTY}> {p} .")
        nt_lines.append(f"{b} <{TARGET_INDIVIDUAL}> {o} .")

    return "\n".join(nt_lines) + ("\n" if nt_lines else ""), "\n".join(tsv_lines) + "\n"


def write_graph(
    kg: KnowledgeGraph,
    ontology: Union[str, Path],
    annotations: Union[str, Path],
    reify_negatives: bool = False,
) -> None:
    nt_text, tsv_text = serialize_graph(kg, reify_negatives)
    Path(ontology).write_text(nt_text, encoding="utf-8")
    Path(annotations).write_text(tsv_text, encoding="utf-8")


def write_pairs(pairs: PairDataset, path: Union[str, Path]) -> None:
    lines = ["\t".join(PAIRS_HEADER)]
    lines += [f"{p.entity_a}\t{p.entity_b}\t{p.label}" for p in pairs.pairs]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- Summaries and baseline views ---

def summarize_graph(kg: KnowledgeGraph) -> KGSummary:
    classes: Set[NodeId] = set()
    typed: Set[NodeId] = set()
    subclass_edges = 0
    positives = 0
    negatives = 0
    for st in kg.statements:
        if st.predicate.is_subclass:
            subclass_edges += 1
            classes.update(n for n in (st.subject, st.object) if n.kind is NodeKind.IRI)
            continue
        if st.polarity is Polarity.NEGATIVE:
            negatives += 1
        else:
            positives += 1
        if st.predicate.predicate == RDF_TYPE:
            typed.add(st.subject)
        if st.subject in kg.root_entities and st.object.kind is NodeKind.IRI:
            # punned classes used as annotation targets
            classes.add(st.object)
        elif st.predicate.predicate == RDF_TYPE and st.object.kind is NodeKind.IRI:
            classes.add(st.object)

    nodes = kg.nodes()
    instances = (set(kg.root_entities) | {n for n in typed if n.kind is NodeKind.IRI}) - classes
    return KGSummary(
        classes=len(classes),
        instances=len(instances),
        blank_nodes=sum(1 for n in nodes if n.kind is NodeKind.BLANK),
        literals=sum(1 for n in nodes if n.kind is NodeKind.LITERAL),
        subclass_edges=subclass_edges,
        edges=len(kg),
        positive_statements=positives,
        negative_statements=negatives,
        root_entities=len(kg.root_entities),
    )


def positive_only_view(kg: KnowledgeGraph) -> KnowledgeGraph:
    """The graph without its negative statements."""
    return kg.filtered(lambda st: st.polarity is Polarity.POSITIVE)


def merged_polarity_view(kg: KnowledgeGraph) -> KnowledgeGraph:
    """Negative statements become positive statements over a distinct `not:` predicate."""

    def rewrite(st: Statement) -> Statement:
        if st.polarity is Polarity.POSITIVE:
            return st
        return Statement(st.subject, EdgeLabel(negated_predicate(st.predicate.predicate)), st.object, Polarity.POSITIVE)

    return kg.filtered(lambda st: True, rewrite=rewrite)
