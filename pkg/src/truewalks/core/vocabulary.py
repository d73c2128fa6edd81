"""
RDF / RDFS / OWL vocabulary used by the ingest and graph layers.
"""
from rdflib.namespace import OWL, RDF, RDFS

SUBCLASS_OF: str = str(RDFS.subClassOf)
RDF_TYPE: str = str(RDF.type)

NEGATIVE_PROPERTY_ASSERTION: str = str(OWL.NegativePropertyAssertion)
SOURCE_INDIVIDUAL: str = str(OWL.sourceIndividual)
ASSERTION_PROPERTY: str = str(OWL.assertionProperty)
TARGET_INDIVIDUAL: str = str(OWL.targetIndividual)

# Walk tokens for hierarchy edges
SUBCLASS_TOKEN = "subClassOf"
SUPERCLASS_TOKEN = "superClassOf"

# Prefix marking a negated predicate in the merged-polarity baseline
NEGATED_PREFIX = "not:"

REIFICATION_PROPERTIES = {
    SOURCE_INDIVIDUAL: "source",
    ASSERTION_PROPERTY: "property",
    TARGET_INDIVIDUAL: "target",
}


def negated_predicate(predicate: str) -> str:
    """Predicate IRI standing for the negation of `predicate`."""
    return f"{NEGATED_PREFIX}{predicate}"
