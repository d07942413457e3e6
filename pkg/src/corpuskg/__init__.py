"""corpuskg: build a domain knowledge graph from a corpus of paper abstracts.

Pipeline: corpus ingestion -> candidate triple pre-extraction -> relation
schema induction (two-stage clustering) -> annotated NER/RC datasets ->
CRF entity tagging + few-shot relation classification -> threshold-filtered
triple integration -> graph store with a JSON HTTP service.
"""

__version__ = "0.1.0"
