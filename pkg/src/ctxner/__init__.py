"""Document-level context retrieval engine for NER on long documents."""

__version__ = "0.1.0"
