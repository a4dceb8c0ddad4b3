"""Attribute-labeled aesthetic caption dataset construction by lexicon transfer."""

__version__ = "0.1.0"
