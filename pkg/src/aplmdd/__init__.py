"""Acoustic + phonetic + linguistic embeddings for mispronunciation detection."""

__version__ = "0.1.0"
