"""Pinyin-enhanced rephrasing for Chinese ASR N-best correction."""

__version__ = "0.1.0"
