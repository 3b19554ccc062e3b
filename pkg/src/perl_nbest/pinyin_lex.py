"""Character -> pinyin lookup and per-character phonetic token streams.

Each character becomes its pinyin letters followed by one tone token, so
``宗`` (zong1) and ``松`` (song1) share four of their five tokens.
"""
from __future__ import annotations

import re
import string
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import LexiconParseError

DELIMITER = "|"
MASK = "[M]"

LETTERS = list(string.ascii_lowercase)
TONES = [f"T{t}" for t in range(6)]
DELIM_TOKEN = "[DELIM]"
MASK_NULL_TOKEN = "[MASK-NULL]"
UNK_TOKEN = "[UNK]"

PINYIN_VOCAB = LETTERS + TONES + [DELIM_TOKEN, MASK_NULL_TOKEN, UNK_TOKEN]
PINYIN_ID = {tok: i for i, tok in enumerate(PINYIN_VOCAB)}
assert len(PINYIN_VOCAB) == 35

_SYLLABLE_RE = re.compile(r"^([a-z]+)([0-5])$")


@dataclass(frozen=True)
class PinyinSyllable:
    letters: str
    tone: int

    def __post_init__(self):
        if not self.letters or not self.letters.isascii() or not self.letters.isalpha() \
                or not self.letters.islower():
            raise ValueError(f"invalid pinyin letters {self.letters!r}")
        if self.tone not in range(6):
            raise ValueError(f"tone {self.tone} outside 0..5")

    @classmethod
    def parse(cls, text: str) -> "PinyinSyllable":
        m = _SYLLABLE_RE.match(text)
        if not m:
            raise ValueError(f"bad syllable {text!r}; expected letters plus tone digit")
        return cls(m.group(1), int(m.group(2)))

    def tokens(self) -> list[str]:
        return list(self.letters) + [f"T{self.tone}"]

    def __str__(self):
        return f"{self.letters}{self.tone}"


@dataclass(frozen=True)
class PinyinLexicon:
    entries: dict
    version: str = "1"

    def __contains__(self, ch):
        return ch in self.entries

    def __len__(self):
        return len(self.entries)

    def get(self, ch, default=None):
        return self.entries.get(ch, default)


def parse_lexicon(lines: Iterable[str], version="1") -> PinyinLexicon:
    entries = {}
    for no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or len(parts[0]) != 1:
            raise LexiconParseError(f"expected '<char>\\t<pinyin><tone>', got {line!r}", no)
        try:
            syl = PinyinSyllable.parse(parts[1].strip())
        except ValueError as exc:
            raise LexiconParseError(str(exc), no) from None
        entries.setdefault(parts[0], syl)
    if not entries:
        raise LexiconParseError("lexicon contains no entries")
    return PinyinLexicon(entries, version)


def load_lexicon(path) -> PinyinLexicon:
    """Read a ``<char>\\t<letters><tone>`` file; first occurrence wins."""
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        return parse_lexicon(f, version=path.name)


@lru_cache(maxsize=1)
def bundled_lexicon() -> PinyinLexicon:
    text = resources.files("perl_nbest.data").joinpath("lexicon.tsv").read_text(encoding="utf-8")
    return parse_lexicon(text.splitlines(), version="bundled-gb2312-l1")


def char_tokens(ch: str, lex: PinyinLexicon) -> list[str]:
    if ch == DELIMITER:
        return [DELIM_TOKEN]
    if ch == MASK:
        return [MASK_NULL_TOKEN]
    syl = lex.entries.get(ch)
    return syl.tokens() if syl is not None else [UNK_TOKEN]


def to_pinyin_tokens(text: Sequence[str], lex: PinyinLexicon) -> list[list[str]]:
    """One token list per character: letters + tone, ``[DELIM]`` for the
    delimiter, ``[UNK]`` for anything outside the lexicon."""
    return [char_tokens(ch, lex) for ch in text]


def to_pinyin_ids(text: Sequence[str], lex: PinyinLexicon) -> list[list[int]]:
    return [[PINYIN_ID[t] for t in char_tokens(ch, lex)] for ch in text]
