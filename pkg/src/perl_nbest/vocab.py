from __future__ import annotations

from typing import Iterable, Sequence

from .pinyin_lex import DELIMITER, MASK

PAD = "[PAD]"
UNK = "[UNK]"
SPECIALS = [PAD, UNK, MASK, DELIMITER]
PAD_ID, UNK_ID, MASK_ID, DELIM_ID = range(4)


class CharVocab:
    """Character vocabulary with the four reserved low ids
    ``[PAD]=0, [UNK]=1, [M]=2, |=3``."""

    def __init__(self, chars: Iterable[str]):
        rest = sorted(set(chars) - set(SPECIALS))
        self.itos = SPECIALS + rest
        self.stoi = {s: i for i, s in enumerate(self.itos)}

    @classmethod
    def from_sentences(cls, sentences: Iterable[str]):
        return cls(c for s in sentences for c in s)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, tok):
        return tok in self.stoi

    def encode(self, tokens: Sequence[str]) -> list:
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def decode(self, ids) -> str:
        return "".join(self.itos[int(i)] for i in ids)

    def to_meta(self) -> dict:
        return {"chars": "".join(self.itos[len(SPECIALS):]),
                "specials": {name: i for i, name in enumerate(SPECIALS)}}

    @classmethod
    def from_meta(cls, meta: dict) -> "CharVocab":
        specials = meta.get("specials", {})
        if specials and specials != {name: i for i, name in enumerate(SPECIALS)}:
            raise ValueError(f"checkpoint special-token layout {specials} not supported")
        return cls(meta["chars"])
