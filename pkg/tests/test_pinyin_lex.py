import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perl_nbest.errors import LexiconParseError
from perl_nbest.pinyin_lex import (PINYIN_VOCAB, PinyinSyllable, bundled_lexicon, load_lexicon,
                                   parse_lexicon, to_pinyin_ids, to_pinyin_tokens)

ZONG = ["z", "o", "n", "g", "T1"]
SONG = ["s", "o", "n", "g", "T1"]


def test_vocabulary_is_fixed_at_35():
    assert len(PINYIN_VOCAB) == 35 == len(set(PINYIN_VOCAB))


def test_parse_case_study_entries(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("# comment\n宗\tzong1\n松\tsong1\n宗\tzong4\n", encoding="utf-8")
    lex = load_lexicon(path)
    assert len(lex) == 2
    assert lex.get("宗") == PinyinSyllable("zong", 1)   # first occurrence wins
    assert lex.get("松") == PinyinSyllable("song", 1)


@pytest.mark.parametrize("text, line", [
    ("宗\tzong\n", 1),
    ("宗\tzong1\n松song1\n", 2),
    ("宗松\tzong1\n", 1),
    ("宗\tzong9\n", 1),
    ("# only\n\n宗\tZONG1\n", 3),
])
def test_malformed_lines_name_the_line(text, line):
    with pytest.raises(LexiconParseError) as err:
        parse_lexicon(text.splitlines())
    assert err.value.line_no == line
    assert f"line {line}" in str(err.value)


def test_empty_lexicon_rejected(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("# nothing here\n", encoding="utf-8")
    with pytest.raises(LexiconParseError):
        load_lexicon(path)


def test_token_sequences():
    lex = bundled_lexicon()
    assert to_pinyin_tokens("宗", lex) == [ZONG]
    assert to_pinyin_tokens("|", lex) == [["[DELIM]"]]
    assert to_pinyin_tokens("宗松", lex) == [ZONG, SONG]
    assert to_pinyin_tokens("A7", lex) == [["[UNK]"], ["[UNK]"]]
    assert to_pinyin_tokens(["宗", "[M]"], lex) == [ZONG, ["[MASK-NULL]"]]


def test_bundled_lexicon_size_and_homophones():
    lex = bundled_lexicon()
    assert len(lex) >= 2000
    assert lex.get("宗") == lex.get("棕")
    assert to_pinyin_ids("宗", lex) == to_pinyin_ids("棕", lex)


@settings(max_examples=200, deadline=None)
@given(st.text(min_size=1, max_size=30))
def test_total_and_deterministic(text):
    lex = bundled_lexicon()
    out = to_pinyin_tokens(text, lex)
    assert len(out) == len(text)
    assert all(tok in PINYIN_VOCAB for seq in out for tok in seq)
    assert out == to_pinyin_tokens(text, lex)
