"""Regenerate the bundled character lexicon.

Covers the 3,755 level-1 characters of GB2312 with the primary reading
reported by pypinyin (dev-only dependency, not needed at runtime).

    python tools/build_lexicon.py > src/perl_nbest/data/lexicon.tsv
"""
import sys

from pypinyin import Style, pinyin


def gb2312_level1():
    chars = []
    for hi in range(0xB0, 0xD8):
        for lo in range(0xA1, 0xFF):
            try:
                chars.append(bytes([hi, lo]).decode("gb2312"))
            except UnicodeDecodeError:
                pass
    return chars


def main(out=sys.stdout):
    out.write("# char<TAB>pinyin+tone; GB2312 level-1, primary readings\n")
    for ch in gb2312_level1():
        reading = pinyin(ch, style=Style.TONE3, neutral_tone_with_five=True)[0][0]
        if not reading[-1].isdigit():
            reading += "5"
        out.write(f"{ch}\t{reading}\n")


if __name__ == "__main__":
    main()
