"""
A pinyin encoder that cannot tell homophones apart
==================================================

The phonetic branch sees only pinyin, never characters. Two characters
with the same syllable and tone therefore have to come out with exactly
the same encoding, and that stays true no matter how long we train.

We pretrain on the bundled toy corpus (800 sentences, 64 characters) by
predicting each character from its pinyin, then check both facts.
"""
import math

from perl_nbest.pinyin_encoder import TrainHyper, pretrain_pinyin_encoder
from perl_nbest.corpus import bundled_sentences
from perl_nbest.pinyin_lex import bundled_lexicon, to_pinyin_tokens

lex = bundled_lexicon()
toy = bundled_sentences("toy")

print("pinyin tokens for 天气:", to_pinyin_tokens("天气", lex))

######################################################################
# Pretraining
# -----------
#
# Before any update the prediction head is close to uniform, so the loss
# starts near ln(vocab).

enc, history = pretrain_pinyin_encoder(
    toy, lex, hyper=TrainHyper(epochs=10, lr=5e-4),
    on_epoch=lambda e, loss: print(f"  epoch {e + 1:>2}  loss {loss:.3f}"))
print(f"initial {history.initial:.3f}  ln(vocab) {math.log(len(enc.vocab)):.3f}")

######################################################################
# Homophones
# ----------

groups = {}
for ch in enc.vocab.itos[4:]:
    groups.setdefault(tuple(to_pinyin_tokens(ch, lex)[0]), []).append(ch)
for spelling, chars in groups.items():
    if len(chars) > 1:
        rows = {enc.encode_phonetic(c).E_p.data.tobytes() for c in chars}
        print("".join(spelling), chars, "identical" if len(rows) == 1 else "DIFFERENT")

######################################################################
# What pinyin alone recovers
# --------------------------
#
# For a sentence without homophone ambiguity the pretrained head reads the
# characters straight back off the pinyin.

sentence = toy[0]
probs = enc.predict_characters(enc.encode_phonetic(sentence))
print(sentence, "->", enc.vocab.decode(probs.argmax(axis=1)))
