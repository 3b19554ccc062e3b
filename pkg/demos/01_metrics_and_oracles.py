"""
Scoring N-best lists
====================

How much could a corrector gain from an N-best list at all? This walk-through
builds a small synthetic corpus and measures it with the metrics the
package exposes: CER, the selection and combination oracles, and WCC.

Run with ``python demos/01_metrics_and_oracles.py``.
"""
from perl_nbest.corpus import (CorpusRecord, NoiseParams, build_confusion_model, bundled_sentences,
                               make_corpus)
from perl_nbest.evaluation import cer, edit_distance, evaluate, oracle_cp, oracle_nb, wcc
from perl_nbest.pinyin_lex import bundled_lexicon

######################################################################
# One utterance by hand
# ---------------------
#
# A gold sentence with a homophone slip in the 1-best (宗 -> 松). Only the
# fifth hypothesis has the right character at that position.

gold = "目前挂牌的只有几宗土地"
nbest = ["目前挂牌的只有几松土地", "目前挂牌的只有几松土", "目前挂牌的只有几送土地",
         "目前挂牌的只有几松土地了", "目前挂牌的只有几宗土的"]

dist, alignment = edit_distance(nbest[0], gold)
print("1-best edits:", [op for op in alignment.ops if op.op != "match"])
print(f"1-best CER {cer(nbest[0], gold):.3f}")

best, best_cer = oracle_nb(nbest, gold)
combo, combo_cer = oracle_cp(nbest, gold)
print(f"selection oracle  {best}  CER {best_cer:.3f}")
print(f"combination oracle {combo}  CER {combo_cer:.3f}")

######################################################################
# Wrong character coverage
# ------------------------
#
# WCC asks, for each substitution in the 1-best, whether the right
# character shows up at the aligned position of some top-n hypothesis.

rec = CorpusRecord(gold, nbest)
for n in range(1, 6):
    print(f"WCC@{n} = {wcc([rec], n)}")

######################################################################
# A synthetic corpus
# ------------------
#
# Each hypothesis is an independent noisy copy of the gold sentence.
# Lower ranks are noisier, and substitutions prefer phonetically close
# characters, so the right answer is often somewhere in the list.

lex = bundled_lexicon()
sentences = bundled_sentences()
conf = build_confusion_model(lex, {c for s in sentences for c in s})
records = make_corpus(sentences[:500], conf, NoiseParams(), n=6)

report = evaluate(records)
print()
print(report.format_table())
