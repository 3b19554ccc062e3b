"""
Correcting N-best lists end to end
==================================

Train the three stages on a slice of the synthetic corpus, then correct a
held-out split and compare against the 1-best baseline and the three
ablations. The defaults match the test suite's setup and take about seven
minutes on one core. Much smaller runs undertrain: at 1500 records and 4
epochs the rephraser is still far worse than the 1-best it starts from.
"""
import argparse
import time

from perl_nbest.config import PipelineConfig
from perl_nbest.corpus import NoiseParams, build_confusion_model, bundled_sentences, make_corpus
from perl_nbest.evaluation import evaluate, measure_latency
from perl_nbest.pinyin_lex import bundled_lexicon
from perl_nbest.pipeline import ABLATIONS, train_pipeline

ap = argparse.ArgumentParser()
ap.add_argument("--train", type=int, default=4000)
ap.add_argument("--heldout", type=int, default=300)
ap.add_argument("--epochs", type=int, default=8, help="rephraser epochs")
args = ap.parse_args()

lex = bundled_lexicon()
sentences = bundled_sentences()
conf = build_confusion_model(lex, {c for s in sentences for c in s})
train = make_corpus(sentences[:args.train], conf, NoiseParams())
heldout = make_corpus(sentences[args.train:args.train + args.heldout], conf, NoiseParams(),
                      start=args.train)

######################################################################
# Training
# --------
#
# The pinyin encoder is pretrained and frozen first. The length predictor
# and the rephraser are then trained on the same records.

cfg = PipelineConfig(rephraser_epochs=args.epochs)
t0 = time.time()
model, logs = train_pipeline(cfg, lex, train, heldout)
print(f"trained in {time.time() - t0:.0f}s; stage seconds "
      + ", ".join(f"{k} {v:.0f}" for k, v in logs["seconds"].items()))
print(f"length accuracy {logs['length'].epochs[-1][1]:.3f} "
      f"vs 1-best heuristic {logs['length'].heldout_one_best:.3f}")

######################################################################
# A few corrections
# -----------------

for r in heldout[:5]:
    print("gold  ", r.gold)
    print("1-best", r.nbest[0])
    print("PERL  ", model.correct(r.nbest))
    print()

######################################################################
# Ablations
# ---------
#
# All three are switched on at inference time on the same trained model.

nbests = [r.nbest for r in heldout]
lengths = model.lengths(nbests)
systems = {"PERL": model.correct_batch(nbests, lengths=lengths)}
for ablation in ABLATIONS:
    systems[f"PERL {ablation}"] = model.correct_batch(
        nbests, ablation, lengths=None if ablation == "w/o-len" else lengths)

report = evaluate(heldout, systems, {"length predictor": lengths})
report.latency["PERL"] = measure_latency(model.correct, nbests[:50])
print(report.format_table())
