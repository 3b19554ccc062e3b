"""``perl-nbest`` command line.

Exit codes: 0 success, 1 usage or config error, 2 missing prerequisite
(a file an earlier command should have produced), 3 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import dump_config, load_config
from .corpus import (NOISE_PRESETS, NoiseParams, build_confusion_model, bundled_sentences,
                     dataset_stats, load_sentences, make_corpus, read_corpus, write_corpus)
from .errors import ConfigError, LexiconParseError
from .evaluation import evaluate, measure_latency
from .length_predictor import train_length_predictor
from .pinyin_encoder import pretrain_pinyin_encoder
from .pinyin_lex import bundled_lexicon, load_lexicon
from .pipeline import (ABLATIONS, LENGTH_CKPT, PERL, PINYIN_CKPT, REPHRASER_CKPT, build_vocab,
                       load_pinyin, stage_configs)
from .rephraser import train_rephraser

log = logging.getLogger("perl_nbest")

EXIT_OK, EXIT_USAGE, EXIT_MISSING, EXIT_RUNTIME = 0, 1, 2, 3


class MissingPrerequisite(Exception):
    pass


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _require(path: Path, what: str, command: str):
    if not path.exists():
        raise MissingPrerequisite(f"{what} not found at {path}; run `perl-nbest {command}` first")
    return path


def _lexicon(cfg):
    return load_lexicon(cfg.lexicon) if cfg.lexicon else bundled_lexicon()


def _records(path, command="gen-data"):
    return read_corpus(_require(Path(path), "corpus", command))


def _pretrain_sentences(cfg, train):
    if cfg.pretrain_sentences:
        return load_sentences(_require(Path(cfg.pretrain_sentences), "pretraining sentences",
                                       "gen-data"))
    return [r.gold for r in train]


def _pinyin(cfg, lex):
    return load_pinyin(_require(cfg.ckpt(PINYIN_CKPT), "pinyin encoder checkpoint",
                                "pretrain-pinyin"), lex)


def _pipeline(cfg, lex):
    for name, cmd in ((PINYIN_CKPT, "pretrain-pinyin"), (LENGTH_CKPT, "train-length"),
                      (REPHRASER_CKPT, "train-rephraser")):
        _require(cfg.ckpt(name), f"checkpoint {name}", cmd)
    return PERL.load(cfg.checkpoint_dir, lex)


# -- commands ----------------------------------------------------------------------

def cmd_gen_data(cfg, args):
    if args.source:
        sentences = load_sentences(_require(Path(args.source), "sentence file", "gen-data"))
    else:
        sentences = bundled_sentences()
    chosen = sentences[args.start:args.start + args.sentences]
    if len(chosen) < args.sentences:
        raise ConfigError(f"--sentences: only {len(chosen)} sentences available after --start {args.start}")
    lex = _lexicon(cfg)
    preset = args.noise or cfg.noise
    if preset not in NOISE_PRESETS:
        raise ConfigError(f"--noise must be one of {sorted(NOISE_PRESETS)}")
    params = NoiseParams(**NOISE_PRESETS[preset], seed=cfg.seed)
    conf = build_confusion_model(lex, {c for s in sentences for c in s})
    records = make_corpus(chosen, conf, params, cfg.n_best, start=args.start)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_corpus(args.out, records)
    stats = dataset_stats(records)
    print(f"wrote {len(records)} records to {args.out} "
          f"(mean length {stats['mean_length']:.2f}, 1-best length equal {stats['equal']})")


def cmd_pretrain_pinyin(cfg, args):
    lex = _lexicon(cfg)
    train = _records(cfg.train_corpus)
    sentences = _pretrain_sentences(cfg, train)
    vocab = build_vocab(train, sentences)
    config, hyper = stage_configs(cfg, vocab)["pinyin"]
    enc, history = pretrain_pinyin_encoder(
        sentences, lex, config, hyper, vocab,
        on_epoch=lambda e, loss: print(f"epoch {e + 1:>3}  loss {loss:.4f}", flush=True))
    print(f"initial loss {history.initial:.4f}")
    enc.freeze()
    Path(cfg.checkpoint_dir).mkdir(parents=True, exist_ok=True)
    enc.store.save(cfg.ckpt(PINYIN_CKPT))
    print(f"saved frozen pinyin encoder to {cfg.ckpt(PINYIN_CKPT)}")


def cmd_train_length(cfg, args):
    lex = _lexicon(cfg)
    pinyin = _pinyin(cfg, lex)
    train = _records(cfg.train_corpus)
    heldout = read_corpus(cfg.heldout_corpus) if Path(cfg.heldout_corpus).exists() else []
    config, hyper = stage_configs(cfg, pinyin.vocab)["length"]
    model, history = train_length_predictor(train, pinyin.vocab, heldout, config, hyper)
    for e, (loss, acc) in enumerate(history.epochs):
        extra = "" if acc is None else f"  held-out accuracy {acc:.4f}"
        print(f"epoch {e + 1:>3}  loss {loss:.4f}{extra}")
    if heldout:
        print(f"1-best length heuristic accuracy {history.heldout_one_best:.4f}")
    model.store.save(cfg.ckpt(LENGTH_CKPT))
    print(f"saved length predictor to {cfg.ckpt(LENGTH_CKPT)}")


def cmd_train_rephraser(cfg, args):
    lex = _lexicon(cfg)
    pinyin = _pinyin(cfg, lex)
    train = _records(cfg.train_corpus)
    config, hyper = stage_configs(cfg, pinyin.vocab)["rephraser"]
    model, _ = train_rephraser(
        train, pinyin, pinyin.vocab, config, hyper,
        on_epoch=lambda e, loss: print(f"epoch {e + 1:>3}  loss {loss:.4f}", flush=True))
    model.store.save(cfg.ckpt(REPHRASER_CKPT))
    print(f"saved rephraser to {cfg.ckpt(REPHRASER_CKPT)}")


def write_predictions(path, outputs):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for i, s in enumerate(outputs):
            f.write(f"{i}\t{s}\n")


def read_predictions(path, n_records):
    out = [None] * n_records
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            rid, sep, text = line.partition("\t")
            if not sep or not rid.isdigit() or int(rid) >= n_records:
                raise ConfigError(f"{path} line {line_no}: expected '<record-id>\\t<sentence>' "
                                  f"with id < {n_records}")
            out[int(rid)] = text
    missing = [i for i, s in enumerate(out) if s is None]
    if missing:
        raise ConfigError(f"{path}: no prediction for {len(missing)} record(s), first id {missing[0]}")
    return out


def cmd_correct(cfg, args):
    records = _records(args.inp)
    model = _pipeline(cfg, _lexicon(cfg))
    outputs = model.correct_batch([r.nbest for r in records], args.ablation)
    write_predictions(args.out, outputs)
    print(f"wrote {len(outputs)} predictions to {args.out}")


def cmd_evaluate(cfg, args):
    records = _records(args.ref)
    systems, lengths, latency = {}, {}, {}
    if args.pred:
        systems["predictions"] = read_predictions(_require(Path(args.pred), "predictions", "correct"),
                                                  len(records))
    if args.ablation or args.latency:
        model = _pipeline(cfg, _lexicon(cfg))
        nbests = [r.nbest for r in records]
        for name in args.ablation or []:
            ablation = None if name == "full" else name
            lens = model.lengths(nbests, ablation)
            if ablation != "w/o-len":
                lengths.setdefault("length predictor", lens)
            systems["PERL" if ablation is None else f"PERL {name}"] = model.correct_batch(
                nbests, ablation, lengths=lens)
        if args.latency:
            latency["PERL"] = measure_latency(model.correct, nbests[:args.latency])
    report = evaluate(records, systems, lengths)
    report.latency = latency
    print(report.format_table())
    if args.report:
        report.write_jsonl(args.report)
        print(f"wrote report to {args.report}")


def cmd_show_config(cfg, args):
    sys.stdout.write(dump_config(cfg))


# -- entry point ---------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="perl-nbest", description="Pinyin-enhanced rephrasing of ASR N-best lists.")
    p.add_argument("--config", help="config file with a [perl] section")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a synthetic N-best corpus")
    g.add_argument("--out", required=True)
    g.add_argument("--sentences", type=int, required=True)
    g.add_argument("--start", type=int, default=0, help="index of the first source sentence")
    g.add_argument("--noise", choices=sorted(NOISE_PRESETS))
    g.add_argument("--source", help="sentence file (default: bundled sentences)")
    g.set_defaults(fn=cmd_gen_data)

    sub.add_parser("pretrain-pinyin", help="pretrain and freeze the pinyin encoder").set_defaults(
        fn=cmd_pretrain_pinyin)
    sub.add_parser("train-length", help="train the length predictor").set_defaults(fn=cmd_train_length)
    sub.add_parser("train-rephraser", help="train the rephraser and fusion gates").set_defaults(
        fn=cmd_train_rephraser)

    c = sub.add_parser("correct", help="correct every record of a corpus")
    c.add_argument("--in", dest="inp", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--ablation", choices=ABLATIONS)
    c.set_defaults(fn=cmd_correct)

    e = sub.add_parser("evaluate", help="score predictions and/or ablations against a corpus")
    e.add_argument("--ref", required=True)
    e.add_argument("--pred")
    e.add_argument("--ablation", action="append", choices=("full",) + ABLATIONS,
                   help="run the trained model, optionally ablated (repeatable; 'full' = no ablation)")
    e.add_argument("--latency", type=int, default=0, metavar="N",
                   help="time single-input correction over the first N records")
    e.add_argument("--report", help="also write the report as JSON lines")
    e.set_defaults(fn=cmd_evaluate)

    sub.add_parser("show-config", help="print the effective configuration").set_defaults(
        fn=cmd_show_config)
    return p


def _overrides(pairs):
    out = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value
    return out


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = load_config(args.config, _overrides(args.set))
        args.fn(cfg, args)
        return EXIT_OK
    except (UsageError, ConfigError, LexiconParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MissingPrerequisite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except Exception as exc:  # noqa: BLE001 - every other failure maps to one exit code
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

