"""Error-rate metrics, N-best oracles and report formatting.

All alignments map a hypothesis onto its reference with unit costs. Ties in
the back-trace prefer match > substitute > delete > insert, so every metric
here is deterministic.
"""
from __future__ import annotations

import json
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np


class EditOp(NamedTuple):
    op: str              # "match" | "sub" | "del" | "ins"
    hyp_index: int | None
    ref_index: int | None
    char: str | None     # reference character written by match/sub/ins


@dataclass
class Alignment:
    ops: list

    @property
    def distance(self):
        return sum(op.op != "match" for op in self.ops)

    def apply(self, hyp: Sequence[str]) -> str:
        """Rewrite ``hyp`` into the reference."""
        out = []
        for op in self.ops:
            if op.op == "del":
                continue
            if op.op == "match" and hyp[op.hyp_index] != op.char:
                raise ValueError("alignment does not fit this hypothesis")
            out.append(op.char)
        return "".join(out)

    def ref_to_hyp(self, ref_len: int):
        """For each reference position, the aligned (op, hyp char index) or
        ``None`` when the hypothesis has nothing there."""
        table = [None] * ref_len
        for op in self.ops:
            if op.op in ("match", "sub"):
                table[op.ref_index] = (op.op, op.hyp_index)
        return table


def _dp_table(a, b):
    m, n = len(a), len(b)
    D = [list(range(n + 1))]
    for i in range(1, m + 1):
        ai, prev = a[i - 1], D[i - 1]
        row = [i]
        for j in range(1, n + 1):
            row.append(min(prev[j - 1] + (ai != b[j - 1]), prev[j] + 1, row[j - 1] + 1))
        D.append(row)
    return D


def edit_distance(hyp: Sequence[str], ref: Sequence[str]):
    """Unit-cost Levenshtein distance and the alignment turning ``hyp`` into ``ref``."""
    D = _dp_table(hyp, ref)
    i, j = len(hyp), len(ref)
    ops = []
    while i > 0 or j > 0:
        d = D[i][j]
        if i > 0 and j > 0 and hyp[i - 1] == ref[j - 1] and D[i - 1][j - 1] == d:
            ops.append(EditOp("match", i - 1, j - 1, ref[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and D[i - 1][j - 1] + 1 == d:
            ops.append(EditOp("sub", i - 1, j - 1, ref[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and D[i - 1][j] + 1 == d:
            ops.append(EditOp("del", i - 1, None, None))
            i -= 1
        else:
            ops.append(EditOp("ins", None, j - 1, ref[j - 1]))
            j -= 1
    ops.reverse()
    return D[len(hyp)][len(ref)], Alignment(ops)


def levenshtein(a: Sequence[str], b: Sequence[str]) -> int:
    """Distance only; same table as ``edit_distance``."""
    return _dp_table(a, b)[-1][-1]


def cer(hyp: Sequence[str], ref: Sequence[str]) -> float:
    if len(ref) == 0:
        raise ValueError("CER undefined for an empty reference")
    return levenshtein(hyp, ref) / len(ref)


def cerr(cer_sys: float, cer_base: float) -> float:
    """Relative CER reduction in percent; positive means the system improved."""
    if cer_base <= 0:
        raise ValueError("baseline CER must be positive")
    return 100.0 * (cer_base - cer_sys) / cer_base


def corpus_cer(hyps: Sequence[str], refs: Sequence[str]) -> float:
    """Pooled CER: total edits over total reference characters."""
    if len(hyps) != len(refs):
        raise ValueError("hypothesis and reference counts differ")
    edits = sum(levenshtein(h, r) for h, r in zip(hyps, refs))
    return edits / sum(len(r) for r in refs)


def mean_sentence_cer(hyps, refs) -> float:
    return float(np.mean([cer(h, r) for h, r in zip(hyps, refs)]))


def oracle_nb(nbest: Sequence[str], ref: str):
    """Best single hypothesis given the reference; ties go to the higher rank."""
    best, best_cer = None, None
    for hyp in nbest:
        c = cer(hyp, ref)
        if best_cer is None or c < best_cer:
            best, best_cer = hyp, c
    return best, best_cer


def oracle_cp(nbest: Sequence[str], ref: str):
    """Best per-position character combination given the reference.

    Each hypothesis is aligned to ``ref``. A reference position takes the
    reference character when any hypothesis matches it there; otherwise
    the 1-best's aligned character, or nothing if the 1-best has none.
    """
    maps = [edit_distance(h, ref)[1].ref_to_hyp(len(ref)) for h in nbest]
    out = []
    for j in range(len(ref)):
        if any(m[j] is not None and m[j][0] == "match" for m in maps):
            out.append(ref[j])
        elif maps[0][j] is not None:
            out.append(nbest[0][maps[0][j][1]])
    combined = "".join(out)
    return combined, cer(combined, ref)


def wcc_counts(records, n: int, aligned=True):
    """(covered, total) over 1-best substitution errors in ``records``
    (objects with ``gold`` and ``nbest``)."""
    covered = total = 0
    for rec in records:
        ref, nbest = rec.gold, rec.nbest
        _, ali = edit_distance(nbest[0], ref)
        errors = [op.ref_index for op in ali.ops if op.op == "sub"]
        if not errors:
            continue
        others = nbest[1:n]
        if aligned:
            maps = [edit_distance(h, ref)[1].ref_to_hyp(len(ref)) for h in others]
        for j in errors:
            total += 1
            if aligned:
                hit = any(m[j] is not None and m[j][0] == "match" for m in maps)
            else:
                hit = any(ref[j] in h for h in others)
            covered += hit
    return covered, total


def wcc(records, n: int, aligned=True):
    """Wrong Character Coverage for the top-``n`` hypotheses.

    Returns ``None`` when the 1-best has no substitution errors at all.
    """
    covered, total = wcc_counts(records, n, aligned)
    return None if total == 0 else covered / total


def count_length_equal(outputs: Sequence, refs: Sequence) -> int:
    """Number of outputs whose length equals the reference length. Outputs
    may be strings or integer lengths."""
    return sum((o if isinstance(o, (int, np.integer)) else len(o)) == len(r)
               for o, r in zip(outputs, refs))


@dataclass
class LatencyReport:
    mean_ms: float
    median_ms: float
    p95_ms: float
    count: int

    def format(self, name="PERL"):
        return (f"{name}: {self.mean_ms:.2f} ms per input "
                f"(median {self.median_ms:.2f} ms, p95 {self.p95_ms:.2f} ms, n={self.count})")


def measure_latency(fn: Callable, inputs: Sequence, warmup: int = 3) -> LatencyReport:
    """Wall-clock time of single-input calls after ``warmup`` untimed calls."""
    if not inputs:
        raise ValueError("no inputs to time")
    for x in list(inputs)[:warmup]:
        fn(x)
    times = []
    for x in inputs:
        t0 = time.perf_counter()
        fn(x)
        times.append((time.perf_counter() - t0) * 1e3)
    return LatencyReport(float(np.mean(times)), float(statistics.median(times)),
                         float(np.percentile(times, 95)), len(times))


@dataclass
class EvalReport:
    n_records: int
    baseline_cer: float
    systems: dict = field(default_factory=dict)
    oracles: dict = field(default_factory=dict)
    sentence_cer: dict = field(default_factory=dict)
    wcc: dict = field(default_factory=dict)
    wcc_anywhere: dict = field(default_factory=dict)
    equal: dict = field(default_factory=dict)
    latency: dict = field(default_factory=dict)

    def cerr(self, name):
        cer_sys = self.systems.get(name, self.oracles.get(name))
        return cerr(cer_sys, self.baseline_cer)

    def format_table(self) -> str:
        lines = [f"{'Method':<14}{'CER%':>8}  {'CERR%':>8}", "-" * 32,
                 f"{'Baseline':<14}{100 * self.baseline_cer:>8.2f}"]
        for name, value in list(self.oracles.items()) + list(self.systems.items()):
            lines.append(f"{name:<14}{100 * value:>8.2f}  {-self.cerr(name):>+8.2f}")
        if self.equal:
            lines.append("")
            lines.append("#Equal (length matches reference)")
            lines.extend(f"  {k:<16}{v:>6} / {self.n_records}" for k, v in self.equal.items())
        if self.wcc:
            lines.append("")
            lines.append("WCC by n: " + ", ".join(
                f"n={n}: {'n/a' if v is None else f'{100 * v:.2f}%'}" for n, v in self.wcc.items()))
        if self.latency:
            lines.append("")
            lines.extend(rep.format(name) for name, rep in self.latency.items())
        return "\n".join(lines)

    def to_records(self) -> list:
        rows = [{"kind": "baseline", "name": "1-best", "cer": self.baseline_cer}]
        for kind, table in (("oracle", self.oracles), ("system", self.systems)):
            for name, value in table.items():
                rows.append({"kind": kind, "name": name, "cer": value, "cerr": self.cerr(name),
                             "sentence_cer": self.sentence_cer.get(name)})
        rows += [{"kind": "wcc", "n": n, "value": v, "anywhere": self.wcc_anywhere.get(n)}
                 for n, v in self.wcc.items()]
        rows += [{"kind": "equal", "name": k, "count": v} for k, v in self.equal.items()]
        rows += [{"kind": "latency", "name": k, **asdict(v)} for k, v in self.latency.items()]
        return rows

    def write_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for row in self.to_records():
                f.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def evaluate(records, systems=None, length_outputs=None, max_wcc_n=6) -> EvalReport:
    """Aggregate metrics for ``records`` (with ``gold``/``nbest``).

    ``systems`` maps a name to one output string per record;
    ``length_outputs`` maps a name to predicted lengths for #Equal.
    """
    refs = [r.gold for r in records]
    one_best = [r.nbest[0] for r in records]
    report = EvalReport(len(records), corpus_cer(one_best, refs))
    nb = [oracle_nb(r.nbest, r.gold)[0] for r in records]
    cp = [oracle_cp(r.nbest, r.gold)[0] for r in records]
    report.oracles = {"o_cp": corpus_cer(cp, refs), "o_nb": corpus_cer(nb, refs)}
    report.sentence_cer = {"o_cp": mean_sentence_cer(cp, refs), "o_nb": mean_sentence_cer(nb, refs)}
    report.equal["1-best"] = count_length_equal(one_best, refs)
    for name, lens in (length_outputs or {}).items():
        report.equal[name] = count_length_equal(list(lens), refs)
    for name, outs in (systems or {}).items():
        outs = list(outs)
        report.systems[name] = corpus_cer(outs, refs)
        report.sentence_cer[name] = mean_sentence_cer(outs, refs)
        report.equal[name] = count_length_equal(outs, refs)
    for n in range(1, max_wcc_n + 1):
        report.wcc[n] = wcc(records, n)
        report.wcc_anywhere[n] = wcc(records, n, aligned=False)
    return report
