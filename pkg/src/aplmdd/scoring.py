"""Edit-distance scoring and hierarchical mispronunciation detection metrics.

Detection outcomes are tallied per canonical phone. Both the annotated
(perceived) and the recognised sequence are aligned against the canonical
sequence; a canonical phone with no counterpart is represented by
``DELETED`` and compares equal only to another deletion.
"""
from __future__ import annotations

import json
from fractions import Fraction
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

OPS = ("match", "sub", "del", "ins")
DELETED = None
UNDEFINED = "undefined"


@dataclass(frozen=True)
class EditCounts:
    S: int = 0
    D: int = 0
    I: int = 0
    N: int = 0

    def __add__(self, other: "EditCounts") -> "EditCounts":
        return EditCounts(self.S + other.S, self.D + other.D, self.I + other.I, self.N + other.N)

    @property
    def errors(self) -> int:
        return self.S + self.D + self.I


@dataclass(frozen=True)
class MddCounts:
    TA: int = 0
    FR: int = 0
    FA: int = 0
    TR: int = 0
    CD: int = 0
    DE: int = 0
    insertions_perceived: int = 0
    insertions_recognized: int = 0

    def __add__(self, other: "MddCounts") -> "MddCounts":
        return MddCounts(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    @property
    def insertions_excluded(self) -> int:
        return self.insertions_perceived + self.insertions_recognized


def align(ref: Sequence, hyp: Sequence):
    """Unit-cost Levenshtein alignment.

    Returns ``(ops, counts)`` where ``ops`` is a list of
    ``(op, ref_index, hyp_index)``; the missing side is ``None``. The
    backtrace prefers match, then substitution, deletion, insertion.
    """
    n, m = len(ref), len(hyp)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i][j] = min(d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]),
                          d[i - 1][j] + 1,
                          d[i][j - 1] + 1)
    ops = []
    i, j = n, m
    while i or j:
        if i and j and ref[i - 1] == hyp[j - 1] and d[i][j] == d[i - 1][j - 1]:
            ops.append(("match", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i and j and d[i][j] == d[i - 1][j - 1] + 1:
            ops.append(("sub", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i and d[i][j] == d[i - 1][j] + 1:
            ops.append(("del", i - 1, None))
            i -= 1
        else:
            ops.append(("ins", None, j - 1))
            j -= 1
    ops.reverse()
    counts = EditCounts(S=sum(o[0] == "sub" for o in ops), D=sum(o[0] == "del" for o in ops),
                        I=sum(o[0] == "ins" for o in ops), N=n)
    return ops, counts


def _ratio(num, den):
    return Fraction(num, den) if den else UNDEFINED


def correctness(c: EditCounts) -> float:
    if c.N == 0:
        raise ValueError("correctness undefined for an empty reference")
    return (c.N - c.S - c.D) / c.N


def accuracy(c: EditCounts) -> float:
    """Phone accuracy; negative when insertions outnumber correct phones."""
    if c.N == 0:
        raise ValueError("accuracy undefined for an empty reference")
    return (c.N - c.S - c.D - c.I) / c.N


def project(canonical: Sequence, other: Sequence):
    """Map each canonical position to its aligned label in ``other``.

    Returns ``(labels, n_inserted)``; deleted positions get ``DELETED``.
    """
    ops, counts = align(canonical, other)
    out = [DELETED] * len(canonical)
    for op, i, j in ops:
        if op in ("match", "sub"):
            out[i] = other[j]
    return out, counts.I


def hierarchical_eval(canonical: Sequence, perceived: Sequence, recognized: Sequence) -> MddCounts:
    p, p_ins = project(canonical, perceived)
    r, r_ins = project(canonical, recognized)
    ta = fr = fa = tr = cd = de = 0
    for c, pn, rn in zip(canonical, p, r):
        said_ok = pn == c
        heard_ok = rn == c
        if said_ok and heard_ok:
            ta += 1
        elif said_ok:
            fr += 1
        elif heard_ok:
            fa += 1
        else:
            tr += 1
            if rn == pn:
                cd += 1
            else:
                de += 1
    return MddCounts(ta, fr, fa, tr, cd, de, p_ins, r_ins)


def mdd_metrics(m: MddCounts, exact: bool = False) -> dict:
    """Detection and diagnosis rates; zero denominators give ``UNDEFINED``.

    Ratios are formed as exact fractions so identities such as
    ``recall == 1 - far`` hold without rounding; ``exact=True`` returns the
    ``Fraction`` values instead of floats.
    """
    precision = _ratio(m.TR, m.TR + m.FR)
    recall = _ratio(m.TR, m.TR + m.FA)
    if UNDEFINED in (precision, recall) or precision + recall == 0:
        f = UNDEFINED
    else:
        f = 2 * precision * recall / (precision + recall)
    out = {
        "frr": _ratio(m.FR, m.TA + m.FR),
        "far": _ratio(m.FA, m.FA + m.TR),
        "detection_accuracy": _ratio(m.TR + m.TA, m.TR + m.TA + m.FR + m.FA),
        "precision": precision,
        "recall": recall,
        "f_measure": f,
        "der": _ratio(m.DE, m.DE + m.CD),
    }
    if not exact:
        out = {k: v if v == UNDEFINED else float(v) for k, v in out.items()}
    return out


def edit_summary(c: EditCounts) -> dict:
    return {"S": c.S, "D": c.D, "I": c.I, "N": c.N,
            "correctness": correctness(c) if c.N else UNDEFINED,
            "accuracy": accuracy(c) if c.N else UNDEFINED}


def _mdd_summary(m: MddCounts) -> dict:
    out = {k: getattr(m, k) for k in ("TA", "FR", "FA", "TR", "CD", "DE")}
    out.update(mdd_metrics(m))
    return out


def corpus_report(items: Iterable) -> dict:
    """Micro-averaged report over ``(id, canonical, perceived, recognized)``.

    Phone recognition is scored against the perceived (annotated) sequence.
    """
    per_utt = []
    edit_total = EditCounts()
    mdd_total = MddCounts()
    for utt_id, canonical, perceived, recognized in items:
        _, ec = align(list(perceived), list(recognized))
        mc = hierarchical_eval(list(canonical), list(perceived), list(recognized))
        edit_total += ec
        mdd_total += mc
        per_utt.append({"id": utt_id, "edit": edit_summary(ec), "mdd": _mdd_summary(mc),
                        "insertions_excluded": mc.insertions_excluded})
    if not per_utt:
        raise ValueError("corpus_report needs at least one utterance")
    return {
        "per_utterance": per_utt,
        "aggregate": {"edit": edit_summary(edit_total), "mdd": _mdd_summary(mdd_total),
                      "insertions_excluded": mdd_total.insertions_excluded},
    }


TABLE_COLUMNS = ("variant", "correctness", "accuracy", "FRR", "FAR", "detection_accuracy",
                 "precision", "recall", "f_measure", "DER")


def table_row(name: str, report: dict) -> dict:
    agg = report["aggregate"]
    e, m = agg["edit"], agg["mdd"]
    return {"variant": name, "correctness": e["correctness"], "accuracy": e["accuracy"],
            "FRR": m["frr"], "FAR": m["far"], "detection_accuracy": m["detection_accuracy"],
            "precision": m["precision"], "recall": m["recall"], "f_measure": m["f_measure"],
            "DER": m["der"]}


def format_table(rows: Sequence[dict]) -> str:
    def cell(v):
        if isinstance(v, float):
            return f"{100 * v:.2f}"
        return str(v)

    grid = [list(TABLE_COLUMNS)] + [[cell(r[c]) for c in TABLE_COLUMNS] for r in rows]
    widths = [max(len(row[k]) for row in grid) for k in range(len(TABLE_COLUMNS))]
    lines = ["  ".join(v.rjust(w) if k else v.ljust(w) for k, (v, w) in enumerate(zip(row, widths)))
             for row in grid]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False)
