"""Discretization, scoring and export of inferred networks.

A trained weight matrix is reduced to a signed adjacency in {-1, 0, +1}
by interquartile thresholds, then scored against a gold-standard edge
set over the full universe of n^2 ordered gene pairs (self-loops
included). Metrics follow the usual confusion-matrix definitions:

    sensitivity = TP / (TP + FN)      specificity = TN / (TN + FP)
    precision   = TP / (TP + FP)      recall      = sensitivity
    F-score     = 2 P R / (P + R)

A 0/0 ratio is reported as the distinct undefined marker (None in
memory, "NA" in files), never silently as 0 or 1.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .data import GoldNetwork
from .errors import DataError

UNDEFINED_TEXT = "NA"
METRIC_NAMES = ("sensitivity", "specificity", "precision", "recall", "f_score")


@dataclass(frozen=True)
class SignedAdjacency:
    """Discretized interaction matrix; entry (i, j) is the effect of
    gene j on gene i: -1 inhibition, +1 activation, 0 none."""

    gene_names: list
    matrix: np.ndarray

    def __post_init__(self):
        names = list(self.gene_names)
        m = np.asarray(self.matrix, dtype=int)
        if m.shape != (len(names), len(names)):
            raise DataError(f"adjacency shape {m.shape} does not match "
                            f"{len(names)} gene names")
        if not np.isin(m, (-1, 0, 1)).all():
            raise DataError("adjacency entries must be -1, 0 or +1")
        m.flags.writeable = False
        object.__setattr__(self, "gene_names", names)
        object.__setattr__(self, "matrix", m)

    @property
    def n_genes(self):
        return len(self.gene_names)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise DataError(f"negative confusion count {name}")


@dataclass(frozen=True)
class EvalReport:
    """Confusion counts and derived metrics (None where undefined)."""

    counts: ConfusionCounts
    sensitivity: float = None
    specificity: float = None
    precision: float = None
    recall: float = None
    f_score: float = None


def discretize_iqr(weights, gene_names):
    """Map weights to {-1, 0, +1} by the quartiles of all n^2 entries.

    Quartiles use the linear-interpolation rule (position q * (N - 1));
    entries strictly below Q1 become -1, strictly above Q3 become +1,
    everything else, ties at the thresholds included, becomes 0.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DataError(f"weight matrix must be square, got {w.shape}")
    if not np.all(np.isfinite(w)):
        raise DataError("weight matrix contains non-finite entries")
    q1, q3 = np.quantile(w.ravel(), [0.25, 0.75], method="linear")
    adj = np.zeros(w.shape, dtype=int)
    adj[w < q1] = -1
    adj[w > q3] = 1
    return SignedAdjacency(list(gene_names), adj)


def _ratio(num, den):
    return num / den if den > 0 else None


def report_from_counts(counts):
    """Derive the metric block from raw confusion counts."""
    sens = _ratio(counts.tp, counts.tp + counts.fn)
    spec = _ratio(counts.tn, counts.tn + counts.fp)
    prec = _ratio(counts.tp, counts.tp + counts.fp)
    if prec is None or sens is None or (prec + sens) == 0:
        f = None
    else:
        f = 2.0 * prec * sens / (prec + sens)
    return EvalReport(counts=counts, sensitivity=sens, specificity=spec,
                      precision=prec, recall=sens, f_score=f)


def score(pred, gold, mode="unsigned"):
    """Score a signed adjacency against a gold network.

    The edge universe is every ordered (regulator, target) pair including
    self-loops. Unsigned mode counts any nonzero prediction as an edge.
    Signed mode additionally requires the predicted sign to match the
    gold sign; a wrong-signed prediction on a gold edge counts as both a
    false positive and a false negative, and an unsigned gold edge ("?")
    accepts either sign.
    """
    if mode not in ("unsigned", "signed"):
        raise ValueError(f"unknown scoring mode {mode!r}")
    if set(pred.gene_names) != set(gold.gene_names):
        missing = set(pred.gene_names) ^ set(gold.gene_names)
        raise DataError(f"gene universes differ (offending: {sorted(missing)})")
    names = pred.gene_names
    tp = fp = fn = tn = 0
    for i, target in enumerate(names):
        for j, regulator in enumerate(names):
            value = int(pred.matrix[i, j])
            key = (regulator, target)
            if key in gold.edges:
                if value == 0:
                    fn += 1
                elif mode == "unsigned":
                    tp += 1
                else:
                    want = gold.edges[key]
                    if want is None or want == value:
                        tp += 1
                    else:
                        fp += 1
                        fn += 1
            else:
                if value == 0:
                    tn += 1
                else:
                    fp += 1
    return report_from_counts(ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn))


@dataclass(frozen=True)
class ReportDelta:
    """Per-metric signed differences b - a; None where either side is
    undefined."""

    sensitivity: float = None
    specificity: float = None
    precision: float = None
    recall: float = None
    f_score: float = None


def compare_reports(a, b):
    """Metric deltas between two reports (b minus a), undefined-aware."""
    deltas = {}
    for name in METRIC_NAMES:
        va, vb = getattr(a, name), getattr(b, name)
        deltas[name] = None if (va is None or vb is None) else vb - va
    return ReportDelta(**deltas)


def _fmt_metric(v):
    return UNDEFINED_TEXT if v is None else f"{v:.4f}"


def report_text(report):
    """Flat key-value rendering, 4-decimal metrics plus raw counts."""
    c = report.counts
    lines = [f"tp = {c.tp}", f"fp = {c.fp}", f"fn = {c.fn}", f"tn = {c.tn}"]
    lines += [f"{name} = {_fmt_metric(getattr(report, name))}"
              for name in METRIC_NAMES]
    return "\n".join(lines) + "\n"


def report_csv_header():
    return "tp,fp,fn,tn," + ",".join(METRIC_NAMES)


def report_csv_row(report):
    c = report.counts
    cells = [str(c.tp), str(c.fp), str(c.fn), str(c.tn)]
    cells += [_fmt_metric(getattr(report, name)) for name in METRIC_NAMES]
    return ",".join(cells)


def save_report(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report_text(report))


def save_report_csv(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report_csv_header() + "\n" + report_csv_row(report) + "\n")


def sif_lines(adj, unsigned=False):
    """SIF edge lines "regulator<TAB>relation<TAB>target", grouped by
    regulator. Relations are activates/inhibits, or regulates when sign
    is discarded."""
    lines = []
    names = adj.gene_names
    for j, regulator in enumerate(names):
        for i, target in enumerate(names):
            value = int(adj.matrix[i, j])
            if value == 0:
                continue
            relation = "regulates" if unsigned else (
                "activates" if value > 0 else "inhibits")
            lines.append(f"{regulator}\t{relation}\t{target}")
    return lines


def save_sif(adj, path, unsigned=False):
    with open(path, "w", encoding="utf-8") as fh:
        for line in sif_lines(adj, unsigned=unsigned):
            fh.write(line + "\n")


def save_adjacency_csv(adj, path):
    """Plain matrix form of the discretized network."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["adjacency"] + list(adj.gene_names))
        for name, row in zip(adj.gene_names, adj.matrix):
            writer.writerow([name] + [str(int(v)) for v in row])


def load_adjacency_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows or rows[0][0].strip() != "adjacency":
        raise DataError(f"{path}: expected an adjacency block", row=1, column=1)
    names = [c.strip() for c in rows[0][1:]]
    matrix = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(names) + 1 or row[0].strip() != names[i - 2]:
            raise DataError("adjacency rows must mirror the header genes", row=i)
        try:
            matrix.append([int(c) for c in row[1:]])
        except ValueError:
            raise DataError("non-integer adjacency entry", row=i) from None
    return SignedAdjacency(names, np.asarray(matrix, dtype=int))


def adjacency_to_gold(adj):
    """Interpret a signed adjacency as a gold edge set (nonzero entries)."""
    edges = {}
    names = adj.gene_names
    for i, target in enumerate(names):
        for j, regulator in enumerate(names):
            v = int(adj.matrix[i, j])
            if v:
                edges[(regulator, target)] = v
    return GoldNetwork(list(names), edges)
