"""Time-series expression datasets and gold-standard networks.

On-disk formats
---------------
Expression CSV: first header cell is the literal ``gene``, the remaining
header cells are time-point values as decimal numbers; each following row
is a gene name plus one expression value per time point. UTF-8, commas,
LF or CRLF. External-input series use the same layout with first cell
``input``.

Gold-network edge list: one edge per line, tab-separated
``regulator<TAB>target<TAB>sign`` with sign ``+1``, ``-1`` or ``?`` for
unsigned.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .rng import substream_rng


def _lock(a):
    a = np.asarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ExpressionDataset:
    """Named genes by ordered time points, plus optional external inputs.

    ``values[i, t]`` is the expression of gene i at ``time_points[t]``.
    ``external_inputs[k, t]``, when present, is the k-th external variable
    at the same time points. Instances are immutable; all operations
    return new datasets.
    """

    gene_names: list
    time_points: np.ndarray
    values: np.ndarray
    external_inputs: np.ndarray = None
    normalized: bool = False

    def __post_init__(self):
        names = list(self.gene_names)
        if not names or any(not n for n in names):
            raise DataError("gene names must be non-empty")
        if len(set(names)) != len(names):
            dupe = next(n for n in names if names.count(n) > 1)
            raise DataError(f"duplicate gene name {dupe!r}")
        tp = _lock(self.time_points)
        vals = _lock(self.values)
        if tp.ndim != 1 or tp.size < 2:
            raise DataError("need at least 2 time points")
        if not np.all(np.diff(tp) > 0):
            raise DataError("time points must be strictly increasing")
        if vals.shape != (len(names), tp.size):
            raise DataError(
                f"value matrix shape {vals.shape} does not match "
                f"{len(names)} genes x {tp.size} time points")
        if not np.all(np.isfinite(vals)):
            raise DataError("expression values must be finite")
        ext = self.external_inputs
        if ext is not None:
            ext = _lock(ext)
            if ext.ndim != 2 or ext.shape[1] != tp.size:
                raise DataError("external inputs must have one column per time point")
        if self.normalized and (vals.min() < 0.0 or vals.max() > 1.0):
            raise DataError("normalized dataset has values outside [0, 1]")
        object.__setattr__(self, "gene_names", names)
        object.__setattr__(self, "time_points", tp)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "external_inputs", ext)

    @property
    def n_genes(self):
        return len(self.gene_names)

    @property
    def n_points(self):
        return self.time_points.size

    @property
    def n_inputs(self):
        return 0 if self.external_inputs is None else self.external_inputs.shape[0]

    def intervals(self):
        """Per-interval time deltas, length ``n_points - 1``."""
        return np.diff(self.time_points)

    def uniform_spacing(self, rtol=1e-9):
        """The common interval if spacing is uniform, else None."""
        dts = self.intervals()
        if np.allclose(dts, dts[0], rtol=rtol, atol=0.0):
            return float(dts[0])
        return None


@dataclass(frozen=True)
class GoldNetwork:
    """Experimentally validated edge set used as scoring ground truth.

    ``edges`` maps (regulator, target) to a sign: +1 activation,
    -1 inhibition, None unsigned.
    """

    gene_names: list
    edges: dict = field(default_factory=dict)

    def __post_init__(self):
        names = list(self.gene_names)
        known = set(names)
        if len(known) != len(names):
            raise DataError("duplicate gene name in gold network universe")
        edges = dict(self.edges)
        for (reg, tgt), sign in edges.items():
            for endpoint in (reg, tgt):
                if endpoint not in known:
                    raise DataError(f"gold edge references unknown gene {endpoint!r}")
            if sign not in (-1, 1, None):
                raise DataError(f"gold edge ({reg}, {tgt}) has invalid sign {sign!r}")
        object.__setattr__(self, "gene_names", names)
        object.__setattr__(self, "edges", edges)

    @property
    def n_edges(self):
        return len(self.edges)


def _parse_cell(text, row, col):
    try:
        return float(text)
    except ValueError:
        raise DataError(f"non-numeric cell {text!r}", row=row, column=col) from None


def _read_matrix_csv(path, leading_cell):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = rows[0]
    if not header or header[0].strip() != leading_cell:
        raise DataError(f"first header cell must be {leading_cell!r}", row=1, column=1)
    if len(header) < 3:
        raise DataError("need at least 2 time-point columns", row=1)
    time_points = [_parse_cell(c, 1, j + 2) for j, c in enumerate(header[1:])]
    names, values = [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(
                f"expected {len(header)} cells, found {len(row)}", row=i)
        name = row[0].strip()
        if not name:
            raise DataError("empty row label", row=i, column=1)
        if name in names:
            raise DataError(f"duplicate gene name {name!r}", row=i, column=1)
        names.append(name)
        values.append([_parse_cell(c, i, j + 2) for j, c in enumerate(row[1:])])
    if not names:
        raise DataError("no data rows", row=2)
    tp = np.asarray(time_points, dtype=float)
    if not np.all(np.diff(tp) > 0):
        bad = int(np.flatnonzero(np.diff(tp) <= 0)[0])
        raise DataError("time points must be strictly increasing",
                        row=1, column=bad + 3)
    return names, tp, np.asarray(values, dtype=float)


def load_dataset(path, inputs_path=None, assume_normalized=False):
    """Parse an expression CSV (and optional external-input CSV).

    Values are taken exactly as parsed and the dataset is marked
    unnormalized unless ``assume_normalized`` asserts the file is already
    in [0, 1] (rejected if it is not).
    """
    names, tp, values = _read_matrix_csv(path, "gene")
    ext = None
    if inputs_path is not None:
        _, tpu, ext = _read_matrix_csv(inputs_path, "input")
        if tpu.size != tp.size or not np.allclose(tpu, tp):
            raise DataError("external-input time points differ from the expression file")
    if assume_normalized and (values.min() < 0.0 or values.max() > 1.0):
        raise DataError(f"{path}: values outside [0, 1] cannot be taken as normalized")
    return ExpressionDataset(names, tp, values, external_inputs=ext,
                             normalized=assume_normalized)


def _fmt(x):
    # str() round-trips float64 exactly, keeping save/load bit-stable.
    return str(float(x))


def save_dataset(dataset, path, inputs_path=None):
    """Write the expression CSV (and, if present, the external-input CSV)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["gene"] + [_fmt(t) for t in dataset.time_points])
        for name, row in zip(dataset.gene_names, dataset.values):
            writer.writerow([name] + [_fmt(v) for v in row])
    if dataset.external_inputs is not None and inputs_path is not None:
        with open(inputs_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["input"] + [_fmt(t) for t in dataset.time_points])
            for k, row in enumerate(dataset.external_inputs):
                writer.writerow([f"u{k + 1}"] + [_fmt(v) for v in row])


def normalize(dataset):
    """Min-max scale each gene's series to [0, 1].

    Constant genes map to 0.5 uniformly (midpoint keeps the value a
    usable sigmoid target). Idempotent: scaling an already scaled series
    reproduces it exactly because its extremes sit at 0 and 1.
    """
    vals = dataset.values
    lo = vals.min(axis=1, keepdims=True)
    hi = vals.max(axis=1, keepdims=True)
    span = hi - lo
    flat = (span == 0.0).ravel()
    safe = np.where(span == 0.0, 1.0, span)
    out = (vals - lo) / safe
    out[flat, :] = 0.5
    return ExpressionDataset(dataset.gene_names, dataset.time_points, out,
                             external_inputs=dataset.external_inputs,
                             normalized=True)


def add_gaussian_noise(dataset, level, seed):
    """Perturb each value with zero-mean Gaussian noise, clamped to [0, 1].

    The per-gene standard deviation is ``level`` times that gene's
    dynamic range (max - min of the clean series). Deterministic for a
    fixed seed; level 0 returns the dataset unchanged.
    """
    if not dataset.normalized:
        raise DataError("noise injection expects a normalized dataset")
    if level < 0:
        raise DataError(f"noise level must be non-negative, got {level}")
    if level == 0:
        return dataset
    vals = dataset.values
    span = vals.max(axis=1, keepdims=True) - vals.min(axis=1, keepdims=True)
    rng = substream_rng(seed, "noise")
    noisy = vals + rng.standard_normal(vals.shape) * (level * span)
    np.clip(noisy, 0.0, 1.0, out=noisy)
    return ExpressionDataset(dataset.gene_names, dataset.time_points, noisy,
                             external_inputs=dataset.external_inputs,
                             normalized=True)


_SIGN_TOKENS = {"+1": 1, "-1": -1, "?": None}


def load_gold_network(path, gene_names):
    """Parse a tab-separated edge list against a known gene universe."""
    known = set(gene_names)
    edges = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError("expected regulator<TAB>target<TAB>sign", row=i)
        reg, tgt, sign_text = (p.strip() for p in parts)
        for col, endpoint in ((1, reg), (2, tgt)):
            if endpoint not in known:
                raise DataError(f"unknown gene {endpoint!r}", row=i, column=col)
        if sign_text not in _SIGN_TOKENS:
            raise DataError(f"invalid sign {sign_text!r} (use +1, -1 or ?)",
                            row=i, column=3)
        if (reg, tgt) in edges:
            raise DataError(f"duplicate edge ({reg}, {tgt})", row=i)
        edges[(reg, tgt)] = _SIGN_TOKENS[sign_text]
    return GoldNetwork(list(gene_names), edges)


def save_gold_network(gold, path):
    """Write the tab-separated edge list, sorted by (regulator, target)."""
    rendering = {1: "+1", -1: "-1", None: "?"}
    with open(path, "w", encoding="utf-8") as fh:
        for (reg, tgt) in sorted(gold.edges):
            fh.write(f"{reg}\t{tgt}\t{rendering[gold.edges[(reg, tgt)]]}\n")
