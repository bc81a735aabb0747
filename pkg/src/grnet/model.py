"""Recurrent gene-network model and its discrete-time dynamics.

Each gene i carries regulatory weights w_i (one per gene), optional
external-input weights v_i, a bias beta_i, a time constant tau_i and a
decay rate lambda_i. One update step maps the expression state e by

    e_i'  =  (dt / tau_i) * f(w_i . e  +  v_i . u  +  beta_i)
             + (1 - lambda_i * dt / tau_i) * e_i

with f the logistic function. With the default tau = lambda = 1 and
dt <= tau this is a convex combination of a sigmoid value and the
previous state, so the unit box [0, 1]^n is preserved.
"""

import csv
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DataError


def sigmoid(z):
    """Logistic function 1 / (1 + exp(-z)), saturating smoothly."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


class Activation(NamedTuple):
    """Transfer function and its derivative, both taken at the net input."""
    fn: Callable
    deriv: Callable


LOGISTIC = Activation(sigmoid, lambda z: sigmoid(z) * (1.0 - sigmoid(z)))
# Identity transfer turns the one-step prediction into a linear-in-weights
# measurement; used to cross-check the Kalman path against textbook filters.
IDENTITY = Activation(lambda z: np.asarray(z, dtype=float),
                      lambda z: np.ones_like(np.asarray(z, dtype=float)))


def _lock(a):
    a = np.asarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GrnModel:
    """Immutable parameter set for an n-gene network.

    weights[i, j] is the regulatory effect of gene j on gene i (negative
    inhibition, positive activation). ext_weights[i, k] couples external
    variable k into gene i. tau and lam default to 1, which reduces the
    update to e' = f(net) at dt = 1.
    """

    weights: np.ndarray
    ext_weights: np.ndarray = None
    bias: np.ndarray = None
    tau: np.ndarray = None
    lam: np.ndarray = None

    def __post_init__(self):
        w = _lock(self.weights)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"weights must be square, got {w.shape}")
        n = w.shape[0]
        ext = self.ext_weights
        ext = _lock(ext) if ext is not None else _lock(np.zeros((n, 0)))
        if ext.shape[0] != n:
            raise ValueError("ext_weights rows must match gene count")
        def vec(x, default):
            if x is None:
                return _lock(np.full(n, default))
            x = _lock(x)
            if x.shape != (n,):
                raise ValueError(f"per-gene vector must have shape ({n},)")
            return x
        bias = vec(self.bias, 0.0)
        tau = vec(self.tau, 1.0)
        lam = vec(self.lam, 1.0)
        if not np.all(tau > 0):
            raise ValueError("time constants must be positive")
        if not np.all(lam >= 0):
            raise ValueError("decay rates must be non-negative")
        for name, arr in (("weights", w), ("ext_weights", ext), ("bias", bias),
                          ("tau", tau), ("lam", lam)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "ext_weights", ext)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "lam", lam)

    @property
    def n_genes(self):
        return self.weights.shape[0]

    @property
    def n_inputs(self):
        return self.ext_weights.shape[1]

    def replace(self, **kwargs):
        """New model with some parameter blocks swapped out."""
        fields = dict(weights=self.weights, ext_weights=self.ext_weights,
                      bias=self.bias, tau=self.tau, lam=self.lam)
        fields.update(kwargs)
        return GrnModel(**fields)


@dataclass(frozen=True)
class StepConfig:
    """Time increment for one update step, in dataset time units."""

    dt: float = 1.0

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")


def _check_dt(model, dt):
    if np.any(dt > model.tau):
        raise DataError(f"step size {np.max(dt):g} exceeds a gene time "
                        "constant; pass an explicit dt <= tau")


def net_input(model, state, inputs=None):
    """Weighted sum w_i . e + v_i . u + beta_i per gene; state may be a
    single vector (n,) or a batch of columns (n, B)."""
    state = np.asarray(state, dtype=float)
    n = model.n_genes
    if state.shape[0] != n:
        raise ValueError(f"state has {state.shape[0]} rows, model has {n} genes")
    net = model.weights @ state
    if model.n_inputs:
        if inputs is None:
            raise ValueError("model expects external inputs")
        inputs = np.asarray(inputs, dtype=float)
        if inputs.shape[0] != model.n_inputs:
            raise ValueError("external input dimension mismatch")
        net = net + model.ext_weights @ inputs
    elif inputs is not None and np.size(inputs):
        raise ValueError("model takes no external inputs")
    return net + (model.bias if state.ndim == 1 else model.bias[:, None])


def step(model, state, cfg, inputs=None, activation=LOGISTIC):
    """Advance the expression state by one increment of cfg.dt."""
    _check_dt(model, cfg.dt)
    state = np.asarray(state, dtype=float)
    net = net_input(model, state, inputs)
    a = cfg.dt / model.tau
    decay = 1.0 - model.lam * a
    if state.ndim == 2:
        a, decay = a[:, None], decay[:, None]
    return a * activation.fn(net) + decay * state


def rollout(model, state0, steps, cfg, inputs=None, activation=LOGISTIC):
    """Iterate step() from state0, returning an (n, steps + 1) trajectory.

    Column 0 is state0; column t is the state after t steps. ``inputs``,
    when the model has external variables, must provide at least
    ``steps`` columns (column t is applied at step t).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    state0 = np.asarray(state0, dtype=float)
    if model.n_inputs:
        if inputs is None or np.asarray(inputs).shape[1] < steps:
            raise ValueError(f"external series must cover {steps} steps")
        inputs = np.asarray(inputs, dtype=float)
    traj = np.empty((model.n_genes, steps + 1))
    traj[:, 0] = state0
    for t in range(steps):
        u = inputs[:, t] if model.n_inputs else None
        traj[:, t + 1] = step(model, traj[:, t], cfg, inputs=u,
                              activation=activation)
    return traj


def resolve_dts(dataset, cfg=None):
    """Per-interval time increments used when fitting a dataset.

    A config overrides everything; otherwise uniform spacing provides a
    common dt and non-uniform spacing yields per-interval values.
    """
    if cfg is not None:
        return np.full(dataset.n_points - 1, cfg.dt)
    return dataset.intervals()


def free_run(model, dataset, cfg=None, activation=LOGISTIC, return_nets=False):
    """Free-running trajectory seeded by the dataset's first column.

    Uses the dataset's own (possibly per-interval) time spacing unless a
    config overrides it; returns an (n, T) matrix aligned column-for-
    column with the observed values. With return_nets the pre-activation
    inputs of each step come back too (needed by the training backward
    pass).
    """
    dts = resolve_dts(dataset, cfg)
    _check_dt(model, dts.max())
    y = dataset.values
    n, T = y.shape
    states = np.empty((n, T))
    nets = np.empty((n, T - 1))
    states[:, 0] = y[:, 0]
    ext = dataset.external_inputs
    for t in range(T - 1):
        u = ext[:, t] if (ext is not None and model.n_inputs) else None
        nets[:, t] = net_input(model, states[:, t], u)
        a = dts[t] / model.tau
        states[:, t + 1] = (a * activation.fn(nets[:, t])
                            + (1.0 - model.lam * a) * states[:, t])
    if return_nets:
        return states, nets
    return states


def one_step_predictions(model, dataset, cfg=None, activation=LOGISTIC):
    """Teacher-forced predictions: column t predicts data column t + 1
    from observed column t. Returns an (n, T - 1) matrix aligned with
    target columns 1..T-1."""
    if not dataset.normalized:
        raise DataError("one-step prediction expects a normalized dataset")
    dts = resolve_dts(dataset, cfg)
    _check_dt(model, dts.max())
    prev = dataset.values[:, :-1]
    ext = dataset.external_inputs
    u = ext[:, :-1] if (ext is not None and model.n_inputs) else None
    net = net_input(model, prev, u)
    a = dts[None, :] / model.tau[:, None]
    return a * activation.fn(net) + (1.0 - model.lam[:, None] * a) * prev


# Model save/load: CSV blocks with a one-line header each. Blocks are
# "weights" (n x n), optional "external" (n x k) and "params" (beta, tau,
# lambda, reserved).

def _fmt(x):
    return str(float(x))


def save_weight_matrix(gene_names, matrix, path):
    """Write a bare n x n weight block (the mean-weights file format)."""
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["weights"] + list(gene_names))
        for name, row in zip(gene_names, matrix):
            writer.writerow([name] + [_fmt(v) for v in row])


def _read_blocks(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    blocks, current = {}, None
    for i, row in enumerate(rows, start=1):
        head = row[0].strip()
        if head in ("weights", "external", "params"):
            if head in blocks:
                raise DataError(f"repeated block {head!r}", row=i)
            current = head
            blocks[head] = {"header": [c.strip() for c in row[1:]], "rows": [],
                            "names": [], "line": i}
            continue
        if current is None:
            raise DataError("expected a block header", row=i, column=1)
        blk = blocks[current]
        if len(row) != len(blk["header"]) + 1:
            raise DataError(f"expected {len(blk['header']) + 1} cells", row=i)
        blk["names"].append(head)
        blk["rows"].append([_parse(c, i, j + 2) for j, c in enumerate(row[1:])])
    return blocks


def _parse(text, row, col):
    try:
        return float(text)
    except ValueError:
        raise DataError(f"non-numeric cell {text!r}", row=row, column=col) from None


def load_weight_matrix(path):
    """Read a weights block; returns (gene_names, n x n matrix)."""
    blocks = _read_blocks(path)
    if "weights" not in blocks:
        raise DataError(f"{path}: no weights block")
    blk = blocks["weights"]
    names = blk["names"]
    matrix = np.asarray(blk["rows"], dtype=float)
    if blk["header"] != names or matrix.shape != (len(names), len(names)):
        raise DataError(f"{path}: weights block is not square over its gene names",
                        row=blk["line"])
    return names, matrix


def save_model(model, gene_names, path):
    """Write the full parameter set as stacked CSV blocks."""
    if len(gene_names) != model.n_genes:
        raise ValueError("gene name count does not match the model")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["weights"] + list(gene_names))
        for name, row in zip(gene_names, model.weights):
            writer.writerow([name] + [_fmt(v) for v in row])
        if model.n_inputs:
            writer.writerow(["external"] + [f"u{k + 1}" for k in range(model.n_inputs)])
            for name, row in zip(gene_names, model.ext_weights):
                writer.writerow([name] + [_fmt(v) for v in row])
        writer.writerow(["params", "beta", "tau", "lambda", "reserved"])
        for i, name in enumerate(gene_names):
            writer.writerow([name, _fmt(model.bias[i]), _fmt(model.tau[i]),
                             _fmt(model.lam[i]), _fmt(0.0)])


def load_model(path):
    """Read stacked CSV blocks; returns (model, gene_names)."""
    blocks = _read_blocks(path)
    for required in ("weights", "params"):
        if required not in blocks:
            raise DataError(f"{path}: missing {required!r} block")
    names, weights = load_weight_matrix(path)
    pblk = blocks["params"]
    if pblk["names"] != names:
        raise DataError(f"{path}: params block gene names differ from weights block",
                        row=pblk["line"])
    params = np.asarray(pblk["rows"], dtype=float)
    if params.shape[1] != 4:
        raise DataError(f"{path}: params block needs 4 columns", row=pblk["line"])
    ext = None
    if "external" in blocks:
        eblk = blocks["external"]
        if eblk["names"] != names:
            raise DataError(f"{path}: external block gene names differ",
                            row=eblk["line"])
        ext = np.asarray(eblk["rows"], dtype=float)
    model = GrnModel(weights, ext_weights=ext, bias=params[:, 0],
                     tau=params[:, 1], lam=params[:, 2])
    return model, names
