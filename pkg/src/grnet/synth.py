"""Ground-truth model and dataset generation for recovery benchmarks.

The generator draws a sparse random network, rolls its own dynamics out
into a time series, and hands back the paired gold edge set, so the full
inference pipeline can be validated against a known answer.
"""

from dataclasses import dataclass

import numpy as np

from .data import ExpressionDataset, GoldNetwork
from .errors import DataError
from .model import GrnModel, StepConfig, rollout
from .rng import substream_rng


@dataclass(frozen=True)
class SynthSpec:
    """Shape of a generated benchmark.

    density is the fraction of nonzero off-diagonal weights; magnitudes
    are drawn uniform in [0.5 * weight_range, weight_range] with random
    sign, bounded away from zero so every gold edge has detectable
    effect. initial_state is "random" or an explicit start vector.
    """

    n: int
    density: float
    weight_range: float = 2.0
    time_points: int = 101
    dt: float = 1.0
    seed: int = 0
    initial_state: object = "random"

    def __post_init__(self):
        if self.n < 2:
            raise DataError("need at least 2 genes")
        if not (0 < self.density <= 1):
            raise DataError(f"density must lie in (0, 1], got {self.density}")
        if self.weight_range <= 0:
            raise DataError("weight_range must be positive")
        if self.time_points < 2:
            raise DataError("need at least 2 time points")
        if self.dt <= 0:
            raise DataError("dt must be positive")


def gene_names(n):
    return [f"G{i + 1}" for i in range(n)]


def generate_model(spec):
    """Draw a sparse ground-truth model and its gold edge set.

    Exactly round(density * n * (n - 1)) off-diagonal entries are
    nonzero; the diagonal stays zero so the gold network has no
    self-loops. Deterministic per seed.
    """
    n = spec.n
    n_edges = int(round(spec.density * n * (n - 1)))
    if n_edges < 1:
        raise DataError(f"density {spec.density} rounds to an empty network "
                        f"for n = {n}")
    rng = substream_rng(spec.seed, "synth")
    off_diag = [(i, j) for i in range(n) for j in range(n) if i != j]
    picks = rng.choice(len(off_diag), size=n_edges, replace=False)
    magnitudes = rng.uniform(0.5 * spec.weight_range, spec.weight_range,
                             size=n_edges)
    signs = rng.choice((-1.0, 1.0), size=n_edges)
    weights = np.zeros((n, n))
    for k, pick in enumerate(picks):
        i, j = off_diag[int(pick)]
        weights[i, j] = signs[k] * magnitudes[k]
    bias = rng.uniform(-0.1, 0.1, size=n)
    model = GrnModel(weights, bias=bias)
    names = gene_names(n)
    edges = {(names[j], names[i]): (1 if weights[i, j] > 0 else -1)
             for i in range(n) for j in range(n) if weights[i, j] != 0.0}
    return model, GoldNetwork(names, edges)


def generate_dataset(model, spec):
    """Roll the model out into a uniformly sampled expression dataset.

    The trajectory starts from the seeded (or supplied) initial state and
    spans spec.time_points columns at spacing spec.dt. Values stay in
    [0, 1] by the dynamics, so the dataset is ready for training as-is.
    """
    n = model.n_genes
    if isinstance(spec.initial_state, str):
        if spec.initial_state != "random":
            raise DataError(f"unknown initial_state {spec.initial_state!r}")
        state0 = substream_rng(spec.seed, "synth-state").uniform(0.0, 1.0, size=n)
    else:
        state0 = np.asarray(spec.initial_state, dtype=float)
        if state0.shape != (n,):
            raise DataError(f"initial state must have shape ({n},)")
        if state0.min() < 0 or state0.max() > 1:
            raise DataError("initial state must lie in [0, 1]")
    traj = rollout(model, state0, spec.time_points - 1, StepConfig(spec.dt))
    times = spec.dt * np.arange(spec.time_points)
    return ExpressionDataset(gene_names(n), times, traj, normalized=True)
