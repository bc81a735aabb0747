"""Model fitting: gradient descent through time and Kalman weight filtering.

Two optimizers share the model's forward machinery:

* ``bptt`` unrolls the free-running trajectory from the first observed
  column and descends the summed squared error against all later
  columns. The backward recursion carries, per gene, the direct error at
  each step plus the error backpropagated through later steps.

* ``gekf`` treats each gene's parameter block theta_i = [w_i, v_i,
  beta_i] as the state of its own extended Kalman filter. Every
  consecutive sample pair yields a scalar measurement per gene: the
  one-step prediction with row Jacobian C_i, innovation alpha_i, gain
  G_i = K_i C_i^T / (C_i K_i C_i^T + r), update theta_i += G_i alpha_i
  gamma and covariance K_i <- K_i - G_i C_i K_i + q I (symmetrized).
  Filtering the genes separately keeps the covariance cost at
  O(n (n + k + 1)^2) instead of squaring the whole network.

Training repeats from several seeded initializations and reports the
element-wise mean weight matrix across runs.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericsError
from .model import GrnModel, LOGISTIC, free_run, one_step_predictions, resolve_dts
from .rng import substream_rng, substream_seed

DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer selection and hyperparameters.

    eta is the gradient-descent learning rate; gamma scales the Kalman
    correction; p0, q, r are the filter's initial covariance, process
    noise and measurement noise. Defaults are chosen so the command line
    runs out of the box and every value can be overridden.
    """

    optimizer: str = "gekf"
    epochs: int = 1000
    eta: float = 0.05
    gamma: float = 1.0
    p0: float = 100.0
    q: float = 1e-4
    r: float = 1e-2
    runs: int = 10
    seed: int = 0
    init_scale: float = 0.1

    def __post_init__(self):
        if self.optimizer not in ("bptt", "gekf"):
            raise DataError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 0:
            raise DataError("epochs must be >= 0")
        if self.runs < 1:
            raise DataError("runs must be >= 1")
        for name, positive in (("eta", True), ("gamma", True), ("p0", True),
                               ("r", True), ("init_scale", True), ("q", False)):
            v = getattr(self, name)
            if positive and not v > 0:
                raise DataError(f"{name} must be positive, got {v}")
            if not positive and v < 0:
                raise DataError(f"{name} must be non-negative, got {v}")


@dataclass(frozen=True)
class Gradient:
    """Error gradient blocks matching the model's parameter layout."""

    dw: np.ndarray
    dv: np.ndarray
    dbias: np.ndarray


def _checked_free_run(model, dataset, step_cfg, activation):
    states, nets = free_run(model, dataset, step_cfg, activation,
                            return_nets=True)
    ok = np.isfinite(states).all(axis=0)
    if not ok.all():
        t = int(np.flatnonzero(~ok)[0])
        raise NumericsError(f"non-finite state at time index {t}")
    return states, nets


def free_run_sse(model, dataset, step_cfg=None, activation=LOGISTIC):
    """Summed squared error of the free-running trajectory (the quantity
    the bptt optimizer descends)."""
    states, _ = _checked_free_run(model, dataset, step_cfg, activation)
    diff = states[:, 1:] - dataset.values[:, 1:]
    return float(np.sum(diff * diff))


def one_step_sse(model, dataset, step_cfg=None, activation=LOGISTIC):
    """Summed squared error of teacher-forced one-step predictions (the
    quantity the gekf optimizer filters against)."""
    preds = one_step_predictions(model, dataset, step_cfg, activation=activation)
    diff = preds - dataset.values[:, 1:]
    return float(np.sum(diff * diff))


def bptt_gradient(model, dataset, step_cfg=None, activation=LOGISTIC):
    """Gradient of the free-running squared error over the trajectory.

    Backward pass, per time index from the last step down: the delta for
    gene j is f'(net_j) times its direct error plus the deltas of the
    following step folded back through the weights; each delta times the
    state that fed the step accumulates into the weight gradient.
    """
    if not dataset.normalized:
        raise DataError("training expects a normalized dataset")
    dts = resolve_dts(dataset, step_cfg)
    y = dataset.values
    n, T = y.shape
    ext = dataset.external_inputs
    states, nets = _checked_free_run(model, dataset, step_cfg, activation)
    dw = np.zeros_like(model.weights)
    dv = np.zeros_like(model.ext_weights)
    dbias = np.zeros(n)
    # g holds dE/dstate at the step being unwound.
    g = 2.0 * (states[:, T - 1] - y[:, T - 1])
    for t in range(T - 2, -1, -1):
        a = dts[t] / model.tau
        d = g * a * activation.deriv(nets[:, t])
        if not np.all(np.isfinite(d)):
            raise NumericsError(f"non-finite gradient at time index {t}")
        dw += np.outer(d, states[:, t])
        if model.n_inputs:
            dv += np.outer(d, ext[:, t])
        dbias += d
        g = model.weights.T @ d + (1.0 - model.lam * a) * g
        if t >= 1:
            g = g + 2.0 * (states[:, t] - y[:, t])
    return Gradient(dw=dw, dv=dv, dbias=dbias)


def bptt_update(model, grad, eta):
    """Descend: every parameter moves against its gradient by eta."""
    return model.replace(weights=model.weights - eta * grad.dw,
                         ext_weights=model.ext_weights - eta * grad.dv,
                         bias=model.bias - eta * grad.dbias)


def kalman_update(theta, cov, c, innovation, r, q, gamma=1.0):
    """Scalar-measurement Kalman correction of a parameter block.

    Accepts a single block (theta (W,), cov (W, W), c (W,), scalar
    innovation) or a stack of independent blocks with a leading axis.
    Returns the corrected (theta, cov); the covariance picks up q on its
    diagonal and is symmetrized exactly.
    """
    theta = np.asarray(theta, dtype=float)
    cov = np.asarray(cov, dtype=float)
    c = np.asarray(c, dtype=float)
    kc = np.einsum("...ij,...j->...i", cov, c)
    s = np.einsum("...i,...i->...", c, kc) + r
    gain = kc / s[..., None]
    new_theta = theta + gain * np.asarray(innovation * gamma)[..., None]
    new_cov = cov - np.einsum("...i,...j->...ij", gain, kc)
    new_cov = new_cov + q * np.eye(cov.shape[-1])
    new_cov = 0.5 * (new_cov + np.swapaxes(new_cov, -1, -2))
    return new_theta, new_cov


@dataclass(frozen=True)
class GekfState:
    """Per-gene error covariances plus the filter noise settings.

    cov is stacked (n, W, W) with W = n + k_ext + 1. Construction checks
    each block is symmetric (1e-10 relative) and positive definite.
    """

    cov: np.ndarray
    q: float
    r: float

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim != 3 or cov.shape[1] != cov.shape[2]:
            raise ValueError(f"cov must be stacked square blocks, got {cov.shape}")
        skew = np.abs(cov - np.swapaxes(cov, 1, 2)).max(axis=(1, 2))
        scale = np.abs(cov).max(axis=(1, 2))
        if np.any(skew > 1e-10 * np.maximum(scale, 1.0)):
            raise NumericsError("covariance block lost symmetry")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise NumericsError("covariance block lost positive definiteness") from None
        if self.r <= 0 or self.q < 0:
            raise ValueError("need r > 0 and q >= 0")
        cov.flags.writeable = False
        object.__setattr__(self, "cov", cov)

    @classmethod
    def diffuse(cls, n_genes, n_params, p0, q, r):
        cov = np.broadcast_to(p0 * np.eye(n_params),
                              (n_genes, n_params, n_params)).copy()
        return cls(cov=cov, q=q, r=r)


def _pack_theta(weights, ext_weights, bias):
    return np.concatenate([weights, ext_weights, bias[:, None]], axis=1)


def _unpack_theta(theta, n, k):
    return theta[:, :n], theta[:, n:n + k], theta[:, -1]


def _gekf_kernel(weights, ext_weights, bias, tau, lam, cov, prev, target, u,
                 dt, gamma, q, r, activation):
    """One filtered time step for all genes; returns new parameter arrays.

    prev/target are consecutive observed columns; the measurement row for
    gene i is the derivative of its one-step prediction with respect to
    theta_i, which shares the regressor [prev, u, 1] across genes.
    """
    n = weights.shape[0]
    k = ext_weights.shape[1]
    net = weights @ prev + bias
    if k:
        net = net + ext_weights @ u
    a = dt / tau
    yhat = a * activation.fn(net) + (1.0 - lam * a) * prev
    alpha = target - yhat
    x = np.concatenate([prev, u if k else np.empty(0), [1.0]])
    c = (a * activation.deriv(net))[:, None] * x[None, :]
    if not np.all(np.isfinite(c)):
        raise NumericsError("non-finite measurement Jacobian")
    theta = _pack_theta(weights, ext_weights, bias)
    theta, cov = kalman_update(theta, cov, c, alpha, r, q, gamma)
    w_new, v_new, b_new = _unpack_theta(theta, n, k)
    return w_new, v_new, b_new, cov


def gekf_step(model, state, target, prev, cfg, inputs=None, gamma=1.0,
              activation=LOGISTIC):
    """Apply one Kalman-filtered update across all genes.

    target and prev are consecutive observed state vectors; returns the
    corrected model and filter state. Zero innovation leaves the weights
    untouched while the covariance still contracts.
    """
    prev = np.asarray(prev, dtype=float)
    target = np.asarray(target, dtype=float)
    if prev.shape != (model.n_genes,) or target.shape != (model.n_genes,):
        raise ValueError("state vectors must match the gene count")
    if model.n_inputs:
        if inputs is None:
            raise ValueError("model expects external inputs")
        inputs = np.asarray(inputs, dtype=float)
    w, v, b, cov = _gekf_kernel(model.weights, model.ext_weights, model.bias,
                                model.tau, model.lam, state.cov, prev, target,
                                inputs, cfg.dt, gamma, state.q, state.r,
                                activation)
    new_model = model.replace(weights=w, ext_weights=v, bias=b)
    return new_model, GekfState(cov=cov, q=state.q, r=state.r)


@dataclass(frozen=True)
class TrainResult:
    """Outcome of multi-run training.

    per_run_weights holds one matrix per completed run; mean_weights is
    their element-wise mean. loss_history[r][e] is run r's objective
    after e epochs (entry 0 is the pre-training value): free-running SSE
    for bptt, one-step SSE for gekf. Diverged runs appear only in
    failures as (run index, message).
    """

    gene_names: list
    optimizer: str
    mean_weights: np.ndarray
    per_run_weights: list
    models: list
    loss_history: list
    run_seeds: list
    failures: list = field(default_factory=list)

    def mean_model(self):
        """Model assembled from the element-wise mean of run parameters."""
        w = np.mean([m.weights for m in self.models], axis=0)
        v = np.mean([m.ext_weights for m in self.models], axis=0)
        b = np.mean([m.bias for m in self.models], axis=0)
        first = self.models[0]
        return GrnModel(w, ext_weights=v, bias=b, tau=first.tau, lam=first.lam)


def _init_model(n, k, cfg, run_index):
    rng = substream_rng(cfg.seed, "init", run_index)
    w = rng.uniform(-cfg.init_scale, cfg.init_scale, size=(n, n))
    v = rng.uniform(-cfg.init_scale, cfg.init_scale, size=(n, k))
    b = rng.uniform(-cfg.init_scale, cfg.init_scale, size=n)
    return GrnModel(w, ext_weights=v, bias=b)


def _check_divergence(losses, epoch):
    if not np.isfinite(losses[-1]):
        raise NumericsError(f"non-finite loss at epoch {epoch}")
    if losses[0] > 0 and losses[-1] > DIVERGENCE_FACTOR * losses[0]:
        raise NumericsError(f"loss diverged at epoch {epoch} "
                            f"({losses[-1]:.3e} vs initial {losses[0]:.3e})")


def _train_bptt(model, dataset, cfg, step_cfg, activation):
    losses = [free_run_sse(model, dataset, step_cfg, activation)]
    for epoch in range(1, cfg.epochs + 1):
        try:
            grad = bptt_gradient(model, dataset, step_cfg, activation)
            model = bptt_update(model, grad, cfg.eta)
        except NumericsError as exc:
            raise NumericsError(f"epoch {epoch}: {exc}") from None
        except ValueError as exc:
            # model construction rejects non-finite parameters
            raise NumericsError(f"epoch {epoch}: {exc}") from None
        losses.append(free_run_sse(model, dataset, step_cfg, activation))
        _check_divergence(losses, epoch)
    return model, np.asarray(losses)


def _train_gekf(model, dataset, cfg, step_cfg, activation):
    n, k = model.n_genes, model.n_inputs
    dts = resolve_dts(dataset, step_cfg)
    w = model.weights.copy()
    v = model.ext_weights.copy()
    b = model.bias.copy()
    cov = np.broadcast_to(cfg.p0 * np.eye(n + k + 1),
                          (n, n + k + 1, n + k + 1)).copy()
    y = dataset.values
    ext = dataset.external_inputs
    losses = [one_step_sse(model, dataset, step_cfg, activation)]
    for epoch in range(1, cfg.epochs + 1):
        for t in range(y.shape[1] - 1):
            u = ext[:, t] if (ext is not None and k) else None
            try:
                w, v, b, cov = _gekf_kernel(w, v, b, model.tau, model.lam, cov,
                                            y[:, t], y[:, t + 1], u, dts[t],
                                            cfg.gamma, cfg.q, cfg.r, activation)
            except NumericsError as exc:
                raise NumericsError(f"epoch {epoch}: {exc}") from None
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise NumericsError(f"covariance lost positive definiteness "
                                f"at epoch {epoch}") from None
        try:
            model = model.replace(weights=w, ext_weights=v, bias=b)
        except ValueError as exc:
            raise NumericsError(f"epoch {epoch}: {exc}") from None
        losses.append(one_step_sse(model, dataset, step_cfg, activation))
        _check_divergence(losses, epoch)
    return model, np.asarray(losses)


def train(dataset, cfg, step_cfg=None, threads=1, activation=LOGISTIC):
    """Run the configured optimizer from ``cfg.runs`` seeded inits.

    Runs are independent (each draws its initialization from its own
    substream of cfg.seed) and may execute on any number of threads with
    bit-identical results. A diverging run is recorded under failures and
    the rest continue; if every run diverges a NumericsError is raised.
    """
    if not dataset.normalized:
        raise DataError("training expects a normalized dataset")
    n, k = dataset.n_genes, dataset.n_inputs
    # Fail fast on bad spacing before spawning runs (trained tau is 1).
    if np.any(resolve_dts(dataset, step_cfg) > 1.0):
        raise DataError("sample spacing exceeds the model time constant; "
                        "pass an explicit dt <= 1")

    def run_one(run_index):
        model0 = _init_model(n, k, cfg, run_index)
        if cfg.optimizer == "bptt":
            return _train_bptt(model0, dataset, cfg, step_cfg, activation)
        return _train_gekf(model0, dataset, cfg, step_cfg, activation)

    outcomes = [None] * cfg.runs
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(run_one, r): r for r in range(cfg.runs)}
            for fut, r in futures.items():
                try:
                    outcomes[r] = fut.result()
                except NumericsError as exc:
                    outcomes[r] = exc
    else:
        for r in range(cfg.runs):
            try:
                outcomes[r] = run_one(r)
            except NumericsError as exc:
                outcomes[r] = exc

    models, per_run_weights, loss_history, failures = [], [], [], []
    for r, outcome in enumerate(outcomes):
        if isinstance(outcome, NumericsError):
            failures.append((r, str(outcome)))
            continue
        m, losses = outcome
        models.append(m)
        per_run_weights.append(m.weights)
        loss_history.append(losses)
    if not models:
        raise NumericsError("all training runs diverged: "
                            + "; ".join(msg for _, msg in failures))
    mean_weights = np.mean(per_run_weights, axis=0)
    run_seeds = [substream_seed(cfg.seed, "init", r) for r in range(cfg.runs)]
    return TrainResult(gene_names=list(dataset.gene_names),
                       optimizer=cfg.optimizer, mean_weights=mean_weights,
                       per_run_weights=per_run_weights, models=models,
                       loss_history=loss_history, run_seeds=run_seeds,
                       failures=failures)
