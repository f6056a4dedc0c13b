"""Training loop: match data minibatches to generated points, push the
matched outputs toward the data, and regenerate the whole generated sample
after every weight update so later neighbor searches see current outputs.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import latent_source, mlp
from .kl_objective import EstimatorConfig, minibatch_objective
from .knn_index import DEFAULT_BACKEND, KnnBackend, PointSet
from .latent_source import LatentSpec

log = logging.getLogger(__name__)

GRAD_NORMS = ("per-sample-unit", "global-unit", "none")
LATENT_REFRESH = ("fixed", "epoch", "step")
OVERHEAD_RATIO_LIMIT = 400


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class Seeds:
    init: int = 0
    latent: int = 1
    shuffle: int = 2


@dataclass
class TrainConfig:
    N: int = 1000
    B: int = 1000
    k: int = 1
    eta: float = 0.2
    epochs: int = 1
    eps: float = 1e-12
    grad_norm: str = "per-sample-unit"
    seeds: Seeds = field(default_factory=Seeds)
    latent_refresh: str = "fixed"
    spot_check_rows: int = 4

    def validate(self) -> None:
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if self.B < self.k + 1:
            raise ValueError(f"B must be at least k + 1 = {self.k + 1}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.k > self.N:
            raise ValueError("k cannot exceed N")
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.latent_refresh not in LATENT_REFRESH:
            raise ValueError(f"latent_refresh must be one of {LATENT_REFRESH}")
        if self.grad_norm not in GRAD_NORMS:
            raise ValueError(f"grad_norm must be one of {GRAD_NORMS}")
        check_overhead_ratio(self.N, self.B)


def check_overhead_ratio(N: int, B: int) -> bool:
    """Warn when regenerating N outputs per B-row update gets expensive (N/B >= 400)."""
    if N >= OVERHEAD_RATIO_LIMIT * B:
        warnings.warn(f"N/B = {N / B:g} >= {OVERHEAD_RATIO_LIMIT}: regeneration overhead "
                      "will dominate training", RuntimeWarning, stacklevel=2)
        return True
    return False


@dataclass
class EpochStats:
    epoch: int
    mean_d_i: float
    mean_d_kl_i: float
    floored_rows: int
    wall_time: float


@dataclass
class TrainResult:
    params: mlp.NetworkParams
    stats: list[EpochStats]
    latents: np.ndarray
    generated: np.ndarray


@dataclass
class Hooks:
    """Optional side channels; every field may be left unset."""
    on_epoch: Callable[[EpochStats, mlp.NetworkParams], None] | None = None
    checkpoint_path: str | None = None
    checkpoint_every: int = 0
    checkpoint_metadata: dict = field(default_factory=dict)


def scatter_gradients(n_generated: int, matched: np.ndarray, row_grads: np.ndarray) -> np.ndarray:
    """Sum per-row output gradients onto the generated rows they matched."""
    out = np.zeros((n_generated, row_grads.shape[1]))
    np.add.at(out, matched, row_grads)
    return out


def normalize_rows(grads: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(grads, axis=1, keepdims=True)
    return np.divide(grads, norms, out=np.zeros_like(grads), where=norms > 0)


def minibatch_gradient(params: mlp.NetworkParams, trace: mlp.ForwardTrace, n_generated: int,
                       matched: np.ndarray, row_grads: np.ndarray, grad_norm: str) -> mlp.Gradients:
    """Parameter gradient of the minibatch-mean goal under the chosen normalization."""
    b = row_grads.shape[0]
    if grad_norm == "per-sample-unit":
        row_grads = normalize_rows(row_grads)
    dl_dy = scatter_gradients(n_generated, matched, row_grads)
    touched = np.flatnonzero(np.any(dl_dy != 0.0, axis=1))
    if touched.size == 0:
        return mlp.Gradients([np.zeros_like(w) for w in params.weights],
                             [np.zeros_like(v) for v in params.biases])
    grads = mlp.backward(params, trace.rows(touched), dl_dy[touched]).scaled(1.0 / b)
    if grad_norm == "global-unit":
        norm = grads.norm()
        if norm > 0:
            grads = grads.scaled(1.0 / norm)
    return grads


def _finite(grads: mlp.Gradients) -> bool:
    return all(np.all(np.isfinite(a)) for a in grads.arrays())


def train(cfg: TrainConfig, data, net: mlp.NetworkParams, latent: LatentSpec,
          hooks: Hooks | None = None, backend: KnnBackend = DEFAULT_BACKEND) -> TrainResult:
    """Run ``cfg.epochs`` epochs of minibatch SGD on the kNN-KL goal.

    Each epoch shuffles the data and walks it in consecutive batches of
    ``cfg.B`` rows; a trailing partial batch is dropped. The N latents are
    drawn from ``latent`` (seeded by ``cfg.seeds.latent``) once, or again at
    every epoch or every update depending on ``cfg.latent_refresh``.
    """
    cfg.validate()
    hooks = hooks or Hooks()
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != net.output_dim:
        raise ValueError(f"data must have {net.output_dim} columns, got shape {data.shape}")
    if latent.dim != net.input_dim:
        raise ValueError(f"latent dimension {latent.dim} != network input {net.input_dim}")
    n_batches = data.shape[0] // cfg.B
    if n_batches == 0:
        raise ValueError(f"data has {data.shape[0]} rows, fewer than one batch of {cfg.B}")

    latent_rng = latent_source.make_rng(cfg.seeds.latent)
    shuffle_rng = latent_source.make_rng(cfg.seeds.shuffle)
    check_rng = latent_source.make_rng(cfg.seeds.shuffle + 0x5EED)
    est = EstimatorConfig(k=cfg.k, N=cfg.N, d=net.output_dim, eps=cfg.eps, n_data=cfg.B)

    z = latent_source.sample(latent, cfg.N, latent_rng)
    params = net
    y, trace = mlp.forward(params, z)
    y_set = PointSet(y)
    stats: list[EpochStats] = []

    def abort(msg: str):
        if hooks.checkpoint_path:
            mlp.save_checkpoint(params, hooks.checkpoint_path,
                                {**hooks.checkpoint_metadata, "aborted": msg})
        raise TrainingDiverged(msg)

    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        if cfg.latent_refresh == "epoch" and epoch > 1:
            z = latent_source.sample(latent, cfg.N, latent_rng)
            y, trace = mlp.forward(params, z)
            y_set = y_set.rebuild(y)
        order = shuffle_rng.permutation(data.shape[0])
        sum_d_i = sum_d_kl = 0.0
        rows_ok = floored = 0
        for b in range(n_batches):
            batch = data[order[b * cfg.B:(b + 1) * cfg.B]]
            try:
                obj = minibatch_objective(batch, y_set, est, backend=backend)
            except FloatingPointError as e:
                abort(f"{e} at epoch {epoch}, batch {b}")
            n_ok = cfg.B - obj.n_floored
            floored += obj.n_floored
            if n_ok:
                if not (np.isfinite(obj.mean_d_i) and np.isfinite(obj.mean_d_kl_i)):
                    abort(f"non-finite objective at epoch {epoch}, batch {b}")
                sum_d_i += obj.mean_d_i * n_ok
                sum_d_kl += obj.mean_d_kl_i * n_ok
                rows_ok += n_ok
            grads = minibatch_gradient(params, trace, cfg.N, obj.matched_y_index,
                                       obj.grad_y_m, cfg.grad_norm)
            if not _finite(grads):
                abort(f"non-finite gradient at epoch {epoch}, batch {b}")
            params = mlp.sgd_step(params, grads, cfg.eta)
            if cfg.latent_refresh == "step":
                z = latent_source.sample(latent, cfg.N, latent_rng)
            y, trace = mlp.forward(params, z)
            if not np.all(np.isfinite(y)):
                abort(f"non-finite generated outputs at epoch {epoch}, batch {b}")
            y_set = y_set.rebuild(y)

        if cfg.spot_check_rows:
            idx = check_rng.choice(cfg.N, size=min(cfg.spot_check_rows, cfg.N), replace=False)
            if not np.allclose(mlp.generate(params, z[idx]), y_set.points[idx], rtol=1e-10, atol=1e-12):
                raise AssertionError("generated set is out of date with the current weights")

        st = EpochStats(epoch, sum_d_i / rows_ok if rows_ok else float("nan"),
                        sum_d_kl / rows_ok if rows_ok else float("nan"),
                        floored, time.perf_counter() - t0)
        stats.append(st)
        log.info("epoch %d  mean D^i %.5f  mean D_KL^i %.4f  floored %d  %.2fs",
                 st.epoch, st.mean_d_i, st.mean_d_kl_i, st.floored_rows, st.wall_time)
        if hooks.on_epoch:
            hooks.on_epoch(st, params)
        if hooks.checkpoint_path and hooks.checkpoint_every and epoch % hooks.checkpoint_every == 0:
            mlp.save_checkpoint(params, hooks.checkpoint_path,
                                {**hooks.checkpoint_metadata, "epoch": epoch})

    if hooks.checkpoint_path:
        mlp.save_checkpoint(params, hooks.checkpoint_path,
                            {**hooks.checkpoint_metadata, "epoch": cfg.epochs})
    return TrainResult(params, stats, z, y_set.points)


def generate(net: mlp.NetworkParams, spec: LatentSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Sample ``n`` latents and map them through the network."""
    if spec.dim != net.input_dim:
        raise ValueError(f"latent dimension {spec.dim} != network input {net.input_dim}")
    if n == 0:
        return np.zeros((0, net.output_dim))
    return mlp.generate(net, latent_source.sample(spec, n, rng))


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
