"""kNN estimates of the data and generated densities, the per-sample KL
term built from them, and the simplified log-ratio goal used for SGD.

For a data point x_i with k-th nearest other data point x_n (distance rho)
and k-th nearest generated point y_m (distance nu), in dimension d:

    log p_data(x_i) = log k - log(n_data - 1) - log c(d) - d log rho
    log p_gen(x_i)  = log k - log N          - log c(d) - d log nu
    D_KL^i = (d/2) log(nu^2 / rho^2) + log(N / (n_data - 1))
    D^i    = log(nu^2 / rho^2)

Only D^i is differentiated; its gradient with respect to y_m is
2 (y_m - x_i) / |y_m - x_i|^2 and does not involve x_n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .knn_index import DEFAULT_BACKEND, SELF, KnnBackend, PointSet, batch_kth_neighbors
from .linalg_stats import as_mat, as_vec, log_unit_ball_volume

DEFAULT_EPS = 1e-12


class DegenerateDistanceError(ValueError):
    """A neighbor distance fell below the squared-distance floor."""


@dataclass(frozen=True)
class EstimatorConfig:
    k: int
    N: int
    d: int
    eps: float = DEFAULT_EPS
    n_data: int | None = None  # size of the data reference sample; defaults to N

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if self.n_data is not None and self.n_data < 2:
            raise ValueError("n_data must be >= 2")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")

    @property
    def data_size(self) -> int:
        return self.N if self.n_data is None else self.n_data

    @property
    def log_size_ratio(self) -> float:
        """log(N / (n_data - 1)); equals log(N/(N-1)) when both samples have size N."""
        return math.log(self.N) - math.log(self.data_size - 1)


@dataclass
class KlTerms:
    d_kl_i: float
    d_i: float
    grad_y_m: np.ndarray | None = None
    matched_y_index: int | None = None
    matched_x_index: int | None = None


def _check_floor(sq: float, eps: float, what: str) -> None:
    if not sq >= eps:
        raise DegenerateDistanceError(f"{what} squared distance {sq!r} is below the floor {eps}")


def log_density_estimate_data(rho_k_sq: float, cfg: EstimatorConfig) -> float:
    _check_floor(rho_k_sq, cfg.eps, "data neighbor")
    return (math.log(cfg.k) - math.log(cfg.data_size - 1) - log_unit_ball_volume(cfg.d)
            - 0.5 * cfg.d * math.log(rho_k_sq))


def log_density_estimate_gen(nu_k_sq: float, cfg: EstimatorConfig) -> float:
    _check_floor(nu_k_sq, cfg.eps, "generated neighbor")
    return (math.log(cfg.k) - math.log(cfg.N) - log_unit_ball_volume(cfg.d)
            - 0.5 * cfg.d * math.log(nu_k_sq))


def density_estimate_data(rho_k_sq: float, cfg: EstimatorConfig) -> float:
    """k / ((n_data - 1) c(d) rho^d). Underflows to 0 in high dimension; prefer the log form."""
    return math.exp(log_density_estimate_data(rho_k_sq, cfg))


def density_estimate_gen(nu_k_sq: float, cfg: EstimatorConfig) -> float:
    """k / (N c(d) nu^d)."""
    return math.exp(log_density_estimate_gen(nu_k_sq, cfg))


def kl_term(sq_dist_to_y_m: float, sq_dist_to_x_n: float, cfg: EstimatorConfig) -> KlTerms:
    _check_floor(sq_dist_to_y_m, cfg.eps, "generated neighbor")
    _check_floor(sq_dist_to_x_n, cfg.eps, "data neighbor")
    d_i = math.log(sq_dist_to_y_m / sq_dist_to_x_n)
    return KlTerms(d_kl_i=0.5 * cfg.d * d_i + cfg.log_size_ratio, d_i=d_i)


def d_i_gradient(x_i, y_m, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Gradient of log|y_m - x_i|^2 with respect to y_m."""
    x_i = as_vec(x_i, "x_i")
    y_m = as_vec(y_m, "y_m")
    diff = y_m - x_i
    sq = float(np.dot(diff, diff))
    _check_floor(sq, eps, "generated neighbor")
    return 2.0 * diff / sq


@dataclass
class MinibatchObjective:
    mean_d_i: float
    mean_d_kl_i: float
    d_i: np.ndarray          # per row; nan where floored
    d_kl_i: np.ndarray
    matched_y_index: np.ndarray
    matched_x_index: np.ndarray
    grad_y_m: np.ndarray     # (B, d); zero rows where floored
    floored: np.ndarray      # bool per row

    @property
    def n_floored(self) -> int:
        return int(self.floored.sum())


def minibatch_objective(x_batch, y_set: PointSet, cfg: EstimatorConfig,
                        x_set: PointSet | None = None, x_indices=None,
                        backend: KnnBackend = DEFAULT_BACKEND) -> MinibatchObjective:
    """Match every data row to its k-th nearest generated point and score it.

    The data reference set defaults to the batch itself, each row excluding
    its own position. With an explicit ``x_set``, ``x_indices`` gives each
    batch row's position in it (``-1`` if it is not a member). Rows where
    either squared distance is below ``cfg.eps`` are flagged as floored:
    they get zero gradient and are left out of the means.
    """
    x = as_mat(x_batch, "x_batch")
    if x.shape[1] != y_set.dim:
        raise ValueError(f"data dimension {x.shape[1]} != generated dimension {y_set.dim}")
    if x_set is None:
        x_set = PointSet(x)
        exclude = SELF
    else:
        if x_set.dim != x.shape[1]:
            raise ValueError("data reference set has the wrong dimension")
        exclude = x_indices
    gen = batch_kth_neighbors(y_set, x, cfg.k, backend=backend)
    dat = batch_kth_neighbors(x_set, x, cfg.k, exclude=exclude, backend=backend)
    if not (np.all(np.isfinite(gen.sq_dist)) and np.all(np.isfinite(dat.sq_dist))):
        raise FloatingPointError("non-finite neighbor distance (inputs too large or not finite)")

    floored = (gen.sq_dist < cfg.eps) | (dat.sq_dist < cfg.eps)
    ok = ~floored
    d_i = np.full(x.shape[0], np.nan)
    d_i[ok] = np.log(gen.sq_dist[ok] / dat.sq_dist[ok])
    d_kl_i = 0.5 * cfg.d * d_i + cfg.log_size_ratio

    grad = np.zeros_like(x)
    diff = y_set.points[gen.index[ok]] - x[ok]
    grad[ok] = 2.0 * diff / gen.sq_dist[ok][:, None]

    n_ok = int(ok.sum())
    mean_d_i = float(np.sum(d_i[ok]) / n_ok) if n_ok else float("nan")
    mean_d_kl_i = float(np.sum(d_kl_i[ok]) / n_ok) if n_ok else float("nan")
    return MinibatchObjective(mean_d_i, mean_d_kl_i, d_i, d_kl_i, gen.index, dat.index, grad, floored)


def estimate_kl(samples_p, samples_q, k: int = 1, eps: float = np.finfo(np.float64).tiny,
                backend: KnnBackend = DEFAULT_BACKEND) -> float:
    """kNN estimate of KL(P || Q) from samples of each: the mean of D_KL^i over P's sample.

    The default floor only rejects exactly coincident points; the training
    floor is far too coarse for dense low-dimensional samples.
    """
    p = as_mat(samples_p, "samples_p")
    q = as_mat(samples_q, "samples_q")
    if p.shape[1] != q.shape[1]:
        raise ValueError(f"dimension mismatch: {p.shape[1]} vs {q.shape[1]}")
    if p.shape[0] < k + 1 or q.shape[0] < max(k, 2):
        raise ValueError(f"k={k} needs at least {k + 1} points from P and {max(k, 2)} from Q")
    cfg = EstimatorConfig(k=k, N=q.shape[0], d=p.shape[1], eps=eps, n_data=p.shape[0])
    res = minibatch_objective(p, PointSet(q), cfg, backend=backend)
    if res.n_floored:
        raise DegenerateDistanceError(f"{res.n_floored} points have coincident neighbors")
    return res.mean_d_kl_i
