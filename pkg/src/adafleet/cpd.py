"""Online Dirichlet change-point detection.

Raw per-tick feature vectors are mapped onto the simplex, a Dirichlet
distribution is fitted by maximum likelihood to the whole window and to both
sides of every admissible split, and a change is declared when the best split
improves the log-likelihood by more than a threshold.

The split search evaluates all candidate splits as one batch: sufficient
statistics come from prefix sums, and the MLE solver runs on a
``(n_splits, d)`` parameter array.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateInput, DomainError, NonConvergence, WindowTooSmall
from .special import digamma, inverse_digamma, log_gamma, trigamma

ALPHA_MIN = 1e-4
ALPHA_MAX = 1e6
MLE_TOL = 1e-8
MLE_MAX_ITER = 500
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class DirichletParams:
    alpha: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.alpha, dtype=np.float64)
        if a.ndim != 1 or a.size < 2 or np.any(~np.isfinite(a)) or np.any(a <= 0):
            raise DomainError("alpha must be a finite positive vector of length >= 2")
        object.__setattr__(self, "alpha", a)

    @property
    def dim(self) -> int:
        return self.alpha.size


@dataclass(frozen=True)
class ChangeReport:
    change_index: int
    score: float
    detected: bool


def _as_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("samples must be a (n, d) array with d >= 2")
    if np.any(~(x > 0)):
        raise DomainError("composition entries must be strictly positive")
    return x


def to_composition(raw, epsilon: float = DEFAULT_EPSILON, bounds=None) -> np.ndarray:
    """Map raw feature vectors onto the open simplex.

    Each dimension is min-max scaled to [0, 1] (bounds learned from the
    window unless ``bounds=(lo, hi)`` is given), offset by the pseudo-count
    ``epsilon`` and the row renormalised.  Dimensions that are constant across
    the window scale to 0.  Accepts a single vector or an ``(n, d)`` window.
    """
    x = np.asarray(raw, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if np.any(~np.isfinite(x)):
        raise DomainError("raw features must be finite")
    if bounds is None:
        lo, hi = x.min(axis=0), x.max(axis=0)
    else:
        lo, hi = (np.broadcast_to(np.asarray(b, dtype=np.float64), x.shape[1:]) for b in bounds)
    span = hi - lo
    if not np.any(span > 0):
        raise DegenerateInput("every feature dimension is constant over the window")
    scaled = np.where(span > 0, (x - lo) / np.where(span > 0, span, 1.0), 0.0)
    scaled = np.clip(scaled, 0.0, 1.0) + epsilon
    comp = scaled / scaled.sum(axis=1, keepdims=True)
    return comp[0] if single else comp


def log_likelihood(samples, params: DirichletParams) -> float:
    """Sum of Dirichlet log densities of ``samples`` under ``params``."""
    x = _as_samples(samples)
    a = params.alpha
    if x.shape[1] != a.size:
        raise ValueError("dimension mismatch between samples and alpha")
    log_norm = log_gamma(a.sum()) - float(np.sum(log_gamma(a)))
    return x.shape[0] * log_norm + float(np.sum(np.log(x) @ (a - 1.0)))


def _moment_init(mean: np.ndarray, mean_sq0: np.ndarray) -> np.ndarray:
    """Moment-matching start for a batch: rows are independent fits."""
    var0 = mean_sq0 - mean[:, 0] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = (mean[:, 0] - mean_sq0) / var0
    precision = np.where(np.isfinite(precision) & (precision > 0), precision, 1.0)
    return np.clip(mean * precision[:, None], ALPHA_MIN, ALPHA_MAX)


def _fixed_point_step(alpha: np.ndarray, mean_log: np.ndarray) -> np.ndarray:
    target = digamma(alpha.sum(axis=1))[:, None] + mean_log
    return inverse_digamma(target)


def _newton_step(alpha: np.ndarray, mean_log: np.ndarray) -> np.ndarray:
    """Newton update on the mean log-likelihood; Hessian is diag(q) + z 11^T."""
    total = alpha.sum(axis=1)
    grad = digamma(total)[:, None] - digamma(alpha) + mean_log
    q = -trigamma(alpha)
    z = trigamma(total)
    b = np.sum(grad / q, axis=1) / (1.0 / z + np.sum(1.0 / q, axis=1))
    return alpha - (grad - b[:, None]) / q


def _solve(mean_log: np.ndarray, alpha: np.ndarray, solver: str = "newton") -> tuple[np.ndarray, np.ndarray]:
    """Solve ``digamma(a_l) - digamma(sum a) = mean_log_l`` row-wise.

    ``solver="newton"`` takes Newton steps and substitutes the fixed-point
    step for any row whose Newton step leaves the positive orthant.
    ``solver="fixed-point"`` uses the fixed-point map only (linear rate).
    Returns the estimates and a per-row flag that is true when every
    component ended pinned to a clamp bound.
    """
    alpha = alpha.copy()
    active = np.ones(alpha.shape[0], dtype=bool)
    for _ in range(MLE_MAX_ITER):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        a = alpha[idx]
        ml = mean_log[idx]
        if solver == "newton":
            new = _newton_step(a, ml)
            bad = np.any(~(new > 0), axis=1)
            if bad.any():
                new[bad] = _fixed_point_step(a[bad], ml[bad])
        else:
            new = _fixed_point_step(a, ml)
        new = np.clip(new, ALPHA_MIN, ALPHA_MAX)
        done = np.max(np.abs(new - a), axis=1) < MLE_TOL
        alpha[idx] = new
        active[idx[done]] = False
    pinned = np.all((alpha <= ALPHA_MIN) | (alpha >= ALPHA_MAX), axis=1)
    return alpha, pinned


def dirichlet_mle(samples, solver: str = "newton") -> DirichletParams:
    """Maximum-likelihood Dirichlet parameters for a window of compositions.

    Starts from moment matching and iterates until the largest parameter
    change is below 1e-8 (at most 500 iterations), with every component
    clamped to [1e-4, 1e6].
    """
    x = _as_samples(samples)
    n, d = x.shape
    if n < d + 2:
        raise ValueError(f"need at least {d + 2} samples for a {d}-dimensional fit, got {n}")
    mean = x.mean(axis=0)[None, :]
    alpha0 = _moment_init(mean, np.array([np.mean(x[:, 0] ** 2)]))
    alpha, pinned = _solve(np.log(x).mean(axis=0)[None, :], alpha0, solver)
    if pinned[0]:
        raise NonConvergence("all Dirichlet parameters pinned to clamp bounds")
    return DirichletParams(alpha[0])


def mle_gradient(samples, params: DirichletParams) -> np.ndarray:
    """Gradient of the per-sample mean log-likelihood with respect to alpha."""
    x = _as_samples(samples)
    a = params.alpha
    return digamma(a.sum()) - digamma(a) + np.log(x).mean(axis=0)


def _batch_fit_ll(count: np.ndarray, sum_log: np.ndarray, sum_x: np.ndarray, sum_sq0: np.ndarray):
    mean_log = sum_log / count[:, None]
    alpha0 = _moment_init(sum_x / count[:, None], sum_sq0 / count)
    alpha, pinned = _solve(mean_log, alpha0)
    log_norm = log_gamma(alpha.sum(axis=1)) - np.sum(log_gamma(alpha), axis=1)
    ll = count * log_norm + np.sum((alpha - 1.0) * sum_log, axis=1)
    return ll, pinned


def default_min_segment(dim: int) -> int:
    return dim + 2


def estimate_2window(samples, min_segment: int | None = None) -> tuple[int, float]:
    """Best single split of the window.

    Returns ``(t, ll)`` where the first segment is ``samples[:t]`` and ``ll``
    is the summed log-likelihood of both segments under their own MLE fits.
    Splits leave at least ``min_segment`` samples on each side; ties resolve
    to the smallest ``t``.  Splits whose fit is pinned to the clamp bounds on
    one side are skipped.
    """
    x = _as_samples(samples)
    n, d = x.shape
    m = default_min_segment(d) if min_segment is None else min_segment
    if n < 2 * m:
        raise WindowTooSmall(f"window of {n} samples cannot hold two segments of {m}")
    logs = np.log(x)
    zero = np.zeros((1, d))
    cum_log = np.vstack([zero, np.cumsum(logs, axis=0)])
    cum_x = np.vstack([zero, np.cumsum(x, axis=0)])
    cum_sq0 = np.concatenate([[0.0], np.cumsum(x[:, 0] ** 2)])

    splits = np.arange(m, n - m + 1)
    left_n = splits.astype(np.float64)
    right_n = (n - splits).astype(np.float64)
    count = np.concatenate([left_n, right_n])
    sum_log = np.vstack([cum_log[splits], cum_log[n] - cum_log[splits]])
    sum_x = np.vstack([cum_x[splits], cum_x[n] - cum_x[splits]])
    sum_sq0 = np.concatenate([cum_sq0[splits], cum_sq0[n] - cum_sq0[splits]])
    ll, pinned = _batch_fit_ll(count, sum_log, sum_x, sum_sq0)

    k = splits.size
    total = ll[:k] + ll[k:]
    total = np.where(pinned[:k] | pinned[k:], -np.inf, total)
    if not np.any(np.isfinite(total)):
        raise NonConvergence("every split produced a pinned fit")
    best = int(np.argmax(total))
    return int(splits[best]), float(total[best])


def detect_change(samples, threshold: float, min_segment: int | None = None) -> ChangeReport:
    """Single change-point test: split gain ``LL* - LL0`` against ``threshold``."""
    x = _as_samples(samples)
    q0 = dirichlet_mle(x)
    ll0 = log_likelihood(x, q0)
    t_star, ll_star = estimate_2window(x, min_segment)
    score = ll_star - ll0
    return ChangeReport(change_index=t_star, score=score, detected=bool(score > threshold))


class StreamingDetector:
    """Feed raw feature vectors one tick at a time; test on a fixed cadence.

    The window covers every tick since the last detected change.  Features
    are scaled with ``bounds`` when given, else with the window's own range.  After a
    detection at split ``t`` the window restarts just past the change, so a
    sequence of single-change tests yields multiple change points.
    """

    def __init__(self, threshold: float, check_every: int, min_segment: int | None = None,
                 epsilon: float = DEFAULT_EPSILON, bounds=None):
        self.threshold = threshold
        self.check_every = check_every
        self.min_segment = min_segment
        self.epsilon = epsilon
        self.bounds = bounds
        self.start_tick: int | None = None
        self._buffer: list[Sequence[float]] = []
        self._since_check = 0

    def __len__(self) -> int:
        return len(self._buffer)

    def push(self, tick: int, features: Sequence[float]) -> tuple[int, ChangeReport] | None:
        """Append one observation; returns ``(change_tick, report)`` on detection."""
        if self.start_tick is None:
            self.start_tick = tick
        self._buffer.append(tuple(features))
        self._since_check += 1
        if self._since_check < self.check_every:
            return None
        self._since_check = 0
        raw = np.asarray(self._buffer, dtype=np.float64)
        m = default_min_segment(raw.shape[1]) if self.min_segment is None else self.min_segment
        if raw.shape[0] < 2 * m:
            return None
        try:
            report = detect_change(to_composition(raw, self.epsilon, self.bounds), self.threshold, m)
        except (DegenerateInput, NonConvergence):
            return None
        if not report.detected:
            return None
        change_tick = self.start_tick + report.change_index
        del self._buffer[: report.change_index]
        self.start_tick = change_tick
        return change_tick, report
