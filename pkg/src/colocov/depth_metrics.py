"""Scale-insensitive depth metrics, coverage MAE and moment-matching alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from colocov.errors import DegenerateCovarianceError

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
DEFAULT_PAIRS = 100_000
EIG_FLOOR = 1e-8


@dataclass(frozen=True)
class MetricReport:
    mre: float
    dr_mre: float
    dom: float
    sigma: float
    epsilon: float
    n_pairs_sampled: int


def _as_stack(x) -> list[np.ndarray]:
    """Accept an array, a DepthImage, or a sequence of either; return 2-D float arrays."""
    if hasattr(x, "data") and not isinstance(x, np.ndarray):
        x = x.data
    if isinstance(x, np.ndarray):
        a = np.asarray(x, dtype=np.float64)
        if a.ndim == 3:
            return [a[i] for i in range(len(a))]
        if a.ndim == 1:
            return [a[None, :]]
        return [a]
    return [im for item in x for im in _as_stack(item)]


def _pair(pred, gt) -> tuple[list[np.ndarray], list[np.ndarray]]:
    P, G = _as_stack(pred), _as_stack(gt)
    if len(P) != len(G) or any(p.shape != g.shape for p, g in zip(P, G)):
        raise ValueError("prediction and ground truth shapes disagree")
    for p in P:
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("predictions must be finite and non-negative")
    if all(not np.any(p > 0) for p in P):
        raise ValueError("prediction is all zero")
    return P, G


def resolve_epsilon(gt, epsilon="auto") -> float:
    """``epsilon`` as given, or 1e-3 x the median ground-truth depth for "auto"."""
    if epsilon is None or epsilon == "auto":
        g = np.concatenate([a.ravel() for a in _as_stack(gt)])
        med = float(np.median(g))
        if med <= 0:
            pos = g[g > 0]
            med = float(np.median(pos)) if pos.size else 1.0
        return 1e-3 * med
    eps = float(epsilon)
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    return eps


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Smallest ``x`` among ``values`` with at least half the total weight at or below it."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    k = int(np.searchsorted(cw, 0.5 * cw[-1], side="left"))
    return float(v[min(k, len(v) - 1)])


def mre_objective(sigma, pred: np.ndarray, gt: np.ndarray, epsilon: float) -> np.ndarray:
    """``mean |sigma*pred - gt| / max(gt, eps)`` for scalar or array ``sigma``."""
    s = np.asarray(sigma, dtype=np.float64)
    p = pred.ravel()
    g = gt.ravel()
    den = np.maximum(g, epsilon)
    return (np.abs(s[..., None] * p - g) / den).mean(axis=-1)


def _mre_flat(p: np.ndarray, g: np.ndarray, eps: float) -> tuple[float, float]:
    den = np.maximum(g, eps)
    pos = p > 0
    if not pos.any():
        raise ValueError("prediction is all zero")
    # objective is sum_i w_i |sigma - b_i| plus a constant from zero predictions
    b = g[pos] / p[pos]
    w = p[pos] / den[pos]
    sigma = weighted_median(b, w)
    return float(mre_objective(sigma, p, g, eps)), sigma


def mre(pred, gt, epsilon="auto", mode: str = "global") -> tuple[float, float]:
    """Scale-insensitive mean relative error and the optimal scale.

    The objective is piecewise linear in the scale with breakpoints
    ``gt/pred``, so its minimizer is a weighted median of those ratios.
    ``mode="global"`` fits one scale over all images; ``"per_image"`` averages
    per-image errors and returns the mean scale.
    """
    P, G = _pair(pred, gt)
    eps = resolve_epsilon(G, epsilon)
    if mode == "global":
        p = np.concatenate([a.ravel() for a in P])
        g = np.concatenate([a.ravel() for a in G])
        return _mre_flat(p, g, eps)
    if mode == "per_image":
        vals = [_mre_flat(p.ravel(), g.ravel(), eps) for p, g in zip(P, G)]
        return float(np.mean([v[0] for v in vals])), float(np.mean([v[1] for v in vals]))
    raise ValueError("mode must be 'global' or 'per_image'")


def _neighbourhood(g: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Stack the 3x3 neighbours of every pixel; off-image slots are NaN."""
    h, w = g.shape
    pad = np.pad(g, 1, mode="constant", constant_values=np.nan)
    nb = np.stack([pad[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w] for dy in (-1, 0, 1) for dx in (-1, 0, 1)])
    return nb.reshape(9, -1), np.maximum(nb, eps).reshape(9, -1)


def dr_mre_objective(sigma: float, pred: np.ndarray, nb: np.ndarray, nb_den: np.ndarray) -> float:
    err = np.abs(sigma * pred[None, :] - nb) / nb_den
    return float(np.nanmin(err, axis=0).mean())


def _golden(f, a: float, b: float, tol: float) -> tuple[float, float]:
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def dr_mre(pred, gt, epsilon="auto", tol: float = 1e-6) -> tuple[float, float]:
    """Discontinuity-robust MRE: each pixel may match any ground truth in its 3x3 window.

    The scale starts at the plain MRE optimum and is refined by golden-section
    search over ``[sigma/2, 2*sigma]``; the returned value never exceeds the
    plain MRE because the starting scale is kept when it is better.
    """
    P, G = _pair(pred, gt)
    for g in G:
        if g.shape[0] < 3 or g.shape[1] < 3:
            raise ValueError("images must be at least 3x3")
    eps = resolve_epsilon(G, epsilon)
    _, s0 = mre(P, G, eps)
    p = np.concatenate([a.ravel() for a in P])
    parts = [_neighbourhood(g, eps) for g in G]
    nb = np.concatenate([x[0] for x in parts], axis=1)
    den = np.concatenate([x[1] for x in parts], axis=1)

    def f(s):
        return dr_mre_objective(s, p, nb, den)

    best_s, best = s0, f(s0)
    s, v = _golden(f, 0.5 * s0, 2.0 * s0, tol * max(1.0, s0))
    if v < best:
        best_s, best = s, v
    return best, best_s


def _pair_indices(n: int, n_pairs: int, seed) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, n_pairs)
    j = (i + rng.integers(1, n, n_pairs)) % n
    return i, j


def dom_pairs(pred: np.ndarray, gt: np.ndarray, i: np.ndarray, j: np.ndarray) -> float:
    r = gt[i] > gt[j]
    rh = pred[i] > pred[j]
    return float(np.mean(r == rh))


def dom(pred, gt, n_pairs: int = DEFAULT_PAIRS, seed=1, exhaustive: bool = False) -> float:
    """Depth order measure over ordered pixel pairs ``i != j``.

    Sampled pairs are uniform over ordered distinct pairs; ``exhaustive``
    enumerates all of them. Ties count as agreement when both images tie.
    """
    p = np.concatenate([a.ravel() for a in _as_stack(pred)])
    g = np.concatenate([a.ravel() for a in _as_stack(gt)])
    if p.shape != g.shape:
        raise ValueError("prediction and ground truth sizes disagree")
    n = len(p)
    if n < 2:
        raise ValueError("need at least two pixels")
    if exhaustive:
        i, j = np.nonzero(~np.eye(n, dtype=bool))
    else:
        if n_pairs < 1:
            raise ValueError("n_pairs must be positive")
        i, j = _pair_indices(n, n_pairs, seed)
    return dom_pairs(p, g, i, j)


def evaluate_depth(pred, gt, epsilon="auto", n_pairs: int = DEFAULT_PAIRS, seed=1) -> MetricReport:
    eps = resolve_epsilon(_as_stack(gt), epsilon)
    m, s = mre(pred, gt, eps)
    d, _ = dr_mre(pred, gt, eps)
    return MetricReport(m, d, dom(pred, gt, n_pairs, seed), s, eps, n_pairs)


def coverage_mae(pred_list, gt_list) -> float:
    p = np.asarray(pred_list, dtype=np.float64).ravel()
    g = np.asarray(gt_list, dtype=np.float64).ravel()
    if p.shape != g.shape:
        raise ValueError("length mismatch")
    if p.size == 0:
        raise ValueError("empty inputs")
    if np.any((p < 0) | (p > 1) | (g < 0) | (g > 1)):
        raise ValueError("coverage values must lie in [0, 1]")
    return float(np.mean(np.abs(p - g)))


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``x -> A x + b`` applied to rows."""

    matrix: np.ndarray
    shift: np.ndarray

    def __call__(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.matrix.T + self.shift


def _sym_power(C: np.ndarray, power: float, floor: float) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    w = np.maximum(w, floor)
    return (V * w**power) @ V.T


def coral_align(source, target, floor: float = EIG_FLOOR):
    """Affine map giving ``source`` rows the mean and covariance of ``target``.

    ``A = C_tgt^{1/2} C_src^{-1/2}`` with symmetric roots; the map is
    ``x -> A (x - mu_src) + mu_tgt``. Returns ``(map, aligned_source)``.
    """
    Xs = np.asarray(source, dtype=np.float64)
    Xt = np.asarray(target, dtype=np.float64)
    if Xs.ndim == 1:
        Xs = Xs[:, None]
    if Xt.ndim == 1:
        Xt = Xt[:, None]
    if Xs.ndim != 2 or Xt.ndim != 2 or Xs.shape[1] != Xt.shape[1]:
        raise ValueError("feature tables must be 2-D with equal column counts")
    d = Xs.shape[1]
    for X in (Xs, Xt):
        if len(X) < d + 1:
            raise ValueError("need at least d + 1 rows to estimate a covariance")
        if not np.all(np.isfinite(X)):
            raise ValueError("feature tables must be finite")
    mu_s, mu_t = Xs.mean(axis=0), Xt.mean(axis=0)
    Cs = np.atleast_2d(np.cov(Xs, rowvar=False))
    Ct = np.atleast_2d(np.cov(Xt, rowvar=False))
    if np.linalg.eigvalsh(0.5 * (Cs + Cs.T)).min() < floor:
        raise DegenerateCovarianceError("source covariance is rank-deficient")
    A = _sym_power(Ct, 0.5, floor) @ _sym_power(Cs, -0.5, floor)
    amap = AffineMap(A, mu_t - A @ mu_s)
    return amap, amap(Xs)
