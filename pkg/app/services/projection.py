"""Euclidean projection onto the probability simplex."""
import numpy as np

from app.core.exceptions import InvalidParameterError


def project_simplex(v: np.ndarray) -> np.ndarray:
    """
    argmin over the simplex of ||p - v||_2, by the sort-and-threshold rule.

    Sort descending, find the largest k with u_k > (sum_{j<=k} u_j - 1) / k,
    and shift by that threshold. The result is renormalized so it sums to 1
    exactly up to rounding.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InvalidParameterError("projection input must be a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise InvalidParameterError("projection input must be finite")
    # Invariant under a common shift; centered so cumsum stays finite.
    w = v - v.max()
    u = np.sort(w)[::-1]
    thresholds = (np.cumsum(u) - 1.0) / np.arange(1, v.size + 1)
    k = np.nonzero(u > thresholds)[0][-1]
    p = np.maximum(w - thresholds[k], 0.0)
    return p / p.sum()


def kkt_residual(v: np.ndarray, p: np.ndarray) -> float:
    """Largest violation of the projection optimality conditions at p."""
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    support = p > 0
    theta = float(np.mean(v[support] - p[support]))
    residual = abs(float(p.sum()) - 1.0)
    residual = max(residual, float(np.max(np.abs(v[support] - p[support] - theta))))
    if (~support).any():
        residual = max(residual, float(np.max(v[~support] - theta)))
    return max(residual, float(max(0.0, -p.min())))
