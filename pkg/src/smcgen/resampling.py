"""Resampling schemes.

Every scheme returns offspring counts summing to N with E[nu_i | w] = N w_i.
Count-based schemes are followed by a uniformly random placement of the
offspring into slots (`assign_slots`), so the parental index vector is
uniform over all assignments consistent with the counts.

The kernels draw K independent resamplings of one weight vector at once
(rows of a K x N array); the single-draw API is the K = 1 case.  The
systematic, stratified and multinomial kernels take M draws over an
arbitrary probability vector so the residual variants can reuse them on
the residual weights.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .core import MalformedInputError, weight_vector


class Scheme(str, Enum):
    MULTINOMIAL = "multinomial"
    SYSTEMATIC = "systematic"
    STRATIFIED = "stratified"
    RESIDUAL_MULTINOMIAL = "residual_multinomial"
    RESIDUAL_SYSTEMATIC = "residual_systematic"
    RESIDUAL_STRATIFIED = "residual_stratified"

    @classmethod
    def parse(cls, name) -> "Scheme":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            known = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown resampling scheme {name!r} (known: {known})") from None


# Schemes whose counts are a.s. in {floor(N w_i), floor(N w_i) + 1}.
STOCHASTIC_ROUNDING = frozenset({Scheme.SYSTEMATIC, Scheme.RESIDUAL_SYSTEMATIC})


def _cumulative(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p)
    c /= c[-1]
    c[-1] = 1.0
    return c


def _bin_rows(idx: np.ndarray, n: int) -> np.ndarray:
    """Row-wise bincount of a K x M index array into K x n counts."""
    K = idx.shape[0]
    flat = (idx + n * np.arange(K)[:, None]).ravel()
    return np.bincount(flat, minlength=K * n).reshape(K, n)


def _systematic_counts(p, M, K, rng) -> np.ndarray:
    # grid (U + k) / M, k = 0..M-1; count of grid points in [C_{i-1}, C_i)
    c = _cumulative(p)
    u = rng.random((K, 1))
    edges = np.clip(np.ceil(M * c[None, :] - u), 0, M).astype(np.int64)
    return np.diff(edges, axis=1, prepend=0)


def _stratified_counts(p, M, K, rng) -> np.ndarray:
    c = _cumulative(p)
    u = (np.arange(M) + rng.random((K, M))) / M
    idx = np.minimum(np.searchsorted(c, u, side="right"), p.size - 1)
    return _bin_rows(idx, p.size)


def _multinomial_counts(p, M, K, rng) -> np.ndarray:
    return _bin_rows(_categorical(p, (K, M), rng), p.size)


def _categorical(p, shape, rng) -> np.ndarray:
    if p.min() == p.max():
        # uniform weights: skip the binary search
        return rng.integers(0, p.size, size=shape)
    c = _cumulative(p)
    return np.minimum(np.searchsorted(c, rng.random(shape), side="right"), p.size - 1)


_BASE = {
    Scheme.MULTINOMIAL: _multinomial_counts,
    Scheme.SYSTEMATIC: _systematic_counts,
    Scheme.STRATIFIED: _stratified_counts,
}
_RESIDUAL = {
    Scheme.RESIDUAL_MULTINOMIAL: _multinomial_counts,
    Scheme.RESIDUAL_SYSTEMATIC: _systematic_counts,
    Scheme.RESIDUAL_STRATIFIED: _stratified_counts,
}


def _counts(scheme: Scheme, w: np.ndarray, K: int, rng) -> np.ndarray:
    N = w.size
    if scheme in _BASE:
        return _BASE[scheme](w, N, K, rng)
    scaled = N * w
    floors = np.floor(scaled).astype(np.int64)
    R = N - int(floors.sum())
    nu = np.broadcast_to(floors, (K, N))
    if R > 0:
        resid = scaled - floors
        nu = nu + _RESIDUAL[scheme](resid / resid.sum(), R, K, rng)
    return np.array(nu)


def resample_counts(scheme, w, rng: np.random.Generator) -> np.ndarray:
    """Draw offspring counts nu (length N, sum N) for weights `w`."""
    return _counts(Scheme.parse(scheme), weight_vector(w), 1, rng)[0]


def resample_counts_batch(scheme, w, size: int, rng: np.random.Generator) -> np.ndarray:
    """`size` independent count vectors for the same weights, as a size x N array."""
    return _counts(Scheme.parse(scheme), weight_vector(w), size, rng)


def _assign_rows(nu: np.ndarray, rng) -> np.ndarray:
    K, N = nu.shape
    sorted_parents = np.repeat(np.tile(np.arange(N), K), nu.ravel()).reshape(K, N)
    return rng.permuted(sorted_parents, axis=1)


def assign_slots(nu, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random 0-based parent vector with the given family sizes."""
    nu = np.asarray(nu, dtype=np.int64)
    if nu.ndim != 1 or np.any(nu < 0) or nu.sum() != nu.size:
        raise MalformedInputError("offspring counts must be >= 0 and sum to N")
    return _assign_rows(nu[None, :], rng)[0]


def assign_slots_batch(nu, rng: np.random.Generator) -> np.ndarray:
    """Row-wise `assign_slots` for a K x N array of counts."""
    nu = np.asarray(nu, dtype=np.int64)
    if nu.ndim != 2 or np.any(nu < 0) or np.any(nu.sum(axis=1) != nu.shape[1]):
        raise MalformedInputError("each row of counts must be >= 0 and sum to N")
    return _assign_rows(nu, rng)


def multinomial_assignment(w, rng: np.random.Generator) -> np.ndarray:
    """Independent Categorical(w) parent for each of the N slots (0-based)."""
    w = weight_vector(w)
    return _categorical(w, w.size, rng)


def resample(scheme, w, rng: np.random.Generator) -> np.ndarray:
    """Parent indices a_t^(1:N) (0-based) under `scheme`."""
    return resample_batch(scheme, w, 1, rng)[0]


def resample_batch(scheme, w, size: int, rng: np.random.Generator) -> np.ndarray:
    """`size` independent parent vectors for the same weights (size x N)."""
    scheme = Scheme.parse(scheme)
    w = weight_vector(w)
    if scheme is Scheme.MULTINOMIAL:
        return _categorical(w, (size, w.size), rng)
    return _assign_rows(_counts(scheme, w, size, rng), rng)


def is_two_point_support(nu, w) -> bool:
    """True iff every nu_i lies in {floor(N w_i), floor(N w_i) + 1}."""
    nu = np.asarray(nu)
    w = np.asarray(w, dtype=float)
    if nu.shape[-1] != w.shape[-1]:
        raise MalformedInputError("nu and w must have the same length")
    lo = np.floor(w.shape[-1] * w)
    return bool(np.all((nu >= lo) & (nu <= lo + 1)))
