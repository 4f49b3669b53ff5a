"""Sample selection by vector quantisation of rotation axes.

The rotating samples' axes are clustered with k-means and one sample, the
one closest to each codebook entry, is kept per cluster. All no-rotation
samples are kept as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .weighting import RotationSplit

N_RESTARTS = 50
MAX_ITER = 100


@dataclass(frozen=True, eq=False)
class Codebook:
    centroids: np.ndarray  # (k, 3) unit rows
    k: int
    k_rel: float
    inertia: float  # sum of (1 - |cos|) over members


def codebook_size(n_r: int, k_rel: float) -> int:
    if not 0.0 < k_rel <= 1.0:
        raise ValueError(f"k_rel must lie in (0, 1], got {k_rel!r}")
    return int(min(max(round(k_rel * n_r), 1), n_r))


def canonical_hemisphere(axes) -> np.ndarray:
    """Flip each axis so its first non-zero component among (z, y, x) is positive."""
    axes = np.array(axes, dtype=float).reshape(-1, 3)
    for c in (2, 1, 0):
        undecided = np.all(axes[:, c + 1:] == 0.0, axis=1) if c < 2 else np.ones(len(axes), bool)
        flip = undecided & (axes[:, c] < 0.0)
        axes[flip] *= -1.0
    return axes


def _abs_cos(x, c):
    return np.abs(x @ c.T)


def _seed_plusplus(x, k, rng):
    n = len(x)
    idx = [int(rng.integers(n))]
    d = 1.0 - _abs_cos(x, x[idx])[:, 0]
    for _ in range(1, k):
        d = np.maximum(d, 0.0)
        total = d.sum()
        if total <= 0.0:
            nxt = int(rng.integers(n))
        else:
            cum = np.cumsum(d)
            nxt = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), n - 1)
        idx.append(nxt)
        d = np.minimum(d, 1.0 - _abs_cos(x, x[nxt:nxt + 1])[:, 0])
    return x[idx].copy()


def _assign(x, c):
    # max |cos| is the nearest of +c and -c in Euclidean distance on the sphere
    k = len(c)
    _, j = cKDTree(np.concatenate([c, -c])).query(x)
    labels = np.where(j >= k, j - k, j)
    own = np.einsum("ij,ij->i", x, c[labels])
    return labels, own


def _kmeans_once(x, k, rng):
    c = _seed_plusplus(x, k, rng)
    labels = None
    for _ in range(MAX_ITER):
        new, own = _assign(x, c)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        # align member signs with their centroid before averaging
        s = np.where(own < 0.0, -1.0, 1.0)
        m = np.zeros_like(c)
        np.add.at(m, labels, s[:, None] * x)
        nrm = np.linalg.norm(m, axis=1)
        ok = nrm > 0.0
        c[ok] = m[ok] / nrm[ok, None]
        empty = np.flatnonzero(np.bincount(labels, minlength=k) == 0)
        if len(empty):
            # reseed at the points worst served by their centroids
            far = np.argsort(np.abs(own), kind="stable")[: len(empty)]
            c[empty] = x[far]
    _, own = _assign(x, c)
    return c, float(np.sum(1.0 - np.abs(own)))


def kmeans_axes(axes, k: int, seed=0, restarts: int = N_RESTARTS) -> Codebook:
    """Axial k-means (``n`` and ``-n`` identified), best of ``restarts`` runs."""
    x = canonical_hemisphere(axes)
    if not 1 <= k <= len(x):
        raise ValueError(f"need 1 <= k <= {len(x)}, got {k}")
    rng = np.random.default_rng(seed)
    best_c, best_i = None, np.inf
    for _ in range(restarts):
        c, inertia = _kmeans_once(x, k, rng)
        if inertia < best_i:
            best_c, best_i = c, inertia
    return Codebook(centroids=canonical_hemisphere(best_c), k=k, k_rel=k / len(x), inertia=best_i)


def select_indices(axes, codebook: Codebook) -> np.ndarray:
    """Per centroid, the index of the closest axis not already taken."""
    x = canonical_hemisphere(axes)
    sim = _abs_cos(x, codebook.centroids)
    out = []
    for j in range(codebook.k):
        i = int(np.argmax(sim[:, j]))
        sim[i, :] = -1.0
        out.append(i)
    return np.array(out, dtype=int)


def vq_select(split: RotationSplit, k_rel: float = 0.2, seed=0, restarts: int = N_RESTARTS):
    """No-rotation samples plus one representative per axis cluster.

    Returns ``(pairs, codebook)``; the pairs keep the dataset order and
    number ``n_nr + k``.
    """
    if split.n_r == 0:
        raise ValueError("no rotation samples to select from")
    k = codebook_size(split.n_r, k_rel)
    axes = split.axes
    if k == split.n_r:
        book = Codebook(centroids=canonical_hemisphere(axes), k=k, k_rel=k_rel, inertia=0.0)
        chosen = np.arange(k)
    else:
        book = kmeans_axes(axes, k, seed, restarts)
        book = Codebook(book.centroids, k, k_rel, book.inertia)
        chosen = select_indices(axes, book)
    keep = [(int(i), p) for i, p in zip(split.no_rotation_index, split.no_rotation)]
    keep += [(int(split.rotation_index[c]), split.rotation[c][0]) for c in chosen]
    keep.sort(key=lambda t: t[0])
    return [p for _, p in keep], book
