"""Pure-numpy versions of the compiled kernels in ``_ckernels.pyx``."""
import numpy as np

_CHUNK = 1 << 16


def assign_accumulate(points, weights, gens):
    points = np.asarray(points, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    gens = np.asarray(gens, dtype=np.float64)
    m, k = len(points), len(gens)
    labels = np.empty(m, dtype=np.int64)
    dbest = np.empty(m, dtype=np.float64)
    step = max(1, _CHUNK // max(k, 1))
    for lo in range(0, m, step):
        diff = points[lo:lo + step, None, :] - gens[None, :, :]
        d2 = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1]
        lab = np.argmin(d2, axis=1)
        labels[lo:lo + step] = lab
        dbest[lo:lo + step] = d2[np.arange(len(lab)), lab]
    mass = np.bincount(labels, weights, minlength=k)
    moment = np.column_stack([
        np.bincount(labels, weights * points[:, 0], minlength=k),
        np.bincount(labels, weights * points[:, 1], minlength=k),
    ])
    cell_energy = np.bincount(labels, weights * dbest, minlength=k)
    return labels, mass, moment, cell_energy


def pair_correlations(z, rows, cols):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty(len(rows), dtype=np.float64)
    step = max(1, (1 << 22) // max(z.shape[1], 1))
    for lo in range(0, len(rows), step):
        r, c = rows[lo:lo + step], cols[lo:lo + step]
        out[lo:lo + step] = np.einsum("ij,ij->i", z[r], z[c])
    return out
