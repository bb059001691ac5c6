# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Must agree with ``_pykernels`` (see tests/test_kernels.py)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def assign_accumulate(const double[:, ::1] points, const double[::1] weights,
                      const double[:, ::1] gens):
    """Nearest-generator assignment plus per-generator weighted sums.

    Returns ``(labels, mass, moment, cell_energy)``. Ties go to the smallest
    generator index. Sums run in point order.
    """
    cdef Py_ssize_t m = points.shape[0], k = gens.shape[0]
    cdef Py_ssize_t j, i, best
    cdef double px, py, dx, dy, d2, dbest, w
    labels_arr = np.empty(m, dtype=np.int64)
    mass_arr = np.zeros(k, dtype=np.float64)
    moment_arr = np.zeros((k, 2), dtype=np.float64)
    energy_arr = np.zeros(k, dtype=np.float64)
    cdef cnp.int64_t[::1] labels = labels_arr
    cdef double[::1] mass = mass_arr
    cdef double[:, ::1] moment = moment_arr
    cdef double[::1] cell_energy = energy_arr
    with nogil:
        for j in range(m):
            px = points[j, 0]
            py = points[j, 1]
            best = 0
            dx = px - gens[0, 0]
            dy = py - gens[0, 1]
            dbest = dx * dx + dy * dy
            for i in range(1, k):
                dx = px - gens[i, 0]
                dy = py - gens[i, 1]
                d2 = dx * dx + dy * dy
                if d2 < dbest:
                    dbest = d2
                    best = i
            labels[j] = best
            w = weights[j]
            mass[best] += w
            moment[best, 0] += w * px
            moment[best, 1] += w * py
            cell_energy[best] += w * dbest
    return labels_arr, mass_arr, moment_arr, energy_arr


def pair_correlations(const double[:, ::1] z, const cnp.int64_t[::1] rows,
                      const cnp.int64_t[::1] cols):
    """Dot products ``z[rows[p]] . z[cols[p]]`` of unit-norm centred series."""
    cdef Py_ssize_t n_pairs = rows.shape[0], t_len = z.shape[1]
    cdef Py_ssize_t p, t, a, b, t4 = t_len - t_len % 4
    cdef double s0, s1, s2, s3
    out_arr = np.empty(n_pairs, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for p in range(n_pairs):
            a = rows[p]
            b = cols[p]
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            s3 = 0.0
            for t in range(0, t4, 4):
                s0 += z[a, t] * z[b, t]
                s1 += z[a, t + 1] * z[b, t + 1]
                s2 += z[a, t + 2] * z[b, t + 2]
                s3 += z[a, t + 3] * z[b, t + 3]
            for t in range(t4, t_len):
                s0 += z[a, t] * z[b, t]
            out[p] = (s0 + s1) + (s2 + s3)
    return out_arr
