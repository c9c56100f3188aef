# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fold of the perturbation recursion over a block of scans.

Must stay observationally identical to ``_kernels_py.spsa_fold``; the
per-bin expression is evaluated in the same order so both backends agree
bit for bit.
"""
import numpy as np


def spsa_fold(
    const double[::1] theta0,
    const double[::1] intensities,
    const double[::1] means,
    const double[::1] dispersions,
    const double[:, ::1] currents,
    long long start_iteration,
    const Py_ssize_t[::1] control_idx,
):
    cdef Py_ssize_t n_scans = currents.shape[0]
    cdef Py_ssize_t n_bins = currents.shape[1]
    cdef Py_ssize_t n_ctrl = control_idx.shape[0]
    cdef Py_ssize_t i, b, c
    cdef double gain, intensity, iteration

    theta = np.array(theta0, dtype=np.float64, copy=True)
    trace = np.empty((n_scans, n_ctrl), dtype=np.float64)
    cdef double[::1] t = theta
    cdef double[:, ::1] tr = trace

    with nogil:
        for i in range(n_scans):
            intensity = intensities[i]
            iteration = <double>(start_iteration + i + 1)
            gain = (intensity - means[i]) / (dispersions[i] * iteration)
            for b in range(n_bins):
                t[b] = t[b] - gain * (intensity * t[b] - currents[i, b])
            for c in range(n_ctrl):
                tr[i, c] = t[control_idx[c]]
    return theta, trace
