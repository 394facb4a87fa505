# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Viterbi forward/traceback kernel (hot loop of the BER sweeps).

Same contract as dualink._viterbi_py.viterbi_rate2.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def viterbi_rate2(branch_llr, pred_state, pred_sign, input_shift):
    cdef const double[:, ::1] llr = np.ascontiguousarray(branch_llr, dtype=np.float64)
    cdef const int[:, ::1] pred = np.ascontiguousarray(pred_state, dtype=np.int32)
    cdef const double[:, :, ::1] sign = np.ascontiguousarray(pred_sign, dtype=np.float64)
    cdef int shift = input_shift

    cdef Py_ssize_t T = llr.shape[0]
    cdef Py_ssize_t n_states = pred.shape[0]

    cdef cnp.ndarray[cnp.float64_t, ndim=1] pm_arr = np.full(n_states, -1e300)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] new_arr = np.empty(n_states)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] choices_arr = np.empty((T, n_states), dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] bits_arr = np.empty(T, dtype=np.uint8)

    cdef double[::1] pm = pm_arr
    cdef double[::1] new_pm = new_arr
    cdef unsigned char[:, ::1] choices = choices_arr
    cdef unsigned char[::1] bits = bits_arr

    cdef Py_ssize_t t, d
    cdef double l0, l1, c0, c1
    cdef double[::1] tmp

    pm[0] = 0.0
    for t in range(T):
        l0 = llr[t, 0]
        l1 = llr[t, 1]
        for d in range(n_states):
            c0 = pm[pred[d, 0]] + l0 * sign[d, 0, 0] + l1 * sign[d, 0, 1]
            c1 = pm[pred[d, 1]] + l0 * sign[d, 1, 0] + l1 * sign[d, 1, 1]
            if c1 > c0:
                new_pm[d] = c1
                choices[t, d] = 1
            else:
                new_pm[d] = c0
                choices[t, d] = 0
        tmp = pm
        pm = new_pm
        new_pm = tmp

    cdef int state = 0  # zero-tail termination
    for t in range(T - 1, -1, -1):
        bits[t] = state >> shift
        state = pred[state, choices[t, state]]
    return bits_arr
