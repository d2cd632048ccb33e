# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled single-photon coupling kernel; see ``_kernels_py`` for the contract."""

import numpy as np
cimport numpy as cnp

ctypedef double complex cplx


def apply_couplings(cplx[:, :, :, ::1] psi, cplx[::1] rot, cplx[:, :, :, ::1] mats,
                    cplx[:, :, ::1] coef, int up, double[::1] shifts):
    cdef Py_ssize_t B = psi.shape[0], S = psi.shape[1], Dm = psi.shape[3]
    cdef Py_ssize_t nb = mats.shape[1]
    out_arr = np.empty((B, S, S, Dm), dtype=np.complex128)
    cdef cplx[:, :, :, ::1] out = out_arr
    cdef cplx[::1] v = np.empty(Dm, dtype=np.complex128)
    cdef cplx[::1] u = np.empty(Dm, dtype=np.complex128)
    cdef cplx[::1] y = np.empty(Dm, dtype=np.complex128)
    cdef cplx[::1] acc = np.empty(Dm, dtype=np.complex128)
    cdef Py_ssize_t bt, s1, s2, s, l, j, b, i, k
    cdef cplx c, tmp, mi = -1j
    cdef double sh
    cdef bint active

    with nogil:
        for bt in range(B):
            for s1 in range(S):
                for s2 in range(S):
                    sh = shifts[s1] + shifts[s2]
                    for i in range(Dm):
                        out[bt, s1, s2, i] = sh * psi[bt, s1, s2, i]

        for j in range(2):
            for bt in range(B):
                for s in range(S):  # level of the other ion
                    # forward: up -> l
                    for i in range(Dm):
                        if j == 0:
                            v[i] = psi[bt, up, s, i] * rot[i].conjugate()
                        else:
                            v[i] = psi[bt, s, up, i] * rot[i].conjugate()
                        acc[i] = 0
                    for b in range(nb):
                        active = False
                        for l in range(S):
                            if coef[j, b, l] != 0:
                                active = True
                        if not active:
                            continue
                        for i in range(Dm):
                            tmp = 0
                            for k in range(Dm):
                                tmp = tmp + mats[j, b, i, k] * v[k]
                            u[i] = tmp * rot[i]
                        for l in range(S):
                            c = coef[j, b, l]
                            if c == 0:
                                continue
                            for i in range(Dm):
                                if j == 0:
                                    out[bt, l, s, i] = out[bt, l, s, i] + c * u[i]
                                else:
                                    out[bt, s, l, i] = out[bt, s, l, i] + c * u[i]
                        # adjoint: l -> up
                        for i in range(Dm):
                            y[i] = 0
                        for l in range(S):
                            c = coef[j, b, l].conjugate()
                            if c == 0:
                                continue
                            for i in range(Dm):
                                if j == 0:
                                    y[i] = y[i] + c * psi[bt, l, s, i]
                                else:
                                    y[i] = y[i] + c * psi[bt, s, l, i]
                        for i in range(Dm):
                            y[i] = y[i] * rot[i].conjugate()
                        for k in range(Dm):
                            tmp = y[k]
                            if tmp == 0:
                                continue
                            for i in range(Dm):
                                acc[i] = acc[i] + mats[j, b, k, i].conjugate() * tmp
                    for i in range(Dm):
                        if j == 0:
                            out[bt, up, s, i] = out[bt, up, s, i] + acc[i] * rot[i]
                        else:
                            out[bt, s, up, i] = out[bt, s, up, i] + acc[i] * rot[i]

        for bt in range(B):
            for s1 in range(S):
                for s2 in range(S):
                    for i in range(Dm):
                        out[bt, s1, s2, i] = mi * out[bt, s1, s2, i]
    return out_arr
