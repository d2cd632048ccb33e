"""Numpy implementation of the single-photon coupling kernel.

Reference behaviour for :mod:`lsgate._ckernels`; both must agree to rounding.
"""

import numpy as np


def apply_couplings(psi, rot, mats, coef, up, shifts):
    """Return ``-i H psi`` for the optical coupling Hamiltonian.

    Parameters
    ----------
    psi : complex array (B, S, S, Dm)
        Batch of states, axes ion 1 level, ion 2 level, motional index.
    rot : complex array (Dm,)
        Free motional phases ``exp(i sum_m w_m n_m t)``.
    mats : complex array (2, nb, Dm, Dm)
        Displacement factors ``exp(-i k_b . r_j)`` on the motional space.
    coef : complex array (2, nb, S)
        Time-dependent coupling from ``up`` to each level, per ion and beam.
    up : int
        Index of the upper qubit level.
    shifts : float array (S,)
        Static level energies.
    """
    out = (shifts[:, None] + shifts[None, :])[None, :, :, None] * psi
    rc = rot.conj()
    nb = mats.shape[1]
    for j in range(2):
        p = psi if j == 0 else psi.transpose(0, 2, 1, 3)
        o = out if j == 0 else out.transpose(0, 2, 1, 3)
        c = coef[j]
        if not np.any(c):
            continue
        v = p[:, up] * rc
        acc = np.zeros_like(v)
        for b in range(nb):
            cb = c[b]
            if not np.any(cb):
                continue
            u = (v @ mats[j, b].T) * rot
            o += cb[None, :, None, None] * u[:, None, :, :]
            y = np.tensordot(cb.conj(), p, axes=([0], [1])) * rc
            acc += y @ mats[j, b].conj()
        o[:, up] += acc * rot
    return -1j * out
