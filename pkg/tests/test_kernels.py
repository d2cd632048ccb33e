import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsgate import _kernels_py, kernels
from lsgate.hamiltonian import UP

needs_cython = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernel not built")


def _random_call(rng, batch, levels, dm):
    c = lambda *s: rng.normal(size=s) + 1j * rng.normal(size=s)  # noqa: E731
    psi = c(batch, levels, levels, dm)
    rot = np.exp(1j * rng.uniform(0, 6, dm))
    mats = c(2, 2, dm, dm)
    coef = c(2, 2, levels)
    coef[:, :, :2] = 0
    shifts = rng.normal(size=levels)
    return psi, rot, mats, coef, UP, shifts


@needs_cython
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.sampled_from([4, 5]), st.integers(1, 12))
@settings(max_examples=30, deadline=None)
def test_compiled_matches_reference(seed, batch, levels, dm):
    from lsgate import _ckernels

    call = _random_call(np.random.default_rng(seed), batch, levels, dm)
    ref = _kernels_py.apply_couplings(*call)
    out = _ckernels.apply_couplings(*call)
    assert np.allclose(out, ref, rtol=1e-12, atol=1e-12 * np.max(np.abs(ref)))


def test_fallback_selectable(monkeypatch):
    import importlib

    monkeypatch.setenv("LSGATE_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
        assert mod.apply_couplings is _kernels_py.apply_couplings
    finally:
        monkeypatch.delenv("LSGATE_PURE_PYTHON")
        importlib.reload(kernels)


def test_anti_hermitian_generator():
    # -iH with H Hermitian: <a|-iH b> = -conj(<b|-iH a>)
    rng = np.random.default_rng(3)
    psi, rot, mats, coef, up, shifts = _random_call(rng, 1, 4, 6)
    # Hermiticity needs unitary-ish displacement pairs; use exact unitaries
    q, _ = np.linalg.qr(mats.reshape(-1, 6, 6)[0])
    mats = np.broadcast_to(q, (2, 2, 6, 6)).copy()
    dim = 4 * 4 * 6
    eye = np.eye(dim, dtype=complex).reshape(dim, 4, 4, 6)
    g = kernels.apply_couplings(eye, rot, mats, coef, up, shifts).reshape(dim, dim).T
    assert np.allclose(g, -g.conj().T, atol=1e-10)
