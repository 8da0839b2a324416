import numpy as np
import pytest
from hypothesis import given, strategies as st

from mqsprep import kernels

from conftest import dense_unitary_1q

BACKENDS = ["python"] + (["cython"] if kernels.HAVE_COMPILED else [])


def random_ops(rng, nq, k):
    bitpos = rng.integers(0, nq, k).astype(np.int64)
    cmask = np.zeros(k, dtype=np.uint64)
    cval = np.zeros(k, dtype=np.uint64)
    for g in range(k):
        for q in range(nq):
            if q != bitpos[g] and rng.random() < 0.3:
                cmask[g] |= np.uint64(1 << q)
                if rng.random() < 0.5:
                    cval[g] |= np.uint64(1 << q)
    mats = np.stack([dense_unitary_1q(rng) for _ in range(k)])
    return bitpos, cmask, cval, mats


@pytest.mark.skipif(not kernels.HAVE_COMPILED, reason="compiled kernels not built")
@given(st.integers(0, 2**31 - 1))
def test_apply_ops_backends_agree(seed):
    rng = np.random.default_rng(seed)
    nq = int(rng.integers(1, 7))
    batch = int(rng.integers(1, 4))
    ops = random_ops(rng, nq, 12)
    s0 = rng.normal(size=(1 << nq, batch)) + 1j * rng.normal(size=(1 << nq, batch))
    a, b = s0.copy(), s0.copy()
    kernels.get_backend("cython")[0](a, *ops)
    kernels.get_backend("python")[0](b, *ops)
    assert np.abs(a - b).max() < 1e-12


@pytest.mark.skipif(not kernels.HAVE_COMPILED, reason="compiled kernels not built")
@given(st.integers(0, 2**31 - 1))
def test_qsp_products_backends_agree(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(0, 12))
    nv = int(rng.integers(1, 3))
    ph = rng.uniform(-np.pi, np.pi, d + 1)
    word = rng.integers(0, nv, d).astype(np.int64)
    X = np.ascontiguousarray(rng.uniform(-np.pi, np.pi, (17, nv)))
    a = kernels.get_backend("cython")[1](ph, word, X)
    b = kernels.get_backend("python")[1](ph, word, X)
    assert np.abs(a - b).max() < 1e-13


@pytest.mark.parametrize("name", BACKENDS)
def test_qsp_products_against_matrix_product(name):
    rng = np.random.default_rng(3)
    ph = rng.uniform(-1, 1, 4)
    word = np.array([0, 1, 0], dtype=np.int64)
    x = np.array([[0.3, -1.1]])
    out = kernels.get_backend(name)[1](ph, word, x)[0]
    Z = lambda p: np.diag([np.exp(1j * p), np.exp(-1j * p)])  # noqa: E731
    W = lambda t: np.array([[np.cos(t), 1j * np.sin(t)], [1j * np.sin(t), np.cos(t)]])  # noqa: E731
    ref = Z(ph[0])
    for k, v in enumerate(word):
        ref = ref @ W(x[0, v]) @ Z(ph[k + 1])
    assert np.abs(out - ref).max() < 1e-14


@pytest.mark.parametrize("name", BACKENDS)
def test_apply_ops_rejects_out_of_range_qubits(name):
    apply = kernels.get_backend(name)[0]
    eye = np.eye(2, dtype=complex)[None]
    z = np.zeros(1, dtype=np.uint64)
    with pytest.raises(ValueError):
        apply(np.zeros((8, 1), complex), np.array([3], dtype=np.int64), z, z, eye)
    with pytest.raises(ValueError):
        apply(np.zeros((8, 1), complex), np.array([0], dtype=np.int64), np.array([8], dtype=np.uint64), z, eye)


def test_backend_selection():
    assert kernels.BACKEND in ("cython", "python")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_env_switch_forces_fallback():
    import os
    import subprocess
    import sys
    env = dict(os.environ, MQSPREP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from mqsprep import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
