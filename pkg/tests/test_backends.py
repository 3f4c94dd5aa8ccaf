import numpy as np
import pytest

from reprogait import backend
from reprogait import kernels_py


def random_case(rng):
    b = int(rng.integers(1, 5))
    c_in = int(rng.integers(1, 7))
    c_out = int(rng.integers(1, 7))
    t_len = int(rng.integers(1, 30))
    ksize = int(rng.integers(1, 5))
    dilation = int(rng.integers(1, 4))
    x = rng.normal(size=(b, c_in, t_len))
    kernel = rng.normal(size=(c_out, c_in, ksize))
    bias = rng.normal(size=c_out)
    gy = rng.normal(size=(b, c_out, t_len))
    return x, kernel, bias, dilation, gy


class TestPythonKernels:
    def test_forward_matches_unbatched_direct_summation(self):
        import oracles

        rng = np.random.default_rng(0)
        for _ in range(10):
            x, kernel, bias, dilation, _ = random_case(rng)
            y = kernels_py.conv1d_forward(x, kernel, bias, dilation)
            for b in range(x.shape[0]):
                np.testing.assert_allclose(
                    y[b], oracles.conv_direct(x[b], kernel, bias, dilation),
                    atol=1e-12,
                )

    def test_batch_rows_equal_batch_of_one(self):
        rng = np.random.default_rng(1)
        x, kernel, bias, dilation, _ = random_case(rng)
        full = kernels_py.conv1d_forward(x, kernel, bias, dilation)
        for b in range(x.shape[0]):
            single = kernels_py.conv1d_forward(x[b:b + 1], kernel, bias, dilation)
            np.testing.assert_array_equal(full[b], single[0])


@pytest.mark.skipif(
    "cython" not in backend.available_backends(),
    reason="compiled kernels not built",
)
class TestCythonParity:
    def test_forward_parity(self):
        compiled = backend.available_backends()["cython"]
        rng = np.random.default_rng(2)
        for _ in range(30):
            x, kernel, bias, dilation, _ = random_case(rng)
            a = kernels_py.conv1d_forward(x, kernel, bias, dilation)
            b = compiled.conv1d_forward(x, kernel, bias, dilation)
            np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)

    def test_backward_parity(self):
        compiled = backend.available_backends()["cython"]
        rng = np.random.default_rng(3)
        for _ in range(30):
            x, kernel, _, dilation, gy = random_case(rng)
            ga = kernels_py.conv1d_backward(x, kernel, dilation, gy)
            gb = compiled.conv1d_backward(x, kernel, dilation, gy)
            for a, b in zip(ga, gb):
                np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_compiled_accepts_read_only_arrays(self):
        compiled = backend.available_backends()["cython"]
        rng = np.random.default_rng(4)
        x, kernel, bias, dilation, gy = random_case(rng)
        for arr in (x, kernel, bias, gy):
            arr.flags.writeable = False
        compiled.conv1d_forward(x, kernel, bias, dilation)
        compiled.conv1d_backward(x, kernel, dilation, gy)

    def test_backward_matches_finite_differences(self):
        compiled = backend.available_backends()["cython"]
        rng = np.random.default_rng(5)
        x, kernel, bias, dilation, _ = random_case(rng)
        y = compiled.conv1d_forward(x, kernel, bias, dilation)
        gy = rng.normal(size=y.shape)
        gx, gk, gb = compiled.conv1d_backward(x, kernel, dilation, gy)

        def loss():
            return float(
                (compiled.conv1d_forward(x, kernel, bias, dilation) * gy).sum()
            )

        step = 1e-6
        for arr, grad in ((x, gx), (kernel, gk), (bias, gb)):
            flat, gflat = arr.ravel(), grad.ravel()
            for idx in range(0, flat.size, max(1, flat.size // 5)):
                orig = flat[idx]
                flat[idx] = orig + step
                up = loss()
                flat[idx] = orig - step
                down = loss()
                flat[idx] = orig
                fd = (up - down) / (2 * step)
                assert abs(gflat[idx] - fd) <= 1e-4 * max(1.0, abs(fd))


def test_active_backend_reported():
    assert backend.backend_name() in ("python", "cython")
    assert "python" in backend.available_backends()
