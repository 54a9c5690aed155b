import numpy as np
import pytest


def fd_close(analytic, fd, rtol=1e-5, atol=1e-8):
    """Gradient-check comparison: rtol on meaningful entries, atol floor for
    the roundoff noise of central differences near zero."""
    analytic = np.asarray(analytic, dtype=np.float64)
    fd = np.asarray(fd, dtype=np.float64)
    return np.all(np.abs(analytic - fd) <= rtol * np.maximum(np.abs(analytic), np.abs(fd)) + atol)


def central_diff(fn, x, eps=1e-5):
    """Central finite differences of a scalar function over every entry of x."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    flat_x = x.ravel()
    flat_out = out.ravel()
    for k in range(flat_x.size):
        orig = flat_x[k]
        flat_x[k] = orig + eps
        hi = fn(x)
        flat_x[k] = orig - eps
        lo = fn(x)
        flat_x[k] = orig
        flat_out[k] = (hi - lo) / (2 * eps)
    return out


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(20240901)))
