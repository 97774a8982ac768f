import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from liesync.groups import make_group

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

GROUP_CASES = [("circle", 1), ("u", 2), ("su", 2), ("su", 3), ("gl_c", 2), ("sl_c", 2), ("so", 3)]


@pytest.fixture(scope="session")
def groups():
    return {f"{fam}{d}": make_group(fam, d) for fam, d in GROUP_CASES}


@pytest.fixture(scope="session")
def su2():
    return make_group("su", 2).descriptor


def coords_in_ball(dim, radius):
    """Coordinate vectors with Euclidean norm <= radius."""
    raw = arrays(np.float64, (dim,), elements=st.floats(-1.0, 1.0))

    def shrink(c):
        n = np.linalg.norm(c)
        return c if n <= 1 else c / n

    return raw.map(shrink).map(lambda c: radius * c)


def kuramoto_spec(nu, kappa=1.0, **kw):
    """Circle model with natural frequencies ``nu`` and the sine coupling."""
    from liesync.dynamics import ModelSpec
    from liesync.interactions import get_phi

    H = 1j * np.asarray(nu, dtype=float)[:, None, None]
    return ModelSpec.build(make_group("circle", 1), kappa, H, get_phi("kuramoto_sin"), **kw)


def phases(theta, t=0.0):
    from liesync.dynamics import EnsembleState

    return EnsembleState(t, np.exp(1j * np.asarray(theta, dtype=float))[:, None, None])


def angles(X):
    return np.unwrap(np.angle(X[..., 0, 0]), axis=0)
