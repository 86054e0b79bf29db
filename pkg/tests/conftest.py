import numpy as np
from hypothesis import HealthCheck, settings, strategies as st

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def amplitude_grids(draw, max_cut=5):
    """Random normalized two-mode amplitude grid."""
    ka = draw(st.integers(0, max_cut))
    kb = draw(st.integers(0, max_cut))
    size = (ka + 1) * (kb + 1)
    re = draw(st.lists(finite, min_size=size, max_size=size))
    im = draw(st.lists(finite, min_size=size, max_size=size))
    c = (np.array(re) + 1j * np.array(im)).reshape(ka + 1, kb + 1)
    norm = np.linalg.norm(c)
    if norm < 1e-3:
        c = np.zeros_like(c)
        c[0, 0] = 1.0
        return c
    return c / norm


@st.composite
def single_mode_amps(draw, max_cut=12, complex_=True):
    k = draw(st.integers(0, max_cut))
    re = np.array(draw(st.lists(finite, min_size=k + 1, max_size=k + 1)))
    im = np.array(draw(st.lists(finite, min_size=k + 1, max_size=k + 1))) if complex_ else 0.0
    c = re + 1j * im
    norm = np.linalg.norm(c)
    if norm < 1e-3:
        c = np.zeros(k + 1, dtype=complex)
        c[0] = 1.0
        return c
    return c / norm
