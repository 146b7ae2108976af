"""Hypothesis strategies shared by the test modules."""

from __future__ import annotations

from hypothesis import strategies as st

from replidyn.game_model import GameParams


@st.composite
def valid_params(draw, sign: float | None = None):
    """Random parameters satisfying u1 > u2 > u3 > u4 and |psi| > |mu|."""
    u4 = draw(st.floats(-20, 20))
    g1, g2, g3 = (draw(st.floats(0.01, 10)) for _ in range(3))
    u3 = u4 + g1
    u2 = u3 + g2
    u1 = u2 + g3
    s = sign if sign is not None else draw(st.sampled_from([-1.0, 1.0]))
    psi = s * draw(st.floats(0.05, 30))
    mu = draw(st.floats(-0.99, 0.99)) * abs(psi)
    return GameParams(u1, u2, u3, u4, psi, mu)


def interior_states(margin: float = 1e-3):
    side = st.floats(margin, 1.0 - margin)
    return st.tuples(side, side)
