import numpy as np
import pytest

from qdslab.bounds import bob_accepts_bound, charlie_rejects_bound


def _sup_min_scan(P_B_c, P_C_c, th, gap, M_u, points=2001, rounds=40):
    """Zooming grid search for max over P_B of min(Bob accepts, Charlie rejects)."""
    lo, hi = P_B_c * th.T_a, P_B_c * (th.T_v - gap)
    best = 0.0
    for _ in range(rounds):
        grid = np.linspace(lo, hi, points)[1:-1] if lo == P_B_c * th.T_a else np.linspace(lo, hi, points)
        vals = [
            min(bob_accepts_bound(x, P_B_c, th.T_a, M_u),
                charlie_rejects_bound(P_C_c * (x / P_B_c + gap), P_C_c, th.T_v, M_u))
            for x in grid
        ]
        i = int(np.argmax(vals))
        best = max(best, vals[i])
        step = grid[1] - grid[0]
        lo, hi = max(grid[i] - step, P_B_c * th.T_a), min(grid[i] + step, P_B_c * (th.T_v - gap))
        if hi - lo <= 1e-15 * hi:
            break
    return best


@pytest.fixture
def sup_min_scan():
    return _sup_min_scan
