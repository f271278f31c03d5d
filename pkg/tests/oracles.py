"""Independent reference computations used by the tests.

None of these call into the code paths they check.
"""

import itertools

import numpy as np

from ssep.nn import DenseNet


def simplex_grid(m, step):
    """All points of the simplex with coordinates on a ``step`` lattice."""
    n = int(round(1 / step))
    if m == 2:
        k = np.arange(n + 1)
        return np.column_stack([k, n - k]) / n
    if m == 3:
        pts = [(i, j, n - i - j) for i in range(n + 1) for j in range(n + 1 - i)]
        return np.array(pts, dtype=float) / n
    pts = [c + (n - sum(c),) for c in itertools.product(range(n + 1), repeat=m - 1) if sum(c) <= n]
    return np.array(pts, dtype=float) / n


def _project_shifted_simplex(v, floor):
    # projection onto {w >= floor, sum w = 1}
    m = len(v)
    u = np.sort(v - floor)[::-1]
    css = np.cumsum(u) - (1 - m * floor)
    k = np.arange(1, m + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    return np.maximum(v - floor - css[rho] / (rho + 1), 0) + floor


def regularized_objective(w, G, eta):
    w = np.asarray(w, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(w > 0, w * np.log(w), 0.0) - w
    return G @ w + ent.sum() / eta


def ftrl_argmin_oracle(G, eta, grid_step=0.02, floor=1e-300, descent_iters=200, newton_iters=100):
    """argmin over the simplex of ``G.w + (1/eta) sum(w log w - w)``.

    Coarse grid search picks the start, projected gradient descent with Armijo
    backtracking moves it into the basin, and feasible Newton steps on the
    plane ``sum w = 1`` (backtracking to stay positive) polish it to machine
    precision.  The entropy term keeps the minimiser in the interior.
    """
    G = np.asarray(G, float)
    m = len(G)
    grid = simplex_grid(m, grid_step if m <= 3 else 0.1)
    vals = np.array([regularized_objective(w, G, eta) for w in grid])
    w = _project_shifted_simplex(grid[np.argmin(vals)], 1e-12)
    step = 1.0
    for _ in range(descent_iters):
        grad = G + np.log(w) / eta
        f0 = regularized_objective(w, G, eta)
        while True:
            cand = _project_shifted_simplex(w - step * grad, 1e-12)
            if regularized_objective(cand, G, eta) <= f0 + grad @ (cand - w) + (cand - w) @ (cand - w) / (2 * step):
                break
            step *= 0.5
        w = cand
        step *= 2.0
    for _ in range(newton_iters):
        grad = G + np.log(w) / eta
        h_inv = eta * w  # inverse of the diagonal Hessian 1 / (eta w)
        nu = -(h_inv @ grad) / h_inv.sum()
        dw = -h_inv * (grad + nu)
        t = 1.0
        f0 = regularized_objective(w, G, eta)
        while np.any(w + t * dw <= floor) or regularized_objective(w + t * dw, G, eta) > f0 + 0.25 * t * grad @ dw:
            t *= 0.5
            if t < 1e-30:
                return w
        w = w + t * dw
        w = w / w.sum()
        if np.max(np.abs(t * dw)) < 1e-17:
            break
    return w


def brute_force_hindsight(losses, step=1e-3):
    """Minimum total loss over a fine simplex lattice (M <= 3)."""
    m = losses[0][0].shape[1]
    grid = simplex_grid(m, step)
    total = np.zeros(len(grid))
    for F, x_next in losses:
        r = x_next[None, :] - grid @ F.T
        total += np.sum(r * r, axis=1)
    i = np.argmin(total)
    return grid[i], total[i]


def constant_policy(action, n_in=2, hidden=3):
    """A tanh-output dense net that emits ``action`` for every input."""
    W1, b1 = np.zeros((n_in, hidden)), np.zeros(hidden)
    W2, b2 = np.zeros((hidden, 1)), np.array([np.arctanh(action)])
    return DenseNet([n_in, hidden, 1], [W1, W2], [b1, b2], "relu", "tanh")


def linear_feedback_policy(k1, k2, n_in=2):
    """tanh(k1*x1 + k2*x2) written as a 2-1-1 dense net with a linear hidden unit."""
    W1 = np.array([[k1], [k2]] + [[0.0]] * (n_in - 2))
    return DenseNet([n_in, 1, 1], [W1, np.array([[1.0]])], [np.zeros(1), np.zeros(1)], "linear", "tanh")
