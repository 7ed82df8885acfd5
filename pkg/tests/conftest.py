"""Shared builders for seeded random team instances."""

import numpy as np

from teamdec.model import (
    CostTable,
    DeterministicProfile,
    FiniteSpace,
    MeasurementKernel,
    Pmf,
    RandomizedProfile,
    TeamProblem,
)


def random_team(
    seed,
    n_omega=3,
    y_sizes=(2, 2),
    u_sizes=(2, 2),
    dynamic=False,
    cost_scale=2.0,
):
    """A fully supported team with Dirichlet kernels and uniform costs.

    With ``dynamic=True``, DM k's measurement kernel depends on all
    earlier actions (the table is drawn over the full history shape);
    otherwise the same row is broadcast over earlier actions, so actions
    never affect measurements.
    """
    rng = np.random.default_rng(seed)
    n = len(y_sizes)
    omega = FiniteSpace("w", list(range(n_omega)))
    y_spaces = [
        FiniteSpace(f"y{k+1}", list(range(y_sizes[k]))) for k in range(n)
    ]
    u_spaces = [
        FiniteSpace(f"u{k+1}", [float(v) for v in range(u_sizes[k])])
        for k in range(n)
    ]
    prior = Pmf(omega, rng.dirichlet(np.ones(n_omega)))
    kernels = []
    for k in range(n):
        hist = (n_omega,) + tuple(u_sizes[:k])
        if dynamic:
            table = rng.dirichlet(np.ones(y_sizes[k]), size=hist)
        else:
            rows = rng.dirichlet(np.ones(y_sizes[k]), size=(n_omega,))
            table = np.broadcast_to(
                rows.reshape((n_omega,) + (1,) * k + (y_sizes[k],)),
                hist + (y_sizes[k],),
            ).copy()
        kernels.append(MeasurementKernel(k + 1, table))
    cost = CostTable(rng.uniform(0.0, cost_scale, size=(n_omega,) + tuple(u_sizes)))
    return TeamProblem(omega, prior, y_spaces, u_spaces, kernels, cost)


def classical_team(seed, n_omega=4, u1=2, u2=2):
    """Static nested deterministic measurements: DM 1 sees a coarse
    function of omega (its parity), DM 2 sees omega itself, and neither
    kernel depends on actions.  classify() labels this classical.

    Measurements here must be deterministic: kernels draw measurements
    independently given (omega, actions), so one DM's stochastic
    measurement can never be reconstructed by a later DM unless the
    randomness lives in omega itself.
    """
    rng = np.random.default_rng(seed)
    omega = FiniteSpace("w", list(range(n_omega)))
    y1_space = FiniteSpace("y1", [0, 1])
    y2_space = FiniteSpace("y2", list(range(n_omega)))
    u_spaces = [
        FiniteSpace("u1", [float(v) for v in range(u1)]),
        FiniteSpace("u2", [float(v) for v in range(u2)]),
    ]
    prior = Pmf(omega, rng.dirichlet(np.ones(n_omega)))
    t1 = np.zeros((n_omega, 2))
    t1[np.arange(n_omega), np.arange(n_omega) % 2] = 1.0
    t2 = np.broadcast_to(
        np.eye(n_omega)[:, None, :], (n_omega, u1, n_omega)
    ).copy()
    cost = CostTable(rng.uniform(0.0, 2.0, size=(n_omega, u1, u2)))
    return TeamProblem(
        omega,
        prior,
        [y1_space, y2_space],
        u_spaces,
        [MeasurementKernel(1, t1), MeasurementKernel(2, t2)],
        cost,
    )


def relay_team(seed, n_omega=3, u1=2, u2=2):
    """A full-recall chain: DM 1 sees a deterministic function of omega;
    DM 2 sees the pair (DM 1's measurement, DM 1's action) exactly.  The
    action edge 1->2 exists and is nested, so classify() labels this
    partially nested."""
    rng = np.random.default_rng(seed)
    omega = FiniteSpace("w", list(range(n_omega)))
    y1_space = FiniteSpace("y1", [0, 1])
    pairs = [(a, b) for a in range(2) for b in range(u1)]
    y2_space = FiniteSpace("y2", pairs)
    u_spaces = [
        FiniteSpace("u1", [float(v) for v in range(u1)]),
        FiniteSpace("u2", [float(v) for v in range(u2)]),
    ]
    prior = Pmf(omega, rng.dirichlet(np.ones(n_omega)))
    t1 = np.zeros((n_omega, 2))
    t1[np.arange(n_omega), np.arange(n_omega) % 2] = 1.0
    t2 = np.zeros((n_omega, u1, len(pairs)))
    for w in range(n_omega):
        for a in range(u1):
            t2[w, a, pairs.index((w % 2, a))] = 1.0
    cost = CostTable(rng.uniform(0.0, 2.0, size=(n_omega, u1, u2)))
    return TeamProblem(
        omega,
        prior,
        [y1_space, y2_space],
        u_spaces,
        [MeasurementKernel(1, t1), MeasurementKernel(2, t2)],
        cost,
    )


def random_profile(problem, seed):
    rng = np.random.default_rng(seed)
    return DeterministicProfile(
        [
            rng.integers(0, len(problem.u_spaces[d]), size=len(problem.y_spaces[d]))
            for d in range(problem.n_dms)
        ]
    )


def random_randomized_profile(problem, seed):
    rng = np.random.default_rng(seed)
    kernels = []
    for d in range(problem.n_dms):
        ny, nu = len(problem.y_spaces[d]), len(problem.u_spaces[d])
        kernels.append(rng.dirichlet(np.ones(nu), size=(ny,)))
    return RandomizedProfile(kernels)


def naive_expected_cost(problem, profile):
    """Literal summation over every joint realization (independent of
    the library's einsum evaluator)."""
    n = problem.n_dms
    total = 0.0
    y_sizes = [len(s) for s in problem.y_spaces]
    u_sizes = [len(s) for s in problem.u_spaces]

    def rec(w, k, ys, us, p):
        nonlocal total
        if k == n:
            total += p * problem.cost.table[(w,) + tuple(us)]
            return
        for y in range(y_sizes[k]):
            py = problem.kernels[k].table[(w,) + tuple(us) + (y,)]
            if py == 0.0:
                continue
            u = profile.actions[k][y]
            rec(w, k + 1, ys + [y], us + [u], p * py)

    for w in range(len(problem.omega0)):
        pw = problem.prior.mass[w]
        if pw > 0:
            rec(w, 0, [], [], pw)
    return total
