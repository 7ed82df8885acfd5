"""Optimal and locally-optimal solution search for team problems.

Finite problems: exhaustive scan over deterministic profiles, single-DM
best responses, cyclic person-by-person improvement, and the mixture
relaxation (whose optimum is attained at a deterministic vertex).
Quadrature teams: finite-difference stationarity checks and a sampled
first-order (directional-derivative) test at a candidate optimum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .constants import (
    ENUM_CAP,
    FD_STEP,
    KRAINAK_TOL,
    STATIONARITY_TOL,
)
from .errors import CapExceeded
from .model import (
    DeterministicProfile,
    RandomizedProfile,
    TeamProblem,
    expected_cost,
    expected_cost_batch,
)

_CHUNK = 2048


@dataclass(frozen=True)
class SolveResult:
    """Outcome of an exhaustive scan: optimal value, the first profile
    attaining it in lexicographic order, and its enumeration index."""

    value: float
    profile: DeterministicProfile
    index: int
    n_profiles: int


def _profile_space(problem: TeamProblem):
    """Per-DM iterator factories over policy maps, lexicographic with
    DM 1 most significant and action indices least significant."""
    sizes = []
    for k in range(1, problem.n_dms + 1):
        ny = len(problem.y_spaces[k - 1])
        nu = len(problem.u_spaces[k - 1])
        sizes.append((ny, nu))
    return sizes


def iter_profiles(problem: TeamProblem):
    """Yield every deterministic profile in lexicographic order."""
    sizes = _profile_space(problem)
    per_dm = [itertools.product(range(nu), repeat=ny) for ny, nu in sizes]
    for maps in itertools.product(*per_dm):
        yield DeterministicProfile([np.array(m, dtype=int) for m in maps])


def brute_force(problem: TeamProblem, cap: int = ENUM_CAP) -> SolveResult:
    """Scan all deterministic profiles; return the first minimizer.

    Profiles are evaluated in lexicographic batches so ties resolve to
    the lowest enumeration index deterministically.
    """
    total = problem.n_deterministic_profiles()
    if total > cap:
        raise CapExceeded(total, cap)
    sizes = _profile_space(problem)
    eyes = [np.eye(nu) for _, nu in sizes]

    best_val = np.inf
    best_idx = -1
    best_maps = None
    buf = []
    scanned = 0

    def flush():
        nonlocal best_val, best_idx, best_maps, scanned
        if not buf:
            return
        stacked = []
        for d, (ny, nu) in enumerate(sizes):
            maps = np.array([m[d] for m in buf], dtype=int)
            stacked.append(eyes[d][maps])
        vals = expected_cost_batch(problem, stacked)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val = float(vals[j])
            best_idx = scanned + j
            best_maps = buf[j]
        scanned += len(buf)
        buf.clear()

    per_dm = [itertools.product(range(nu), repeat=ny) for ny, nu in sizes]
    for maps in itertools.product(*per_dm):
        buf.append(maps)
        if len(buf) >= _CHUNK:
            flush()
    flush()

    profile = DeterministicProfile([np.array(m, dtype=int) for m in best_maps])
    return SolveResult(best_val, profile, best_idx, total)


def _policy_matrices(problem: TeamProblem, profile) -> list:
    if isinstance(profile, DeterministicProfile):
        return profile.matrices(problem)
    if isinstance(profile, RandomizedProfile):
        return list(profile.kernels)
    raise TypeError(f"unsupported profile type {type(profile).__name__}")


def response_table(problem: TeamProblem, profile, i: int) -> np.ndarray:
    """Partial expected cost as a function of DM i's measurement and
    action, with every other DM following ``profile``.

    Entry (y, u) is the contribution to the expected cost from outcomes
    where DM i observes y, if it then plays u.  Summing the row minima
    gives the best-response value.
    """
    n = problem.n_dms
    mats = _policy_matrices(problem, profile)
    operands = [problem.prior.mass, [0]]
    for k in range(1, n + 1):
        sub = [0] + [2 * j for j in range(1, k)] + [2 * k - 1]
        operands += [problem.kernels[k - 1].table, sub]
        if k != i:
            operands += [mats[k - 1], [2 * k - 1, 2 * k]]
    operands += [problem.cost.table, [0] + [2 * k for k in range(1, n + 1)]]
    return np.einsum(*operands, [2 * i - 1, 2 * i], optimize=True)


def measurement_marginal(problem: TeamProblem, profile, i: int) -> np.ndarray:
    """Distribution of DM i's measurement (depends only on earlier DMs)."""
    mats = _policy_matrices(problem, profile)
    operands = [problem.prior.mass, [0]]
    for k in range(1, i + 1):
        sub = [0] + [2 * j for j in range(1, k)] + [2 * k - 1]
        operands += [problem.kernels[k - 1].table, sub]
        if k != i:
            operands += [mats[k - 1], [2 * k - 1, 2 * k]]
    return np.einsum(*operands, [2 * i - 1], optimize=True)


def best_response(
    problem: TeamProblem, profile, i: int
) -> tuple:
    """Optimal deterministic policy for DM i against a fixed profile.

    Ties pick the lowest action index; measurements with zero
    probability keep the incumbent action (or action 0 if the incumbent
    is randomized).  The other DMs keep their given policies, so for a
    randomized profile the result is a randomized profile with DM i's
    kernel replaced by a point-mass one.  Returns (new full profile, its
    expected cost).
    """
    table = response_table(problem, profile, i)
    marginal = measurement_marginal(problem, profile, i)
    new_map = np.argmin(table, axis=1)
    if isinstance(profile, DeterministicProfile):
        incumbent = profile.actions[i - 1]
    else:
        incumbent = np.zeros(table.shape[0], dtype=int)
    dead = marginal <= 0
    new_map[dead] = incumbent[dead]

    if isinstance(profile, DeterministicProfile):
        actions = [a.copy() for a in profile.actions]
        actions[i - 1] = new_map
        new_profile = DeterministicProfile(actions)
    else:
        kernels = list(profile.kernels)
        nu = len(problem.u_spaces[i - 1])
        kernels[i - 1] = np.eye(nu)[new_map]
        new_profile = RandomizedProfile(kernels)
    return new_profile, expected_cost(problem, new_profile)


@dataclass(frozen=True)
class PbpResult:
    """Person-by-person iteration outcome with the cost trace recorded
    after every single-DM update (nonincreasing)."""

    profile: DeterministicProfile
    value: float
    trace: tuple
    sweeps: int
    converged: bool


def pbp_iterate(
    problem: TeamProblem,
    init: Optional[DeterministicProfile] = None,
    max_sweeps: int = 200,
) -> PbpResult:
    """Cyclic best responses (DM 1..N per sweep) until a full sweep
    leaves the profile unchanged."""
    if init is None:
        current = DeterministicProfile(
            [np.zeros(len(y), dtype=int) for y in problem.y_spaces]
        )
    else:
        current = init
    value = expected_cost(problem, current)
    trace = [value]
    converged = False
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        changed = False
        for i in range(1, problem.n_dms + 1):
            nxt, val = best_response(problem, current, i)
            if any(
                not np.array_equal(a, b)
                for a, b in zip(nxt.actions, current.actions)
            ):
                changed = True
            current, value = nxt, val
            trace.append(value)
        if not changed:
            converged = True
            break
    return PbpResult(current, value, tuple(trace), sweeps, converged)


@dataclass(frozen=True)
class MixtureResult:
    """Optimum of the mixture relaxation over deterministic profiles.

    The relaxation is linear in the mixing weights, so its optimum sits
    at a vertex; ``support`` holds (profile index, weight) pairs and is
    a single point mass on the first minimizing vertex.
    """

    value: float
    support: tuple
    profile: DeterministicProfile
    n_profiles: int


def mixture_lp(problem: TeamProblem, cap: int = ENUM_CAP) -> MixtureResult:
    """Minimize expected cost over mixtures of deterministic profiles.

    The objective is affine in the weights, so the scan over vertices is
    exact; the result's value always equals the deterministic optimum.
    """
    res = brute_force(problem, cap=cap)
    return MixtureResult(
        res.value, ((res.index, 1.0),), res.profile, res.n_profiles
    )


@dataclass(frozen=True)
class StationarityReport:
    params: tuple
    gradient: tuple
    gradient_inf: float
    node_residual_inf: float
    tol: float
    stationary: bool


def check_stationarity(
    team,
    params,
    fd_step: float = FD_STEP,
    tol: float = STATIONARITY_TOL,
) -> StationarityReport:
    """Two-sided checks that ``params`` is a stationary point of a
    quadrature team: a central finite-difference gradient of the total
    cost, and the per-measurement-node conditional optimality residuals
    supplied by the team."""
    theta = np.asarray(params, dtype=float)
    grad = np.zeros_like(theta)
    for j in range(theta.size):
        up = theta.copy()
        dn = theta.copy()
        up[j] += fd_step
        dn[j] -= fd_step
        grad[j] = (team.expected_cost_params(up) - team.expected_cost_params(dn)) / (
            2 * fd_step
        )
    residuals = team.per_node_stationarity(theta)
    node_inf = max(
        (float(np.abs(r).max()) for r in residuals if np.size(r)), default=0.0
    )
    grad_inf = float(np.abs(grad).max()) if grad.size else 0.0
    return StationarityReport(
        tuple(float(x) for x in theta),
        tuple(float(g) for g in grad),
        grad_inf,
        node_inf,
        tol,
        grad_inf <= tol and node_inf <= tol,
    )


@dataclass(frozen=True)
class KrainakResult:
    """Sampled first-order optimality test at a candidate optimum.

    For each sampled alternative profile, the directional derivative of
    the cost from the candidate toward the sample is computed in closed
    form (it is linear in the parameter difference).  A negative value
    beyond tolerance exhibits a strictly improving direction and refutes
    optimality; otherwise the candidate is "not refuted".
    """

    not_refuted: bool
    min_inner: float
    n_samples: int
    tol: float
    violator: Optional[tuple]


def check_krainak_inequality(
    team,
    params,
    n_samples: int = 1000,
    seed: int = 0,
    scale: float = 1.0,
    tol: float = KRAINAK_TOL,
) -> KrainakResult:
    """Test the first-order inequality against sampled profiles.

    Samples are Gaussian perturbations of ``params``; the inner product
    uses the team's closed-form stationarity moments, so the test is
    exact per sample (no quadrature error beyond the moments)."""
    theta = np.asarray(params, dtype=float)
    g = np.asarray(team.stationarity_moments(theta), dtype=float)
    rng = np.random.default_rng(seed)
    deltas = rng.normal(0.0, scale, size=(n_samples, theta.size))
    inners = deltas @ g
    j = int(np.argmin(inners))
    min_inner = float(inners[j])
    ok = min_inner >= -tol
    violator = None if ok else tuple(float(x) for x in theta + deltas[j])
    return KrainakResult(ok, min_inner, n_samples, tol, violator)
