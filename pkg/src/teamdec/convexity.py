"""Convexity analysis of static team problems on action lattices.

The exogenous information held by the DMs induces partitions of the
exogenous space; the cost conditioned on blocks of the finest common
coarsening (meet) and the coarsest common refinement (join) of those
partitions bounds the team's convexity properties from both sides:

* every join-conditional convex  =>  the team cost is convex in the
  profile (certified Convex);
* some positive-mass meet-conditional non-convex  =>  a common-knowledge
  cell carries a non-convex cost, which converts into two profiles whose
  mixture beats the midpoint policy (certified NotConvex);
* otherwise a direct search over candidate profile pairs either finds a
  midpoint violation (NotConvex) or the certification is Inconclusive.

Midpoints are taken on the action lattice: the test requires uniformly
spaced numeric action grids so that index midpoints are value midpoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .constants import MIDPOINT_TOL, STRICT_RATE
from .errors import NonNumericActions, StaticRequired, ValidationError
from .infostruct import (
    Partition,
    join_all,
    meet_all,
    precedence_graph,
    sigma_field_of,
)
from .model import DeterministicProfile, TeamProblem, expected_cost


class VerdictKind(Enum):
    CONVEX = "convex"
    NOT_CONVEX = "not-convex"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ConditionalCost:
    """Expected cost conditioned on each positive-mass block of a
    partition of the exogenous space; tables are indexed by the joint
    action lattice."""

    partition: Partition
    block_indices: tuple
    masses: tuple
    tables: tuple
    skipped_blocks: tuple  # zero-mass blocks, by index


def conditional_cost(problem: TeamProblem, partition: Partition) -> ConditionalCost:
    if len(partition.ground) != len(problem.omega0):
        raise ValidationError(
            "partition ground has size "
            f"{len(partition.ground)}, expected {len(problem.omega0)}"
        )
    mu = problem.prior.mass
    cost = problem.cost.table
    keep, masses, tables, skipped = [], [], [], []
    for b, block in enumerate(partition.blocks):
        idx = np.fromiter(block, dtype=int)
        mass = float(mu[idx].sum())
        if mass <= 0.0:
            skipped.append(b)
            continue
        w = mu[idx] / mass
        table = np.tensordot(w, cost[idx], axes=(0, 0))
        keep.append(b)
        masses.append(mass)
        tables.append(table)
    return ConditionalCost(
        partition, tuple(keep), tuple(masses), tuple(tables), tuple(skipped)
    )


@dataclass(frozen=True)
class GridViolation:
    index_a: tuple
    index_b: tuple
    index_mid: tuple
    value_a: float
    value_b: float
    value_mid: float
    gap: float  # value_mid - (value_a + value_b)/2, positive = violation


@dataclass(frozen=True)
class GridConvexityReport:
    passed: bool
    strict: bool
    min_margin: float
    n_pairs: int
    violation: Optional[GridViolation]


def _uniform_axes(axes: Sequence) -> list:
    out = []
    for x in axes:
        arr = np.asarray(x, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("each lattice axis must be a nonempty 1-D array")
        if arr.size > 1:
            d = np.diff(arr)
            span = max(abs(float(arr[-1] - arr[0])), 1.0)
            if np.abs(d - d[0]).max() > 1e-9 * span or d[0] <= 0:
                raise ValidationError(
                    "lattice axes must be strictly increasing with uniform spacing"
                )
        out.append(arr)
    return out


def grid_convexity_test(
    values: np.ndarray,
    axes: Sequence,
    tol: float = MIDPOINT_TOL,
    fail_fast: bool = False,
) -> GridConvexityReport:
    """Check midpoint convexity of a table over a uniform action lattice.

    For every pair of lattice points whose index midpoint is on the
    lattice, the table value at the midpoint must not exceed the average
    of the endpoint values by more than ``tol``.  The report also states
    whether the margins were strict at rate STRICT_RATE per squared
    distance (informational only; certification never requires it).
    """
    values = np.asarray(values, dtype=float)
    grids = _uniform_axes(axes)
    if values.shape != tuple(len(g) for g in grids):
        raise ValidationError(
            f"table shape {values.shape} does not match axes "
            f"{tuple(len(g) for g in grids)}"
        )
    flat = values.reshape(-1)
    n = flat.size
    shape = values.shape
    multi = np.stack(
        np.unravel_index(np.arange(n), shape), axis=1
    )  # (n, d) integer coordinates
    coords = np.stack(
        [grids[j][multi[:, j]] for j in range(len(grids))], axis=1
    )  # (n, d) numeric coordinates

    min_margin = np.inf
    strict = True
    n_pairs = 0
    first: Optional[GridViolation] = None

    for a in range(n):
        m_b = multi[a + 1 :]
        if m_b.size == 0:
            continue
        s = multi[a] + m_b
        on_lattice = (s % 2 == 0).all(axis=1)
        if not on_lattice.any():
            continue
        s = s[on_lattice]
        b_idx = np.nonzero(on_lattice)[0] + a + 1
        mid_flat = np.ravel_multi_index(tuple((s // 2).T), shape)
        avg = 0.5 * (flat[a] + flat[b_idx])
        gap = flat[mid_flat] - avg
        n_pairs += len(b_idx)

        margin = -gap
        worst = float(margin.min())
        if worst < min_margin:
            min_margin = worst
        sq = ((coords[a] - coords[b_idx]) ** 2).sum(axis=1)
        if strict and np.any(margin < STRICT_RATE * sq - tol):
            strict = False

        bad = gap > tol
        if bad.any() and first is None:
            j = int(np.argmax(bad))
            first = GridViolation(
                tuple(int(v) for v in multi[a]),
                tuple(int(v) for v in multi[b_idx[j]]),
                tuple(int(v) for v in s[j] // 2),
                float(flat[a]),
                float(flat[b_idx[j]]),
                float(flat[mid_flat[j]]),
                float(gap[j]),
            )
            if fail_fast:
                return GridConvexityReport(False, False, min_margin, n_pairs, first)

    if not np.isfinite(min_margin):
        min_margin = 0.0
    return GridConvexityReport(first is None, strict, float(min_margin), n_pairs, first)


@dataclass(frozen=True)
class CellWitness:
    """A common-knowledge block whose conditional cost fails midpoint
    convexity: actions u_a, u_b with on-lattice midpoint u_mid such that
    the conditional cost at u_mid exceeds the endpoint average."""

    block_index: int
    block_labels: tuple
    u_a: tuple
    u_b: tuple
    u_mid: tuple
    lam: float
    value_mid: float
    value_avg: float
    gap: float


@dataclass(frozen=True)
class PolicyWitness:
    """Two profiles whose cost average is beaten by no single profile at
    the action-lattice midpoint: J(midpoint) > (J_a + J_b)/2."""

    profile_a: DeterministicProfile
    profile_b: DeterministicProfile
    midpoint: DeterministicProfile
    lam: float
    value_a: float
    value_b: float
    value_mid: float
    violation: float


@dataclass(frozen=True)
class BlockRecord:
    block_index: int
    mass: float
    min_margin: float
    strict: bool
    n_pairs: int


@dataclass(frozen=True)
class ConvexityVerdict:
    kind: VerdictKind
    certificate: Optional[tuple]  # BlockRecords over the join partition
    cell_witness: Optional[CellWitness]
    policy_witness: Optional[PolicyWitness]
    notes: tuple


@dataclass(frozen=True)
class MidpointReport:
    value_a: float
    value_b: float
    value_mid: float
    value_avg: float
    violation: float
    lam: float
    midpoint: DeterministicProfile
    snap_error: float


def _numeric_u(problem: TeamProblem) -> list:
    return [u.numeric_values() for u in problem.u_spaces]


def policy_midpoint_test(
    problem: TeamProblem,
    profile_a: DeterministicProfile,
    profile_b: DeterministicProfile,
    lam: float = 0.5,
) -> MidpointReport:
    """Compare the cost of the action-wise midpoint policy against the
    cost average of two profiles.

    The numeric midpoint lam*u_a + (1-lam)*u_b is snapped to the nearest
    action grid point per measurement value (exact when both endpoints
    share parity on a uniform lattice); the realized snap error is
    reported."""
    u_vals = _numeric_u(problem)
    mid_actions = []
    snap_err = 0.0
    for d, vals in enumerate(u_vals):
        va = vals[profile_a.actions[d]]
        vb = vals[profile_b.actions[d]]
        target = lam * va + (1 - lam) * vb
        idx = np.abs(target[:, None] - vals[None, :]).argmin(axis=1)
        snap_err = max(snap_err, float(np.abs(vals[idx] - target).max(initial=0.0)))
        mid_actions.append(idx)
    mid = DeterministicProfile(mid_actions)
    ja = expected_cost(problem, profile_a)
    jb = expected_cost(problem, profile_b)
    jm = expected_cost(problem, mid)
    avg = lam * ja + (1 - lam) * jb
    return MidpointReport(ja, jb, jm, avg, jm - avg, lam, mid, snap_err)


def _mirror(
    problem: TeamProblem,
    profile: DeterministicProfile,
    dms: Optional[Sequence] = None,
) -> DeterministicProfile:
    """Reflect the action maps of the given DMs (default: all) through
    the center of their action grids."""
    chosen = set(range(1, problem.n_dms + 1)) if dms is None else set(dms)
    actions = []
    for d, a in enumerate(profile.actions):
        if d + 1 in chosen:
            actions.append(len(problem.u_spaces[d]) - 1 - a)
        else:
            actions.append(a.copy())
    return DeterministicProfile(actions)


def _mirror_pairs(problem: TeamProblem, profile: DeterministicProfile) -> list:
    """Pair a profile with each of its single-DM mirrors and its full
    mirror.  On symmetric grids the single-DM mirrors are the productive
    candidates: reflecting one DM's policy while the others keep theirs
    breaks the coordination the endpoints relied on, so the midpoint
    policy (the mirrored DM silent, the rest unchanged) can cost far
    more than either endpoint."""
    subsets = [(i,) for i in range(1, problem.n_dms + 1)]
    if problem.n_dms > 1:
        subsets.append(tuple(range(1, problem.n_dms + 1)))
    return [(profile, _mirror(problem, profile, dms)) for dms in subsets]


def default_pair_candidates(
    problem: TeamProblem, seed: int = 0, n_random: int = 8
) -> list:
    """Deterministic candidate profile pairs for the direct midpoint
    search: threshold ("quantizer") profiles at a few magnitudes when
    measurements are numeric, plus seeded random profiles, each paired
    with its partial and full action-grid mirror images (so that for
    symmetric grids the midpoint policy sits at the central action for
    the mirrored DMs)."""
    try:
        u_vals = _numeric_u(problem)
    except NonNumericActions:
        return []
    pairs = []

    y_vals = None
    try:
        y_vals = [y.numeric_values() for y in problem.y_spaces]
    except NonNumericActions:
        y_vals = None
    if y_vals is not None:
        for frac in (0.25, 0.5, 1.0):
            for orient in (1.0, -1.0):
                actions = []
                for d, vals in enumerate(u_vals):
                    signs = orient * np.sign(y_vals[d])
                    if not signs.any():
                        # a DM with no sign information would be pinned
                        # at the grid center, where mirrors do nothing;
                        # explore a nonzero constant instead
                        signs = np.ones_like(signs)
                    target = frac * np.abs(vals).max() * signs
                    idx = np.abs(target[:, None] - vals[None, :]).argmin(axis=1)
                    actions.append(idx)
                pairs.extend(
                    _mirror_pairs(problem, DeterministicProfile(actions))
                )

    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        actions = [
            rng.integers(0, len(problem.u_spaces[d]), size=len(problem.y_spaces[d]))
            for d in range(problem.n_dms)
        ]
        pairs.extend(_mirror_pairs(problem, DeterministicProfile(actions)))
    return pairs


def certify_team_convexity(
    problem: TeamProblem,
    seed: int = 0,
    pair_candidates: Optional[Sequence] = None,
    tol: float = MIDPOINT_TOL,
) -> ConvexityVerdict:
    """Certify convexity or non-convexity of a static team problem.

    Phase 1 tests the cost conditioned on every positive-mass block of
    the join of the DMs' information partitions; all convex certifies
    Convex.  Phase 2 tests the meet conditionals; a violation on a
    positive-mass block certifies NotConvex with a cell witness.  Phase
    3 searches candidate profile pairs for a midpoint-cost violation
    (NotConvex with a policy witness).  Otherwise Inconclusive.

    Requires a static problem (reduce dynamic problems first) with
    deterministic measurements and uniformly spaced numeric action
    grids.
    """
    if precedence_graph(problem).edges:
        raise StaticRequired(
            "convexity certification requires a static problem; apply the "
            "static reduction first"
        )
    u_vals = _numeric_u(problem)
    partitions = [sigma_field_of(problem, k) for k in range(1, problem.n_dms + 1)]
    join = join_all(partitions)
    meet = meet_all(partitions)
    notes = []

    cond = conditional_cost(problem, join)
    records = []
    join_violation = None
    for b, mass, table in zip(cond.block_indices, cond.masses, cond.tables):
        rep = grid_convexity_test(table, u_vals, tol=tol, fail_fast=True)
        if not rep.passed:
            join_violation = (b, rep.violation)
            notes.append(
                f"join block {b} fails midpoint convexity by {rep.violation.gap:.3e}"
            )
            break
        records.append(BlockRecord(b, mass, rep.min_margin, rep.strict, rep.n_pairs))
    if join_violation is None:
        if cond.skipped_blocks:
            notes.append(
                f"{len(cond.skipped_blocks)} zero-mass join blocks skipped"
            )
        return ConvexityVerdict(
            VerdictKind.CONVEX, tuple(records), None, None, tuple(notes)
        )

    cond_m = conditional_cost(problem, meet)
    for b, table in zip(cond_m.block_indices, cond_m.tables):
        rep = grid_convexity_test(table, u_vals, tol=tol, fail_fast=True)
        if rep.passed:
            continue
        v = rep.violation
        labels = tuple(
            problem.omega0.points[i] for i in meet.blocks[b]
        )
        witness = CellWitness(
            b,
            labels,
            tuple(problem.u_spaces[d].points[v.index_a[d]] for d in range(len(u_vals))),
            tuple(problem.u_spaces[d].points[v.index_b[d]] for d in range(len(u_vals))),
            tuple(
                problem.u_spaces[d].points[v.index_mid[d]] for d in range(len(u_vals))
            ),
            0.5,
            v.value_mid,
            0.5 * (v.value_a + v.value_b),
            v.gap,
        )
        notes.append(f"meet block {b} carries a non-convex conditional cost")
        return ConvexityVerdict(VerdictKind.NOT_CONVEX, None, witness, None, tuple(notes))

    notes.append("all positive-mass meet conditionals pass midpoint convexity")
    candidates = (
        list(pair_candidates)
        if pair_candidates is not None
        else default_pair_candidates(problem, seed=seed)
    )
    for pa, pb in candidates:
        rep = policy_midpoint_test(problem, pa, pb)
        if rep.violation > tol:
            witness = PolicyWitness(
                pa,
                pb,
                rep.midpoint,
                rep.lam,
                rep.value_a,
                rep.value_b,
                rep.value_mid,
                rep.violation,
            )
            notes.append(
                f"profile pair with midpoint cost {rep.value_mid:.6g} beats "
                f"average {rep.value_avg:.6g}"
            )
            return ConvexityVerdict(
                VerdictKind.NOT_CONVEX, None, None, witness, tuple(notes)
            )
    notes.append(
        f"no violation among {len(candidates)} candidate profile pairs"
    )
    return ConvexityVerdict(VerdictKind.INCONCLUSIVE, None, None, None, tuple(notes))


def replay_cell_witness(
    problem: TeamProblem, witness: CellWitness, partition: Optional[Partition] = None
) -> MidpointReport:
    """Convert a cell witness into a profile-pair midpoint violation.

    Builds two profiles that play the witness actions on the block (the
    block is common knowledge, hence measurable for every DM) and a
    shared default elsewhere; the resulting midpoint-cost violation
    equals the block mass times the witness gap, up to rounding."""
    if partition is None:
        partition = meet_all(
            [sigma_field_of(problem, k) for k in range(1, problem.n_dms + 1)]
        )
    block = set(partition.blocks[witness.block_index])
    actions_a, actions_b = [], []
    for k in range(1, problem.n_dms + 1):
        table = problem.kernels[k - 1].table
        rows = table.reshape((table.shape[0], -1, table.shape[-1]))[:, 0, :]
        y_of_omega = rows.argmax(axis=1)
        ny = len(problem.y_spaces[k - 1])
        ua = problem.u_spaces[k - 1].index(witness.u_a[k - 1])
        ub = problem.u_spaces[k - 1].index(witness.u_b[k - 1])
        map_a = np.zeros(ny, dtype=int)
        map_b = np.zeros(ny, dtype=int)
        for y in range(ny):
            pre = set(np.nonzero(y_of_omega == y)[0].tolist())
            pre = {w for w in pre if problem.prior.mass[w] > 0}
            if pre and pre <= block:
                map_a[y] = ua
                map_b[y] = ub
        actions_a.append(map_a)
        actions_b.append(map_b)
    return policy_midpoint_test(
        problem,
        DeterministicProfile(actions_a),
        DeterministicProfile(actions_b),
        lam=witness.lam,
    )
