"""Strategic measures: joints on (omega0, y1, u1, ..., yN, uN).

A deterministic profile induces one such joint; private randomization
induces another; convex combinations of induced joints model common
randomness.  Membership in the individually-randomized class is decided
by two conditional equalities, checked per decision maker:

  (a) the measurement conditional given the past equals the problem's
      kernel row, and
  (b) the action conditional given the past and the current measurement
      depends on the current measurement only.

Point-mass action conditionals sharpen (b) to the deterministic class.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .constants import ENUM_CAP, EQ_TOL, INPUT_MASS_TOL
from .errors import (
    CapExceeded,
    NonMember,
    NotClassical,
    StaticRequired,
    ValidationError,
)
from .model import (
    DeterministicProfile,
    RandomizedProfile,
    TeamProblem,
    induced_joint,
)


@dataclass(frozen=True)
class StrategicMeasure:
    """A normalized joint over the full product space of a problem.

    Nonnegativity and total mass are enforced at construction (masses
    are renormalized exactly when within INPUT_MASS_TOL of 1).  Whether
    the exogenous marginal matches the prior is part of membership
    checking, so perturbed candidates remain constructible.
    """

    problem: TeamProblem
    joint: np.ndarray = field(repr=False)
    origin: Optional[str] = None

    def __init__(self, problem: TeamProblem, joint, origin: Optional[str] = None):
        j = np.asarray(joint, dtype=float)
        if j.shape != problem.joint_shape():
            raise ValidationError(
                f"joint shape {j.shape} != {problem.joint_shape()}"
            )
        if np.any(j < 0) or not np.all(np.isfinite(j)):
            raise ValidationError("joint must be nonnegative and finite")
        total = float(j.sum())
        if abs(total - 1.0) > INPUT_MASS_TOL:
            raise ValidationError(
                f"joint mass {total!r} outside tolerance {INPUT_MASS_TOL}"
            )
        j = np.ascontiguousarray(j / total)
        j.setflags(write=False)
        object.__setattr__(self, "problem", problem)
        object.__setattr__(self, "joint", j)
        object.__setattr__(self, "origin", origin)

    def exogenous_marginal(self) -> np.ndarray:
        axes = tuple(range(1, self.joint.ndim))
        return self.joint.sum(axis=axes)

    def expected_cost(self) -> float:
        n = self.problem.n_dms
        cost_sub = [0] + [2 * k for k in range(1, n + 1)]
        return float(
            np.einsum(
                self.joint, list(range(2 * n + 1)),
                self.problem.cost.table, cost_sub,
                [],
            )
        )


@dataclass(frozen=True)
class FailureRecord:
    """One membership failure: which DM, which condition, where."""

    dm: int  # 0 marks the exogenous-marginal condition
    condition: str  # "prior", "measurement", "policy", or "point-mass"
    where: tuple  # labels of the offending history (and y, u when relevant)
    deviation: float


@dataclass(frozen=True)
class MembershipVerdict:
    member: bool
    failures: tuple

    @staticmethod
    def ok() -> "MembershipVerdict":
        return MembershipVerdict(True, ())


def induce_LA(problem: TeamProblem, profile: DeterministicProfile) -> StrategicMeasure:
    """The joint induced by a deterministic profile."""
    return StrategicMeasure(
        problem, induced_joint(problem, profile), origin="deterministic"
    )


def induce_LR(problem: TeamProblem, profile: RandomizedProfile) -> StrategicMeasure:
    """The joint induced by privately randomized policies."""
    return StrategicMeasure(
        problem, induced_joint(problem, profile), origin="randomized"
    )


def mix(measures: Sequence[StrategicMeasure], weights) -> StrategicMeasure:
    """Convex combination of strategic measures on one problem."""
    if not measures:
        raise ValidationError("nothing to mix")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(measures),):
        raise ValidationError(f"{len(measures)} measures vs weights {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > INPUT_MASS_TOL:
        raise ValidationError("weights must be a probability vector")
    w = w / w.sum()
    base = measures[0].problem
    for m in measures[1:]:
        if m.problem is not base and m.problem.joint_shape() != base.joint_shape():
            raise ValidationError("measures live on different problems")
    joint = sum(wi * m.joint for wi, m in zip(w, measures))
    return StrategicMeasure(base, joint, origin="mixture")


def _label_tuple(problem: TeamProblem, axes_idx: tuple) -> tuple:
    """Labels for a partial joint index (omega0, y1, u1, ...)."""
    spaces = [problem.omega0]
    for k in range(problem.n_dms):
        spaces.append(problem.y_spaces[k])
        spaces.append(problem.u_spaces[k])
    return tuple(spaces[a].points[i] for a, i in enumerate(axes_idx))


def _first_offender(dev: np.ndarray, mask: np.ndarray, tol: float):
    """Lexicographically first index where dev > tol on the mask."""
    viol = (dev > tol) & mask
    if not viol.any():
        return None, float(dev[mask].max(initial=0.0))
    idx = np.argwhere(viol)[0]
    return tuple(int(i) for i in idx), float(dev[viol].max())


def aggregate_policy(measure: StrategicMeasure, dm: int) -> np.ndarray:
    """The measure's action conditional for DM ``dm`` given its own
    measurement (marginalizing the rest of the past).  Zero-mass rows
    come back as point masses on action 0."""
    j, n = measure.joint, measure.problem.n_dms
    y_ax, u_ax = 2 * dm - 1, 2 * dm
    other = tuple(a for a in range(2 * n + 1) if a not in (y_ax, u_ax))
    tab = j.sum(axis=other)  # (|Y_dm|, |U_dm|)
    denom = tab.sum(axis=1, keepdims=True)
    out = np.where(denom > 0, tab / np.where(denom > 0, denom, 1.0), 0.0)
    for r in np.flatnonzero(denom[:, 0] == 0.0):
        out[r, 0] = 1.0
    return out


def check_membership_LR(
    measure: StrategicMeasure, tol: float = EQ_TOL
) -> MembershipVerdict:
    """Decide membership in the individually-randomized class.

    Verifies the exogenous marginal against the prior, then conditions
    (a) and (b) for each decision maker on every positive-mass history.
    """
    problem, j = measure.problem, measure.joint
    n = problem.n_dms
    failures = []

    dev = np.abs(measure.exogenous_marginal() - problem.prior.mass)
    if dev.max(initial=0.0) > tol:
        w = int(np.argmax(dev))
        failures.append(
            FailureRecord(0, "prior", (problem.omega0.points[w],), float(dev[w]))
        )

    for k in range(1, n + 1):
        tail = tuple(range(2 * k + 1, 2 * n + 1))
        with_u = j.sum(axis=tail) if tail else j  # (.., y_k, u_k)
        no_u = with_u.sum(axis=-1)  # (.., y_k)
        hist = no_u.sum(axis=-1)  # (..)

        # (a): measurement conditional equals the kernel row
        kern = problem.kernels[k - 1].table  # (omega, u1..u_{k-1}, y_k)
        # expand kernel over the y-axes of the history
        expand = kern
        for y_axis in range(1, 2 * k - 1, 2):
            expand = np.expand_dims(expand, axis=y_axis)
        cond_y = np.divide(
            no_u,
            hist[..., None],
            out=np.zeros_like(no_u),
            where=hist[..., None] > 0,
        )
        mask = np.broadcast_to((hist > 0)[..., None], no_u.shape)
        dev_a = np.abs(cond_y - np.broadcast_to(expand, no_u.shape))
        where, worst = _first_offender(dev_a, mask, tol)
        if where is not None:
            failures.append(
                FailureRecord(
                    k, "measurement", _label_tuple(problem, where), worst
                )
            )

        # (b): action conditional depends on y_k only
        agg = aggregate_policy(measure, k)  # (|Y_k|, |U_k|)
        cond_u = np.divide(
            with_u,
            no_u[..., None],
            out=np.zeros_like(with_u),
            where=no_u[..., None] > 0,
        )
        mask_u = np.broadcast_to((no_u > 0)[..., None], with_u.shape)
        dev_b = np.abs(cond_u - np.broadcast_to(agg, with_u.shape))
        where, worst = _first_offender(dev_b, mask_u, tol)
        if where is not None:
            failures.append(
                FailureRecord(k, "policy", _label_tuple(problem, where), worst)
            )

    return MembershipVerdict(not failures, tuple(failures))


def check_membership_LA(
    measure: StrategicMeasure, tol: float = EQ_TOL
) -> MembershipVerdict:
    """Membership in the deterministic class: the randomized conditions
    plus point-mass action conditionals on positive-mass measurements."""
    verdict = check_membership_LR(measure, tol=tol)
    failures = list(verdict.failures)
    n = measure.problem.n_dms
    for k in range(1, n + 1):
        y_ax, u_ax = 2 * k - 1, 2 * k
        other = tuple(a for a in range(2 * n + 1) if a not in (y_ax, u_ax))
        tab = measure.joint.sum(axis=other)
        denom = tab.sum(axis=1)
        for y in np.flatnonzero(denom > 0):
            row = tab[y] / denom[y]
            top = float(row.max())
            if top < 1.0 - tol:
                failures.append(
                    FailureRecord(
                        k,
                        "point-mass",
                        (measure.problem.y_spaces[k - 1].points[int(y)],),
                        1.0 - top,
                    )
                )
                break
    return MembershipVerdict(not failures, tuple(failures))


def check_membership_LM(measure: StrategicMeasure, tol: float = EQ_TOL) -> bool:
    """Membership in the conditional-independence relaxation, defined for
    static problems: the (omega0, measurements) marginal must match the
    problem's, and each DM's action given all measurements must depend
    on its own measurement only.
    """
    from .infostruct import precedence_graph

    problem, j = measure.problem, measure.joint
    if precedence_graph(problem).edges:
        raise StaticRequired("the conditional-independence class is defined "
                             "for static problems")
    n = problem.n_dms

    u_axes = tuple(2 * k for k in range(1, n + 1))
    marg_y = j.sum(axis=u_axes)  # (omega, y1..yN)
    operands = [problem.prior.mass, [0]]
    for k in range(1, n + 1):
        kern = problem.kernels[k - 1].table
        # static kernels may still carry action axes; they are constant
        # along them, so take index 0
        rows = kern.reshape(kern.shape[0], -1, kern.shape[-1])[:, 0, :]
        operands += [rows, [0, k]]
    ref = np.einsum(*operands, list(range(n + 1)))
    if np.max(np.abs(marg_y - ref)) > tol:
        return False

    for k in range(1, n + 1):
        drop = (0,) + tuple(2 * m for m in range(1, n + 1) if m != k)
        tab = j.sum(axis=drop)  # (y1, ..., yN, u_k) with u_k last
        # move y_k last-but-one for clean broadcasting: axes are already
        # (y1..yN, u_k); conditional on all measurements:
        denom = tab.sum(axis=-1, keepdims=True)
        cond_all = np.divide(tab, denom, out=np.zeros_like(tab), where=denom > 0)
        own_axes = tuple(a for a in range(n) if a != k - 1)
        own = tab.sum(axis=own_axes)  # (y_k, u_k)
        own_denom = own.sum(axis=-1, keepdims=True)
        cond_own = np.divide(
            own, own_denom, out=np.zeros_like(own), where=own_denom > 0
        )
        shape = [1] * (n + 1)
        shape[k - 1] = cond_own.shape[0]
        shape[-1] = cond_own.shape[1]
        dev = np.abs(cond_all - cond_own.reshape(shape))
        mask = np.broadcast_to(denom > 0, dev.shape)
        if dev[mask].max(initial=0.0) > tol:
            return False
    return True


def enumerate_LA(problem: TeamProblem, cap: int = ENUM_CAP) -> list:
    """All deterministic-profile measures, in lexicographic profile order
    (DM 1's map most significant; within a map, measurement index 0 most
    significant).  Raises CapExceeded when the count would exceed ``cap``."""
    count = problem.n_deterministic_profiles()
    if count > cap:
        raise CapExceeded(count, cap)
    out = []
    per_dm = [
        itertools.product(range(len(problem.u_spaces[k])), repeat=len(problem.y_spaces[k]))
        for k in range(problem.n_dms)
    ]
    for maps in itertools.product(*per_dm):
        prof = DeterministicProfile([np.array(m, dtype=int) for m in maps])
        out.append(induce_LA(problem, prof))
    return out


@dataclass(frozen=True)
class NonconvexityWitness:
    """Two deterministic-profile measures whose midpoint leaves the
    individually-randomized class."""

    index_a: int
    index_b: int
    lam: float
    midpoint: StrategicMeasure
    verdict: MembershipVerdict


def find_nonconvexity_witness(
    problem: TeamProblem, cap: int = ENUM_CAP, lam: float = 0.5
) -> Optional[NonconvexityWitness]:
    """First pair (in lexicographic pair order) of deterministic-profile
    measures whose lam-mixture fails randomized membership; None when
    every pair mixes inside the class."""
    measures = enumerate_LA(problem, cap=cap)
    for a in range(len(measures)):
        for b in range(a + 1, len(measures)):
            mid = mix([measures[a], measures[b]], [lam, 1.0 - lam])
            verdict = check_membership_LR(mid)
            if not verdict.member:
                return NonconvexityWitness(a, b, lam, mid, verdict)
    return None


@dataclass(frozen=True)
class HistoryProfile:
    """Behavioral kernels on full histories: DM k's kernel has axes
    (y1, u1, ..., y_{k-1}, u_{k-1}, y_k, u_k)."""

    kernels: tuple

    def __init__(self, kernels: Sequence):
        mats = []
        for m in kernels:
            arr = np.ascontiguousarray(np.asarray(m, dtype=float))
            arr.setflags(write=False)
            mats.append(arr)
        object.__setattr__(self, "kernels", tuple(mats))


def induce_history_profile(problem: TeamProblem, hp: HistoryProfile) -> StrategicMeasure:
    """Joint induced by history-dependent behavioral kernels."""
    n = problem.n_dms
    operands = [problem.prior.mass, [0]]
    for k in range(1, n + 1):
        kern_sub = [0] + [2 * j for j in range(1, k)] + [2 * k - 1]
        operands += [problem.kernels[k - 1].table, kern_sub]
        operands += [hp.kernels[k - 1], list(range(1, 2 * k + 1))]
    joint = np.einsum(*operands, list(range(2 * n + 1)))
    return StrategicMeasure(problem, joint, origin="history-profile")


def realize_midpoint_classical(
    problem: TeamProblem,
    p1: StrategicMeasure,
    p2: StrategicMeasure,
    lam: float = 0.5,
) -> HistoryProfile:
    """Realize a mixture of two randomized-class measures as one
    history-dependent behavioral profile, on a problem whose information
    is nested along the decision order.

    The returned kernels are the mixture's own action conditionals given
    the full measurement/action past; re-inducing with them reproduces
    the mixture exactly (chain rule), which is what makes the mixture
    implementable once each DM also sees its predecessors' data.
    """
    from .infostruct import nested_along_order

    if not nested_along_order(problem):
        raise NotClassical(
            "information is not nested along the decision order"
        )
    for name, p in (("first", p1), ("second", p2)):
        if not check_membership_LR(p).member:
            raise NonMember(f"{name} measure is not individually randomized")
    if not (0.0 <= lam <= 1.0):
        raise ValidationError(f"lambda {lam} outside [0, 1]")
    mixed = mix([p1, p2], [lam, 1.0 - lam])
    n = problem.n_dms
    kernels = []
    for k in range(1, n + 1):
        tail = tuple(range(2 * k + 1, 2 * n + 1))
        t = mixed.joint.sum(axis=tail) if tail else mixed.joint
        t = t.sum(axis=0)  # drop omega0: kernels see data only
        denom = t.sum(axis=-1, keepdims=True)
        kern = np.divide(t, denom, out=np.zeros_like(t), where=denom > 0)
        flat = kern.reshape(-1, kern.shape[-1])
        for r in np.flatnonzero(flat.sum(axis=1) == 0.0):
            flat[r, 0] = 1.0  # unreachable history: arbitrary fixed action
        kernels.append(kern)
    return HistoryProfile(kernels)


@dataclass(frozen=True)
class ThresholdPolicy:
    """Inverse-CDF realization of one behavioral kernel.

    For each measurement index the unit interval is split into
    consecutive half-open pieces following the action order; the piece
    for action u has length exactly equal to the kernel mass at u.
    """

    kernel: np.ndarray
    cum: np.ndarray  # per-row cumulative masses, shape (|Y|, |U|)

    def action(self, r: float, y: int) -> int:
        """Action index for randomization draw r in [0, 1)."""
        if not (0.0 <= r < 1.0):
            raise ValidationError(f"draw {r} outside [0, 1)")
        j = int(np.searchsorted(self.cum[y], r, side="right"))
        if j >= self.kernel.shape[1]:
            j = int(np.flatnonzero(self.kernel[y] > 0)[-1])
        return j

    def intervals(self, y: int) -> list:
        """Positive-length pieces as (low, mass, action-index); the piece
        covers [low, low + mass) and its reported length is the kernel
        mass itself."""
        out = []
        lo = 0.0
        for u, m in enumerate(self.kernel[y]):
            if m > 0.0:
                out.append((lo, float(m), u))
            lo = float(self.cum[y, u])
        return out


def realize_kernel_as_function(kernel) -> ThresholdPolicy:
    """Uniform-randomization realization of a behavioral kernel: a map
    (draw, measurement) -> action whose draw-measure of each action set
    equals the kernel mass, by construction of the intervals."""
    k = np.asarray(kernel, dtype=float)
    if k.ndim != 2:
        raise ValidationError("kernel must be a (|Y|, |U|) array")
    if np.any(k < 0) or np.any(np.abs(k.sum(axis=1) - 1.0) > INPUT_MASS_TOL):
        raise ValidationError("kernel rows must be probability vectors")
    k = k / k.sum(axis=1, keepdims=True)
    return ThresholdPolicy(k, np.cumsum(k, axis=1))


def uniform_realization_mixture(problem: TeamProblem, profile: RandomizedProfile) -> list:
    """Write a randomized profile as a finite mixture of deterministic
    profiles using the threshold realization: per DM, the unit interval
    splits at the union of that DM's row breakpoints; a joint interval
    combination picks one deterministic map per DM.

    Returns [(weight, DeterministicProfile), ...] with weights summing
    to 1 up to float rounding.
    """
    per_dm = []
    for k, kern in enumerate(profile.matrices(problem)):
        pol = realize_kernel_as_function(kern)
        cuts = np.unique(np.concatenate([[0.0], pol.cum.ravel(), [1.0]]))
        cuts = cuts[(cuts >= 0.0) & (cuts <= 1.0)]
        pieces = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if hi <= lo:
                continue
            mid_draw = lo  # the piece lies inside one action segment per row
            actions = [pol.action(mid_draw, y) for y in range(kern.shape[0])]
            pieces.append((float(hi - lo), np.array(actions, dtype=int)))
        per_dm.append(pieces)
    out = []
    for combo in itertools.product(*per_dm):
        w = 1.0
        maps = []
        for weight, actions in combo:
            w *= weight
            maps.append(actions)
        if w > 0.0:
            out.append((w, DeterministicProfile(maps)))
    return out
