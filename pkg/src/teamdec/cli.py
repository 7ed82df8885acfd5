"""Batch command-line front end.

Loads JSON problem files, runs analyses, and emits deterministic JSON
reports: identical inputs and seeds produce byte-identical output.
Every report embeds the tool version, the input digest, and the
tolerance constants in force.  Exit codes: 0 success, 1 analysis error
(e.g. a failed absolute-continuity requirement), 2 parse or validation
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from enum import Enum
from fractions import Fraction
from typing import Optional

import numpy as np

from . import __version__
from .constants import ENUM_CAP, TABLE_CAP, tolerances
from .convexity import certify_team_convexity
from .errors import AnalysisError, CapExceeded, TeamError, ValidationError
from .gallery import (
    decoupled_example,
    example1,
    signaling,
    square_wave,
    witsenhausen,
)
from .infostruct import classify, precedence_graph, information_nested
from .model import (
    DeterministicProfile,
    Pmf,
    TeamProblem,
    expected_cost,
    validate,
)
from .probio import (
    ProblemFile,
    digest_bytes,
    load_measure,
    load_problem,
    problem_to_dict,
)
from .quadrature import QuadratureSpec, snap_profile
from .reduction import static_reduce, verify_equivalence
from .solvers import brute_force, iter_profiles, mixture_lp, pbp_iterate
from .strategic import (
    check_membership_LA,
    check_membership_LM,
    check_membership_LR,
    find_nonconvexity_witness,
)


class InvalidInput(ValidationError):
    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = tuple(violations)


def to_jsonable(obj):
    """Deterministic JSON form: numpy -> python, tuples -> lists,
    Fractions -> strings, enums -> values, dataclasses -> dicts."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if isinstance(obj, DeterministicProfile):
        return {"actions": [to_jsonable(a) for a in obj.actions]}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: to_jsonable(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
        }
    return str(obj)


def profile_fields(problem: TeamProblem, profile: DeterministicProfile) -> dict:
    out = []
    for d, a in enumerate(profile.actions):
        out.append(
            {
                str(problem.y_spaces[d].points[y]): str(
                    problem.u_spaces[d].points[a[y]]
                )
                for y in range(len(a))
            }
        )
    return {"actions_by_measurement": out, "action_indices": [list(map(int, a)) for a in profile.actions]}


def _load(path: str) -> ProblemFile:
    pf = load_problem(path)
    violations = validate(pf.problem)
    if violations:
        raise InvalidInput(
            f"{path} failed validation with {len(violations)} violation(s)",
            violations,
        )
    return pf


def _seeded_profiles(problem: TeamProblem, seed: int, count: int) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        out.append(
            DeterministicProfile(
                [
                    rng.integers(
                        0, len(problem.u_spaces[d]), size=len(problem.y_spaces[d])
                    )
                    for d in range(problem.n_dms)
                ]
            )
        )
    return out


# --------------------------------------------------------------------------
# subcommand handlers
# --------------------------------------------------------------------------


def cmd_validate(args) -> dict:
    with open(args.problem, "rb") as fh:
        data = fh.read()
    pf = load_problem(args.problem)
    violations = validate(pf.problem)
    return {
        "input_digest": digest_bytes(data),
        "is_valid": not violations,
        "violations": [
            {"code": v.code, "where": v.where, "message": v.message}
            for v in violations
        ],
    }


def cmd_classify(args) -> dict:
    pf = _load(args.problem)
    graph = precedence_graph(pf.problem)
    edges = sorted(graph.edges)
    return {
        "input_digest": pf.digest,
        "is_class": classify(pf.problem).value,
        "precedence_edges": [list(e) for e in edges],
        "edge_nested": {
            f"{k}->{i}": information_nested(pf.problem, k, i) for (k, i) in edges
        },
    }


def cmd_reduce(args) -> dict:
    pf = _load(args.problem)
    problem = pf.problem
    references = None
    if args.reference != "uniform":
        with open(args.reference, "rb") as fh:
            doc = json.loads(fh.read().decode("utf-8"))
        if not isinstance(doc, list) or len(doc) != problem.n_dms:
            raise ValidationError(
                f"reference file must hold a list of {problem.n_dms} mass maps"
            )
        references = []
        for d, entry in enumerate(doc):
            mass = np.zeros(len(problem.y_spaces[d]))
            for key, v in entry.items():
                idx = [str(p) for p in problem.y_spaces[d].points].index(key)
                mass[idx] = float(v)
            references.append(Pmf(problem.y_spaces[d], mass))
    reduction = static_reduce(problem, references)
    profiles = _seeded_profiles(problem, args.seed, 5)
    eq = verify_equivalence(reduction, profiles)
    report = {
        "input_digest": pf.digest,
        "references": [
            {
                str(p): float(m)
                for p, m in zip(ref.space.points, ref.mass)
                if m != 0.0
            }
            for ref in reduction.references
        ],
        "equivalence": {
            "profiles": len(profiles),
            "max_gap": eq.max_gap,
            "tol": eq.tol,
            "equivalent": eq.equivalent,
        },
    }
    try:
        reduced = reduction.reduced_problem(cap=args.cap)
        report["reduced_problem"] = problem_to_dict(reduced)
    except CapExceeded as e:
        report["reduced_problem"] = None
        report["reduced_skipped"] = str(e)
    return report


def cmd_solve(args) -> dict:
    pf = _load(args.problem)
    problem = pf.problem
    if args.method == "brute":
        res = brute_force(problem, cap=args.cap)
        return {
            "input_digest": pf.digest,
            "method": "brute",
            "value": res.value,
            "profile": profile_fields(problem, res.profile),
            "profile_index": res.index,
            "n_profiles": res.n_profiles,
        }
    if args.method == "mixture-lp":
        res = mixture_lp(problem, cap=args.cap)
        return {
            "input_digest": pf.digest,
            "method": "mixture-lp",
            "value": res.value,
            "support": [[int(i), float(w)] for i, w in res.support],
            "profile": profile_fields(problem, res.profile),
            "n_profiles": res.n_profiles,
        }
    init = None
    if args.init is not None:
        if args.init.lstrip().startswith("{"):
            doc = json.loads(args.init)
        else:
            with open(args.init, "rb") as fh:
                doc = json.loads(fh.read().decode("utf-8"))
        if not isinstance(doc, dict) or "actions" not in doc:
            raise ValidationError(
                "--init needs a JSON object with an 'actions' list of "
                "per-DM action index arrays"
            )
        init = DeterministicProfile(
            [np.asarray(a, dtype=int) for a in doc["actions"]]
        )
    res = pbp_iterate(problem, init=init)
    return {
        "input_digest": pf.digest,
        "method": "pbp",
        "value": res.value,
        "profile": profile_fields(problem, res.profile),
        "trace": list(res.trace),
        "sweeps": res.sweeps,
        "converged": res.converged,
    }


def cmd_certify(args) -> dict:
    pf = _load(args.problem)
    verdict = certify_team_convexity(pf.problem, seed=args.seed)
    report = {
        "input_digest": pf.digest,
        "verdict": verdict.kind.value,
        "notes": list(verdict.notes),
    }
    if verdict.certificate is not None:
        report["certificate"] = [to_jsonable(r) for r in verdict.certificate]
    if verdict.cell_witness is not None:
        report["cell_witness"] = to_jsonable(verdict.cell_witness)
    if verdict.policy_witness is not None:
        w = verdict.policy_witness
        report["policy_witness"] = {
            "lam": w.lam,
            "value_a": w.value_a,
            "value_b": w.value_b,
            "value_mid": w.value_mid,
            "violation": w.violation,
            "profile_a": profile_fields(pf.problem, w.profile_a),
            "profile_b": profile_fields(pf.problem, w.profile_b),
            "midpoint": profile_fields(pf.problem, w.midpoint),
        }
    return report


def cmd_strategic(args) -> dict:
    pf = _load(args.problem)
    problem = pf.problem
    if args.action == "enumerate":
        total = problem.n_deterministic_profiles()
        if total > args.cap:
            raise CapExceeded(total, args.cap)
        res = brute_force(problem, cap=args.cap)
        values = []
        for i, profile in enumerate(iter_profiles(problem)):
            if i >= args.limit:
                break
            values.append(expected_cost(problem, profile))
        return {
            "input_digest": pf.digest,
            "n_profiles": total,
            "min_value": res.value,
            "argmin_index": res.index,
            "first_values": values,
        }
    if args.action == "check":
        if args.measure is None:
            raise ValidationError("strategic check requires --measure <file>")
        measure = load_measure(problem, args.measure)
        out = {"input_digest": pf.digest}
        for name, checker in (("LR", check_membership_LR), ("LA", check_membership_LA)):
            verdict = checker(measure)
            out[f"member_{name}"] = verdict.member
            out[f"failures_{name}"] = [to_jsonable(f) for f in verdict.failures]
        if not precedence_graph(problem).edges:
            out["member_LM"] = check_membership_LM(measure)
        return out
    witness = find_nonconvexity_witness(problem, cap=args.cap)
    if witness is None:
        return {"input_digest": pf.digest, "found": False}
    return {
        "input_digest": pf.digest,
        "found": True,
        "index_a": witness.index_a,
        "index_b": witness.index_b,
        "lam": witness.lam,
        "midpoint_failures": [to_jsonable(f) for f in witness.verdict.failures],
    }


def _gallery_spec(args) -> Optional[QuadratureSpec]:
    if args.nodes is None:
        return None
    return QuadratureSpec(y1_nodes=args.nodes, w_nodes=args.nodes)


def cmd_gallery(args) -> dict:
    name = args.name
    seed = args.seed
    if name == "witsenhausen":
        bundle = witsenhausen(args.k, args.sigma, _gallery_spec(args))
        report = {"k": bundle.k, "sigma": bundle.sigma}
        check = args.check or "affine-vs-quantizer"
        if check == "affine-vs-quantizer":
            report.update(to_jsonable(bundle.affine_vs_quantizer()))
        elif check == "certify":
            verdict = bundle.certify()
            report["verdict"] = verdict.kind.value
            report["notes"] = list(verdict.notes)
            if verdict.policy_witness is not None:
                report["violation"] = verdict.policy_witness.violation
        elif check == "analytic-pair":
            report["encoder_flip"] = to_jsonable(bundle.encoder_flip_report())
            report["negation_bound"] = to_jsonable(bundle.negation_bound())
        elif check == "equivalence":
            aff = bundle.affine_optimum()
            g, c = aff.gain, bundle.team.affine_decoder_gain(aff.gain)
            enc, dec, a = bundle.team.quantizer_policies()
            profiles = [
                snap_profile(bundle.problem, lambda y: g * y, lambda y: c * y),
                snap_profile(bundle.problem, enc, dec),
                snap_profile(
                    bundle.problem,
                    lambda y: np.zeros_like(y),
                    lambda y: np.zeros_like(y),
                ),
            ] + _seeded_profiles(bundle.problem, seed, 2)
            eq = verify_equivalence(bundle.reduction, profiles)
            report["equivalence"] = {
                "profiles": len(profiles),
                "max_gap": eq.max_gap,
                "tol": eq.tol,
                "equivalent": eq.equivalent,
            }
        else:
            raise ValidationError(f"unknown witsenhausen check {check!r}")
        return report
    if name == "signaling":
        bundle = signaling(args.k, args.sigma, _gallery_spec(args))
        check = args.check or "affine-vs-search"
        report = {"k": bundle.k, "sigma": bundle.sigma}
        if check == "affine-vs-search":
            report.update(to_jsonable(bundle.discretized_search(seed=seed)))
        elif check == "zero-encoder":
            report["value_zero_encoder"] = bundle.zero_encoder_value()
            report["state_variance"] = bundle.sigma**2
        else:
            raise ValidationError(f"unknown signaling check {check!r}")
        return report
    if name == "square-wave":
        fam = square_wave(args.n)
        return {
            "n": fam.n,
            "intervals": [to_jsonable(r) for r in fam.diagnostics()],
            "member_ci": fam.member_ci(),
            "limit_ci": fam.limit_ci(),
        }
    if name == "example1":
        bundle = example1(args.step)
        verdict = bundle.certify()
        raw = bundle.raw_third_cell_convexity()
        u_first, u_rest, value = bundle.scan_optimum()
        return {
            "step": bundle.step,
            "verdict": verdict.kind.value,
            "raw_third_cell_convex": raw.passed,
            "scan_optimum": {
                "u_on_first_cell": u_first,
                "u_elsewhere": u_rest,
                "value": value,
            },
        }
    if name == "decoupled":
        bundle = decoupled_example(coupled=args.coupled)
        joint = bundle.joint_solve()
        subs = bundle.subsystem_values()
        return {
            "coupled": bundle.coupled,
            "verdict": bundle.verdict(),
            "joint_value": joint.value,
            "subsystem_values": list(subs),
            "split_gap": bundle.split_gap(),
        }
    raise ValidationError(f"unknown gallery name {name!r}")


# --------------------------------------------------------------------------
# parser / entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teamdec",
        description="Finite decentralized team decision problems: "
        "validation, classification, reduction, solving, and convexity "
        "certification.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed")
    common.add_argument(
        "--format", choices=["json"], default="json", help="report format"
    )
    common.add_argument("--out", default=None, help="write the report here")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common])
    p.add_argument("problem")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("classify", parents=[common])
    p.add_argument("problem")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("reduce", parents=[common])
    p.add_argument("problem")
    p.add_argument(
        "--reference",
        default="uniform",
        help="'uniform' (default: uniform over row supports) or a JSON file "
        "with one measurement mass map per DM",
    )
    p.add_argument("--cap", type=int, default=TABLE_CAP)
    p.set_defaults(fn=cmd_reduce)

    p = sub.add_parser("solve", parents=[common])
    p.add_argument("problem")
    p.add_argument(
        "--method", choices=["brute", "pbp", "mixture-lp"], required=True
    )
    p.add_argument("--init", default=None, help="JSON profile file for pbp")
    p.add_argument("--cap", type=int, default=ENUM_CAP)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("certify-convexity", parents=[common])
    p.add_argument("problem")
    p.set_defaults(fn=cmd_certify)

    p = sub.add_parser("strategic", parents=[common])
    p.add_argument("action", choices=["enumerate", "check", "witness"])
    p.add_argument("problem")
    p.add_argument("--measure", default=None)
    p.add_argument("--cap", type=int, default=ENUM_CAP)
    p.add_argument("--limit", type=int, default=32)
    p.set_defaults(fn=cmd_strategic)

    p = sub.add_parser("gallery", parents=[common])
    p.add_argument(
        "name",
        choices=["witsenhausen", "signaling", "square-wave", "example1", "decoupled"],
    )
    p.add_argument("--k", type=float, default=0.2)
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--coupled", action="store_true")
    p.add_argument("--check", default=None)
    p.set_defaults(fn=cmd_gallery)

    return parser


def _emit(report: dict, args) -> None:
    text = json.dumps(to_jsonable(report), sort_keys=True, indent=2) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _base_report(args) -> dict:
    return {
        "tool": "teamdec",
        "version": __version__,
        "command": args.command,
        "seed": getattr(args, "seed", 0),
        "tolerances": tolerances(),
        "input_digest": None,
    }


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    report = _base_report(args)
    try:
        report.update(args.fn(args))
    except json.JSONDecodeError as e:
        report["error"] = {
            "type": "ParseError",
            "message": f"{e.msg} (line {e.lineno}, column {e.colno})",
        }
        _emit(report, args)
        return 2
    except FileNotFoundError as e:
        report["error"] = {"type": "FileNotFound", "message": str(e)}
        _emit(report, args)
        return 2
    except InvalidInput as e:
        report["error"] = {
            "type": "ValidationError",
            "message": str(e),
            "violations": [
                {"code": v.code, "where": v.where, "message": v.message}
                for v in e.violations
            ],
        }
        _emit(report, args)
        return 2
    except ValidationError as e:
        report["error"] = {"type": type(e).__name__, "message": str(e)}
        _emit(report, args)
        return 2
    except AnalysisError as e:
        report["error"] = {"type": type(e).__name__, "message": str(e)}
        _emit(report, args)
        return 1
    except TeamError as e:
        report["error"] = {"type": type(e).__name__, "message": str(e)}
        _emit(report, args)
        return 1
    _emit(report, args)
    # `validate` reports an invalid file rather than raising, but an
    # invalid input is still a validation failure for the exit code.
    return 2 if report.get("is_valid") is False else 0


if __name__ == "__main__":
    sys.exit(main())
