"""JSON problem files.

A problem document has five sections:

* ``spaces``: ``omega0`` plus per-DM ``measurements`` and ``actions``
  entries, each a ``{"name": ..., "points": [...]}`` record (points may
  be numbers, strings, or lists, which load as tuples);
* ``prior``: map from an exogenous point's string form to its mass
  (omitted points carry zero mass);
* ``kernels``: one table per DM, keyed by the history — the exogenous
  label for DM 1, then earlier action labels joined with ``|`` — whose
  value maps measurement labels to probabilities;
* ``cost``: map from ``omega|u1|...|uN`` to the cost value;
* ``annotations`` (optional): subsystem metadata for decoupling checks.

String forms of points must be unique within a space and must not
contain the ``|`` separator.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import MalformedAnnotation, ValidationError
from .infostruct import SubsystemAnnotation
from .model import (
    CostTable,
    FiniteSpace,
    MeasurementKernel,
    Pmf,
    TeamProblem,
)
from .strategic import StrategicMeasure

SEP = "|"


def _to_point(v):
    if isinstance(v, list):
        return tuple(_to_point(x) for x in v)
    return v


def _from_point(p):
    if isinstance(p, tuple):
        return [_from_point(x) for x in p]
    return p


def _label_map(space: FiniteSpace) -> dict:
    out = {}
    for i, p in enumerate(space.points):
        s = str(p)
        if SEP in s:
            raise ValidationError(
                f"point {s!r} in space {space.name!r} contains the "
                f"reserved separator {SEP!r}"
            )
        if s in out:
            raise ValidationError(
                f"space {space.name!r} has two points with string form {s!r}"
            )
        out[s] = i
    return out


def _space_from_dict(d, default_name: str) -> FiniteSpace:
    if not isinstance(d, dict) or "points" not in d:
        raise ValidationError(
            f"space entry for {default_name!r} must be a dict with 'points'"
        )
    return FiniteSpace(
        str(d.get("name", default_name)), [_to_point(p) for p in d["points"]]
    )


def problem_from_dict(doc: dict) -> TeamProblem:
    if not isinstance(doc, dict):
        raise ValidationError("problem document must be a JSON object")
    for section in ("spaces", "prior", "kernels", "cost"):
        if section not in doc:
            raise ValidationError(f"problem document is missing {section!r}")
    spaces = doc["spaces"]
    if "omega0" not in spaces:
        raise ValidationError("spaces section is missing 'omega0'")
    omega = _space_from_dict(spaces["omega0"], "omega0")
    meas = spaces.get("measurements", [])
    acts = spaces.get("actions", [])
    if len(meas) != len(acts) or not meas:
        raise ValidationError(
            "spaces section needs equal-length, nonempty 'measurements' "
            "and 'actions' lists"
        )
    y_spaces = [_space_from_dict(d, f"y{k + 1}") for k, d in enumerate(meas)]
    u_spaces = [_space_from_dict(d, f"u{k + 1}") for k, d in enumerate(acts)]
    n = len(y_spaces)

    omega_idx = _label_map(omega)
    y_idx = [_label_map(s) for s in y_spaces]
    u_idx = [_label_map(s) for s in u_spaces]

    mass = np.zeros(len(omega))
    for key, v in doc["prior"].items():
        if key not in omega_idx:
            raise ValidationError(f"prior names unknown exogenous point {key!r}")
        mass[omega_idx[key]] = float(v)
    prior = Pmf(omega, mass)

    if len(doc["kernels"]) != n:
        raise ValidationError(
            f"{len(doc['kernels'])} kernel tables for {n} DMs"
        )
    kernels = []
    for k in range(1, n + 1):
        shape = (
            (len(omega),)
            + tuple(len(u_spaces[j]) for j in range(k - 1))
            + (len(y_spaces[k - 1]),)
        )
        table = np.zeros(shape)
        for key, row in doc["kernels"][k - 1].items():
            parts = key.split(SEP)
            if len(parts) != k:
                raise ValidationError(
                    f"DM {k} kernel history key {key!r} has {len(parts)} "
                    f"parts, expected {k}"
                )
            if parts[0] not in omega_idx:
                raise ValidationError(
                    f"DM {k} kernel history {key!r} names unknown exogenous "
                    f"point {parts[0]!r}"
                )
            idx = [omega_idx[parts[0]]]
            for j, part in enumerate(parts[1:]):
                if part not in u_idx[j]:
                    raise ValidationError(
                        f"DM {k} kernel history {key!r} names unknown action "
                        f"{part!r} for DM {j + 1}"
                    )
                idx.append(u_idx[j][part])
            for y_label, p in row.items():
                if y_label not in y_idx[k - 1]:
                    raise ValidationError(
                        f"DM {k} kernel row {key!r} names unknown measurement "
                        f"{y_label!r}"
                    )
                table[tuple(idx) + (y_idx[k - 1][y_label],)] = float(p)
        kernels.append(MeasurementKernel(k, table))

    cost_shape = (len(omega),) + tuple(len(s) for s in u_spaces)
    cost_table = np.zeros(cost_shape)
    for key, v in doc["cost"].items():
        parts = key.split(SEP)
        if len(parts) != n + 1:
            raise ValidationError(
                f"cost key {key!r} has {len(parts)} parts, expected {n + 1}"
            )
        if parts[0] not in omega_idx:
            raise ValidationError(
                f"cost key {key!r} names unknown exogenous point {parts[0]!r}"
            )
        idx = [omega_idx[parts[0]]]
        for j, part in enumerate(parts[1:]):
            if part not in u_idx[j]:
                raise ValidationError(
                    f"cost key {key!r} names unknown action {part!r} for DM "
                    f"{j + 1}"
                )
            idx.append(u_idx[j][part])
        cost_table[tuple(idx)] = float(v)
    cost = CostTable(cost_table)

    return TeamProblem(
        omega,
        prior,
        y_spaces,
        u_spaces,
        kernels,
        cost,
        name=str(doc.get("name", "")),
    )


def annotation_from_dict(doc: dict) -> Optional[SubsystemAnnotation]:
    ann = doc.get("annotations")
    if not ann:
        return None
    sub = ann.get("subsystems")
    if not sub:
        return None
    try:
        return SubsystemAnnotation(
            factor_sizes=tuple(int(x) for x in sub["factor_sizes"]),
            dm_state_factors=tuple(
                tuple(int(x) for x in group) for group in sub["dm_state_factors"]
            ),
            shared_factors=tuple(int(x) for x in sub.get("shared_factors", ())),
            dm_noise_factors=tuple(
                tuple(int(x) for x in group)
                for group in sub.get("dm_noise_factors", ())
            ),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedAnnotation(f"bad subsystems annotation: {e}") from e


def problem_to_dict(problem: TeamProblem, annotation=None) -> dict:
    omega_labels = [str(p) for p in problem.omega0.points]
    _label_map(problem.omega0)
    for s in list(problem.y_spaces) + list(problem.u_spaces):
        _label_map(s)

    def space_dict(s: FiniteSpace) -> dict:
        return {"name": s.name, "points": [_from_point(p) for p in s.points]}

    doc = {
        "name": problem.name,
        "spaces": {
            "omega0": space_dict(problem.omega0),
            "measurements": [space_dict(s) for s in problem.y_spaces],
            "actions": [space_dict(s) for s in problem.u_spaces],
        },
        "prior": {
            omega_labels[i]: float(m)
            for i, m in enumerate(problem.prior.mass)
            if m != 0.0
        },
    }
    kernels = []
    for k in range(1, problem.n_dms + 1):
        table = problem.kernels[k - 1].table
        flat = table.reshape(-1, table.shape[-1])
        hist_shape = table.shape[:-1]
        entries = {}
        for b in range(flat.shape[0]):
            idx = np.unravel_index(b, hist_shape)
            parts = [omega_labels[idx[0]]]
            for j in range(1, len(idx)):
                parts.append(str(problem.u_spaces[j - 1].points[idx[j]]))
            row = {
                str(problem.y_spaces[k - 1].points[y]): float(p)
                for y, p in enumerate(flat[b])
                if p != 0.0
            }
            entries[SEP.join(parts)] = row
        kernels.append(entries)
    doc["kernels"] = kernels

    cost = problem.cost.table
    flat = cost.reshape(cost.shape[0], -1)
    u_shape = cost.shape[1:]
    entries = {}
    for w in range(flat.shape[0]):
        for b in range(flat.shape[1]):
            v = flat[w, b]
            if v == 0.0:
                continue
            idx = np.unravel_index(b, u_shape)
            parts = [omega_labels[w]] + [
                str(problem.u_spaces[j].points[idx[j]]) for j in range(len(idx))
            ]
            entries[SEP.join(parts)] = float(v)
    doc["cost"] = entries

    if annotation is not None:
        doc["annotations"] = {
            "subsystems": {
                "factor_sizes": list(annotation.factor_sizes),
                "dm_state_factors": [list(g) for g in annotation.dm_state_factors],
                "shared_factors": list(annotation.shared_factors),
                "dm_noise_factors": [list(g) for g in annotation.dm_noise_factors],
            }
        }
    return doc


@dataclass(frozen=True)
class ProblemFile:
    problem: TeamProblem
    annotation: Optional[SubsystemAnnotation]
    digest: str
    path: str


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def load_problem(path: str) -> ProblemFile:
    with open(path, "rb") as fh:
        data = fh.read()
    doc = json.loads(data.decode("utf-8"))
    problem = problem_from_dict(doc)
    annotation = annotation_from_dict(doc)
    if annotation is not None:
        annotation.validate_against(problem)
    return ProblemFile(problem, annotation, digest_bytes(data), path)


def save_problem(problem: TeamProblem, path: str, annotation=None) -> None:
    doc = problem_to_dict(problem, annotation)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- strategic measures -----------------------------------------------------


def measure_to_dict(measure: StrategicMeasure) -> dict:
    problem = measure.problem
    spaces = [problem.omega0]
    for k in range(problem.n_dms):
        spaces += [problem.y_spaces[k], problem.u_spaces[k]]
    flat = measure.joint.reshape(-1)
    shape = measure.joint.shape
    entries = {}
    for b in np.nonzero(flat)[0]:
        idx = np.unravel_index(b, shape)
        parts = [str(spaces[a].points[i]) for a, i in enumerate(idx)]
        entries[SEP.join(parts)] = float(flat[b])
    return {"joint": entries, "origin": measure.origin}


def measure_from_dict(problem: TeamProblem, doc: dict) -> StrategicMeasure:
    if not isinstance(doc, dict) or "joint" not in doc:
        raise ValidationError("measure document must be a JSON object with 'joint'")
    spaces = [problem.omega0]
    for k in range(problem.n_dms):
        spaces += [problem.y_spaces[k], problem.u_spaces[k]]
    maps = [_label_map(s) for s in spaces]
    joint = np.zeros(problem.joint_shape())
    for key, v in doc["joint"].items():
        parts = key.split(SEP)
        if len(parts) != len(spaces):
            raise ValidationError(
                f"measure key {key!r} has {len(parts)} parts, expected "
                f"{len(spaces)}"
            )
        idx = []
        for a, part in enumerate(parts):
            if part not in maps[a]:
                raise ValidationError(
                    f"measure key {key!r} names unknown point {part!r} in "
                    f"{spaces[a].name!r}"
                )
            idx.append(maps[a][part])
        joint[tuple(idx)] = float(v)
    return StrategicMeasure(problem, joint, origin=doc.get("origin"))


def load_measure(problem: TeamProblem, path: str) -> StrategicMeasure:
    with open(path, "rb") as fh:
        doc = json.loads(fh.read().decode("utf-8"))
    return measure_from_dict(problem, doc)
