"""Artifact persistence: JSON for structured objects, CSV for traces/tables.

All floats serialize through Python's shortest-roundtrip repr (the json
module default), so dump -> load -> dump is byte-identical and identical
runs produce identical files.  Every artifact carries the rng seed and the
active backend in its metadata.
"""

import csv
import io
import json

import numpy as np

from ._backend import backend_name
from .functional import EnergyReport
from .grid import MapField, TriGrid
from .params import ConfigurationError
from .solver import SolveConfig, SolveResult


class SchemaError(ConfigurationError):
    """An artifact file does not validate against its documented schema."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


def _c2l(arr):
    a = np.asarray(arr, dtype=complex)
    return [[float(v.real), float(v.imag)] for v in a]


def _l2c(lst, path):
    try:
        return np.array([complex(re, im) for re, im in lst], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"expected [[re, im], ...], got invalid entry ({exc})", path)


def dumps(obj):
    """Deterministic JSON text (fixed key order, trailing newline)."""
    return json.dumps(obj, indent=1) + "\n"


def _require(d, key, types, path):
    if key not in d:
        raise SchemaError(f"missing required key {key!r}", path)
    if types is not None and not isinstance(d[key], types):
        raise SchemaError(f"key {key!r} has wrong type {type(d[key]).__name__}", path)
    return d[key]


# ---------------------------------------------------------------------------
# MapField


def map_field_to_dict(map_field, metadata=None):
    md = {"backend": backend_name()}
    if metadata:
        md.update(metadata)
    return {
        "grid": map_field.grid.to_dict(),
        "nodes": _c2l(map_field.values),
        "boundary_mask": [bool(b) for b in map_field.grid.boundary_mask],
        "metadata": md,
    }


def map_field_from_dict(d, path="$"):
    if not isinstance(d, dict):
        raise SchemaError("field dump must be an object", path)
    gd = _require(d, "grid", dict, path)
    for key in ("nx", "ny", "spacing", "domain"):
        _require(gd, key, None, f"{path}.grid")
    if gd["domain"] not in ("unit_square", "disk"):
        raise SchemaError(f"unknown domain {gd['domain']!r}", f"{path}.grid.domain")
    grid = TriGrid.from_dict(gd)
    values = _l2c(_require(d, "nodes", list, path), f"{path}.nodes")
    if values.shape[0] != grid.n_nodes:
        raise SchemaError(
            f"nodes length {values.shape[0]} != grid node count {grid.n_nodes}",
            f"{path}.nodes",
        )
    mask = _require(d, "boundary_mask", list, path)
    if len(mask) != grid.n_nodes:
        raise SchemaError("boundary_mask length mismatch", f"{path}.boundary_mask")
    if not np.array_equal(np.asarray(mask, dtype=bool), grid.boundary_mask):
        raise SchemaError("boundary_mask does not match the grid topology",
                          f"{path}.boundary_mask")
    return MapField(grid, values, values[grid.boundary_mask])


# ---------------------------------------------------------------------------
# results


def solve_result_to_dict(result, rng_seed=None):
    return {
        "map": map_field_to_dict(result.map),
        "report": result.report.to_dict(),
        "iterations": result.iterations,
        "grad_norm": result.grad_norm,
        "log_grad_norm": result.log_grad_norm,
        "status": result.status,
        "continuation_trace": [
            [float(a), float(b), float(c)] for a, b, c in result.continuation_trace
        ],
        "diagnostics": result.diagnostics,
        "metadata": {"rng_seed": rng_seed, "backend": backend_name()},
    }


def solve_result_from_dict(d, path="$"):
    if not isinstance(d, dict):
        raise SchemaError("solve result must be an object", path)
    mf = map_field_from_dict(_require(d, "map", dict, path), f"{path}.map")
    rep_d = _require(d, "report", dict, path)
    report = EnergyReport(
        energy=float(rep_d["energy"]),
        log_energy=float(rep_d["log_energy"]),
        normalized=float(rep_d["normalized"]),
        max_distortion=float(rep_d["max_distortion"]),
        weighted_area=float(rep_d["weighted_area"]),
        admissible=bool(rep_d["admissible"]),
        integrand=rep_d.get("integrand", {}),
    )
    return SolveResult(
        map=mf,
        report=report,
        iterations=int(_require(d, "iterations", int, path)),
        grad_norm=float(d.get("grad_norm", np.nan)),
        log_grad_norm=float(d.get("log_grad_norm", np.nan)),
        status=str(_require(d, "status", str, path)),
        continuation_trace=[tuple(row) for row in d.get("continuation_trace", [])],
        diagnostics=d.get("diagnostics", {}),
    )


def residual_bundle_to_dict(bundle, extra=None):
    out = bundle.to_dict()
    out["metadata"] = {"backend": backend_name(), **(extra or {})}
    return out


def quad_differential_to_dict(phi):
    return {
        "support": phi.support,
        "points": _c2l(phi.points),
        "values": _c2l(phi.values),
        "log_scale": phi.log_scale,
        "l1_norm": phi.l1_norm,
        "dbar_residual_l1": phi.dbar_residual_l1,
        "dbar_residual_linf": phi.dbar_residual_linf,
        "zero_candidates": _c2l(phi.zero_candidates),
        "included": [bool(b) for b in phi.included],
        "grid_h": phi.grid_h,
        "metadata": phi.metadata,
    }


# ---------------------------------------------------------------------------
# CSV


def trace_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rung_param", "log_energy", "log_grad_norm"])
    for a, b, c in rows:
        w.writerow([repr(float(a)), repr(float(b)), repr(float(c))])
    return buf.getvalue()


def triangle_table_csv(grid, columns):
    """CSV of per-triangle scalars; columns is {name: array}."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    w.writerow(["triangle", "centroid_re", "centroid_im"] + names)
    cent = grid.centroids
    for i in range(grid.n_triangles):
        row = [i, repr(float(cent[i].real)), repr(float(cent[i].imag))]
        for nm in names:
            v = columns[nm][i]
            row.append(repr(float(v)))
        w.writerow(row)
    return buf.getvalue()


def kernel_eval_csv(points, evals):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["point", "value", "derivative", "residual"])
    val = np.atleast_1d(np.asarray(evals.value, dtype=float))
    der = np.atleast_1d(np.asarray(evals.derivative, dtype=float))
    res = np.atleast_1d(np.asarray(evals.residual, dtype=float))
    res = np.broadcast_to(res, val.shape)
    for x, v, dv, r in zip(np.atleast_1d(points), val, der, res):
        w.writerow([repr(float(x)), repr(float(v)), repr(float(dv)), repr(float(r))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# run configs


def run_config_from_dict(d, expected_command=None, path="$"):
    """Validate the documented RunConfig schema; returns (command, SolveConfig,
    rng_seed, plot, output)."""
    if not isinstance(d, dict):
        raise SchemaError("run config must be an object", path)
    command = d.get("command")
    if command is not None and expected_command is not None and command != expected_command:
        raise SchemaError(
            f"config command {command!r} does not match subcommand {expected_command!r}",
            f"{path}.command",
        )
    solve_d = d.get("solve", d)
    if not isinstance(solve_d, dict):
        raise SchemaError("solve section must be an object", f"{path}.solve")
    try:
        cfg = SolveConfig.from_dict(solve_d)
    except (ConfigurationError, TypeError, ValueError, KeyError) as exc:
        raise SchemaError(f"invalid solve config: {exc}", f"{path}.solve")
    rng_seed = d.get("rng_seed", 0)
    if not isinstance(rng_seed, int):
        raise SchemaError("rng_seed must be an integer", f"{path}.rng_seed")
    return command, cfg, rng_seed, bool(d.get("plot", False)), d.get("output")
