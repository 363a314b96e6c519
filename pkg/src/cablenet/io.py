"""Model files, history CSV export and run manifests.

Models and plans are JSON (human-diffable, schema-checked on load); histories
are CSV with versioned, unit-bearing headers so they feed straight into
plotting tools.  Serialization is canonical: saving a loaded model reproduces
the file byte for byte, and identical runs write byte-identical CSVs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict

import numpy as np

from .assembly import MemberSpec
from .errors import ValidationError
from .geometry import CableNetParams, Topology
from .model import Model, SolverOptions

__all__ = [
    "MODEL_SCHEMA",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
    "write_trajectory_csv",
    "write_tensions_csv",
    "write_rest_lengths_csv",
    "write_manifest",
]

MODEL_SCHEMA = "cablenet-model/1"
TRAJECTORY_SCHEMA = "cablenet-trajectory/1"
TENSIONS_SCHEMA = "cablenet-tensions/1"
REST_LENGTHS_SCHEMA = "cablenet-restlengths/1"
MANIFEST_SCHEMA = "cablenet-manifest/1"


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise ValidationError(f"{path}: {message}")


def _get(mapping: dict, key: str, path: str, kind=None):
    if key not in mapping:
        raise ValidationError(f"{path}.{key}: missing required field")
    value = mapping[key]
    if kind is not None and not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else \
            "/".join(k.__name__ for k in kind)
        raise ValidationError(f"{path}.{key}: expected {names}, "
                              f"got {type(value).__name__}")
    return value


def _float_list(value, path: str, length: int | None = None) -> np.ndarray:
    _require(isinstance(value, list), path, "expected a list of numbers")
    arr = np.empty(len(value))
    for i, x in enumerate(value):
        _require(isinstance(x, (int, float)) and not isinstance(x, bool),
                 f"{path}[{i}]", "expected a number")
        arr[i] = float(x)
    if length is not None:
        _require(len(arr) == length, path, f"expected {length} entries, "
                 f"got {len(arr)}")
    return arr


def model_to_dict(model: Model) -> dict:
    """JSON-ready canonical dictionary for a model."""
    topo, spec = model.topology, model.spec
    doc = {
        "schema": MODEL_SCHEMA,
        "params": None if model.params is None else asdict(model.params),
        "topology": {
            "node_count": topo.node_count,
            "members": topo.members.tolist(),
            "cluster_of": topo.cluster_of.tolist(),
            "cluster_names": list(topo.cluster_names),
            "fixed_nodes": topo.fixed_nodes.tolist(),
        },
        "coords": model.coords.tolist(),
        "materials": {
            "density": spec.density.tolist(),
            "area": spec.area.tolist(),
            "modulus": spec.modulus.tolist(),
            "cluster_area": spec.cluster_area.tolist(),
            "rest_length": spec.rest_length.tolist(),
            "damping_coeff": spec.damping_coeff,
            "damping_exponent": spec.damping_exponent,
            "gravity": spec.gravity.tolist(),
        },
        "point_masses": None if model.point_masses is None
        else model.point_masses.tolist(),
        "options": asdict(model.options),
    }
    return doc


def model_from_dict(doc: dict, path: str = "model") -> Model:
    """Validating inverse of model_to_dict with field-path error messages."""
    _require(isinstance(doc, dict), path, "expected a JSON object")
    schema = _get(doc, "schema", path, str)
    _require(schema == MODEL_SCHEMA, f"{path}.schema",
             f"unsupported schema {schema!r} (expected {MODEL_SCHEMA!r})")

    tdoc = _get(doc, "topology", path, dict)
    tpath = f"{path}.topology"
    node_count = _get(tdoc, "node_count", tpath, int)
    members = _get(tdoc, "members", tpath, list)
    for i, pair in enumerate(members):
        _require(isinstance(pair, list) and len(pair) == 2
                 and all(isinstance(v, int) for v in pair),
                 f"{tpath}.members[{i}]", "expected a [tail, head] index pair")
    cluster_names = _get(tdoc, "cluster_names", tpath, list)
    for i, name in enumerate(cluster_names):
        _require(isinstance(name, str), f"{tpath}.cluster_names[{i}]",
                 "expected a string")
    topology = Topology(
        node_count=node_count,
        members=np.asarray(members, dtype=int).reshape(-1, 2),
        cluster_of=np.asarray(_get(tdoc, "cluster_of", tpath, list), dtype=int),
        cluster_names=list(cluster_names),
        fixed_nodes=np.asarray(_get(tdoc, "fixed_nodes", tpath, list), dtype=int),
    )

    params_doc = doc.get("params")
    params = None
    if params_doc is not None:
        _require(isinstance(params_doc, dict), f"{path}.params",
                 "expected an object or null")
        try:
            params = CableNetParams(**params_doc)
        except TypeError as exc:
            raise ValidationError(f"{path}.params: {exc}") from None

    coords = _float_list(_get(doc, "coords", path, list), f"{path}.coords",
                         3 * node_count)

    mdoc = _get(doc, "materials", path, dict)
    mpath = f"{path}.materials"
    n_e, n_ec = topology.member_count, topology.cluster_count
    spec = MemberSpec(
        density=_float_list(_get(mdoc, "density", mpath, list),
                            f"{mpath}.density", n_e),
        area=_float_list(_get(mdoc, "area", mpath, list), f"{mpath}.area", n_e),
        modulus=_float_list(_get(mdoc, "modulus", mpath, list),
                            f"{mpath}.modulus", n_ec),
        cluster_area=_float_list(_get(mdoc, "cluster_area", mpath, list),
                                 f"{mpath}.cluster_area", n_ec),
        rest_length=_float_list(_get(mdoc, "rest_length", mpath, list),
                                f"{mpath}.rest_length", n_ec),
        damping_coeff=float(_get(mdoc, "damping_coeff", mpath, (int, float))),
        damping_exponent=float(_get(mdoc, "damping_exponent", mpath, (int, float))),
        gravity=_float_list(_get(mdoc, "gravity", mpath, list),
                            f"{mpath}.gravity", 3),
    )

    point_masses = doc.get("point_masses")
    if point_masses is not None:
        point_masses = _float_list(point_masses, f"{path}.point_masses",
                                   node_count)

    odoc = doc.get("options", {})
    _require(isinstance(odoc, dict), f"{path}.options", "expected an object")
    known = set(SolverOptions.__dataclass_fields__)
    for key in odoc:
        _require(key in known, f"{path}.options.{key}", "unknown option")
    options = SolverOptions(**odoc)

    return Model(topology=topology, coords=coords, spec=spec,
                 point_masses=point_masses, params=params, options=options)


def save_model(model: Model, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> Model:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read model file {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return model_from_dict(doc, path=os.path.basename(path))


def _open_writer(path: str, schema: str):
    fh = open(path, "w", newline="")
    fh.write(f"# {schema}\n")
    return fh, csv.writer(fh, lineterminator="\n")


def write_trajectory_csv(path: str, steps, times, coords_rows: np.ndarray) -> None:
    """Per-substep (or per-sample) full nodal coordinates, one node per triple."""
    coords_rows = np.atleast_2d(np.asarray(coords_rows, dtype=float))
    n_nodes = coords_rows.shape[1] // 3
    fh, writer = _open_writer(path, TRAJECTORY_SCHEMA)
    with fh:
        header = ["step", "time_s"]
        for i in range(n_nodes):
            header += [f"node{i}_x_m", f"node{i}_y_m", f"node{i}_z_m"]
        writer.writerow(header)
        for k, row in enumerate(coords_rows):
            writer.writerow([steps[k], repr(float(times[k]))]
                            + [repr(float(v)) for v in row])


def write_tensions_csv(path: str, steps, times, cluster_names,
                       tensions: np.ndarray,
                       residuals: np.ndarray | None = None) -> None:
    tensions = np.atleast_2d(np.asarray(tensions, dtype=float))
    fh, writer = _open_writer(path, TENSIONS_SCHEMA)
    with fh:
        header = ["step", "time_s"] + [f"tension_{n}_N" for n in cluster_names]
        if residuals is not None:
            header.append("residual_N")
        writer.writerow(header)
        for k, row in enumerate(tensions):
            out = [steps[k], repr(float(times[k]))] + [repr(float(v)) for v in row]
            if residuals is not None:
                out.append(repr(float(residuals[k])))
            writer.writerow(out)


def write_rest_lengths_csv(path: str, steps, times, cluster_names,
                           commanded: np.ndarray,
                           applied: np.ndarray | None = None) -> None:
    commanded = np.atleast_2d(np.asarray(commanded, dtype=float))
    fh, writer = _open_writer(path, REST_LENGTHS_SCHEMA)
    with fh:
        header = ["step", "time_s"]
        header += [f"rest_length_{n}_m" for n in cluster_names]
        if applied is not None:
            header += [f"applied_rest_length_{n}_m" for n in cluster_names]
        writer.writerow(header)
        for k, row in enumerate(commanded):
            out = [steps[k], repr(float(times[k]))] + [repr(float(v)) for v in row]
            if applied is not None:
                out += [repr(float(v)) for v in applied[k]]
            writer.writerow(out)


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path: str, command: str, arguments: dict,
                   inputs: list[str], outputs: list[str],
                   seed: int | None = None) -> None:
    """Reproducibility record: command, arguments, seed, file checksums."""
    from . import __version__

    doc = {
        "schema": MANIFEST_SCHEMA,
        "package_version": __version__,
        "command": command,
        "arguments": arguments,
        "seed": seed,
        "inputs": {os.path.basename(p): file_sha256(p) for p in inputs},
        "outputs": {os.path.basename(p): file_sha256(p) for p in outputs},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
