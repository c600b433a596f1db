"""Manifold spec files: strict JSON documents carrying expression strings.

Schema (all expressions are strings in the package grammar):

    {
      "name":   "sphere-s2",
      "dim":    2,
      "coords": ["theta", "phi"],
      "box":    [[0.4, 2.74], [0.0, 6.28]],
      "metric": [["1", "0"], ["0", "sin(theta)^2"]],
      "structure": {                       # optional
        "type": "almost_contact",          # or "almost_complex"
        "phi":  [[...]], "xi": [...], "eta": [...],
        "j":    [[...]], "omega": [...],   # complex case
        "j_convention": "x-to-y"           # complex case, optional
      },
      "constants":   {"alpha": 1.0, "a": 1.0, "warp": "exp(x1/4)"},  # optional
      "conventions": {"d": "half", "J": "x-to-y"},                   # optional
      "expect_fail": false                                           # optional
    }

Loading parses every expression (reporting the JSON path and byte offset
on failure), checks that all variables are declared coordinates, that
the metric is structurally symmetric and positive definite at seeded
sample points, and that any declared structure passes its load-time
axiom checks unless `expect_fail` is set.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from . import expr as ex
from . import sampling, structures, tensor

LOAD_CHECK_SAMPLES = 20
LOAD_CHECK_SEED = 20200107


class SpecFileError(Exception):
    """A spec file failed to parse or validate; message carries the location."""


@dataclass(frozen=True)
class ManifoldSpecFile:
    name: str
    dim: int
    coords: tuple
    box: tuple
    metric: tuple  # parsed Exprs
    structure: dict = field(default_factory=dict)  # parsed structure block
    constants: dict = field(default_factory=dict)
    conventions: dict = field(default_factory=dict)
    expect_fail: bool = False

    def to_manifold(self) -> tensor.ChartedManifold:
        return tensor.ChartedManifold(
            name=self.name, coords=self.coords, box=self.box, metric=self.metric
        )

    def structure_type(self):
        return self.structure.get("type")

    def to_contact_structure(self) -> structures.AlmostContactStructure:
        if self.structure_type() != "almost_contact":
            raise SpecFileError(f"{self.name}: no almost_contact structure block")
        return structures.AlmostContactStructure(
            manifold=self.to_manifold(),
            phi=self.structure["phi"],
            xi=self.structure["xi"],
            eta=self.structure["eta"],
        )

    def to_complex_structure(self) -> structures.AlmostComplexStructure:
        if self.structure_type() != "almost_complex":
            raise SpecFileError(f"{self.name}: no almost_complex structure block")
        return structures.AlmostComplexStructure(
            manifold=self.to_manifold(),
            j=self.structure["j"],
            omega=self.structure["omega"],
            j_convention=self.structure.get("j_convention", "x-to-y"),
        )


def _parse_expr(text, where, coords=None):
    if not isinstance(text, str):
        raise SpecFileError(f"{where}: expected an expression string, got {text!r}")
    try:
        e = ex.parse(text)
    except ex.ExprSyntaxError as err:
        raise SpecFileError(
            f"{where}: syntax error at byte offset {err.offset} in {text!r}"
        ) from err
    except ex.UnknownFunctionError as err:
        raise SpecFileError(f"{where}: unknown function {err.name!r}") from err
    if coords is not None:
        extra = ex.variables(e) - set(coords)
        if extra:
            raise SpecFileError(f"{where}: undeclared coordinates {sorted(extra)}")
    return e


def _parse_matrix(rows, where, dim, coords):
    if len(rows) != dim or any(len(r) != dim for r in rows):
        raise SpecFileError(f"{where}: expected a {dim}x{dim} matrix")
    return tuple(
        tuple(_parse_expr(rows[i][j], f"{where}[{i}][{j}]", coords) for j in range(dim))
        for i in range(dim)
    )


def _parse_vector(comps, where, dim, coords):
    if len(comps) != dim:
        raise SpecFileError(f"{where}: expected {dim} components")
    return tuple(
        _parse_expr(comps[k], f"{where}[{k}]", coords) for k in range(dim)
    )


def load_spec(path) -> ManifoldSpecFile:
    """Load and validate a manifold spec file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise SpecFileError(
            f"{path}: invalid JSON at line {err.lineno} column {err.colno}: {err.msg}"
        ) from err

    for key in ("name", "coords", "box", "metric"):
        if key not in raw:
            raise SpecFileError(f"{path}: missing required key {key!r}")
    name = raw["name"]
    coords = tuple(raw["coords"])
    dim = int(raw.get("dim", len(coords)))
    if dim != len(coords):
        raise SpecFileError(f"{path}: dim={dim} but {len(coords)} coordinates")
    if len(raw["box"]) != dim:
        raise SpecFileError(f"{path}: box does not match dim")
    box = tuple((float(lo), float(hi)) for lo, hi in raw["box"])
    for k, (lo, hi) in enumerate(box):
        if not lo < hi:
            raise SpecFileError(f"{path}: box[{k}] is empty")

    metric = _parse_matrix(raw["metric"], f"{path}:metric", dim, coords)
    for i in range(dim):
        for j in range(dim):
            if metric[i][j] != metric[j][i]:
                raise SpecFileError(
                    f"{path}: metric entry ({i},{j}) is not symmetric with ({j},{i})"
                )

    structure = {}
    block = raw.get("structure")
    if block:
        stype = block.get("type")
        if stype == "almost_contact":
            structure = {
                "type": stype,
                "phi": _parse_matrix(block["phi"], f"{path}:structure.phi", dim, coords),
                "xi": _parse_vector(block["xi"], f"{path}:structure.xi", dim, coords),
                "eta": _parse_vector(block["eta"], f"{path}:structure.eta", dim, coords),
            }
        elif stype == "almost_complex":
            structure = {
                "type": stype,
                "j": _parse_matrix(block["j"], f"{path}:structure.j", dim, coords),
                "omega": _parse_vector(
                    block["omega"], f"{path}:structure.omega", dim, coords
                ),
                "j_convention": block.get("j_convention", "x-to-y"),
            }
        else:
            raise SpecFileError(f"{path}: unknown structure type {stype!r}")

    constants = dict(raw.get("constants", {}))
    if "warp" in constants:
        constants["warp"] = _parse_expr(constants["warp"], f"{path}:constants.warp", coords)

    spec = ManifoldSpecFile(
        name=name,
        dim=dim,
        coords=coords,
        box=box,
        metric=metric,
        structure=structure,
        constants=constants,
        conventions=dict(raw.get("conventions", {})),
        expect_fail=bool(raw.get("expect_fail", False)),
    )
    _validate_runtime(spec, path)
    return spec


def _validate_runtime(spec: ManifoldSpecFile, path):
    """Finite evaluation and positive definiteness at seeded points, plus
    load-time axiom checks for declared structures (unless expect_fail)."""
    M = spec.to_manifold()
    rng = random.Random(LOAD_CHECK_SEED)
    for _ in range(LOAD_CHECK_SAMPLES):
        p = sampling.sample_point(rng, M)
        try:
            G = tensor.metric_at(M, p)
        except ex.ExprError as err:
            raise SpecFileError(f"{path}: metric evaluation failed at {p}: {err}") from err
        except tensor.NotPositiveDefiniteError as err:
            raise SpecFileError(f"{path}: {err}") from err
        if not all(abs(v) < 1e300 for v in G.ravel()):
            raise SpecFileError(f"{path}: metric not finite at {p}")
    if spec.expect_fail or not spec.structure:
        return
    if spec.structure_type() == "almost_contact":
        S = spec.to_contact_structure()
        for rep in (
            structures.check_almost_contact(S, samples=LOAD_CHECK_SAMPLES, seed=LOAD_CHECK_SEED),
            structures.check_metric_compatibility(S, samples=LOAD_CHECK_SAMPLES, seed=LOAD_CHECK_SEED),
        ):
            if not rep.passed():
                raise SpecFileError(
                    f"{path}: load-time {rep.name} check failed "
                    f"(max residual {rep.max_residual:.3e}); "
                    "mark expect_fail to load anyway"
                )
    elif spec.structure_type() == "almost_complex":
        A = spec.to_complex_structure()
        rep = structures.check_hermitian(A, samples=LOAD_CHECK_SAMPLES, seed=LOAD_CHECK_SEED)
        if not rep.passed():
            raise SpecFileError(
                f"{path}: load-time hermitian check failed "
                f"(max residual {rep.max_residual:.3e}); mark expect_fail to load anyway"
            )
