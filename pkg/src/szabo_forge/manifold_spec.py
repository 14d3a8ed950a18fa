"""JSON manifold spec files.

A spec names the chart coordinates, lists Christoffel symbols as expression
strings keyed ``"k_ij"`` (1-based; ``"1_12"`` and ``"1_21"`` are the same
symbol), optional ``phi`` entries keyed ``"ij"`` with ``i <= j``, and an
optional sample domain::

    {
      "dimension": 2,
      "coordinates": ["u1", "u2"],
      "christoffel": {"1_11": "-u2", "2_22": "u1"},
      "phi": {"11": "u1^2"},
      "domain": {"box": [[-1, 1], [-1, 1]], "fiber_box": [[-1, 1], [-1, 1]],
                 "samples": 200, "seed": 12648430, "tol": 1e-8}
    }
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .affine import DEFAULT_COORDINATES, AffineConnection
from .expr import Expr, ExprSyntaxError, parse, to_text
from .extension import SymmetricBilinearSpec, fiber_coordinate_names

_GAMMA_KEY = re.compile(r"^([1-9])_([1-9])([1-9])$")
_PHI_KEY = re.compile(r"^([1-9])([1-9])$")
_DOMAIN_KEYS = {"box", "fiber_box", "samples", "seed", "tol"}
_TOP_KEYS = {"dimension", "coordinates", "fiber_coordinates", "christoffel", "phi",
             "domain", "name", "description"}


class SpecError(ValueError):
    """Invalid spec file; the message names the offending location."""


@dataclass
class ManifoldSpec:
    dimension: int
    coordinates: tuple[str, ...]
    christoffel: dict[str, str]
    phi: dict[str, str] = field(default_factory=dict)
    fiber_coordinates: tuple[str, ...] | None = None
    domain: dict = field(default_factory=dict)
    name: str | None = None

    # ---------------------------------------------------------- loading

    @classmethod
    def from_dict(cls, data: dict) -> "ManifoldSpec":
        if not isinstance(data, dict):
            raise SpecError("spec must be a JSON object")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise SpecError(f"unknown top-level keys: {sorted(unknown)}")
        coords = tuple(data.get("coordinates", DEFAULT_COORDINATES))
        dim = data.get("dimension", len(coords))
        if dim != 2:
            raise SpecError(f"dimension must be 2, got {dim!r}")
        if len(coords) != dim or len(set(coords)) != dim:
            raise SpecError("coordinates must list one distinct name per dimension")
        fibers = data.get("fiber_coordinates")
        spec = cls(dimension=dim, coordinates=coords,
                   christoffel=dict(data.get("christoffel", {})),
                   phi=dict(data.get("phi", {})),
                   fiber_coordinates=tuple(fibers) if fibers else None,
                   domain=dict(data.get("domain", {})), name=data.get("name"))
        spec.validate()
        return spec

    @classmethod
    def load(cls, path: str | Path) -> "ManifoldSpec":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise SpecError(f"cannot read spec file {path}: {exc}") from exc
        try:
            data = json.loads(text, object_pairs_hook=_reject_duplicates)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(data)

    def validate(self) -> None:
        self.connection()
        self.phi_spec()
        self.extension_coordinates()
        unknown = set(self.domain) - _DOMAIN_KEYS
        if unknown:
            raise SpecError(f"unknown domain keys: {sorted(unknown)}")

    # ---------------------------------------------------------- views

    def _parse(self, where: str, text) -> Expr:
        if not isinstance(text, str):
            raise SpecError(f"{where}: expression must be a string")
        try:
            return parse(text, self.coordinates)
        except ExprSyntaxError as exc:
            raise SpecError(f"{where}: {exc}") from exc

    def connection(self) -> AffineConnection:
        comps: dict[tuple[int, int, int], Expr] = {}
        origin: dict[tuple[int, int, int], str] = {}
        for key, text in self.christoffel.items():
            match = _GAMMA_KEY.match(key)
            if not match:
                raise SpecError(f"christoffel key {key!r} must look like 'k_ij'")
            k, i, j = (int(g) - 1 for g in match.groups())
            if max(k, i, j) >= self.dimension:
                raise SpecError(f"christoffel key {key!r} out of range")
            e = self._parse(f"christoffel[{key!r}]", text)
            canon = (k, min(i, j), max(i, j))
            if canon in comps and comps[canon] != e:
                raise SpecError(f"christoffel keys {origin[canon]!r} and {key!r} disagree")
            comps[canon] = e
            origin[canon] = key
        return AffineConnection.from_components(self.dimension, comps, self.coordinates)

    def phi_spec(self) -> SymmetricBilinearSpec:
        entries = {}
        for key, text in self.phi.items():
            match = _PHI_KEY.match(key)
            if not match:
                raise SpecError(f"phi key {key!r} must look like 'ij'")
            i, j = (int(g) - 1 for g in match.groups())
            if i > j or j >= self.dimension:
                raise SpecError(f"phi key {key!r} must satisfy 1 <= i <= j <= {self.dimension}")
            entries[(i, j)] = self._parse(f"phi[{key!r}]", text)
        return SymmetricBilinearSpec(self.dimension, entries)

    def extension_coordinates(self) -> tuple[str, ...]:
        fibers = self.fiber_coordinates or fiber_coordinate_names(self.coordinates)
        if len(fibers) != self.dimension or set(fibers) & set(self.coordinates):
            raise SpecError("fiber_coordinates must be distinct from the base coordinates")
        return tuple(fibers)

    # ---------------------------------------------------------- output

    def to_dict(self) -> dict:
        out: dict = {"dimension": self.dimension, "coordinates": list(self.coordinates),
                     "christoffel": dict(sorted(self.christoffel.items()))}
        if self.phi:
            out["phi"] = dict(sorted(self.phi.items()))
        if self.fiber_coordinates:
            out["fiber_coordinates"] = list(self.fiber_coordinates)
        if self.domain:
            out["domain"] = self.domain
        if self.name:
            out["name"] = self.name
        return out

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _reject_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise SpecError(f"duplicate key {key!r}")
        out[key] = value
    return out


def spec_from_connection(c: AffineConnection, name: str | None = None,
                         domain: dict | None = None) -> ManifoldSpec:
    christoffel = {f"{k + 1}_{i + 1}{j + 1}": to_text(e) for (k, i, j), e in c.nonzero().items()}
    return ManifoldSpec(dimension=c.dim, coordinates=tuple(c.coordinates),
                        christoffel=christoffel, domain=dict(domain or {}), name=name)
