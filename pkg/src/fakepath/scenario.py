"""Scenario documents: loading, validation and canonical serialization.

A scenario is a YAML mapping with five optional blocks (``system``, ``scene``,
``design``, ``sweep``, ``outputs``). The structure is described by
``scenario.schema.json`` shipped with the package; unknown keys are rejected.
Loading fills every default with a concrete value, so dumping a loaded
scenario and loading it again gives the same object.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path as FsPath

import jsonschema
import yaml

from .channel import Scene, SystemConfig, path_geometry, separation_thresholds
from .errors import FakePathError, ScenarioError
from .precoder import FakePathDesign, SharedInfo, design_feasibility


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot (``15e6``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def load_schema() -> dict:
    text = resources.files("fakepath").joinpath("scenario.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class SweepSettings:
    snr_db: tuple[float, ...] = (-10.0, 0.0, 10.0, 20.0)
    mu: tuple[float, ...] = (0.05, 0.1, 0.2, 0.5, 1.0)
    delta_fractions: tuple[float, ...] = (0.025, 0.05, 0.1, 0.2, 0.5)
    multiset_fraction: float = 0.1
    figure_snr_db: float = 0.0
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class OutputSettings:
    path: str | None = None
    format: str = "csv"


@dataclass(frozen=True)
class ScenarioSpec:
    system: SystemConfig = field(default_factory=SystemConfig)
    scene: Scene = field(default_factory=Scene)
    design: FakePathDesign | None = None
    alias_angles: bool = False
    sweep: SweepSettings = field(default_factory=SweepSettings)
    outputs: OutputSettings = field(default_factory=OutputSettings)

    def __post_init__(self):
        if self.design is None:
            object.__setattr__(self, "design", default_design(self.system))

    def to_dict(self) -> dict:
        s = self.system
        return {
            "system": {"N": s.N, "Nt": s.Nt, "G": s.G, "B": s.B, "phi_c": s.phi_c, "d": s.d, "c": s.c},
            "scene": {
                "alice": list(self.scene.p),
                "receiver": list(self.scene.v0),
                "scatterers": [list(v) for v in self.scene.scatterers],
            },
            "design": {
                "shared_info": self.design.shared_info.to_list(),
                "normalize_power": self.design.normalize_power,
                "alias_angles": self.alias_angles,
            },
            "sweep": {
                "snr_db": list(self.sweep.snr_db),
                "mu": list(self.sweep.mu),
                "delta_fractions": list(self.sweep.delta_fractions),
                "multiset_fraction": self.sweep.multiset_fraction,
                "figure_snr_db": self.sweep.figure_snr_db,
                "seed": self.sweep.seed,
                "workers": self.sweep.workers,
            },
            "outputs": {"path": self.outputs.path, "format": self.outputs.format},
        }

    def with_overrides(self, seed=None, normalize_power=None, out=None, fmt=None) -> "ScenarioSpec":
        spec = self
        if seed is not None:
            spec = replace(spec, sweep=replace(spec.sweep, seed=int(seed)))
        if normalize_power:
            spec = replace(spec, design=replace(spec.design, normalize_power=True))
        if out is not None or fmt is not None:
            spec = replace(
                spec,
                outputs=OutputSettings(
                    out if out is not None else spec.outputs.path,
                    fmt if fmt is not None else spec.outputs.format,
                ),
            )
        return spec


def default_design(cfg: SystemConfig, fraction: float = 1 / 20) -> FakePathDesign:
    """One fake-path set offset by a fixed fraction of both separation thresholds."""
    u_tau, u_theta = separation_thresholds(cfg)
    return FakePathDesign.single(fraction * u_tau, fraction * u_theta)


def _floats(xs) -> tuple[float, ...]:
    return tuple(float(x) for x in xs)


def _check_design(spec: ScenarioSpec) -> None:
    cfg = spec.system
    rep = design_feasibility(spec.design, spec.scene, cfg, alias=spec.alias_angles)
    if not rep.feasible:
        raise ScenarioError("design: fake paths must be geometrically feasible; " + "; ".join(rep.reasons))
    geo = [path_geometry(spec.scene.p, spec.scene.v0, None, cfg.c)]
    geo += [path_geometry(spec.scene.p, spec.scene.v0, v, cfg.c) for v in spec.scene.scatterers]
    for k, (tau, _) in enumerate(geo):
        if tau > cfg.symbol_span:
            raise ScenarioError(f"scene: path {k} delay {tau:.6g} s exceeds N*Ts = {cfg.symbol_span:.6g} s")
        for i, (dt, _) in enumerate(spec.design.sets):
            if tau + dt > cfg.symbol_span:
                raise ScenarioError(
                    f"design: fake copy of path {k} in set {i} exceeds the delay range N*Ts"
                )


def spec_from_dict(doc: dict | None) -> ScenarioSpec:
    """Validate a parsed document against the schema and the model invariants."""
    doc = {} if doc is None else doc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario root must be a mapping")
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {e.message}")

    doc = copy.deepcopy(doc)
    sysd = doc.get("system", {})
    scn = doc.get("scene", {})
    des = doc.get("design", {})
    swp = doc.get("sweep", {})
    out = doc.get("outputs", {})
    try:
        cfg = SystemConfig(**{k: (v if k in ("N", "Nt", "G") or v is None else float(v)) for k, v in sysd.items()})
    except FakePathError as exc:
        raise ScenarioError(f"system: {exc}") from exc
    try:
        default_scene = Scene()
        scene = Scene(
            scn.get("alice", default_scene.p),
            scn.get("receiver", default_scene.v0),
            scn.get("scatterers", default_scene.scatterers),
        )
    except FakePathError as exc:
        raise ScenarioError(f"scene: {exc}") from exc
    try:
        if des.get("shared_info") is None:
            design = replace(default_design(cfg), normalize_power=bool(des.get("normalize_power", False)))
        else:
            design = SharedInfo(tuple(des["shared_info"])).to_design(bool(des.get("normalize_power", False)))
    except FakePathError as exc:
        raise ScenarioError(f"design: {exc}") from exc
    d = SweepSettings()
    sweep = SweepSettings(
        _floats(swp.get("snr_db", d.snr_db)),
        _floats(swp.get("mu", d.mu)),
        _floats(swp.get("delta_fractions", d.delta_fractions)),
        float(swp.get("multiset_fraction", d.multiset_fraction)),
        float(swp.get("figure_snr_db", d.figure_snr_db)),
        int(swp.get("seed", d.seed)),
        int(swp.get("workers", d.workers)),
    )
    outputs = OutputSettings(out.get("path"), out.get("format", "csv"))
    spec = ScenarioSpec(cfg, scene, design, bool(des.get("alias_angles", False)), sweep, outputs)
    try:
        _check_design(spec)
    except ScenarioError:
        raise
    except FakePathError as exc:
        raise ScenarioError(f"design: {exc}") from exc
    return spec


def parse_scenario(text: str) -> ScenarioSpec:
    try:
        doc = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ScenarioError(f"parse error at {where}{problem}") from exc
    return spec_from_dict(doc)


def load_scenario(path: str | FsPath | None) -> ScenarioSpec:
    """Read and validate a scenario file; ``None`` gives the default scenario."""
    if path is None:
        return spec_from_dict({})
    text = FsPath(path).read_text()
    return parse_scenario(text)


def dump_scenario(spec: ScenarioSpec) -> str:
    return yaml.safe_dump(spec.to_dict(), sort_keys=False, default_flow_style=None)


def save_scenario(spec: ScenarioSpec, path: str | FsPath) -> None:
    FsPath(path).write_text(dump_scenario(spec))
