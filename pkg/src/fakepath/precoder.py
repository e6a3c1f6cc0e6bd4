"""CSI-free fake-path precoder.

A design is a list of ``(delay_offset, angle_offset)`` pairs. Each pair adds
one diagonal term to the per-sub-carrier precoder, which makes every true path
of any downstream channel appear together with a copy shifted by that offset in
delay and in the sine of the departure angle. A receiver that knows the offsets
compensates by treating the precoded pilots as its pilots; a receiver that does
not sees twice (or ``1 + sets``) as many paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    Path,
    PathSet,
    PilotBlock,
    Provenance,
    Scene,
    SystemConfig,
    _check_pilots,
    _delay_phases,
    _steering_rows,
    feasible_scatterer,
    path_geometry,
    wrap_frequency,
)
from .errors import AngleOverflowError, ArityError, FakePathError, SubcarrierIndexError, ValidationError


@dataclass(frozen=True)
class SharedInfo:
    """The offsets Alice sends to the legitimate receiver, flattened."""

    delta_bar: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(x) for x in self.delta_bar)
        if len(vals) < 2 or len(vals) % 2:
            raise ArityError("shared information holds an even, non-zero count of numbers")
        object.__setattr__(self, "delta_bar", vals)

    def to_list(self) -> list[float]:
        return list(self.delta_bar)

    def to_design(self, normalize_power: bool = False) -> "FakePathDesign":
        it = iter(self.delta_bar)
        return FakePathDesign(tuple(zip(it, it)), normalize_power)


@dataclass(frozen=True)
class FakePathDesign:
    """Offsets ``(delay [s], angle [rad])`` for each injected fake-path set."""

    sets: tuple[tuple[float, float], ...]
    normalize_power: bool = False

    def __post_init__(self):
        sets = tuple((float(a), float(b)) for a, b in self.sets)
        if len(sets) < 1:
            raise ArityError("a design needs at least one fake-path set")
        for a, b in sets:
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValidationError("design offsets must be finite")
        object.__setattr__(self, "sets", sets)

    @classmethod
    def single(cls, delta_tau: float, delta_theta: float, normalize_power: bool = False):
        return cls(((delta_tau, delta_theta),), normalize_power)

    @property
    def nu(self) -> int:
        return len(self.sets)

    @property
    def shared_info(self) -> SharedInfo:
        return SharedInfo(tuple(x for pair in self.sets for x in pair))


def _raw_diagonals(design: FakePathDesign, cfg: SystemConfig) -> np.ndarray:
    taus = np.array([a for a, _ in design.sets])
    thetas = np.array([b for _, b in design.sets])
    E = _delay_phases(taus, cfg)  # (nu, N)
    A = _steering_rows(thetas, cfg)  # (nu, Nt)
    return 1.0 + np.sqrt(cfg.Nt) * np.einsum("kn,km->nm", E, A)


def power_scale(design: FakePathDesign, cfg: SystemConfig) -> float:
    """Scalar applied to every precoder when power normalization is on.

    It makes the mean squared Frobenius norm of the precoder over sub-carriers
    equal to that of the identity, so unit-covariance pilots keep their mean
    energy.
    """
    if not design.normalize_power:
        return 1.0
    D = _raw_diagonals(design, cfg)
    return math.sqrt(cfg.N * cfg.Nt / float(np.sum(np.abs(D) ** 2)))


def precoder_diagonals(design: FakePathDesign, cfg: SystemConfig) -> np.ndarray:
    """Diagonals of every sub-carrier's precoder, shape ``(N, Nt)``."""
    return power_scale(design, cfg) * _raw_diagonals(design, cfg)


def precoder_matrix(n: int, design: FakePathDesign, cfg: SystemConfig) -> np.ndarray:
    if not (0 <= n < cfg.N):
        raise SubcarrierIndexError(f"sub-carrier index {n} outside [0, {cfg.N})")
    return np.diag(precoder_diagonals(design, cfg)[n])


def effective_pilots(pilots: PilotBlock, design: FakePathDesign, cfg: SystemConfig) -> PilotBlock:
    """Precoded pilots; the legitimate receiver uses these as its known pilots."""
    _check_pilots(pilots, cfg)
    return PilotBlock(pilots.s * precoder_diagonals(design, cfg)[None])


def fake_angle(theta: float, delta_theta: float, cfg: SystemConfig, alias: bool = False) -> float:
    """Angle whose sine is ``sin(theta) + sin(delta_theta)``.

    With ``alias=True`` an out-of-range sum is folded back into the array's
    unambiguous spatial-frequency interval, which is the physical direction the
    precoded term actually radiates to. Otherwise it is an error.
    """
    s = math.sin(theta) + math.sin(delta_theta)
    f = cfg.d * s / cfg.lambda_c
    if abs(s) <= 1 and -0.5 < f <= 0.5:
        return math.asin(s)
    if not alias:
        raise AngleOverflowError(
            f"sin(theta) + sin(offset) = {s:.6g} leaves the unambiguous angle range"
        )
    s_wrapped = float(wrap_frequency(f)) * cfg.lambda_c / cfg.d
    if abs(s_wrapped) > 1:
        raise AngleOverflowError(f"aliased sine {s_wrapped:.6g} still outside [-1, 1]")
    return math.asin(s_wrapped)


def fake_paths_from_design(
    true_paths: PathSet, design: FakePathDesign, cfg: SystemConfig, alias: bool = False
) -> PathSet:
    """Fake copies of the true paths, one block per design set.

    Gains are copied unchanged; any power-normalization scale is applied by
    :func:`eve_effective_paths`, since it multiplies true and fake paths alike.
    """
    out = []
    for i, (dt, dth) in enumerate(design.sets, start=1):
        for p in true_paths:
            out.append(
                Path(p.gamma, p.tau + dt, fake_angle(p.theta, dth, cfg, alias), Provenance.FAKE, i)
            )
    return PathSet(tuple(out)).validate(cfg)


def eve_effective_paths(
    true_paths: PathSet, design: FakePathDesign, cfg: SystemConfig, alias: bool = False
) -> PathSet:
    """The path set an uninformed receiver observes: true paths followed by fakes."""
    fakes = fake_paths_from_design(true_paths, design, cfg, alias)
    kappa = power_scale(design, cfg)
    combined = true_paths + fakes
    if kappa != 1.0:
        combined = PathSet(
            tuple(Path(kappa * p.gamma, p.tau, p.theta, p.provenance, p.set_index) for p in combined)
        )
    return combined.validate(cfg)


@dataclass(frozen=True)
class PathDelta:
    gamma: complex
    tau: float
    theta: float


def parameter_deltas(true_paths: PathSet, fake_paths: PathSet, cfg: SystemConfig | None = None) -> list[PathDelta]:
    """Per-path gain, delay and angle differences between matched paths.

    The angle difference is the angle whose sine equals the difference of
    sines. When that difference leaves [-1, 1] and ``cfg`` is given, it is
    folded into the array's unambiguous spatial-frequency interval first.
    """
    if len(true_paths) != len(fake_paths):
        raise ArityError(f"cannot match {len(true_paths)} true paths with {len(fake_paths)} fakes")
    out = []
    for t, f in zip(true_paths, fake_paths):
        ds = math.sin(f.theta) - math.sin(t.theta)
        if abs(ds) > 1:
            if cfg is None:
                raise AngleOverflowError("sine difference outside [-1, 1]")
            ds = float(wrap_frequency(cfg.d * ds / cfg.lambda_c)) * cfg.lambda_c / cfg.d
        out.append(PathDelta(f.gamma - t.gamma, f.tau - t.tau, math.asin(ds)))
    return out


@dataclass
class FeasibilityReport:
    feasible: bool
    positions: list[list[np.ndarray | None]] = field(default_factory=list)
    reasons: list[str] = field(default_factory=list)


def design_feasibility(
    design: FakePathDesign, scene: Scene, cfg: SystemConfig, alias: bool = False
) -> FeasibilityReport:
    """Check that every fake path can be explained by some physical scatterer.

    A design is feasible when every delay offset is strictly positive: each
    fake delay then exceeds its true delay, which is at least the direct
    transmitter-receiver distance over c. Positions are returned per set in
    true-path order, ``None`` where no scatterer exists.
    """
    geo = [path_geometry(scene.p, scene.v0, None, cfg.c)]
    geo += [path_geometry(scene.p, scene.v0, v, cfg.c) for v in scene.scatterers]
    feasible = True
    reasons = []
    positions = []
    for i, (dt, dth) in enumerate(design.sets):
        if not dt > 0:
            feasible = False
            reasons.append(f"set {i}: delay offset {dt:.6g} s is not positive")
        row = []
        for k, (tau, theta) in enumerate(geo):
            try:
                th_f = fake_angle(theta, dth, cfg, alias)
            except FakePathError as exc:
                feasible = False
                reasons.append(f"set {i}, path {k}: {exc}")
                row.append(None)
                continue
            pos = feasible_scatterer(tau + dt, th_f, scene.p, scene.v0, cfg.c)
            if pos is None:
                feasible = False
                reasons.append(f"set {i}, path {k}: delay shorter than the direct distance")
            row.append(pos)
        positions.append(row)
    return FeasibilityReport(feasible, positions, reasons)
