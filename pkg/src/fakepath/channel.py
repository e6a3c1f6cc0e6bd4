"""Geometric MISO-OFDM channel model.

Maps a 2-D scene (transmitter, receiver, point scatterers) to per-path delay,
departure angle and complex gain, and synthesizes the per-sub-carrier channel
rows, random pilots and noiseless received samples built from them.

Conventions used throughout the package:

* times in seconds, angles in radians, positions in meters;
* the Fourier vector has entries ``exp(-2j*pi*m*x)/sqrt(L)`` and the
  channel row uses its Hermitian, so antenna ``m`` carries
  ``exp(+2j*pi*m*d*sin(theta)/lambda)/sqrt(Nt)``;
* pilot blocks are complex arrays of shape ``(G, N, Nt)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ArityError,
    ConfigurationError,
    DegenerateGeometryError,
    DimensionError,
    DomainError,
    ModelRangeError,
    SubcarrierIndexError,
    UndefinedSNRError,
    ValidationError,
)

# Minimum separation (meters) below which two scene points count as coincident.
COINCIDENT_TOL = 1e-12


@dataclass(frozen=True)
class SystemConfig:
    """Radio constants. Defaults describe a 16x16 MISO-OFDM link at 60 GHz.

    ``d`` defaults to half a wavelength when left as ``None``.
    """

    N: int = 16
    Nt: int = 16
    G: int = 16
    B: float = 15e6
    phi_c: float = 60e9
    d: float | None = None
    c: float = 3e8

    def __post_init__(self):
        for name in ("N", "Nt", "G"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
                raise ValidationError(f"{name} must be an integer, got {val!r}")
        if self.N < 2 or self.Nt < 2:
            raise ValidationError("N and Nt must both be at least 2")
        if self.G < 1:
            raise ValidationError("G must be at least 1")
        for name in ("B", "phi_c", "c"):
            val = float(getattr(self, name))
            if not (math.isfinite(val) and val > 0):
                raise ValidationError(f"{name} must be strictly positive, got {val!r}")
        if self.d is None:
            object.__setattr__(self, "d", self.c / self.phi_c / 2)
        if not (math.isfinite(self.d) and self.d > 0):
            raise ValidationError(f"d must be strictly positive, got {self.d!r}")
        if self.B / self.phi_c >= 0.01:
            raise ValidationError("narrowband check failed: B/phi_c must be below 0.01")

    @property
    def Ts(self) -> float:
        return 1.0 / self.B

    @property
    def lambda_c(self) -> float:
        return self.c / self.phi_c

    @property
    def symbol_span(self) -> float:
        """N*Ts, the unambiguous delay range."""
        return self.N * self.Ts

    @property
    def Lambda(self) -> float:
        return self.lambda_c / (self.N * self.Ts * self.d)

    def spatial_frequency(self, theta):
        return self.d * np.sin(theta) / self.lambda_c


def _as_point(x, name: str) -> tuple[float, float]:
    a = np.asarray(x, dtype=float)
    if a.shape != (2,) or not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} must be a finite 2-D point, got {x!r}")
    return (float(a[0]), float(a[1]))


@dataclass(frozen=True)
class Scene:
    """Transmitter position ``p``, receiver position ``v0`` and scatterers."""

    p: tuple[float, float] = (3.0, 0.0)
    v0: tuple[float, float] = (10.0, 5.0)
    scatterers: tuple[tuple[float, float], ...] = ((8.89, -6.05), (7.45, 8.54))

    def __post_init__(self):
        object.__setattr__(self, "p", _as_point(self.p, "p"))
        object.__setattr__(self, "v0", _as_point(self.v0, "v0"))
        object.__setattr__(
            self,
            "scatterers",
            tuple(_as_point(v, f"scatterer[{i}]") for i, v in enumerate(self.scatterers)),
        )
        p, z = np.array(self.p), np.array(self.v0)
        if np.linalg.norm(p - z) <= COINCIDENT_TOL:
            raise DegenerateGeometryError("transmitter and receiver coincide")
        for i, v in enumerate(self.scatterers):
            v = np.array(v)
            if np.linalg.norm(p - v) <= COINCIDENT_TOL:
                raise DegenerateGeometryError(f"scatterer {i} coincides with the transmitter")
            if np.linalg.norm(z - v) <= COINCIDENT_TOL:
                raise DegenerateGeometryError(f"scatterer {i} coincides with the receiver")

    @property
    def K(self) -> int:
        return len(self.scatterers)

    def with_receiver(self, v0) -> "Scene":
        return Scene(self.p, v0, self.scatterers)


class Provenance(str, enum.Enum):
    TRUE = "true"
    FAKE = "fake"


@dataclass(frozen=True)
class Path:
    gamma: complex
    tau: float
    theta: float
    provenance: Provenance = Provenance.TRUE
    set_index: int = 0  # 0 for true paths, i >= 1 for the i-th injected set


def check_path(path: Path, cfg: SystemConfig) -> None:
    """Enforce the delay range and spatial-frequency range of a single path."""
    if not (math.isfinite(path.tau) and math.isfinite(path.theta)):
        raise ValidationError("path parameters must be finite")
    ratio = path.tau / cfg.symbol_span
    if not ratio > 0:
        raise ModelRangeError(f"delay must be positive, got {path.tau!r} s")
    if ratio > 1:
        raise ModelRangeError(
            f"delay {path.tau:.6g} s exceeds the unambiguous range {cfg.symbol_span:.6g} s"
        )
    f = cfg.spatial_frequency(path.theta)
    if not (-0.5 < f <= 0.5):
        raise DomainError(f"spatial frequency {f:.6g} outside (-1/2, 1/2]")


@dataclass(frozen=True)
class PathSet:
    """Ordered paths: LOS first, NLOS in scene order, then fakes set by set."""

    paths: tuple[Path, ...]

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if len(self.paths) < 1:
            raise DimensionError("a path set needs at least one path")
        order = [p.set_index for p in self.paths]
        if order != sorted(order):
            raise ArityError("paths must be grouped by set index in ascending order")
        for p in self.paths:
            if (p.provenance is Provenance.TRUE) != (p.set_index == 0):
                raise ArityError("true paths carry set index 0, fake paths a positive index")

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def __getitem__(self, i):
        return self.paths[i]

    @property
    def gammas(self) -> np.ndarray:
        return np.array([p.gamma for p in self.paths], dtype=complex)

    @property
    def taus(self) -> np.ndarray:
        return np.array([p.tau for p in self.paths], dtype=float)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([p.theta for p in self.paths], dtype=float)

    def subset(self, provenance: Provenance) -> "PathSet":
        return PathSet(tuple(p for p in self.paths if p.provenance is provenance))

    def validate(self, cfg: SystemConfig) -> "PathSet":
        for p in self.paths:
            check_path(p, cfg)
        return self

    def __add__(self, other: "PathSet") -> "PathSet":
        return PathSet(self.paths + other.paths)


@dataclass(frozen=True)
class PilotBlock:
    """Pilot vectors ``s[g, n]`` stored as a complex ``(G, N, Nt)`` array."""

    s: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=complex)
        if s.ndim != 3:
            raise DimensionError("pilot block must have shape (G, N, Nt)")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def G(self) -> int:
        return self.s.shape[0]

    def head(self, G: int) -> "PilotBlock":
        """The first ``G`` pilot symbols."""
        return PilotBlock(self.s[:G])


def fourier_vector(L: int, theta: float) -> np.ndarray:
    """Unit-norm Fourier vector ``exp(-2j*pi*m*theta)/sqrt(L)``, m = 0..L-1."""
    if int(L) != L or L < 1:
        raise DimensionError(f"Fourier vector length must be a positive integer, got {L!r}")
    m = np.arange(int(L))
    return np.exp(-2j * np.pi * m * theta) / np.sqrt(L)


def steering_vector(theta_tx: float, cfg: SystemConfig) -> np.ndarray:
    f = cfg.spatial_frequency(theta_tx)
    if not (-0.5 < f <= 0.5):
        raise DomainError(f"spatial frequency {f:.6g} outside (-1/2, 1/2]")
    return fourier_vector(cfg.Nt, f)


def _steering_rows(thetas: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    # conj(alpha(theta)) stacked as rows, shape (P, Nt)
    m = np.arange(cfg.Nt)
    f = cfg.spatial_frequency(np.asarray(thetas, dtype=float))
    return np.exp(2j * np.pi * np.outer(f, m)) / np.sqrt(cfg.Nt)


def _delay_phases(taus: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    # exp(-2j*pi*n*tau/(N*Ts)), shape (P, N)
    n = np.arange(cfg.N)
    return np.exp(-2j * np.pi * np.outer(np.asarray(taus, dtype=float), n) / cfg.symbol_span)


def wrap_frequency(x):
    """Map a spatial frequency into (-1/2, 1/2]."""
    return x - np.ceil(x - 0.5)


def _distance(a, b, what: str) -> float:
    r = float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
    if r <= COINCIDENT_TOL:
        raise DegenerateGeometryError(f"coincident points in {what}")
    return r


def path_geometry(p, z, v=None, c: float = 3e8) -> tuple[float, float]:
    """Delay and departure angle of the LOS path (``v=None``) or of the path via ``v``."""
    p = np.asarray(p, dtype=float)
    z = np.asarray(z, dtype=float)
    if v is None:
        tau = _distance(p, z, "LOS path") / c
        dx, dy = z - p
    else:
        v = np.asarray(v, dtype=float)
        tau = (_distance(z, v, "scatterer-receiver leg") + _distance(p, v, "transmitter-scatterer leg")) / c
        dx, dy = v - p
    return tau, float(np.arctan2(dy, dx))


def free_space_gain(tau: float, cfg: SystemConfig) -> float:
    """Free-space amplitude ``lambda/(4*pi*distance)`` over the total travelled length."""
    return cfg.lambda_c / (4 * np.pi * cfg.c * tau)


def scene_to_params(scene: Scene, cfg: SystemConfig, rng_seed: int) -> PathSet:
    """True path parameters of a scene.

    Gains follow free-space loss over the full travelled distance with a
    uniform random phase per path drawn from ``rng_seed``.
    """
    geo = [path_geometry(scene.p, scene.v0, None, cfg.c)]
    geo += [path_geometry(scene.p, scene.v0, v, cfg.c) for v in scene.scatterers]
    rng = np.random.default_rng(rng_seed)
    phases = rng.uniform(0.0, 2 * np.pi, size=len(geo))
    paths = tuple(
        Path(complex(free_space_gain(tau, cfg) * np.exp(1j * ph)), tau, theta)
        for (tau, theta), ph in zip(geo, phases)
    )
    return PathSet(paths).validate(cfg)


def channel_matrix(paths: PathSet, cfg: SystemConfig) -> np.ndarray:
    """All channel rows stacked, shape ``(N, Nt)``."""
    paths.validate(cfg)
    E = _delay_phases(paths.taus, cfg)  # (P, N)
    A = _steering_rows(paths.thetas, cfg)  # (P, Nt)
    return np.sqrt(cfg.Nt) * np.einsum("k,kn,km->nm", paths.gammas, E, A)


def channel_vector(paths: PathSet, n: int, cfg: SystemConfig) -> np.ndarray:
    """Channel row ``h(n)`` of length Nt."""
    if not (0 <= n < cfg.N):
        raise SubcarrierIndexError(f"sub-carrier index {n} outside [0, {cfg.N})")
    paths.validate(cfg)
    e = np.exp(-2j * np.pi * n * paths.taus / cfg.symbol_span)
    A = _steering_rows(paths.thetas, cfg)
    return np.sqrt(cfg.Nt) * (paths.gammas * e) @ A


def received_signal(paths: PathSet, pilots: PilotBlock, cfg: SystemConfig) -> np.ndarray:
    """Noiseless samples ``h(n) s(g, n)`` with shape ``(G, N)``."""
    _check_pilots(pilots, cfg)
    H = channel_matrix(paths, cfg)
    return np.einsum("nm,gnm->gn", H, pilots.s)


def received_samples(
    paths: PathSet, pilots: PilotBlock, sigma2: float, cfg: SystemConfig, rng_seed: int
) -> np.ndarray:
    """Noisy samples with circular complex Gaussian noise of variance ``sigma2``."""
    u = received_signal(paths, pilots, cfg)
    rng = np.random.default_rng(rng_seed)
    w = rng.standard_normal(u.shape + (2,)) @ np.array([1.0, 1j])
    return u + np.sqrt(sigma2 / 2) * w


def _check_pilots(pilots: PilotBlock, cfg: SystemConfig) -> None:
    if pilots.s.shape[1:] != (cfg.N, cfg.Nt):
        raise DimensionError(
            f"pilot block shape {pilots.s.shape} does not match (G, {cfg.N}, {cfg.Nt})"
        )


def min_separation(values: Sequence[float]) -> float:
    """Smallest wrap-around distance between any two coordinates on the unit circle."""
    v = np.asarray(list(values), dtype=float)
    if v.size < 2:
        raise ArityError("minimal separation needs at least two coordinates")
    diff = np.mod(np.abs(v[:, None] - v[None, :]), 1.0)
    dist = np.minimum(diff, 1.0 - diff)
    iu = np.triu_indices(v.size, k=1)
    return float(dist[iu].min())


def separation_thresholds(cfg: SystemConfig) -> tuple[float, float]:
    """Delay and angle separations needed by atomic-norm recovery."""
    ft = (cfg.N - 1) // 4
    fa = (cfg.Nt - 1) // 4
    if ft < 1 or fa < 1:
        raise ConfigurationError("need N >= 5 and Nt >= 5 for separation thresholds")
    arg = cfg.lambda_c / (cfg.d * fa)
    if arg > 1:
        raise ConfigurationError(f"angle threshold undefined: arcsin argument {arg:.6g} > 1")
    return cfg.symbol_span / ft, float(np.arcsin(arg))


def feasible_scatterer(tau_f: float, theta_f: float, p, z, c: float = 3e8):
    """Scatterer position reproducing a delay/angle pair, or ``None`` if none exists.

    The scatterer sits at distance ``b`` from ``p`` along ``theta_f`` where ``b``
    solves ``b + |p + b*u - z| = c*tau_f``. A solution exists exactly when
    ``c*tau_f >= |z - p|``.
    """
    p = np.asarray(p, dtype=float)
    z = np.asarray(z, dtype=float)
    zp = z - p
    r = float(np.linalg.norm(zp))
    length = c * tau_f
    if length < r:
        return None
    u = np.array([np.cos(theta_f), np.sin(theta_f)])
    denom = 2.0 * (length - float(zp @ u))
    if denom <= 4 * np.finfo(float).eps * max(length, 1.0):
        # aligned with the receiver and on the boundary: the limit of the formula
        b = 0.5 * (length + r)
    else:
        b = (length * length - r * r) / denom
    return b * u + p


def generate_pilots(cfg: SystemConfig, rng_seed: int, G: int | None = None) -> PilotBlock:
    """Unit-modulus pilots scaled by ``1/sqrt(Nt)``, shape ``(G, N, Nt)``."""
    G = cfg.G if G is None else G
    rng = np.random.default_rng(rng_seed)
    phase = rng.uniform(0.0, 2 * np.pi, size=(G, cfg.N, cfg.Nt))
    return PilotBlock(np.exp(1j * phase) / np.sqrt(cfg.Nt))


def signal_energy(paths: PathSet, pilots: PilotBlock, cfg: SystemConfig) -> float:
    """Mean per-sample received power."""
    u = received_signal(paths, pilots, cfg)
    return float(np.mean(np.abs(u) ** 2))


def sigma_from_snr(paths: PathSet, pilots: PilotBlock, snr_db: float, cfg: SystemConfig) -> float:
    power = signal_energy(paths, pilots, cfg)
    if not power > 0:
        raise UndefinedSNRError("received signal is identically zero")
    return power / 10 ** (snr_db / 10)


def received_snr_db(paths: PathSet, pilots: PilotBlock, sigma2: float, cfg: SystemConfig) -> float:
    return 10 * math.log10(signal_energy(paths, pilots, cfg) / sigma2)


def concat(sets: Iterable[PathSet]) -> PathSet:
    out: tuple[Path, ...] = ()
    for s in sets:
        out += s.paths
    return PathSet(out)
