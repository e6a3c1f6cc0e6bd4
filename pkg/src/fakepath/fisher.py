"""Fisher information for path parameters and for position.

Parameter orderings
-------------------
Every matrix carries a :class:`ParamOrdering` so rows cannot be silently
mis-stacked. Labels follow one scheme:

* ``tau[k]``, ``theta[k]``, ``re_gamma[k]``, ``im_gamma[k]`` for true path k;
* ``tau~i[k]`` etc. for the copy of path k in injected set i (i >= 1);
* ``p_x``, ``p_y`` for the transmitter, ``v[k]_x`` for true scatterer k and
  ``v~i[k]_x`` for the scatterer explaining a fake path;
* ``dbar_tau``, ``dbar_theta`` for the precoder offsets in the leaked model.

Channel-parameter layout (``eta``) stacks all delays, then all angles, then
the real and imaginary gain parts, each in path-set order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import (
    PathSet,
    PilotBlock,
    Provenance,
    Scene,
    SystemConfig,
    _check_pilots,
    _delay_phases,
    _steering_rows,
    channel_matrix,
)
from .errors import (
    ArityError,
    DegenerateGeometryError,
    DimensionError,
    SingularNoiseError,
    UndefinedSNRError,
    UnsupportedDesignError,
)
from .precoder import FakePathDesign, effective_pilots, power_scale, _raw_diagonals

# Equilibrated condition number above which a FIM is treated as singular.
COND_LIMIT = 1e14

QUANTITIES = ("tau", "theta", "re_gamma", "im_gamma")


@dataclass(frozen=True)
class ParamOrdering:
    layout: str
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(set(self.labels)) != len(self.labels):
            raise ArityError("duplicate parameter labels")

    def __len__(self):
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ArityError(f"no parameter {label!r} in {self.layout} ordering") from None

    def indices(self, labels: Sequence[str]) -> list[int]:
        return [self.index(x) for x in labels]


def path_tags(paths: PathSet) -> list[str]:
    """Per-path suffixes such as ``[0]`` or ``~1[2]`` in path-set order."""
    tags = []
    counter: dict[int, int] = {}
    for p in paths:
        k = counter.get(p.set_index, 0)
        counter[p.set_index] = k + 1
        tags.append(f"[{k}]" if p.provenance is Provenance.TRUE else f"~{p.set_index}[{k}]")
    return tags


def eta_ordering(paths: PathSet) -> ParamOrdering:
    tags = path_tags(paths)
    return ParamOrdering("eta", tuple(q + t for q in QUANTITIES for t in tags))


def chi_ordering(true_paths: PathSet) -> ParamOrdering:
    return ParamOrdering("chi", eta_ordering(true_paths).labels + ("dbar_tau", "dbar_theta"))


ZETA_LABELS = ("tau_true", "theta_true", "tau_fake", "theta_fake")


def zeta_ordering(k: int) -> ParamOrdering:
    return ParamOrdering(f"zeta_{k}", ZETA_LABELS)


@dataclass(frozen=True)
class FimMatrix:
    """Real symmetric Fisher information with its parameter ordering.

    ``scale`` is ``"total"`` for information summed over all pilot symbols and
    ``"per-symbol"`` for the normalized (asymptotic) form.
    """

    matrix: np.ndarray = field(repr=False)
    ordering: ParamOrdering
    scale: str = "total"

    def __post_init__(self):
        J = np.asarray(self.matrix, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise DimensionError("a FIM must be square")
        if J.shape[0] != len(self.ordering):
            raise ArityError(
                f"FIM of size {J.shape[0]} does not match ordering of length {len(self.ordering)}"
            )
        J = 0.5 * (J + J.T)
        J.setflags(write=False)
        object.__setattr__(self, "matrix", J)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def block(self, labels: Sequence[str], layout: str, new_labels: Sequence[str] | None = None) -> "FimMatrix":
        idx = self.ordering.indices(labels)
        return FimMatrix(
            self.matrix[np.ix_(idx, idx)],
            ParamOrdering(layout, tuple(new_labels) if new_labels else tuple(labels)),
            self.scale,
        )

    def scaled(self, factor: float, scale: str | None = None) -> "FimMatrix":
        return FimMatrix(self.matrix * factor, self.ordering, scale or self.scale)

    def reordered(self, ordering: ParamOrdering) -> "FimMatrix":
        if sorted(ordering.labels) != sorted(self.ordering.labels):
            raise ArityError("reordering must be a permutation of the same parameters")
        idx = self.ordering.indices(ordering.labels)
        return FimMatrix(self.matrix[np.ix_(idx, idx)], ordering, self.scale)


# --------------------------------------------------------------------------
# Derivatives of the noiseless observation


def signal_derivatives(paths: PathSet, pilots: PilotBlock, g: int, n: int, cfg: SystemConfig) -> dict[str, complex]:
    """Partials of the sample ``u(g, n) = h(n) s(g, n)`` with respect to every path parameter.

    Evaluated one path at a time in plain scalar form; :func:`derivative_tensor`
    is the vectorized counterpart used for assembly.
    """
    _check_pilots(pilots, cfg)
    if not (0 <= g < pilots.G and 0 <= n < cfg.N):
        raise IndexError(f"pilot index ({g}, {n}) out of range")
    s = pilots.s[g, n]
    lam, d, span, Nt = cfg.lambda_c, cfg.d, cfg.symbol_span, cfg.Nt
    out = {}
    for tag, p in zip(path_tags(paths), paths):
        delay = complex(np.exp(-2j * math.pi * n * p.tau / span))
        steer_s = 0j
        steer_ds = 0j
        for m in range(Nt):
            a_m = np.exp(2j * math.pi * m * d * math.sin(p.theta) / lam) / math.sqrt(Nt)
            steer_s += a_m * s[m]
            steer_ds += a_m * m * s[m]
        base = math.sqrt(Nt) * delay * steer_s
        out["tau" + tag] = -2j * math.pi * n / span * p.gamma * base
        out["theta" + tag] = (
            2j * math.pi * d * math.cos(p.theta) / lam * math.sqrt(Nt) * p.gamma * delay * steer_ds
        )
        out["re_gamma" + tag] = base
        out["im_gamma" + tag] = 1j * base
    return out


def derivative_tensor(paths: PathSet, pilots: PilotBlock, cfg: SystemConfig) -> np.ndarray:
    """All partials of all samples, shape ``(4P, G, N)`` in eta order."""
    _check_pilots(pilots, cfg)
    paths.validate(cfg)
    P = len(paths)
    n = np.arange(cfg.N)
    m = np.arange(cfg.Nt)
    E = _delay_phases(paths.taus, cfg)  # (P, N)
    A = _steering_rows(paths.thetas, cfg)  # (P, Nt)
    gam = paths.gammas
    As = np.einsum("km,gnm->kgn", A, pilots.s)
    Ams = np.einsum("km,gnm->kgn", A * m, pilots.s)
    base = np.sqrt(cfg.Nt) * E[:, None, :] * As
    D = np.empty((4 * P,) + base.shape[1:], dtype=complex)
    D[:P] = (-2j * np.pi * n / cfg.symbol_span)[None, None, :] * gam[:, None, None] * base
    ang = 2j * np.pi * cfg.d * np.cos(paths.thetas) / cfg.lambda_c
    D[P:2 * P] = (ang * gam * np.sqrt(cfg.Nt))[:, None, None] * E[:, None, :] * Ams
    D[2 * P:3 * P] = base
    D[3 * P:] = 1j * base
    return D


def _fim_from_derivatives(D: np.ndarray, sigma2: float) -> np.ndarray:
    if not sigma2 > 0:
        raise SingularNoiseError(f"noise variance must be positive, got {sigma2!r}")
    Df = D.reshape(D.shape[0], -1)
    return 2.0 / sigma2 * np.real(Df.conj() @ Df.T)


def exact_fim(
    paths: PathSet,
    pilots: PilotBlock,
    sigma2: float,
    cfg: SystemConfig,
    ordering: ParamOrdering | None = None,
) -> FimMatrix:
    """Fisher information of all path parameters, summed over pilots and sub-carriers.

    ``ordering`` may be any permutation of the natural eta labels; the result
    is returned in that order.
    """
    J = FimMatrix(_fim_from_derivatives(derivative_tensor(paths, pilots, cfg), sigma2), eta_ordering(paths))
    if ordering is not None and ordering.labels != J.ordering.labels:
        J = J.reordered(ordering)
    return J


def zeta_fim(J_eta: FimMatrix, k: int = 0, set_index: int = 1) -> FimMatrix:
    """Delay/angle block of true path ``k`` and its fake copy, other parameters held known."""
    labels = (f"tau[{k}]", f"theta[{k}]", f"tau~{set_index}[{k}]", f"theta~{set_index}[{k}]")
    return J_eta.block(labels, f"zeta_{k}", ZETA_LABELS)


# --------------------------------------------------------------------------
# Inversion


@dataclass(frozen=True)
class CrlbResult:
    """Diagonal CRLB entries on a selection of parameters.

    ``min_eigenvalue`` and ``condition`` describe the FIM after Jacobi
    equilibration (unit diagonal), which removes the unit mismatch between
    seconds, radians and gains. When ``bounded`` is False every value is inf.
    """

    labels: tuple[str, ...]
    values: np.ndarray
    bounded: bool
    min_eigenvalue: float
    condition: float
    covariance: np.ndarray = field(repr=False, default=None)

    @property
    def trace(self) -> float:
        return float(np.sum(self.values)) if self.bounded else math.inf

    @property
    def rms(self) -> float:
        """Square root of the trace."""
        return math.sqrt(self.trace)


def equilibrated_spectrum(J: np.ndarray):
    """Eigen-decomposition of ``D^-1/2 J D^-1/2`` with ``D = diag(J)``.

    Returns ``(scale, eigenvalues, eigenvectors)``; ``scale`` is None when a
    diagonal entry is not positive.
    """
    diag = np.diag(J)
    if np.any(~(diag > 0)):
        return None, None, None
    scale = np.sqrt(diag)
    w, V = np.linalg.eigh(J / np.outer(scale, scale))
    return scale, w, V


def eigen_ratio(fim: FimMatrix | np.ndarray) -> float:
    """Smallest over largest eigenvalue of the equilibrated matrix."""
    J = fim.matrix if isinstance(fim, FimMatrix) else np.asarray(fim, dtype=float)
    scale, w, _ = equilibrated_spectrum(J)
    if scale is None:
        return 0.0
    return float(w[0] / w[-1])


def crlb_trace(fim: FimMatrix, selection: Sequence[str] | Sequence[int] | None = None) -> CrlbResult:
    """CRLB on the selected parameters with all others treated as nuisance.

    The inverse is formed from the eigen-decomposition of the equilibrated
    FIM. Condition numbers above ``COND_LIMIT`` (or a non-positive spectrum)
    give an unbounded result instead of an unreliable number.
    """
    J = fim.matrix
    if selection is None:
        idx = list(range(fim.size))
    else:
        idx = [fim.ordering.index(s) if isinstance(s, str) else int(s) for s in selection]
    labels = tuple(fim.ordering.labels[i] for i in idx)
    scale, w, V = equilibrated_spectrum(J)
    if scale is None:
        return CrlbResult(labels, np.full(len(idx), math.inf), False, 0.0, math.inf)
    wmin, wmax = float(w[0]), float(w[-1])
    cond = wmax / wmin if wmin > 0 else math.inf
    if not cond < COND_LIMIT:
        return CrlbResult(labels, np.full(len(idx), math.inf), False, wmin, cond)
    inv = (V / w) @ V.T / np.outer(scale, scale)
    cov = inv[np.ix_(idx, idx)]
    return CrlbResult(labels, np.diag(cov).copy(), True, wmin, cond, cov)


# --------------------------------------------------------------------------
# Geometry Jacobian and position-domain information


@dataclass(frozen=True)
class LocalizationJacobian:
    """Derivative of channel parameters (columns) with respect to positions and gains (rows)."""

    matrix: np.ndarray = field(repr=False)
    phi: ParamOrdering
    eta: ParamOrdering


def _leg(a, b, what):
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    r = float(np.linalg.norm(diff))
    if r <= 1e-12:
        raise DegenerateGeometryError(f"coincident points in {what}")
    return diff, r


def localization_jacobian(
    scene: Scene,
    fake_positions: Sequence,
    cfg: SystemConfig,
    paths_per_set: int | None = None,
    extra: Sequence[str] = (),
) -> LocalizationJacobian:
    """Jacobian of delays, angles and gains with respect to positions and gains.

    Args:
        scene: transmitter, receiver and true scatterers.
        fake_positions: one scatterer position per fake path, set by set in
            true-path order. Empty for a receiver without fake paths.
        cfg: system constants (only ``c`` is used).
        paths_per_set: fake paths per injected set; defaults to ``K + 1``.
        extra: labels of additional parameters passed through with an
            identity block (e.g. the precoder offsets).

    Returns:
        The Jacobian with the position-domain ordering as rows and the
        channel-parameter ordering as columns.
    """
    K = scene.K
    per_set = K + 1 if paths_per_set is None else paths_per_set
    if len(fake_positions) % per_set:
        raise ArityError(f"{len(fake_positions)} fake positions do not fill sets of {per_set}")
    for i, v in enumerate(fake_positions):
        if v is None:
            raise ArityError(f"fake path {i} has no feasible scatterer position")

    # (scatterer or None for LOS, tag) per path in eta order
    entries = [(None, "[0]")] + [(np.asarray(v, float), f"[{k + 1}]") for k, v in enumerate(scene.scatterers)]
    for j, v in enumerate(fake_positions):
        entries.append((np.asarray(v, float), f"~{j // per_set + 1}[{j % per_set}]"))
    P = len(entries)
    tags = [t for _, t in entries]
    eta = ParamOrdering("eta", tuple(q + t for q in QUANTITIES for t in tags))

    phi_labels = ["p_x", "p_y"]
    for _, t in entries:
        if t != "[0]":
            phi_labels += [f"v{t}_x", f"v{t}_y"]
    phi_labels += [f"re_gamma{t}" for t in tags] + [f"im_gamma{t}" for t in tags]
    phi_labels += list(extra)
    phi = ParamOrdering("phi", tuple(phi_labels))
    eta_full = ParamOrdering(eta.layout, eta.labels + tuple(extra))

    Pi = np.zeros((len(phi), len(eta_full)))
    p = np.asarray(scene.p, float)
    z = np.asarray(scene.v0, float)
    c = cfg.c
    row = 2
    for col, (v, tag) in enumerate(entries):
        if v is None:
            dv, r = _leg(z, p, "LOS path")
            Pi[0:2, col] = -dv / (c * r)
            Pi[0:2, P + col] = np.array([dv[1], -dv[0]]) / r**2
            continue
        dp, r1 = _leg(v, p, f"transmitter leg of path {tag}")
        dz, r2 = _leg(v, z, f"receiver leg of path {tag}")
        Pi[0:2, col] = -dp / (c * r1)
        Pi[row:row + 2, col] = (dz / r2 + dp / r1) / c
        Pi[0:2, P + col] = np.array([dp[1], -dp[0]]) / r1**2
        Pi[row:row + 2, P + col] = np.array([-dp[1], dp[0]]) / r1**2
        row += 2
    ng = 2 * P + len(extra)
    Pi[row:row + ng, 2 * P:2 * P + ng] = np.eye(ng)
    return LocalizationJacobian(Pi, phi, eta_full)


def localization_fim(J_eta: FimMatrix, Pi: LocalizationJacobian) -> FimMatrix:
    """Congruence transform of channel-parameter information into the position domain."""
    if Pi.matrix.shape[1] != J_eta.size:
        raise ArityError(f"Jacobian has {Pi.matrix.shape[1]} columns, FIM has size {J_eta.size}")
    if Pi.eta.labels != J_eta.ordering.labels:
        raise ArityError("Jacobian columns and FIM rows use different parameter orderings")
    M = Pi.matrix
    return FimMatrix(M @ J_eta.matrix @ M.T, Pi.phi, J_eta.scale)


def position_crlb(J_phi: FimMatrix) -> float:
    """Root of the summed CRLB on the two transmitter coordinates, in meters."""
    return crlb_trace(J_phi, ("p_x", "p_y")).rms


# --------------------------------------------------------------------------
# Leaked-structure model and Gaussian baseline


def leaked_derivative_tensor(
    true_paths: PathSet, design: FakePathDesign, pilots: PilotBlock, cfg: SystemConfig
) -> np.ndarray:
    """Partials of ``h(n) Phi(n) s(g, n)`` over channel parameters and both offsets."""
    if design.nu != 1:
        raise UnsupportedDesignError(f"leaked-structure model needs exactly one set, got {design.nu}")
    _check_pilots(pilots, cfg)
    D_eta = derivative_tensor(true_paths, effective_pilots(pilots, design, cfg), cfg)

    (dt, dth), = design.sets
    n = np.arange(cfg.N)
    m = np.arange(cfg.Nt)
    H = channel_matrix(true_paths, cfg)  # (N, Nt)
    raw = _raw_diagonals(design, cfg)  # (N, Nt)
    term = raw - 1.0
    d_tau = term * (-2j * np.pi * n / cfg.symbol_span)[:, None]
    d_theta = term * (2j * np.pi * m * cfg.d * math.cos(dth) / cfg.lambda_c)[None, :]
    kappa = power_scale(design, cfg)

    def observe(diag):
        return np.einsum("nm,nm,gnm->gn", H, diag, pilots.s)

    parts = []
    for dD in (d_tau, d_theta):
        dI = kappa * observe(dD)
        if design.normalize_power:
            total = float(np.sum(np.abs(raw) ** 2))
            dtotal = float(np.sum(2 * np.real(raw.conj() * dD)))
            dI = dI - kappa / (2 * total) * dtotal * observe(raw)
        parts.append(dI)
    return np.concatenate([D_eta, np.stack(parts)])


def leaked_fim(
    true_paths: PathSet, design: FakePathDesign, pilots: PilotBlock, sigma2: float, cfg: SystemConfig
) -> FimMatrix:
    """Information available to a receiver that knows the precoder's form but not its offsets."""
    D = leaked_derivative_tensor(true_paths, design, pilots, cfg)
    return FimMatrix(_fim_from_derivatives(D, sigma2), chi_ordering(true_paths))


def gaussian_baseline_sigma(fake_paths: PathSet, pilots: PilotBlock, cfg: SystemConfig) -> float:
    """Noise power that carries the same mean energy as the injected fake paths."""
    H = channel_matrix(fake_paths, cfg)
    _check_pilots(pilots, cfg)
    u = np.einsum("nm,gnm->gn", H, pilots.s)
    power = float(np.mean(np.abs(u) ** 2))
    if not power > 0:
        raise UndefinedSNRError("fake channel carries no energy")
    return power
