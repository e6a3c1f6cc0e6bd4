"""Large-pilot (asymptotic) Fisher information of a true/fake path pair and
closed-form lower bounds on the joint delay/angle MSE derived from it.

With random unit-circle pilots the per-symbol FIM of a (true, fake) pair
converges to a matrix whose entries only involve a handful of finite sums over
sub-carriers and antennas. The sums at zero offset are the *moment constants*
``O1..O6``; at a nonzero offset they become the *moment functions*
``M1..M6``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .channel import Path, SystemConfig
from .errors import AssumptionError, SingularNoiseError
from .fisher import FimMatrix, ZETA_LABELS, ParamOrdering, crlb_trace
from .precoder import parameter_deltas


class MomentConstants(NamedTuple):
    O1: float
    O2: float
    O3: float
    O4: float
    O5: float
    O6: float


class MomentFunctions(NamedTuple):
    M1: complex
    M2: complex
    M3: complex
    M4: complex
    M5: complex
    M6: complex


def moment_constants(cfg: SystemConfig) -> MomentConstants:
    N, Nt = cfg.N, cfg.Nt
    return MomentConstants(
        N * (N - 1) * (2 * N - 1) / 6,
        N * (N - 1) / 2,
        (Nt - 1) / 2,
        (Nt - 1) * (2 * Nt - 1) / 6,
        float(N),
        1.0,
    )


def _delay_sums(delta_tau, cfg: SystemConfig):
    # M1, M2, M5 for an array of delay offsets
    dt = np.atleast_1d(np.asarray(delta_tau, dtype=float))
    n = np.arange(cfg.N)
    e = np.exp(-2j * np.pi * np.outer(dt, n) / cfg.symbol_span)
    return e @ n**2, e @ n, e.sum(axis=1)


def _angle_sums(delta_theta, cfg: SystemConfig):
    # M3, M4, M6 for an array of angle offsets
    dth = np.atleast_1d(np.asarray(delta_theta, dtype=float))
    m = np.arange(cfg.Nt)
    f = np.exp(2j * np.pi * np.outer(np.sin(dth), m) * cfg.d / cfg.lambda_c)
    return f @ m / cfg.Nt, f @ m**2 / cfg.Nt, f.sum(axis=1) / cfg.Nt


def moment_functions(delta_tau: float, delta_theta: float, cfg: SystemConfig) -> MomentFunctions:
    M1, M2, M5 = (complex(x[0]) for x in _delay_sums(delta_tau, cfg))
    M3, M4, M6 = (complex(x[0]) for x in _angle_sums(delta_theta, cfg))
    return MomentFunctions(M1, M2, M3, M4, M5, M6)


def epsilon(cfg: SystemConfig) -> float:
    """Tolerance on the moment products under which the simplified bound applies."""
    O = moment_constants(cfg)
    num = 2 * (O.O1 * O.O4 * O.O5 * O.O6 - (O.O2 * O.O3) ** 2)
    return num / (O.O1 * O.O6 + 2 * O.O2 * O.O3 + O.O4 * O.O5)


def _pair_deltas(pair: tuple[Path, Path], cfg: SystemConfig):
    true, fake = pair
    (delta,) = parameter_deltas([true], [fake], cfg)
    return delta


def asymptotic_fim(pair: tuple[Path, Path], sigma2: float, cfg: SystemConfig, k: int = 0) -> FimMatrix:
    """Per-symbol large-pilot FIM over (true delay, true angle, fake delay, fake angle)."""
    if not sigma2 > 0:
        raise SingularNoiseError(f"noise variance must be positive, got {sigma2!r}")
    true, fake = pair
    delta = _pair_deltas(pair, cfg)
    O = moment_constants(cfg)
    M = moment_functions(delta.tau, delta.theta, cfg)
    lam = cfg.Lambda
    c1, c2 = math.cos(true.theta), math.cos(fake.theta)
    a = abs(true.gamma) ** 2
    at = abs(fake.gamma) ** 2
    x = np.conj(true.gamma) * fake.gamma

    T = np.zeros((4, 4), dtype=complex)
    T[0, 0] = O.O1 * O.O6 * a
    T[0, 1] = -O.O2 * O.O3 * a * c1 / lam
    T[1, 1] = O.O4 * O.O5 * a * c1**2 / lam**2
    T[2, 2] = O.O1 * O.O6 * at
    T[2, 3] = -O.O2 * O.O3 * at * c2 / lam
    T[3, 3] = O.O4 * O.O5 * at * c2**2 / lam**2
    T[0, 2] = M.M1 * M.M6 * x
    T[0, 3] = -M.M2 * M.M3 * x * c2 / lam
    T[1, 2] = -M.M2 * M.M3 * x * c1 / lam
    T[1, 3] = M.M4 * M.M5 * x * c1 * c2 / lam**2
    T = T + np.triu(T, 1).conj().T
    scale = 8 * math.pi**2 / (sigma2 * cfg.symbol_span**2)
    return FimMatrix(scale * T.real, ParamOrdering(f"zeta_{k}", ZETA_LABELS), "per-symbol")


def _determinant_factors(delta_tau: float, delta_theta: float, cfg: SystemConfig):
    O = moment_constants(cfg)
    M = moment_functions(delta_tau, delta_theta, cfg)
    r16 = (M.M1 * M.M6).real
    r23 = (M.M2 * M.M3).real
    r45 = (M.M4 * M.M5).real
    plus = (O.O1 * O.O6 + r16) * (O.O4 * O.O5 + r45) - (O.O2 * O.O3 + r23) ** 2
    minus = (O.O1 * O.O6 - r16) * (O.O4 * O.O5 - r45) - (O.O2 * O.O3 - r23) ** 2
    return plus, minus


def _require_equal_gains(pair, cfg):
    delta = _pair_deltas(pair, cfg)
    if abs(delta.gamma) > 1e-12 * max(abs(pair[0].gamma), 1e-300):
        raise AssumptionError("closed-form bounds need identical true and fake gains", ("A1",))
    return delta


def bound_xi(pair: tuple[Path, Path], sigma2: float, cfg: SystemConfig) -> float:
    """Closed form of ``4 det(J)^(-1/4)`` for the asymptotic pair FIM ``J``.

    By the AM-GM inequality on its eigenvalues this never exceeds the trace of
    the inverse. Returns ``inf`` when the determinant is not positive.
    """
    if not sigma2 > 0:
        raise SingularNoiseError(f"noise variance must be positive, got {sigma2!r}")
    true, fake = pair
    delta = _require_equal_gains(pair, cfg)
    plus, minus = _determinant_factors(delta.tau, delta.theta, cfg)
    cc = abs(math.cos(true.theta) * math.cos(fake.theta))
    if not (plus > 0 and minus > 0 and cc > 0):
        return math.inf
    span = cfg.symbol_span
    xi1 = span**4 / plus
    xi2 = 1.0 / minus
    pref = cfg.lambda_c * sigma2 / (2 * math.pi**2 * cfg.d * abs(true.gamma) ** 2 * math.sqrt(cc))
    return pref * (xi1 * xi2) ** 0.25


def psi_factors(pair: tuple[Path, Path], sigma2: float, cfg: SystemConfig) -> tuple[float, float, float]:
    """The SNR/angle factor, the system-size factor and the angle-offset factor of Psi."""
    true, fake = pair
    delta = _pair_deltas(pair, cfg)
    O = moment_constants(cfg)
    Nt = cfg.Nt
    lam, d = cfg.lambda_c, cfg.d
    cc = abs(math.cos(true.theta) * math.cos(fake.theta))
    f1 = lam**1.5 * sigma2 / (math.sqrt(2) * math.pi**2.5 * d**1.5 * abs(true.gamma) ** 2 * math.sqrt(cc))
    poly = 6 * Nt**4 - 11 * Nt**3 + 21 * Nt**2 - 6 * Nt
    f2 = (cfg.Ts**4 / (O.O1 * O.O4 * O.O5 * O.O6 * poly)) ** 0.25
    s = math.sin(delta.theta)
    f3 = 1 / math.sqrt(s) if s > 0 else math.inf
    return f1, f2, f3


# --------------------------------------------------------------------------
# Assumption checks


@dataclass
class AssumptionReport:
    A1: bool
    A2: bool
    A3: bool
    A4: bool
    A5: bool
    delta_tau: float
    delta_theta: float
    delta_tau_max: float
    delta_theta_max: float
    epsilon: float
    notes: list[str] = field(default_factory=list)

    @property
    def flags(self) -> dict[str, bool]:
        return {k: getattr(self, k) for k in ("A1", "A2", "A3", "A4", "A5")}

    @property
    def failing(self) -> tuple[str, ...]:
        return tuple(k for k, ok in self.flags.items() if not ok)

    @property
    def all_hold(self) -> bool:
        return not self.failing


def _moment_gaps(tau_grid, theta_grid, cfg: SystemConfig) -> np.ndarray:
    """Largest of the three product deviations over a (tau, theta) grid."""
    O = moment_constants(cfg)
    M1, M2, M5 = _delay_sums(tau_grid, cfg)
    M3, M4, M6 = _angle_sums(theta_grid, cfg)
    g1 = np.abs(np.real(np.outer(M1, M6)) - O.O1 * O.O6)
    g2 = np.abs(np.real(np.outer(M2, M3)) - O.O2 * O.O3)
    g3 = np.abs(np.real(np.outer(M5, M4)) - O.O4 * O.O5)
    return np.maximum(np.maximum(g1, g2), g3)


def _first_crossing(pred, hi: float, samples: int = 4097, iters: int = 80) -> float:
    """Largest x in [0, hi] such that pred holds on the whole grid up to x, refined by bisection."""
    xs = np.linspace(0.0, hi, samples)
    ok = pred(xs)
    if ok.all():
        return hi
    j = int(np.argmin(ok))
    if j == 0:
        return 0.0
    lo, up = xs[j - 1], xs[j]
    for _ in range(iters):
        mid = 0.5 * (lo + up)
        if pred(np.array([mid]))[0]:
            lo = mid
        else:
            up = mid
    return float(lo)


@functools.lru_cache(maxsize=64)
def offset_limits(cfg: SystemConfig, grid: int = 65) -> tuple[float, float]:
    """Largest delay and angle offsets keeping all three moment products within epsilon.

    Each axis is scanned from zero with the other offset at zero, and the
    first violation is located by bisection. The resulting box is then shrunk
    by a common factor, again found by bisection, until the inequalities hold
    on a ``grid`` x ``grid`` sample of the whole box.
    """
    eps = epsilon(cfg)
    t_max = _first_crossing(lambda t: _moment_gaps(t, [0.0], cfg)[:, 0] < eps, cfg.symbol_span)
    a_max = _first_crossing(lambda a: _moment_gaps([0.0], a, cfg)[0] < eps, math.pi / 2)

    def box_ok(s: float) -> bool:
        t = np.linspace(0.0, s * t_max, grid)
        a = np.linspace(0.0, s * a_max, grid)
        return bool(np.all(_moment_gaps(t, a, cfg) < eps))

    if box_ok(1.0):
        return t_max, a_max
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if box_ok(mid):
            lo = mid
        else:
            hi = mid
    return lo * t_max, lo * a_max


def check_assumptions(
    pair: tuple[Path, Path],
    cfg: SystemConfig,
    delta_tau_min: float | None = None,
    delta_theta_min: float | None = None,
) -> AssumptionReport:
    """Evaluate the five hypotheses behind the simplified bound.

    Minimum offsets default to strict positivity.
    """
    delta = _pair_deltas(pair, cfg)
    dt, dth = delta.tau, delta.theta
    t_max, a_max = offset_limits(cfg)
    notes = []

    a1 = abs(delta.gamma) <= 1e-12 * max(abs(pair[0].gamma), 1e-300)
    a2 = (dt >= delta_tau_min if delta_tau_min else dt > 0) and dt <= t_max
    a3 = (dth >= delta_theta_min if delta_theta_min else dth > 0) and dth <= a_max
    if not a2:
        notes.append(f"delay offset {dt:.6g} s outside (min, {t_max:.6g}]")
    if not a3:
        notes.append(f"angle offset {dth:.6g} rad outside (min, {a_max:.6g}]")

    nt = np.arange(cfg.Nt)[:, None]
    n = np.arange(cfg.N)[None, :]
    worst = float(np.max(nt * math.sin(dth) + n * cfg.Lambda * dt))
    a4 = worst <= cfg.lambda_c / (4 * cfg.d)
    if not a4:
        notes.append(f"phase excursion {worst:.6g} exceeds {cfg.lambda_c / (4 * cfg.d):.6g}")

    lo = (cfg.N - 1) * cfg.Lambda * dt
    hi = (cfg.N - 1) * cfg.Lambda * t_max
    s = math.sin(dth)
    tol = 1e-12 * max(abs(s), abs(lo), 1e-300)
    a5 = lo <= s + tol and s <= hi + tol
    if not a5:
        notes.append(f"sin(angle offset) {s:.6g} outside [{lo:.6g}, {hi:.6g}]")
    return AssumptionReport(a1, a2, a3, a4, a5, dt, dth, t_max, a_max, epsilon(cfg), notes)


def bound_psi(
    pair: tuple[Path, Path],
    sigma2: float,
    cfg: SystemConfig,
    strict: bool = True,
    delta_tau_min: float | None = None,
    delta_theta_min: float | None = None,
) -> float:
    """Simplified lower bound depending on the angle offset only through ``1/sqrt(sin)``.

    With ``strict=True`` (the default) the bound is refused unless all five
    hypotheses hold. ``strict=False`` evaluates the closed form regardless;
    pair it with :func:`check_assumptions` to know whether the value is backed
    by the derivation.
    """
    if not sigma2 > 0:
        raise SingularNoiseError(f"noise variance must be positive, got {sigma2!r}")
    if strict:
        rep = check_assumptions(pair, cfg, delta_tau_min, delta_theta_min)
        if not rep.all_hold:
            raise AssumptionError(
                "bound undefined: assumptions " + ", ".join(rep.failing) + " fail", rep.failing
            )
    f1, f2, f3 = psi_factors(pair, sigma2, cfg)
    return f1 * f2 * f3


@dataclass
class BoundReport:
    xi: float
    psi: float
    trace_exact: float
    trace_asymptotic: float
    assumption_flags: dict[str, bool]
    epsilon: float
    G: int
    slack: float  # G * trace_exact - xi

    @property
    def chain_holds(self) -> bool:
        return self.psi <= self.xi <= self.G * self.trace_exact


def bound_report(
    pair: tuple[Path, Path],
    sigma2: float,
    cfg: SystemConfig,
    zeta_exact: FimMatrix,
    G: int,
) -> BoundReport:
    """Collect both closed-form bounds, the exact and the asymptotic traces for one pair.

    ``zeta_exact`` is the exact (pilot-summed) FIM of the pair over ``G``
    symbols; ``trace_asymptotic`` is reported per ``G`` symbols to be directly
    comparable with ``trace_exact``.
    """
    J_asym = asymptotic_fim(pair, sigma2, cfg)
    rep = check_assumptions(pair, cfg)
    xi = bound_xi(pair, sigma2, cfg)
    psi = bound_psi(pair, sigma2, cfg, strict=False)
    t_exact = crlb_trace(zeta_exact).trace
    t_asym = crlb_trace(J_asym).trace / G
    return BoundReport(xi, psi, t_exact, t_asym, rep.flags, rep.epsilon, G, G * t_exact - xi)
