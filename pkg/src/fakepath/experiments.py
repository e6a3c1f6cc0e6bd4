"""Sweep orchestration, figure datasets and CSV/JSON emission.

Seed scheme
-----------
One master seed per run. Every random draw uses its own stream obtained from
``numpy.random.SeedSequence(master, spawn_key=(stream, *counters))``:

========  ==========================  =================================
stream    counters                    use
========  ==========================  =================================
0         none                        path-gain phases
1         none                        pilot symbols
2         (snr index,)                noise samples (synthesis only)
========  ==========================  =================================

All bounds are deterministic functions of the gains and pilots, so one
realization serves every SNR point and every figure. That is what keeps the
legitimate and the eavesdropping receiver on the same received signal and
keeps the baseline noise level constant over a sweep.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Sequence

import numpy as np

from .bounds import bound_report
from .channel import (
    PathSet,
    PilotBlock,
    Provenance,
    Scene,
    SystemConfig,
    feasible_scatterer,
    generate_pilots,
    scene_to_params,
    separation_thresholds,
    sigma_from_snr,
)
from .errors import AssumptionError, FakePathError, ValidationError
from .fisher import (
    crlb_trace,
    exact_fim,
    gaussian_baseline_sigma,
    leaked_fim,
    localization_fim,
    localization_jacobian,
    position_crlb,
    zeta_fim,
)
from .precoder import FakePathDesign, effective_pilots, eve_effective_paths
from .scenario import ScenarioSpec

STREAM_PHASES = 0
STREAM_PILOTS = 1
STREAM_NOISE = 2

FIGURES = ("bounds", "delta_heatmap", "toa", "aod", "loc", "multiset")


def derive_seed(master: int, stream: int, *counters: int) -> int:
    ss = np.random.SeedSequence(int(master), spawn_key=(int(stream),) + tuple(int(c) for c in counters))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Realization:
    """Random draws and derived channel quantities shared by all SNR points."""

    cfg: SystemConfig
    scene: Scene
    true_paths: PathSet
    pilots: PilotBlock
    seed: int


def realize(spec: ScenarioSpec, G: int | None = None) -> Realization:
    seed = spec.sweep.seed
    cfg = spec.system
    paths = scene_to_params(spec.scene, cfg, derive_seed(seed, STREAM_PHASES))
    pilots = generate_pilots(cfg, derive_seed(seed, STREAM_PILOTS), G)
    return Realization(cfg, spec.scene, paths, pilots, seed)


def fake_scatterers(eve_paths: PathSet, scene: Scene, cfg: SystemConfig) -> list[np.ndarray]:
    """Scatterer position for every fake path; raises if one has none."""
    out = []
    for i, p in enumerate(eve_paths):
        if p.provenance is not Provenance.FAKE:
            continue
        v = feasible_scatterer(p.tau, p.theta, scene.p, scene.v0, cfg.c)
        if v is None:
            raise ValidationError(f"fake path {i} has no geometrically feasible scatterer")
        out.append(v)
    return out


@dataclass(frozen=True)
class DesignContext:
    """Precomputed objects that depend on the design but not on the SNR."""

    design: FakePathDesign
    bob_pilots: PilotBlock
    eve_paths: PathSet
    eve_true_paths: PathSet
    pi_bob: Any
    pi_eve: Any
    pi_leaked: Any
    varsigma2: float


def design_context(real: Realization, design: FakePathDesign, alias: bool) -> DesignContext:
    cfg, scene = real.cfg, real.scene
    bob_pilots = effective_pilots(real.pilots, design, cfg)
    eve_paths = eve_effective_paths(real.true_paths, design, cfg, alias)
    pi_bob = localization_jacobian(scene, [], cfg)
    pi_eve = localization_jacobian(scene, fake_scatterers(eve_paths, scene, cfg), cfg)
    pi_leaked = localization_jacobian(scene, [], cfg, extra=("dbar_tau", "dbar_theta")) if design.nu == 1 else None
    # the baseline sees the same (possibly power-scaled) gains as the eavesdropper
    varsigma2 = gaussian_baseline_sigma(eve_paths.subset(Provenance.FAKE), real.pilots, cfg)
    return DesignContext(
        design, bob_pilots, eve_paths, eve_paths.subset(Provenance.TRUE), pi_bob, pi_eve, pi_leaked, varsigma2
    )


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    sigma2_lin: float
    varsigma2_lin: float
    crlb_bob_loc_m: float
    crlb_eve_fpi_loc_m: float
    crlb_eve_leaked_loc_m: float
    crlb_eve_gauss_loc_m: float
    crlb_toa_bob_s: float
    crlb_toa_eve_s: float
    crlb_toa_gauss_s: float
    crlb_aod_bob_rad: float
    crlb_aod_eve_rad: float
    crlb_aod_gauss_rad: float
    xi_over_g_mix: float
    psi_over_g_mix: float
    trace_exact_mix: float
    trace_asym_over_g_mix: float
    seed: int


def _root(res) -> float:
    return math.sqrt(res.trace)


def _annotated(exc: Exception, snr_db: float) -> Exception:
    msg = f"at SNR {snr_db:g} dB: {exc}"
    try:
        if isinstance(exc, AssumptionError):
            new = AssumptionError(msg, exc.failing)
        else:
            new = type(exc)(msg)
    except Exception:
        new = FakePathError(msg)
    new.__cause__ = exc
    return new


def sweep_point(real: Realization, ctx: DesignContext, snr_db: float) -> SweepRow:
    cfg = real.cfg
    try:
        sigma2 = sigma_from_snr(real.true_paths, ctx.bob_pilots, snr_db, cfg)
        J_bob = exact_fim(real.true_paths, ctx.bob_pilots, sigma2, cfg)
        J_eve = exact_fim(ctx.eve_paths, real.pilots, sigma2, cfg)
        J_gauss = exact_fim(ctx.eve_true_paths, real.pilots, sigma2 + ctx.varsigma2, cfg)
        leaked = math.inf
        if ctx.pi_leaked is not None:
            J_leak = leaked_fim(real.true_paths, ctx.design, real.pilots, sigma2, cfg)
            leaked = position_crlb(localization_fim(J_leak, ctx.pi_leaked))

        K1 = len(real.true_paths)
        pair = (ctx.eve_paths[0], ctx.eve_paths[K1])
        rep = bound_report(pair, sigma2, cfg, zeta_fim(J_eve), cfg.G)
        return SweepRow(
            snr_db=float(snr_db),
            sigma2_lin=sigma2,
            varsigma2_lin=ctx.varsigma2,
            crlb_bob_loc_m=position_crlb(localization_fim(J_bob, ctx.pi_bob)),
            crlb_eve_fpi_loc_m=position_crlb(localization_fim(J_eve, ctx.pi_eve)),
            crlb_eve_leaked_loc_m=leaked,
            crlb_eve_gauss_loc_m=position_crlb(localization_fim(J_gauss, ctx.pi_bob)),
            crlb_toa_bob_s=_root(crlb_trace(J_bob, ["tau[0]"])),
            crlb_toa_eve_s=_root(crlb_trace(J_eve, ["tau[0]"])),
            crlb_toa_gauss_s=_root(crlb_trace(J_gauss, ["tau[0]"])),
            crlb_aod_bob_rad=_root(crlb_trace(J_bob, ["theta[0]"])),
            crlb_aod_eve_rad=_root(crlb_trace(J_eve, ["theta[0]"])),
            crlb_aod_gauss_rad=_root(crlb_trace(J_gauss, ["theta[0]"])),
            xi_over_g_mix=rep.xi / cfg.G,
            psi_over_g_mix=rep.psi / cfg.G,
            trace_exact_mix=rep.trace_exact,
            trace_asym_over_g_mix=rep.trace_asymptotic,
            seed=real.seed,
        )
    except FakePathError as exc:
        raise _annotated(exc, snr_db) from exc


def _map_ordered(fn, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))  # map preserves input order


def run_sweep(spec: ScenarioSpec) -> list[SweepRow]:
    """One row per SNR point, sorted by SNR."""
    real = realize(spec)
    ctx = design_context(real, spec.design, spec.alias_angles)
    snrs = sorted(spec.sweep.snr_db)
    return _map_ordered(lambda s: sweep_point(real, ctx, s), snrs, spec.sweep.workers)


@dataclass
class Table:
    columns: list[str]
    rows: list[dict]


def _project(rows: list[SweepRow], columns: list[str]) -> Table:
    return Table(columns, [{c: getattr(r, c) for c in columns} for r in rows])


def coupled_design(mu: float, cfg: SystemConfig) -> FakePathDesign:
    """Angle offset ``mu`` times the angle threshold with the delay offset tied to its sine."""
    _, u_theta = separation_thresholds(cfg)
    dth = mu * u_theta
    return FakePathDesign.single(math.sin(dth) / ((cfg.N - 1) * cfg.Lambda), dth)


def bounds_table(spec: ScenarioSpec) -> Table:
    real = realize(spec)
    cfg = real.cfg
    cols = [
        "mu", "delta_bar_tau_s", "delta_bar_theta_rad", "xi_over_g_mix", "psi_over_g_mix",
        "trace_exact_mix", "trace_asym_over_g_mix", "psi_failing_assumptions",
    ]
    rows = []
    for mu in spec.sweep.mu:
        design = replace(coupled_design(mu, cfg), normalize_power=spec.design.normalize_power)
        bob_pilots = effective_pilots(real.pilots, design, cfg)
        eve = eve_effective_paths(real.true_paths, design, cfg, alias=True)
        sigma2 = sigma_from_snr(real.true_paths, bob_pilots, spec.sweep.figure_snr_db, cfg)
        J = exact_fim(eve, real.pilots, sigma2, cfg)
        pair = (eve[0], eve[len(real.true_paths)])
        rep = bound_report(pair, sigma2, cfg, zeta_fim(J), cfg.G)
        failing = [k for k, ok in rep.assumption_flags.items() if not ok]
        (dt, dth), = design.sets
        rows.append({
            "mu": mu, "delta_bar_tau_s": dt, "delta_bar_theta_rad": dth,
            "xi_over_g_mix": rep.xi / cfg.G, "psi_over_g_mix": rep.psi / cfg.G,
            "trace_exact_mix": rep.trace_exact, "trace_asym_over_g_mix": rep.trace_asymptotic,
            "psi_failing_assumptions": " ".join(failing) or "none",
        })
    return Table(cols, rows)


def delta_heatmap_table(spec: ScenarioSpec) -> Table:
    real = realize(spec)
    cfg = real.cfg
    u_tau, u_theta = separation_thresholds(cfg)
    cols = [
        "delta_tau_frac", "delta_theta_frac", "delta_bar_tau_s", "delta_bar_theta_rad",
        "crlb_bob_loc_m", "crlb_eve_fpi_loc_m",
    ]
    rows = []
    for ft in spec.sweep.delta_fractions:
        for fa in spec.sweep.delta_fractions:
            design = FakePathDesign.single(ft * u_tau, fa * u_theta, spec.design.normalize_power)
            ctx = design_context(real, design, alias=True)
            sigma2 = sigma_from_snr(real.true_paths, ctx.bob_pilots, spec.sweep.figure_snr_db, cfg)
            J_bob = exact_fim(real.true_paths, ctx.bob_pilots, sigma2, cfg)
            J_eve = exact_fim(ctx.eve_paths, real.pilots, sigma2, cfg)
            rows.append({
                "delta_tau_frac": ft, "delta_theta_frac": fa,
                "delta_bar_tau_s": ft * u_tau, "delta_bar_theta_rad": fa * u_theta,
                "crlb_bob_loc_m": position_crlb(localization_fim(J_bob, ctx.pi_bob)),
                "crlb_eve_fpi_loc_m": position_crlb(localization_fim(J_eve, ctx.pi_eve)),
            })
    return Table(cols, rows)


def multiset_table(spec: ScenarioSpec) -> Table:
    """Single-set design against the same design plus a second, wider set."""
    real = realize(spec)
    cfg = real.cfg
    u_tau, u_theta = separation_thresholds(cfg)
    f = spec.sweep.multiset_fraction
    single = spec.design
    double = FakePathDesign(single.sets[:1] + ((f * u_tau, f * u_theta),), single.normalize_power)
    ctx1 = design_context(real, single, spec.alias_angles)
    ctx2 = design_context(real, double, spec.alias_angles)
    cols = [
        "snr_db", "crlb_bob_single_loc_m", "crlb_bob_multi_loc_m",
        "crlb_eve_single_loc_m", "crlb_eve_multi_loc_m",
    ]
    rows = []
    for snr in sorted(spec.sweep.snr_db):
        row = {"snr_db": snr}
        for name, ctx in (("single", ctx1), ("multi", ctx2)):
            sigma2 = sigma_from_snr(real.true_paths, ctx.bob_pilots, snr, cfg)
            J_bob = exact_fim(real.true_paths, ctx.bob_pilots, sigma2, cfg)
            J_eve = exact_fim(ctx.eve_paths, real.pilots, sigma2, cfg)
            row[f"crlb_bob_{name}_loc_m"] = position_crlb(localization_fim(J_bob, ctx.pi_bob))
            row[f"crlb_eve_{name}_loc_m"] = position_crlb(localization_fim(J_eve, ctx.pi_eve))
        rows.append(row)
    return Table(cols, rows)


def run_figure(spec: ScenarioSpec, figure_id: str) -> Table:
    if figure_id == "bounds":
        return bounds_table(spec)
    if figure_id == "delta_heatmap":
        return delta_heatmap_table(spec)
    if figure_id == "multiset":
        return multiset_table(spec)
    if figure_id in ("toa", "aod", "loc"):
        rows = run_sweep(spec)
        cols = {
            "toa": ["snr_db", "crlb_toa_bob_s", "crlb_toa_eve_s", "crlb_toa_gauss_s"],
            "aod": ["snr_db", "crlb_aod_bob_rad", "crlb_aod_eve_rad", "crlb_aod_gauss_rad"],
            "loc": ["snr_db", "crlb_bob_loc_m", "crlb_eve_fpi_loc_m", "crlb_eve_leaked_loc_m", "crlb_eve_gauss_loc_m"],
        }[figure_id]
        return _project(rows, cols)
    raise ValidationError(f"unknown figure id {figure_id!r}; choose from {', '.join(FIGURES)}")


# --------------------------------------------------------------------------
# Emission


def format_value(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return f"{x:.12g}"
    return str(x)


def _json_value(x):
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return format_value(x)
        return float(f"{x:.12g}")
    return str(x)


def _as_table(rows, columns=None) -> Table:
    if isinstance(rows, Table):
        return rows
    rows = list(rows)
    if columns is None:
        if rows and dataclasses.is_dataclass(rows[0]):
            columns = [f.name for f in dataclasses.fields(rows[0])]
        elif rows:
            columns = list(rows[0])
        else:
            columns = [f.name for f in dataclasses.fields(SweepRow)]
    dicts = [dataclasses.asdict(r) if dataclasses.is_dataclass(r) else dict(r) for r in rows]
    return Table(list(columns), dicts)


def render(rows, fmt: str = "csv", columns=None) -> str:
    table = _as_table(rows, columns)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for r in table.rows:
            w.writerow([format_value(r[c]) for c in table.columns])
        return buf.getvalue()
    if fmt == "json":
        data = [{c: _json_value(r[c]) for c in table.columns} for r in table.rows]
        return json.dumps(data, indent=2) + "\n"
    raise ValidationError(f"unknown output format {fmt!r}")


def emit(rows, fmt: str = "csv", path: str | None = None, columns=None) -> str:
    """Write rows as CSV or JSON to ``path`` (stdout when None or ``-``)."""
    text = render(rows, fmt, columns)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
