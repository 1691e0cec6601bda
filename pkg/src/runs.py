# runs.py
"""
Batch drivers behind the command-line subcommands. Every driver returns a
CsvTable; writing it (or printing it) is left to the caller.
"""
import logging
import math
from typing import Optional, Sequence

import numpy as np

from core import DecoherenceParams, DomainError, ValidationError, bohr_frequencies
from evolution import damping_rate, frequency_shift, propagate_closed_form
from models import (
    KIND_EPR,
    KIND_RABI,
    KIND_SPIN,
    CatScenario,
    GaussianPacket,
    OscillatorScenario,
    TwoLevelScenario,
    annihilation_operator,
    cat_density,
    coherent_amplitude,
    coherent_state,
    epr_transit,
    free_particle_spread,
    oscillator_hamiltonian,
    position_variance,
    rabi_population_difference,
    spin_state_after_transit,
    stern_gerlach_probabilities,
    two_level_coherence,
    undamped_half_width,
)
from observables import (
    averaged_position_profile,
    expectation,
    tm_check,
    tm_sweep,
    trace_product,
)
from runconfig import CsvTable, RunConfig, TimeSeries, config_fingerprint, standard_metadata
from trajectories import McConfig, mc_estimate_density, mc_estimate_observable, rng_metadata
from waiting_time import gamma_grid, gamma_moments

logger = logging.getLogger(__name__)

CRONON_RTOL = 1e-9
SCENARIOS = ("oscillator", "free-particle", "cat", "spin", "rabi", "epr")


# ─── Shared Helpers ────────────────────────────────────────────────────────────
def _off_cronon_grid(value: float, tau2: float) -> bool:
    k = value / tau2
    return abs(k - round(k)) > CRONON_RTOL * max(1.0, abs(k))


def cronon_warnings(cfg: RunConfig):
    """Informational notes for time grids that do not sit on multiples of tau2."""
    notes = []
    tau2 = cfg.params.tau2
    if _off_cronon_grid(cfg.times.spacing, tau2) or _off_cronon_grid(cfg.times.start, tau2):
        notes.append(
            f"time grid (start={cfg.times.start!r}, step={cfg.times.spacing!r}) is off the cronon grid "
            f"tau2={tau2!r}; values between cronons are interpolated by the closed form"
        )
    for note in notes:
        logger.warning("[CRONON] %s", note)
    return notes


def _element_channel(n, m):
    return f"rho_{n}_{m}"


def _config_table(series: TimeSeries, cfg: RunConfig, seed=None) -> CsvTable:
    table = series.table()
    standard_metadata(table, cfg.params, seed=seed, fingerprint=config_fingerprint(cfg))
    table.note("dim", cfg.dim)
    for note in cronon_warnings(cfg):
        table.note("warning", note)
    return table


def _rate_notes(table: CsvTable, cfg: RunConfig):
    freqs = bohr_frequencies(cfg.spectrum, cfg.params)
    for n, m, omega in freqs.unique_pairs():
        table.note(
            f"pair_{n}_{m}",
            f"omega={omega:.17g} gamma={damping_rate(omega, cfg.params):.17g} "
            f"nu={frequency_shift(omega, cfg.params):.17g}",
        )


# ─── evolve ────────────────────────────────────────────────────────────────────
def run_evolve(cfg: RunConfig) -> CsvTable:
    """Closed-form averaged state on the config's time grid."""
    times = cfg.times.values
    states = [propagate_closed_form(cfg.rho0, cfg.spectrum, cfg.params, float(t)) for t in times]
    series = TimeSeries(times)
    for n, m in cfg.track_elements:
        series.add(_element_channel(n, m), np.array([s.entries[n, m] for s in states], dtype=complex))
    for obs in cfg.observables:
        series.add(obs.name, np.array([expectation(s, obs.matrix) for s in states]))
    table = _config_table(series, cfg)
    _rate_notes(table, cfg)
    logger.info("[EVOLVE] %d times, %d channels", len(times), len(series.channels))
    return table


# ─── rates / dist ──────────────────────────────────────────────────────────────
def run_rates(omegas: Sequence[float], params: DecoherenceParams) -> CsvTable:
    table = standard_metadata(CsvTable(columns=["omega", "gamma", "nu"]), params)
    for omega in omegas:
        if not math.isfinite(omega):
            raise ValidationError(f"frequencies must be finite, got {omega!r}")
        table.add_row([float(omega), damping_rate(omega, params), frequency_shift(omega, params)])
    return table


def run_dist(t: float, params: DecoherenceParams, start: float, stop: float, count: int) -> CsvTable:
    """The waiting-time density on a grid, with its moments in the header."""
    table = standard_metadata(CsvTable(columns=["t_prime", "density"]), params)
    mean, dispersion = gamma_moments(t, params)
    table.note("t", t)
    table.note("shape", t / params.tau2)
    table.note("mean", mean)
    table.note("dispersion", dispersion)
    for row in gamma_grid(t, params, start, stop, count):
        table.add_row(list(row))
    return table


# ─── scenario ──────────────────────────────────────────────────────────────────
def _scenario_times(t_min, t_max, steps):
    if int(steps) != steps or steps < 2:
        raise ValidationError(f"steps must be an integer >= 2, got {steps!r}")
    if not t_max > t_min:
        raise DomainError(f"t_max must exceed {t_min!r}, got {t_max!r}")
    return np.linspace(t_min, t_max, int(steps))


def _oscillator(options, params, t_max, steps, table_notes):
    sc = OscillatorScenario(alpha0=complex(options.get("alpha", 2.0), options.get("alpha_im", 0.0)),
                            omega=options.get("omega", 1.0), dim=options.get("dim"))
    gamma = damping_rate(sc.omega, params)
    times = _scenario_times(0.0, t_max or (5.0 / gamma if gamma > 0 else 10.0), steps)
    rho0 = coherent_state(sc)
    spec = oscillator_hamiltonian(sc, params.hbar)
    a = annihilation_operator(sc.dim)
    number = a.conj().T @ a
    states = [propagate_closed_form(rho0, spec, params, float(t)) for t in times]
    series = TimeSeries(times)
    series.add("a", np.array([coherent_amplitude(sc, params, float(t)) for t in times]))
    series.add("a_propagated", np.array([trace_product(s, a) for s in states]))
    series.add("photon_number", np.array([expectation(s, number) for s in states]))
    table_notes += [("dim", sc.dim), ("gamma", gamma), ("nu", frequency_shift(sc.omega, params))]
    return series


def _free_particle(options, params, t_max, steps, table_notes):
    sigma_x = options.get("sigma_x", 1.0)
    sigma_v = options.get("sigma_v", 0.1)
    packet = GaussianPacket(sigma_x=sigma_x, sigma_v=sigma_v)
    times = _scenario_times(params.tau2 * 100.0, t_max or params.tau2 * 1000.0, steps)
    points = int(options.get("x_points", 401))
    formula, measured = [], []
    for t in times:
        variance = free_particle_spread(sigma_x, sigma_v, params, float(t))
        # ±10 predicted widths holds the Γ mixture of Gaussians
        grid = np.linspace(-10.0, 10.0, points) * math.sqrt(variance)
        formula.append(variance)
        measured.append(position_variance(averaged_position_profile(packet.psi, grid, float(t), params), grid))
    series = TimeSeries(times)
    series.add("variance_formula", np.array(formula))
    series.add("variance_quadrature", np.array(measured))
    table_notes += [("sigma_x", sigma_x), ("sigma_v", sigma_v), ("x_points", points)]
    return series


def _cat(options, params, t_max, steps, table_notes):
    sc = CatScenario(sigma_x=options.get("sigma_x", 1.0), D=options.get("D", 10.0),
                     m=options.get("mass", 1.0), hbar=params.hbar)
    times = _scenario_times(params.tau2, t_max or params.tau2 * 50.0, steps)
    count = int(options.get("x_points", 21))
    if count < 1:
        raise ValidationError(f"x_points must be positive, got {count}")
    xs = np.linspace(-sc.D, sc.D, count) if count > 1 else np.zeros(1)
    series = TimeSeries(times)
    profiles = np.array([cat_density(sc, params, xs, float(t)) for t in times]).reshape(len(times), count)
    for i in range(count):
        series.add(f"P_{i}", profiles[:, i])
    series.add("interference_at_0", np.array([
        math.exp(-damping_rate(sc.omega(0.0), params) * t) * math.cos(frequency_shift(sc.omega(0.0), params) * t)
        for t in times
    ]))
    series.add("undamped_half_width", np.array([undamped_half_width(sc, params, float(t)) for t in times]))
    table_notes += [("sigma_v", sc.sigma_v), ("x_grid", " ".join(format(x, ".17g") for x in xs))]
    return series


def _transit_notes(sc: TwoLevelScenario, params, table_notes):
    if sc.L is not None:
        report = two_level_coherence(sc, params)
        table_notes += [("transit_time", sc.transit_time), ("transit_survival", report.survival)]


def _spin(options, params, t_max, steps, table_notes):
    sc = TwoLevelScenario(kind=KIND_SPIN, splitting=options.get("omega0", 1.0),
                          L=options.get("L"), v=options.get("v"))
    times = _scenario_times(0.0, t_max or (sc.transit_time if sc.L is not None else 10.0), steps)
    series = TimeSeries(times)
    series.add("coherence", np.array([spin_state_after_transit(sc, params, float(t)).entries[0, 1]
                                      for t in times]))
    series.add("P_plus_x", np.array([stern_gerlach_probabilities(sc, params, float(t))[0] for t in times]))
    _transit_notes(sc, params, table_notes)
    return series


def _rabi(options, params, t_max, steps, table_notes):
    sc = TwoLevelScenario(kind=KIND_RABI, g=options.get("g", 5.0), n_photons=int(options.get("n", 0)))
    gamma = damping_rate(sc.splitting, params)
    times = _scenario_times(0.0, t_max or (10.0 / gamma if gamma > 0 else 10.0), steps)
    d = np.array([rabi_population_difference(sc, params, float(t)) for t in times])
    series = TimeSeries(times)
    series.add("d", d)
    series.add("P_upper", 0.5 * (1.0 + d))
    series.add("envelope", np.exp(-gamma * times))
    table_notes += [("Omega", sc.splitting), ("gamma", gamma), ("nu", frequency_shift(sc.splitting, params))]
    return series


def _epr(options, params, t_max, steps, table_notes):
    sc = TwoLevelScenario(kind=KIND_EPR, splitting=options.get("omega0", 1.0),
                          L=options.get("L"), v=options.get("v"))
    times = _scenario_times(0.0, t_max or (sc.transit_time if sc.L is not None else 10.0), steps)
    reports = [epr_transit(sc, params, float(t)) for t in times]
    series = TimeSeries(times)
    series.add("coherence", np.array([r.coherence for r in reports]))
    series.add("survival", np.array([r.survival for r in reports]))
    series.add("P_up_down", np.array([r.populations[1] for r in reports]))
    series.add("P_down_up", np.array([r.populations[2] for r in reports]))
    _transit_notes(sc, params, table_notes)
    return series


_SCENARIO_BUILDERS = {
    "oscillator": _oscillator,
    "free-particle": _free_particle,
    "cat": _cat,
    "spin": _spin,
    "rabi": _rabi,
    "epr": _epr,
}


def run_scenario(name: str, options: dict, params: DecoherenceParams, t_max: Optional[float] = None,
                 steps: int = 101) -> CsvTable:
    """
    Drive one of the physical scenarios. ``options`` holds scenario flags
    (alpha, omega, sigma_x, D, mass, omega0, g, n, L, v, x_points...); absent
    flags take the scenario defaults. ``t_max=None`` picks a scenario timescale.
    """
    if name not in _SCENARIO_BUILDERS:
        raise ValidationError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")
    options = {k: v for k, v in options.items() if v is not None}
    notes = []
    series = _SCENARIO_BUILDERS[name](options, params, t_max, steps, notes)
    table = standard_metadata(series.table(), params)
    table.note("scenario", name)
    for key, value in notes:
        table.note(key, value)
    logger.info("[EVOLVE] scenario %s: %d times", name, len(series.times))
    return table


# ─── mc ────────────────────────────────────────────────────────────────────────
def time_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for time point ``index`` of a run seeded with ``seed``."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def run_mc(cfg: RunConfig, samples: int, seed: int, workers: int = 0) -> CsvTable:
    """Monte-Carlo estimates with standard errors next to the closed form."""
    if int(samples) != samples or samples < 2:
        raise DomainError(f"Monte-Carlo estimates need at least 2 samples, got {samples!r}")
    # seed and worker count are checked before any sampling
    McConfig(samples=int(samples), seed=seed, worker_hint=workers)
    times = cfg.times.values
    estimates = {}
    for i, t in enumerate(times):
        t = float(t)
        exact = propagate_closed_form(cfg.rho0, cfg.spectrum, cfg.params, t)
        if t == 0.0:
            # the effective time is exactly 0: no sampling noise
            rho_est, rho_err = exact.entries, np.zeros((cfg.dim, cfg.dim))
            obs_est = {o.name: (expectation(exact, o.matrix), 0.0) for o in cfg.observables}
        else:
            mc = McConfig(samples=int(samples), seed=time_seed(seed, i), worker_hint=workers)
            rho_est, rho_err = mc_estimate_density(cfg.rho0, cfg.spectrum, cfg.params, t, mc)
            obs_est = {o.name: mc_estimate_observable(cfg.rho0, cfg.spectrum, cfg.params, o.matrix, t, mc)
                       for o in cfg.observables}
        estimates[t] = (rho_est, rho_err, exact, obs_est)

    series = TimeSeries(times)
    ordered = [estimates[float(t)] for t in times]
    for n, m in cfg.track_elements:
        name = _element_channel(n, m)
        series.add(name, np.array([e[0][n, m] for e in ordered], dtype=complex))
        series.add(f"{name}_stderr", np.array([e[1][n, m] for e in ordered]))
        series.add(f"{name}_exact", np.array([e[2].entries[n, m] for e in ordered], dtype=complex))
    for obs in cfg.observables:
        series.add(obs.name, np.array([e[3][obs.name][0] for e in ordered]))
        series.add(f"{obs.name}_stderr", np.array([e[3][obs.name][1] for e in ordered]))
        series.add(f"{obs.name}_exact", np.array([expectation(e[2], obs.matrix) for e in ordered]))
    table = _config_table(series, cfg, seed=seed)
    table.note("samples", int(samples))
    table.note("rng", rng_metadata(McConfig(samples=int(samples), seed=seed)))
    return table


# ─── tm-check ──────────────────────────────────────────────────────────────────
TM_COLUMNS = ["case", "t", "delta_A_bar", "sigma_A", "sigma_H", "tau_E", "tau_E_infinite",
              "lhs", "rhs", "satisfied", "slack", "degenerate"]


def run_tm_check(cfg: RunConfig, observable: str, t: float, fuzz: int = 0,
                 fuzz_seed: Optional[int] = None) -> CsvTable:
    """
    The time-energy inequality on the config's state, plus ``fuzz`` randomized
    systems of the same dimension. Any violation raises NumericError.
    """
    A = cfg.observable(observable).matrix
    table = CsvTable(columns=list(TM_COLUMNS))
    standard_metadata(table, cfg.params, seed=cfg.seed, fingerprint=config_fingerprint(cfg))
    table.note("observable", observable)
    report = tm_check(cfg.rho0, cfg.spectrum, cfg.params, A, t)
    table.add_row(dict(report.as_row(), case="config"))
    if fuzz:
        if int(fuzz) != fuzz or fuzz < 0:
            raise ValidationError(f"fuzz must be a non-negative integer, got {fuzz!r}")
        seed = fuzz_seed if fuzz_seed is not None else (cfg.seed or 0)
        rng = np.random.default_rng(seed)
        table.note("fuzz_seed", seed)
        for i, fuzzed in enumerate(tm_sweep(rng, int(fuzz), cfg.dim)):
            table.add_row(dict(fuzzed.as_row(), case=f"fuzz_{i}"))
        logger.info("[TM] %d randomized systems, no violations", fuzz)
    return table
