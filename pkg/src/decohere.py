# decohere.py
"""
Command-line front end.

    python src/decohere.py evolve --config run.json --out run.csv
    python src/decohere.py rates --tau1 0.1 --tau2 0.1 --omega 0,1,10
    python src/decohere.py scenario rabi --g 5 --tau1 0.1 --tau2 0.1
    python src/decohere.py mc --config run.json --samples 100000 --seed 7
    python src/decohere.py tm-check --config run.json --observable sz --t 1 --fuzz 100
    python src/decohere.py dist --t 1 --tau1 0.1 --tau2 0.1 --grid 0:3:301

Exit codes: 0 success, 2 configuration or validation error, 3 numeric failure.
"""
import functools
import logging
import sys

import click

from core import (
    DECOHERE_LOG_LEVEL,
    LIBRARY_VERSION,
    DecoherenceParams,
    DomainError,
    NumericError,
    ValidationError,
)
from runconfig import load_config
from runs import SCENARIOS, run_dist, run_evolve, run_mc, run_rates, run_scenario, run_tm_check

logger = logging.getLogger("decohere")

EXIT_INVALID = 2
EXIT_NUMERIC = 3


# ─── Plumbing ──────────────────────────────────────────────────────────────────
def _fail(code, exc):
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def handle_errors(command):
    """Map library exceptions onto the documented exit codes."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except NumericError as e:
            _fail(EXIT_NUMERIC, e)
        except (ValidationError, DomainError) as e:
            _fail(EXIT_INVALID, e)
        except OSError as e:
            _fail(EXIT_INVALID, f"{e.filename}: {e.strerror}")

    return wrapper


def emit(table, out):
    if out:
        table.write(out)
        logger.info("[OUTPUT] wrote %d rows to %s", len(table.rows), out)
    else:
        click.echo(table.render(), nl=False)


def _params(tau1, tau2, hbar):
    return DecoherenceParams(tau1=tau1, tau2=tau2, hbar=hbar)


def _omega_list(ctx, param, value):
    try:
        return [float(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}")


def _grid(ctx, param, value):
    try:
        start, stop, count = value.split(":")
        return float(start), float(stop), int(count)
    except ValueError:
        raise click.BadParameter(f"expected start:stop:count, got {value!r}")


def decoherence_options(command):
    command = click.option("--hbar", type=float, default=1.0, show_default=True)(command)
    command = click.option("--tau2", type=float, required=True, help="Cronon (mean interval between events).")(command)
    command = click.option("--tau1", type=float, required=True, help="Event width, tau1 <= tau2.")(command)
    return command


config_option = click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
                             help="JSON run configuration.")
out_option = click.option("--out", type=click.Path(dir_okay=False), default=None,
                          help="Output CSV (default: the config's output field, else stdout).")


# ─── Commands ──────────────────────────────────────────────────────────────────
@click.group()
@click.version_option(LIBRARY_VERSION, prog_name="decohere")
@click.option("--verbose", "-v", is_flag=True, help="Log progress to stderr.")
def cli(verbose):
    """Intrinsic decoherence of density matrices: propagators, oracles and scenarios."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, DECOHERE_LOG_LEVEL.upper(), logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s %(message)s",
    )


@cli.command()
@config_option
@out_option
@handle_errors
def evolve(config_path, out):
    """Averaged state and observables on the config's time grid."""
    cfg = load_config(config_path)
    emit(run_evolve(cfg), out or cfg.output)


@cli.command()
@decoherence_options
@click.option("--omega", "omegas", required=True, callback=_omega_list, help="Comma-separated Bohr frequencies.")
@out_option
@handle_errors
def rates(tau1, tau2, hbar, omegas, out):
    """Decoherence rate and frequency shift per Bohr frequency."""
    emit(run_rates(omegas, _params(tau1, tau2, hbar)), out)


@cli.command()
@click.argument("name", type=click.Choice(SCENARIOS))
@decoherence_options
@click.option("--t-max", type=float, default=None, help="Final time (default: a scenario timescale).")
@click.option("--steps", type=int, default=101, show_default=True, help="Number of time points.")
@click.option("--alpha", type=float, default=None, help="oscillator: Re α₀.")
@click.option("--alpha-im", type=float, default=None, help="oscillator: Im α₀.")
@click.option("--omega", type=float, default=None, help="oscillator: frequency.")
@click.option("--dim", type=int, default=None, help="oscillator: Fock truncation.")
@click.option("--sigma-x", type=float, default=None, help="free-particle, cat: packet width.")
@click.option("--sigma-v", type=float, default=None, help="free-particle: velocity spread.")
@click.option("--separation", "D", type=float, default=None, help="cat: packet separation D.")
@click.option("--mass", type=float, default=None, help="cat: particle mass.")
@click.option("--x-points", type=int, default=None, help="free-particle, cat: position grid size.")
@click.option("--omega0", type=float, default=None, help="spin, epr: Larmor frequency.")
@click.option("--g", type=float, default=None, help="rabi: one-photon Rabi frequency.")
@click.option("--n", type=int, default=None, help="rabi: photon number.")
@click.option("--length", "L", type=float, default=None, help="spin, epr: field extent L.")
@click.option("--velocity", "v", type=float, default=None, help="spin, epr: particle speed v.")
@out_option
@handle_errors
def scenario(name, tau1, tau2, hbar, t_max, steps, out, **options):
    """Run one of the physical scenarios."""
    emit(run_scenario(name, options, _params(tau1, tau2, hbar), t_max=t_max, steps=steps), out)


@cli.command()
@config_option
@click.option("--samples", type=int, required=True, help="Draws per time point (>= 2).")
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=None, help="64-bit seed (default: the config's seed, else 0).")
@click.option("--workers", type=int, default=0, help="Worker threads (default: DECOHERE_THREADS or CPU count).")
@out_option
@handle_errors
def mc(config_path, samples, seed, workers, out):
    """Monte-Carlo estimates beside the closed form."""
    cfg = load_config(config_path)
    seed = seed if seed is not None else (cfg.seed or 0)
    emit(run_mc(cfg, samples, seed, workers=workers), out or cfg.output)


@cli.command("tm-check")
@config_option
@click.option("--observable", required=True, help="Name of an observable in the config.")
@click.option("--t", "t", type=float, required=True, help="Evaluation time, t >= tau2.")
@click.option("--fuzz", type=int, default=0, help="Additional randomized systems to check.")
@out_option
@handle_errors
def tm_check_command(config_path, observable, t, fuzz, out):
    """Time-energy inequality over one cronon."""
    cfg = load_config(config_path)
    emit(run_tm_check(cfg, observable, t, fuzz=fuzz), out)


@cli.command()
@click.option("--t", "t", type=float, required=True, help="Wall time t > 0.")
@decoherence_options
@click.option("--grid", required=True, callback=_grid, help="start:stop:count over t'.")
@out_option
@handle_errors
def dist(t, tau1, tau2, hbar, grid, out):
    """The waiting-time density P(t, t') on a grid."""
    emit(run_dist(t, _params(tau1, tau2, hbar), *grid), out)


if __name__ == "__main__":
    cli()
