"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 solver or fit failure,
4 I/O or trace-parse error.
"""

from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path

import click

from . import harness
from . import scenario as sc_mod
from .errors import DomainError, FitError, NoConvergence, ScenarioError, TraceParseError

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

DEFAULT_SCENARIO = "paper-fig5"


def _load_scenario(ref: str):
    path = Path(ref)
    if path.is_file():
        return sc_mod.load(path)
    try:
        return sc_mod.bundled(ref)
    except ScenarioError:
        if path.suffix == ".toml" or len(path.parts) > 1:
            raise FileNotFoundError(f"scenario file not found: {ref}") from None
        raise


def _emit(ctx, text: str):
    out = ctx.obj["out"]
    if out is None or out == "-":
        click.echo(text, nl=False)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _global_options(defaults: bool):
    """The global flags; subcommands repeat them (defaulting to None) so they may follow the verb."""

    def deco(f):
        opts = [
            click.option("--scenario", "scenario_ref", default=DEFAULT_SCENARIO if defaults else None,
                         show_default=defaults, help="Scenario TOML file or name of a bundled scenario."),
            click.option("--out", type=click.Path(dir_okay=False), default=None,
                         help="Output file (default: stdout)."),
            click.option("--format", "fmt", type=click.Choice(["csv", "json", "svg"]), default=None,
                         help="Output format (default: json for reports, csv for sweeps)."),
            click.option("--deplete", is_flag=True, default=None if not defaults else False,
                         help="Solve the full nonlinear steady state (pump depletion)."),
            click.option("--jobs", type=int, default=1 if defaults else None, show_default=defaults,
                         help="Worker threads for sweeps."),
        ]
        for o in reversed(opts):
            f = o(f)
        return f

    return deco


def _local(f):
    """Merge subcommand-level global flags into the context object."""

    @functools.wraps(f)
    def wrapper(*args, scenario_ref=None, out=None, fmt=None, deplete=None, jobs=None, **kw):
        ctx = click.get_current_context()
        for key, val in (("scenario_ref", scenario_ref), ("out", out), ("fmt", fmt), ("jobs", jobs)):
            if val is not None:
                ctx.obj[key] = val
        if deplete:
            ctx.obj["deplete"] = True
        return f(*args, **kw)

    return _global_options(False)(wrapper)


@click.group()
@_global_options(True)
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def cli(ctx, scenario_ref, out, fmt, deplete, jobs, verbose):
    """Electro-optic microwave-to-optical converter simulator."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"scenario_ref": scenario_ref, "out": out, "fmt": fmt, "deplete": deplete, "jobs": jobs}


def _scenario(ctx):
    if "scenario" not in ctx.obj:
        ctx.obj["scenario"] = _load_scenario(ctx.obj["scenario_ref"])
    return ctx.obj["scenario"]


@cli.command()
@_local
@click.pass_context
def point(ctx):
    """Evaluate the scenario working point."""
    sc = _scenario(ctx)
    fmt = ctx.obj["fmt"] or "json"
    if fmt == "json":
        _emit(ctx, harness.dumps(harness.run_point(sc, ctx.obj["deplete"])))
    elif fmt == "csv":
        sys_ = sc_mod.build_system(sc)
        obs = harness.observables(sys_, ctx.obj["deplete"])
        names = sorted(obs)
        line = ",".join(harness._fmt(obs[n]) for n in names)
        _emit(ctx, f"# scenario: {sc.name} v{sc.version}\n# scenario_hash: {sc.hash}\n" + ",".join(names) + "\n" + line + "\n")
    else:
        raise click.UsageError("point supports csv or json output")


@cli.command()
@_local
@click.option("--name", default=None, help="Sweep defined in the scenario (default: first).")
@click.option("--variable", type=click.Choice(sc_mod.SWEEP_VARIABLES), default=None)
@click.option("--start", type=float, default=None)
@click.option("--stop", type=float, default=None)
@click.option("--step", type=float, default=None)
@click.option("--count", type=int, default=None)
@click.option("--unit", default=None, help="Axis unit; 'dBm' for power sweeps in dBm.")
@click.option("--outputs", default=None, help="Comma-separated observables.")
@click.pass_context
def sweep(ctx, name, variable, start, stop, step, count, unit, outputs):
    """Run a 1-D sweep and write a CSV table (or JSON / SVG)."""
    sc = _scenario(ctx)
    if variable is not None:
        if start is None or stop is None:
            raise click.UsageError("--variable needs --start and --stop")
        if step is None and count is None:
            count = 1 if start == stop else None
            if count is None:
                raise click.UsageError("give --step or --count")
        spec = sc_mod.SweepSpec(
            name=name or variable, variable=variable, start=start, stop=stop, step=step, count=count,
            unit=unit or "", outputs=tuple(outputs.split(",")) if outputs else sc_mod.SweepSpec.outputs,
        )
    else:
        spec = sc.sweep(name)
        changes = {k: v for k, v in dict(start=start, stop=stop, unit=unit).items() if v is not None}
        if step is not None or count is not None:
            changes.update(step=step, count=count)
        if outputs:
            changes["outputs"] = tuple(outputs.split(","))
        if changes:
            from dataclasses import replace

            spec = replace(spec, **changes)
    fmt = ctx.obj["fmt"] or "csv"
    if fmt == "svg":
        from .plot import sweep_svg

        rows = harness.sweep_rows(sc, spec, ctx.obj["deplete"], ctx.obj["jobs"])
        _emit(ctx, sweep_svg(spec, rows, f"{sc.name}: {spec.name}"))
    else:
        _emit(ctx, harness.run_sweep(sc, spec, ctx.obj["deplete"], ctx.obj["jobs"], fmt))


@cli.command("compare-schemes")
@_local
@click.option("--target-db", type=float, default=30.0, show_default=True, help="Target sideband suppression.")
@click.pass_context
def compare_schemes(ctx, target_db):
    """Pump-power cost of pump detuning versus asymmetric FSR."""
    _emit(ctx, harness.dumps(harness.compare_schemes(_scenario(ctx), target_db)))


@cli.command()
@_local
@click.argument("trace_file", type=click.Path(dir_okay=False))
@click.option("--kind", type=click.Choice(["OpticalReflection", "MicrowaveReflection", "CrossingBranches"]), default=None)
@click.option("--assume", type=click.Choice(["critical", "undercoupled", "overcoupled", "none"]), default="critical",
              show_default=True, help="Coupling-regime assumption for Lorentzian fits.")
@click.option("--mode-matching", type=float, default=None)
@click.pass_context
def fit(ctx, trace_file, kind, assume, mode_matching):
    """Fit a trace file and print the fit report."""
    _emit(ctx, harness.dumps(harness.run_fit(trace_file, kind, assume, mode_matching)))


@cli.command("operating-temperature")
@_local
@click.option("--target-hz", type=float, default=None, help="FSR+ - FSR- target (default: scenario reference).")
@click.option("--bracket", type=(float, float), default=None, help="Temperature bracket in degC.")
@click.pass_context
def operating_temperature(ctx, target_hz, bracket):
    """Find the temperature giving the requested FSR asymmetry."""
    _emit(ctx, harness.dumps(harness.operating_temperature(_scenario(ctx), target_hz, bracket)))


@cli.group("scenario")
def scenario_group():
    """Scenario utilities."""


@scenario_group.command()
@_local
@click.pass_context
def validate(ctx):
    """Check that a scenario builds and every number carries a provenance tag."""
    sc = _scenario(ctx)
    sc_mod.build_system(sc)
    sc_mod.build_ladder(sc)
    sweeps = [s.name for s in sc.sweeps()]
    untagged = sc.untagged()
    report = {
        "scenario": {"name": sc.name, "version": sc.version, "hash": sc.hash},
        "provenance_counts": sc.provenance_counts(),
        "untagged": untagged,
        "defaults": list(sc.defaults),
        "sweeps": sweeps,
        "valid": not untagged,
    }
    _emit(ctx, harness.dumps(report))
    if untagged:
        ctx.exit(EXIT_CONFIG)


def main(argv=None):
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except click.exceptions.Abort:
        return 1
    except (ScenarioError, DomainError) as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except (NoConvergence, FitError) as exc:
        click.echo(f"solver error: {exc}", err=True)
        return EXIT_SOLVER
    except (OSError, TraceParseError) as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return EXIT_IO
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
