"""Command-line entry point.

Subcommands write into ``--out`` (default ``.``):

``simulate``    trajectory.csv
``agents``      agents.csv
``field``       field.csv
``equilibria``  equilibria.json
``sweep``       sweep.csv
``generate``    scenario.json

Every run except ``generate`` also writes manifest.json. CSV files start
with a ``# manifest_sha256=<hex>`` comment line followed by the header.

Column order:

* trajectory.csv: ``step, time``, then ``x_p<P>_r<R>`` for every strategy,
  then ``pi_p<P>_r<R>`` for every strategy, then ``pibar_p<P>`` per population.
* agents.csv: ``run``, the trajectory columns, then ``n_p<P>_r<R>`` counts.
* field.csv: ``a, b, da, db``; ``a``/``b`` are the two free coordinates and
  ``da``/``db`` the field along them. Grid points off the simplex are omitted.
* sweep.csv: ``alpha, steps, converged``; ``steps`` is empty when not converged.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 no
convergence under ``--require-convergence``. Failures print one JSON object
to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, scenario_file
from .errors import IntegrationError, RateBoundError, StructuralError, ValidationError
from .integrator import integrate
from .stochastic import AgentPopulationState, make_rng, simulate

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_NOT_CONVERGED = 0, 2, 3, 4

log = logging.getLogger("syncgame")


class _Formatter(logging.Formatter):
    COLORS = {"WARNING": "\033[33m", "ERROR": "\033[31m", "INFO": "\033[36m"}

    def __init__(self, color):
        super().__init__("%(levelname)s %(message)s")
        self.color = color

    def format(self, record):
        text = super().format(record)
        c = self.COLORS.get(record.levelname)
        return f"{c}{text}\033[0m" if self.color and c else text


def _setup_logging(verbosity):
    color = sys.stderr.isatty() and "NO_COLOR" not in os.environ
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_Formatter(color))
    log.handlers[:] = [handler]
    log.propagate = False
    log.setLevel(logging.WARNING - 10 * verbosity)


# -- output helpers --------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, digest: str, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# manifest_sha256={digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path: Path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(scenario_file.dumps(obj))


def trajectory_header(scenario):
    labels = [f"p{p}_r{r}" for p, r in scenario.strategy_labels()]
    pops = [f"pibar_p{pop.population_id}" for pop in scenario.populations]
    return ["step", "time"] + [f"x_{s}" for s in labels] + [f"pi_{s}" for s in labels] + pops


def trajectory_rows(traj):
    for k in range(len(traj)):
        yield [traj.steps[k], traj.times[k], *traj.states[k], *traj.payoffs[k], *traj.averages[k]]


# -- subcommands ---------------------------------------------------------------


def cmd_simulate(cfg, out, digest, args):
    traj = integrate(cfg.scenario, cfg.protocol, cfg.initial, cfg.integrator)
    write_csv(out / "trajectory.csv", digest, trajectory_header(cfg.scenario), trajectory_rows(traj))
    if traj.converged:
        log.info("converged at step %d (t=%g)", traj.convergence_step, traj.convergence_time)
        return True
    log.warning("no convergence within max_time=%g", cfg.integrator.max_time)
    return False


def cmd_agents(cfg, out, digest, args):
    sc = cfg.scenario
    init = AgentPopulationState.from_state(sc, cfg.initial)
    header = ["run"] + trajectory_header(sc) + [f"n_p{p}_r{r}" for p, r in sc.strategy_labels()]
    rows = []
    for run in range(cfg.runs):
        traj = simulate(sc, cfg.protocol, init, cfg.stochastic, rng=make_rng(cfg.stochastic.seed, run))
        for row, counts in zip(trajectory_rows(traj), traj.counts):
            rows.append([run, *row, *counts])
        log.info("run %d: %d events, %d switches", run, traj.events, traj.switches)
    write_csv(out / "agents.csv", digest, header, rows)
    return True


def cmd_field(cfg, out, digest, args):
    f = cfg.document["field"]
    base = cfg.initial if f["base_state"] is None else cfg.scenario.state(f["base_state"])
    spec = analysis.DirectionFieldSpec(tuple(map(tuple, f["axes"])), base,
                                       tuple(f["resolution"]), tuple(map(tuple, f["bounds"])))
    res = analysis.direction_field(cfg.scenario, cfg.protocol, spec)
    keep = ~res.skipped
    rows = ([*pt, *comp] for pt, comp in zip(res.points[keep], res.components[keep]))
    write_csv(out / "field.csv", digest, ["a", "b", "da", "db"], rows)
    log.info("%d grid points, %d skipped", len(res.points), int(res.skipped.sum()))
    return True


def _equilibrium_setup(cfg):
    e = cfg.document["equilibria"]
    sc, protocol, initial = cfg.scenario, cfg.protocol, cfg.initial
    if e["restrict"] is not None:
        keep = list(e["restrict"])
        if any(p >= sc.num_populations for p in keep) or not keep:
            raise ValidationError("restrict lists unknown populations", path="equilibria.restrict")
        pos = {p: k for k, p in enumerate(keep)}
        frozen = [pos[p] for p in protocol.frozen if p in pos]
        protocol = type(protocol)(protocol.weights[keep], protocol.kinds, frozen)
        initial = np.concatenate([initial[sc.block(p)] for p in keep])
        sc = sc.restrict(keep)
        if e["population"] not in pos:
            raise ValidationError("population is not kept by restrict", path="equilibria.population")
        population = pos[e["population"]]
    else:
        population = e["population"]
    return sc, protocol, initial, population


def cmd_equilibria(cfg, out, digest, args):
    e = cfg.document["equilibria"]
    sc, protocol, initial, population = _equilibrium_setup(cfg)
    seeds = analysis.simplex_seeds(sc, population, initial, e["grid"])
    res = analysis.find_equilibria(sc, protocol, seeds, cfg.integrator,
                                   residual_tol=e["residual_tol"], cluster_tol=e["cluster_tol"])
    report = {
        "manifest_sha256": digest,
        "populations": [p.population_id for p in sc.populations],
        "seeds": len(seeds),
        "nonconverged": res.nonconverged,
        "equilibria": [{
            "state": [[float(v) for v in b] for b in sc.split(eq.state)],
            "residual": eq.residual,
            "classification": eq.classification,
            "extinct": [{"population": p, "region": r} for p, r in eq.extinct],
            "basin_count": eq.basin_count,
        } for eq in res.equilibria],
    }
    write_json(out / "equilibria.json", report)
    log.info("%d equilibria from %d seeds", len(res), len(seeds))
    return not res.nonconverged


def cmd_sweep(cfg, out, digest, args):
    s = cfg.document["sweep"]
    pts = analysis.alpha_sweep(cfg.scenario, s["population"], s["alpha"], cfg.initial,
                               cfg.integrator, workers=s["workers"])
    write_csv(out / "sweep.csv", digest, ["alpha", "steps", "converged"],
              ([p.alpha, p.steps, p.converged] for p in pts))
    return all(p.converged for p in pts)


COMMANDS = {
    "simulate": cmd_simulate,
    "agents": cmd_agents,
    "field": cmd_field,
    "equilibria": cmd_equilibria,
    "sweep": cmd_sweep,
}


# -- entry point -------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="syncgame", description="Hybrid evolutionary dynamics of device owners choosing "
                                     "synchronization tasks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, help="override the document seed (unsigned 64-bit)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("simulate", "integrate the mean dynamics"),
                        ("agents", "run the finite-population agent simulation"),
                        ("field", "evaluate a direction field on a grid"),
                        ("equilibria", "locate and classify rest points from a seed grid"),
                        ("sweep", "convergence steps versus one population's Smith probability")]:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--scenario", type=Path,
                       help="scenario or manifest JSON (default: built-in reference scenario)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="PATH=VALUE", help="override a scalar, e.g. protocol.alpha.2=0.5")
        p.add_argument("--require-convergence", action="store_true",
                       help="exit 4 when a run does not converge")
    g = sub.add_parser("generate", parents=[common], help="write a random scenario document")
    g.add_argument("--populations", type=int, default=3)
    g.add_argument("--regions", type=int, default=3)
    return parser


def _error(kind, exc, code, **extra):
    payload = {"error": kind, "message": getattr(exc, "message", None) or str(exc), **extra}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer", path="--seed")
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "generate":
            doc = scenario_file.generate_scenario(args.seed or 0, args.populations, args.regions)
            path = args.out / "scenario.json"
            path.write_text(scenario_file.dumps(doc), encoding="utf-8")
            print(path)
            return EXIT_OK
        if args.scenario is None:
            resolved = scenario_file.resolve(scenario_file.default_document())
        else:
            resolved = scenario_file.load(args.scenario)
        overrides = list(args.overrides)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        resolved = scenario_file.apply_overrides(resolved, overrides)
        cfg = scenario_file.build(resolved)
        man = scenario_file.manifest(resolved, args.command)
        write_json(args.out / "manifest.json", man)
        ok = COMMANDS[args.command](cfg, args.out, man["manifest_sha256"], args)
    except RateBoundError as exc:
        return _error("rate_bound", exc, EXIT_INVALID, observed=exc.observed, bound=exc.bound)
    except ValidationError as exc:
        return _error("validation", exc, EXIT_INVALID, path=exc.path, line=exc.line)
    except StructuralError as exc:
        return _error("validation", exc, EXIT_INVALID)
    except IntegrationError as exc:
        return _error("numerical", exc, EXIT_NUMERIC, step=exc.step)
    except OSError as exc:
        return _error("io", exc, EXIT_INVALID)
    if not ok and args.require_convergence:
        return _error("not_converged", RuntimeError(f"{args.command}: no convergence"),
                      EXIT_NOT_CONVERGED)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
