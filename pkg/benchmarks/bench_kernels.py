"""Time the compiled and pure-Python kernels on the same workloads.

    python benchmarks/bench_kernels.py [--repeat 5] [--populations 3] [--regions 3]

Workloads: one payoff evaluation, one field evaluation, an RK4 integration
of the reference scenario to convergence, and an agent simulation.
"""

import argparse
import timeit

import numpy as np

from syncgame import kernels, scenario_file
from syncgame.dynamics import RevisionProtocol
from syncgame.integrator import IntegratorConfig, integrate
from syncgame.stochastic import AgentPopulationState, StochasticConfig, simulate


def workloads(cfg, backend):
    core = kernels.load(backend)
    sc, proto, x = cfg.scenario, cfg.protocol, np.ascontiguousarray(cfg.initial)
    ws, wi = proto.mixing(sc.num_populations)
    pi = np.empty_like(x)
    out = np.empty_like(x)
    agents = AgentPopulationState.from_state(sc, x)
    sto = StochasticConfig(seed=1, clock_rate=20.0, rate_bound=200.0, horizon=0.5)
    return {
        "payoffs": lambda: core.payoffs(sc.layout, x, pi),
        "field": lambda: (core.payoffs(sc.layout, x, pi),
                          core.field(sc.layout, x, pi, ws, wi, out)),
        "integrate (1000 steps)": lambda: integrate(
            sc, proto, x, IntegratorConfig(max_time=10.0), stop="never", backend=backend),
        "agents (horizon 0.5)": lambda: simulate(sc, proto, agents, sto, backend=backend),
    }


def best_time(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--populations", type=int, default=3)
    parser.add_argument("--regions", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0,
                        help="generator seed when the size differs from the reference scenario")
    args = parser.parse_args(argv)

    if (args.populations, args.regions) == (3, 3):
        doc = scenario_file.default_document()
    else:
        doc = scenario_file.generate_scenario(args.seed, args.populations, args.regions)
    cfg = scenario_file.build(scenario_file.resolve(doc))

    backends = kernels.available()
    times = {b: {k: best_time(fn, args.repeat) for k, fn in workloads(cfg, b).items()}
             for b in backends}
    names = list(times[backends[0]])
    print(f"P={args.populations} M={args.regions}; best of {args.repeat}")
    print(f"{'workload':<24}" + "".join(f"{b:>14}" for b in backends)
          + ("     speedup" if len(backends) == 2 else ""))
    for name in names:
        row = f"{name:<24}" + "".join(f"{times[b][name] * 1e6:>12.1f}us" for b in backends)
        if len(backends) == 2:
            row += f"{times['python'][name] / times['cython'][name]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
