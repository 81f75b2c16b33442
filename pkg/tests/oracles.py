"""Brute-force reference implementations written from the closed forms.

Plain Python loops over nested lists; nothing here imports the package's
numerical code, so agreement is an independent check.
"""


def selector_mass(regions, pops, x, m, delta=1e-6):
    total = sum(p["N"] for p in pops)
    mass = 0.0
    for p, xp in zip(pops, x):
        if m in p["S"]:
            mass += xp[p["S"].index(m)] * p["N"]
    return max(mass, delta * total)


def quality_mass(regions, pops, x, m, delta=1e-6):
    total = sum(p["N"] for p in pops)
    bmin = min(p["b"][p["S"].index(m)] for p in pops if m in p["S"])
    mass = 0.0
    for p, xp in zip(pops, x):
        if m in p["S"]:
            k = p["S"].index(m)
            mass += xp[k] * p["N"] * p["b"][k]
    return max(mass, delta * total * bmin)


def payoffs(regions, pops, x, delta=1e-6):
    """Nested list pi[p][k] from the reward-share and energy formulas."""
    out = []
    for p in pops:
        row = []
        for k, m in enumerate(p["S"]):
            d = regions[m]["D"] / selector_mass(regions, pops, x, m, delta)
            energy = p["eta1"] * p["l"][k] / p["v"] + p["eta2"] * d / p["u"]
            reward = p["b"][k] * regions[m]["R"] / quality_mass(regions, pops, x, m, delta)
            row.append(reward - p["zeta"] * energy)
        out.append(row)
    return out


def rates(kind, pi, x, m, i):
    gain = max(pi[i] - pi[m], 0.0)
    return gain if kind == "comparison" else x[i] * gain


def mean_dynamics(weights, pi, x):
    """Inflow minus outflow; ``weights[p]`` maps protocol kind to its weight."""
    out = []
    for p, (xp, pp) in enumerate(zip(x, pi)):
        n = len(xp)
        row = []
        for m in range(n):
            inflow = outflow = 0.0
            for i in range(n):
                if i == m:
                    continue
                for kind, w in weights[p].items():
                    inflow += xp[i] * w * rates(kind, pp, xp, i, m)
                    outflow += w * rates(kind, pp, xp, m, i)
            row.append(inflow - xp[m] * outflow)
        out.append(row)
    return out


def scenario_dicts(scenario):
    """Convert a package Scenario into the dict form used above."""
    regions = {r.region_id: {"D": r.route_length, "R": r.reward_pool} for r in scenario.regions}
    pops = [{"N": p.size, "S": list(p.strategies), "l": list(p.traversal_distance),
             "b": list(p.data_quality), "eta1": p.propulsion_power, "eta2": p.hover_power,
             "v": p.traversal_speed, "u": p.sensing_speed, "zeta": p.unit_energy_cost}
            for p in scenario.populations]
    return regions, pops


def nested(scenario, flat):
    return [list(map(float, flat[scenario.block(p)])) for p in range(scenario.num_populations)]
