"""Build the decentralized abstraction for a two-agent scenario and stress
one of its transitions with adversarial neighbors.

Each transition of an agent's symbolic model is an action (own cell +
neighbor cells) paired with a reachable target cell, and comes with a
certificate: the nominal center-to-center input and the worst-case
integration remainder. Here we sample random start positions inside the
action cells, let the neighbor run a full-magnitude bang-bang input, and
check the continuous flow still lands in the promised target.
"""

from pathlib import Path

import numpy as np

from mas.abstraction import feedback_input
from mas.cli import load_scenario, stage_abstract, stage_bounds
from mas.graph import spectral
from mas.partition import cell_of
from mas.simulate import bang_bang_inputs

rng = np.random.default_rng(7)

scenario_path = Path(__file__).resolve().parent.parent / "scenarios" / "pair_line.json"
pipe = stage_abstract(stage_bounds(load_scenario(scenario_path)))
sc, decomp = pipe.scenario, pipe.decomp

print(f"scenario: {sc.name} ({sc.agent_count} agents, v_max = {sc.v_max})")
print(f"grid: {decomp.cell_count} cells, diameter {decomp.diameter:.4g}, "
      f"dt = {pipe.disc.chosen_dt:.4g}")
for w in pipe.wts_list:
    n_trans = sum(len(t) for t in w.transitions.values())
    print(f"agent {w.agent}: initial cell {w.initial}, "
          f"{len(w.transitions)} actions, {n_trans} transitions, "
          f"neighbors {w.neighbor_agents}")

# look at one certificate in detail
w = pipe.wts_list[0]
action = sorted(w.transitions)[0]
target = w.transitions[action][0]
cert = w.certificate(action[0], action, target)
print(f"\nagent {w.agent}, action {action} -> target {target}")
print(f"  nominal input: {cert.nominal_input} "
      f"(norm {np.linalg.norm(cert.nominal_input):.4g} "
      f"<= lambda*v_max = {pipe.report.lambda_reach * sc.v_max:.4g})")
print(f"  remainder rho = {cert.remainder:.4g} "
      f"vs target inradius {decomp.inradius(target):.4g}")
print(f"  duration = {w.duration(action[0], action, target):.4g}")

# Monte-Carlo attack: uniform starts inside the action cells, the neighbor
# drives bang-bang at full v_max, we steer with the measured-drift feedback
g, dt, v_max = pipe.g, pipe.disc.chosen_dt, sc.v_max
lap = spectral(g).laplacian
samples = 200


def rk4_batch(starts, inputs, substeps=8):
    h = dt / substeps
    f = lambda x: -np.einsum("ij,bjk->bik", lap, x) + inputs
    x = starts.copy()
    for _ in range(substeps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


own = w.agent - 1
nbr = [a - 1 for a in w.neighbor_agents]
boxes = [decomp.bounds(c) for c in action]

starts = np.empty((samples, g.agent_count, g.dimension))
starts[:, own] = rng.uniform(*boxes[0], (samples, g.dimension))
for k, j in enumerate(nbr):
    starts[:, j] = rng.uniform(*boxes[1 + k], (samples, g.dimension))

inputs = bang_bang_inputs(g, v_max, samples, rng)
center = decomp.center(target)
for b in range(samples):
    v, clipped = feedback_input(g, w.agent, starts[b], center, dt, v_max)
    inputs[b, own] = v

ends = rk4_batch(starts, inputs)
landed = sum(cell_of(decomp, ends[b, own]) == target for b in range(samples))
print(f"\nMonte-Carlo: {landed}/{samples} adversarial runs landed in "
      f"cell {target}")

# and the same sweep over every transition of agent 1, 25 samples each
total = good = 0
for action in sorted(w.transitions):
    boxes = [decomp.bounds(c) for c in action]
    for target in w.transitions[action]:
        starts = np.empty((25, g.agent_count, g.dimension))
        starts[:, own] = rng.uniform(*boxes[0], (25, g.dimension))
        for k, j in enumerate(nbr):
            starts[:, j] = rng.uniform(*boxes[1 + k], (25, g.dimension))
        inputs = bang_bang_inputs(g, v_max, 25, rng)
        center = decomp.center(target)
        for b in range(25):
            v, _ = feedback_input(g, w.agent, starts[b], center, dt, v_max)
            inputs[b, own] = v
        ends = rk4_batch(starts, inputs)
        total += 25
        good += sum(cell_of(decomp, ends[b, own]) == target for b in range(25))
print(f"full sweep over agent {w.agent}: {good}/{total} endpoints contained")
