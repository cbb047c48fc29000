"""
Splitting touching nuclei
=========================

Two nuclei that share a boundary form one foreground blob. The distance
maps flip sign across the shared edge, which produces a ridge in the energy
map, and the watershed splits the blob along it.
"""

import numpy as np

from nucleitool import encode_targets, postprocess
from nucleitool.core import connected_components
from nucleitool.postprocess import combine_energies, energy_map
from nucleitool.synthetic import touching_pair

rng = np.random.default_rng(1)

label = touching_pair(rng)
print("foreground components:", connected_components(label.inst > 0, 8).max())

targets = encode_targets(label)
energy = combine_energies(energy_map(targets.hv), energy_map(targets.dg))
# low energy marks nucleus interiors, the ridge sits at 1
print("energy inside / on boundary: %.2f / %.2f" % (energy[label.inst > 0].min(), energy.max()))

print("instances after watershed:", len(postprocess(targets.as_prediction())))
