"""
Where does GIT look when only one neighbourhood is unknown?
===========================================================

Every edge belief of a chain is clamped to the truth except the pairs
touching node v = 4.  A good acquisition rule should spend its
interventions on v and its parent, since only those reveal the missing
edges.  Round-robin Random spreads evenly by construction.
"""

import numpy as np

from causalprobe.harness import ExperimentConfig, run_preinit_probe
from causalprobe.metrics import target_entropy

free = 4
for strategy in ("git", "random"):
    total = np.zeros(8, dtype=int)
    for seed in range(2):
        cfg = ExperimentConfig.desk(graph="chain", rounds=20, strategy=strategy, seed=seed)
        rec, hist = run_preinit_probe(cfg, free)
        total += hist
    share = (total[free] + total[free - 1]) / total.sum()
    print(f"{strategy:6s} histogram {total.tolist()}  share on v and parent {share:.2f}  "
          f"entropy {target_entropy(total):.2f} nats (uniform {np.log(8):.2f})")
# GIT concentrates on the free node's neighbourhood (node 3 is its parent),
# while Random sits at the uniform entropy.
