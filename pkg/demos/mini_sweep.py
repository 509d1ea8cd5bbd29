"""A scaled-down protocol comparison: 10 and 30 nodes, three pause times, two seeds.

Writes the same CSVs as the full sweep into ./mini_sweep_out and prints the
trend verdicts. Takes about a minute on one core.
"""

import sys

from manetsim import experiment

spec = experiment.SweepSpec(sizes=[(10, 8), (30, 25)], pauses=[0, 40, 100], seeds=[1, 2],
                            out_dir="mini_sweep_out")
summary = experiment.sweep(spec, progress=lambda done, total: print(f"\r{done}/{total}", end="", file=sys.stderr))
print(file=sys.stderr)
tables = experiment.load_tables(spec.out_dir)
for n, _ in spec.sizes:
    print(f"PDF, {n} nodes")
    for pause, cell in sorted(tables[("pdf", n)].items()):
        print(f"  pause {pause:5.0f}: " + "  ".join(f"{p}={cell[p][0]:.3f}" for p in experiment.PROTOCOLS))
for v in summary["trends"]:
    print(experiment.Verdict(**v).line())
