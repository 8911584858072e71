"""Static output feedback: find K with A + BKC Hurwitz for a seeded random system."""

import sys

import numpy as np

from polyar import bench
from polyar.smt import solve_problem

shape = int(sys.argv[1]) if len(sys.argv) > 1 else 1
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0

inst = bench.sof_example(shape, seed=seed)
problem = inst.problem()
print(f"shape {shape}: n_A={inst.n_A} n_B={inst.n_B} n_C={inst.n_C}, "
      f"{len(problem.constraints)} constraints over {problem.domain.nvars} variables ({inst.encoding})")
v = solve_problem(problem, bench.sof_config(max_workers=1, timeout_s=60.0))
print("status:", v.status.value, f"({v.stats['wall_ms']:.0f} ms)")
if v.model is not None:
    check = inst.verify(v.model, v.bool_model)
    print("K =\n", np.array2string(inst.K_of(v.model), precision=4))
    print("max real eigenvalue of A+BKC:", check["max_real_eig"])
    if inst.structure:
        print("row 2 product / sum:", check["product"], check["sum"])
