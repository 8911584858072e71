"""Pick modes and dwell times that steer x(0) = (40, 30) into the goal box
around an obstacle."""

from polyar import bench
from polyar.problem import Config
from polyar.smt import solve_smt

inst = bench.reference_switching()
print("goal:", inst.goal, " obstacle:", inst.obstacles[0])
v = solve_smt(inst.problem(), Config(max_workers=1, timeout_s=600.0))
print("status:", v.status.value, f"({v.stats['wall_ms']:.0f} ms)")
if v.model is not None:
    modes = inst.schedule_of(v.bool_model)
    L = inst.L
    for i, m in enumerate(modes):
        x = v.model[2 * i: 2 * i + 2]
        print(f"step {i + 1}: mode {m + 1} for {v.model[2 * L + i]:.4f}s -> x = ({x[0]:.3f}, {x[1]:.3f})")
    print("verifier:", inst.verify(v.model, modes))
