"""Write a benchmark instance to the text format, read it back, and solve it
through the command-line entry point."""

import json
import os
import tempfile

from polyar import bench
from polyar.cli import run
from polyar.fileformat import parse_problem, write_problem

inst = bench.duffing_example(2)
text = write_problem(inst.problem(), inst.eps)
print(text.splitlines()[0], "...", len(text.splitlines()), "lines")
assert parse_problem(text).constraints == inst.problem().constraints

with tempfile.TemporaryDirectory() as d:
    path = os.path.join(d, "duffing.poly")
    out = os.path.join(d, "result.json")
    with open(path, "w") as fh:
        fh.write(text)
    code = run(["solve", path, "--workers", "1", "--json-out", out])
    print("exit code", code)
    print("verify exit code", run(["verify", path, out]))
    print(json.load(open(out))["model"])
