"""
Writing traces to disk
======================

Scenarios are plain JSON documents; a run produces a CSV trace and a JSON
summary.
"""

import tempfile
from pathlib import Path

from leadppc.scenario import dump_scenario, emit, load_scenario, preset, run

doc = dump_scenario(preset("chain5_f3"))
print(doc)

sc = load_scenario(doc).with_(t_end=2.0)
out = Path(tempfile.mkdtemp())
trace, summary = run(sc)
for path in emit(trace, summary, "csv", out):
    print(path)
    print("\n".join(path.read_text().splitlines()[:3]))
