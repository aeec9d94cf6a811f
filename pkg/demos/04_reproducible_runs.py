# coding: utf-8

# # Reproducible runs from the command line
#
# Every command writes CSV and JSON files plus a manifest. Random numbers come
# from a counter-based generator addressed by (seed, operation, trial), so the
# files do not depend on how many worker threads ran.

# %%

import json
import os
import tempfile
from pathlib import Path

from lorentzgas.cli import main

root = Path(tempfile.mkdtemp())
args = ["correlation", "--sigma", "0.1", "--trials", "40000", "--H", "10", "--H-hat", "100",
        "--j-max", "6", "--seed", "3"]
for threads in ("1", "4"):
    os.environ["LORENTZ_THREADS"] = threads
    main([*args, "--out", str(root / threads)])
same = (root / "1" / "correlation.csv").read_bytes() == (root / "4" / "correlation.csv").read_bytes()
print("identical across thread counts:", same)

# %%

# The JSON report is validated against a schema and carries a hash of the
# configuration; the manifest records status, outputs and the thread count.

doc = json.loads((root / "1" / "correlation.json").read_text())
print(doc["kind"], doc["config_hash"][:12], doc["report"]["fit_slope"])
print(json.loads((root / "1" / "manifest.json").read_text())["status"])

# %%

# Errors are recorded too. A closed corridor is a runtime error (exit code 3).

code = main(["angles", "--xi", "3,2", "--sigma", "0.2", "--out", str(root / "bad")])
print(code, json.loads((root / "bad" / "manifest.json").read_text())["error"])

# %%

# Figures are plain SVG rendered from a saved report.

main(["plot", "--report", str(root / "1" / "correlation.json"), "--kind", "correlation",
      "--out", str(root / "fig")])
print((root / "fig" / "correlation.svg").read_text()[:120])
