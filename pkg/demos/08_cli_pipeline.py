"""
The pipeline from the command line
==================================

Every stage is a subcommand driven by one config file; stages communicate
through files in the config's out_dir, and each stage writes a manifest
with input/output hashes, seeds, and library versions.  `reproduce`
chains all of them.  This script shells out exactly as a user would.
"""

import json
import os
import subprocess
import sys
import tempfile

here = os.path.dirname(os.path.abspath(__file__))
repo = os.path.abspath(os.path.join(here, ".."))
cfg = os.path.join(repo, "configs", "smoke.cfg")


def run(*args):
    cmd = [sys.executable, "-m", "stemmaplace", *args]
    print("$", " ".join(args))
    subprocess.run(cmd, check=True, cwd=repo)


with tempfile.TemporaryDirectory() as out:
    # Stage by stage.  --set overrides any config key from the command
    # line; here it redirects all artifacts into a scratch directory.
    override = f"out_dir={out}"
    run("simulate", "--config", cfg, "--set", override)
    run("prepare", "--config", cfg, "--set", override, "--all-leaves")
    run("train", "--config", cfg, "--set", override, "--all-leaves")
    run("predict", "--config", cfg, "--set", override, "--all-leaves")
    run("place", "--config", cfg, "--set", override, "--all-leaves")
    run("eval", "--config", cfg, "--set", override)

    print("\nartifacts:")
    for name in sorted(os.listdir(out)):
        print("  ", name)

    with open(os.path.join(out, "eval.json"), encoding="utf-8") as f:
        payload = json.load(f)
    print("\nestimate metrics:", payload["estimates"])
    print("placement:", payload["placement"])

    with open(os.path.join(out, "results_table.txt"), encoding="utf-8") as f:
        print("\n" + f.read())

# One shot instead: `stemmaplace reproduce --config configs/smoke.cfg`
# runs the same chain; add --oracle to swap the trained model for true
# tree distances (useful for checking the plumbing end to end).
