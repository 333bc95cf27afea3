"""
Command line walkthrough
========================

The same steps as the other demos, driven through the ``pairtransfer``
command. Each call here is equivalent to running, for example,
``pairtransfer ipd -c config.json`` in a shell.

Run with ``python demos/04_command_line.py``.
"""
import json
import tempfile
from pathlib import Path

from pairtransfer.cli import main

work = Path(tempfile.mkdtemp(prefix="pairtransfer-demo-"))
config = {
    "source": {"type": "synthetic", "spec": {"corruption": [0.1, 0.5, 1.0], "N": 200}, "seed": 0},
    "distance": "dtw",
    "lambda0": 0.05,
    "lambda_T": 0.1,
    "init_scheme": "glorot",
    "repetitions": 3,
    "strategies": ["adaptive", "no_transfer"],
    "output_dir": str(work / "run"),
}
cfg_path = work / "config.json"
cfg_path.write_text(json.dumps(config, indent=1))

###############################################################################
# Generate, ingest, score the sources, train one model

main(["synth", "-c", str(cfg_path)])
main(["ingest", "-c", str(cfg_path)])
main(["ipd", "-c", str(cfg_path)])
main(["train", "-c", str(cfg_path), "--strategy", "adaptive"])

###############################################################################
# Flags and --set override config keys

main(["evaluate", "-c", str(cfg_path), "--set", "repetitions=2"])
main(["noise-sweep", "-c", str(cfg_path), "--set", "noise_ratios=[0.0, 0.5]", "--set", "repetitions=2"])

###############################################################################
# A manifest replays a run; the outputs match byte for byte

manifest = work / "run" / "run_manifest_train.json"
main(["train", "-c", str(manifest), "-o", str(work / "replay")])
same = (work / "run" / "trace.csv").read_bytes() == (work / "replay" / "trace.csv").read_bytes()
print("replayed trace identical:", same)

###############################################################################
# Identical source and target: the similarity step refuses to divide by zero

config["source"]["spec"]["corruption"] = [0.0]
config["output_dir"] = str(work / "degenerate")
cfg_path.write_text(json.dumps(config))
print("exit code:", main(["ipd", "-c", str(cfg_path)]))

print("outputs in", work)
