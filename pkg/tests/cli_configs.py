"""Small configs shared by the CLI tests and the determinism criterion."""

import json

SIMULATE = {"config_version": 1, "seed": 3, "kind": "RankOneComplex", "d1": 6, "d2": 6, "M": 120}
ANCHOR = {"config_version": 1, "seed": 3, "method": "rank1"}
SOLVE = {"config_version": 1, "seed": 3, "lambda": 0.7, "max_iter": 3000}
DECONV = {"config_version": 1, "seed": 1, "M": 64, "d1": 4, "d2": 4}
BENCH = {"config_version": 1, "seed": 1, "M_values": [32, 128], "d_values": [4, 16], "trials": 2,
         "max_iter": 1500}
NOISE = {"config_version": 1, "seed": 2, "d": 6, "M": 120, "levels": [0.01, 0.02], "trials": 2}
INIT = {"config_version": 1, "seed": 2, "d": 6, "M_values": [60, 240], "trials": 3}
MOMENTS = {"config_version": 1, "seed": 0, "instances": 5}


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def run_pipeline(main, tmp, anchor_method="oracle"):
    """simulate -> anchor -> solve in ``tmp``; returns the three exit codes."""
    codes = [main(["simulate", "--config", write(tmp / "sim.json", SIMULATE), "--out", str(tmp),
                   "--quiet"])]
    codes.append(main(["anchor", "--config", write(tmp / "anc.json", {**ANCHOR,
                                                                       "method": anchor_method}),
                       "--out", str(tmp), "--quiet"]))
    codes.append(main(["solve", "--config", write(tmp / "sol.json", SOLVE), "--out", str(tmp),
                       "--quiet"]))
    return codes


ALL_COMMANDS = [
    ("deconv", DECONV),
    ("bench-pt", BENCH),
    ("noise-sweep", NOISE),
    ("init-sweep", INIT),
    ("verify-moments", MOMENTS),
]
