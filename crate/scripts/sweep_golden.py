"""Golden pruning-ratio curves for the threshold sweep, computed with numpy from the shipped fixtures.

Writes fixtures/sweep_golden.json. Kernels scoring within 1e-9 relative of a grid point are
listed as fragile so the Rust test can tolerate a flipped decision there.
"""
import json
import os

import numpy as np

ROOT = os.path.join(os.path.dirname(__file__), "..", "fixtures")
GRID = [10 ** (-6 + 5 * i / 19) for i in range(20)]


def kernels(model):
    with open(os.path.join(ROOT, model, "manifest.json")) as f:
        manifest = json.load(f)
    out = []
    for layer in manifest["layers"]:
        if layer["op_kind"] != "conv2d":
            continue
        w = np.load(os.path.join(ROOT, model, layer["weight_refs"]["weights"] + ".npy")).astype(np.float64)
        for o in range(w.shape[0]):
            for i in range(w.shape[1]):
                out.append(w[o, i])
    return out


def main():
    golden = {"grid": GRID, "mode": "spectral_norm", "models": {}}
    for model in ("tinynet", "tinynet-l1"):
        norms = np.array([np.linalg.svd(k, compute_uv=False)[0] for k in kernels(model)])
        pruned = [int(np.sum(norms < t)) for t in GRID]
        fragile = [int(np.sum(np.abs(norms - t) <= 1e-9 * t)) for t in GRID]
        golden["models"][model] = {"kernels": len(norms), "pruned_kernels": pruned, "fragile": fragile}
    with open(os.path.join(ROOT, "sweep_golden.json"), "w") as f:
        json.dump(golden, f, indent=1)
        f.write("\n")
    print(json.dumps(golden["models"]))


if __name__ == "__main__":
    main()
