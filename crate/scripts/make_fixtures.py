#!/usr/bin/env python3
"""Generate the test fixtures under fixtures/.

Trains a small residual CNN ("tinynet") on a synthetic 10-class image task,
once without weight regularization and once with an L1 penalty, saving a
checkpoint after every epoch of the L1 run. Reference values used by the Rust
tests (logits, kernel census, checksums, per-mode mask counts) are computed
here with torch/numpy so they stay independent of the Rust implementation.

Run from the workspace root:  python3 scripts/make_fixtures.py
"""

import hashlib
import json
import os
import shutil

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures")
NUM_CLASSES = 10
IMG = 16
EVAL_IMAGES = 2000
TRAIN_IMAGES = 4000
REFERENCE_IMAGES = 32
L1_ALPHA = 1e-4
EPOCHS = 40
CHECKPOINT_EVERY = 2
BATCH = 32

torch.set_num_threads(1)
torch.use_deterministic_algorithms(True)


def make_dataset(rng, prototypes, n):
    labels = rng.integers(0, NUM_CLASSES, size=n)
    images = np.empty((n, 3, IMG, IMG), dtype=np.float32)
    for i, y in enumerate(labels):
        dx, dy = rng.integers(-2, 3, size=2)
        base = np.roll(prototypes[y], shift=(dx, dy), axis=(1, 2))
        images[i] = base + rng.normal(0.0, 2.0, size=base.shape)
    return images.astype(np.float32), labels.astype(np.int64)


def smooth_prototypes(rng):
    protos = []
    for _ in range(NUM_CLASSES):
        coarse = rng.normal(0.0, 1.0, size=(3, 4, 4))
        up = np.kron(coarse, np.ones((1, 4, 4)))
        protos.append(up.astype(np.float32))
    return protos


class Bottleneck(nn.Module):
    def __init__(self, cin, mid, cout, stride):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, mid, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(mid)
        self.conv2 = nn.Conv2d(mid, mid, 3, stride=stride, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(mid)
        self.conv3 = nn.Conv2d(mid, cout, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(cout)
        self.proj = nn.Conv2d(cin, cout, 1, stride=stride, bias=False)
        self.bnp = nn.BatchNorm2d(cout)

    def forward(self, x):
        y = F.relu(self.bn1(self.conv1(x)))
        y = F.relu(self.bn2(self.conv2(y)))
        y = self.bn3(self.conv3(y))
        return F.relu(y + self.bnp(self.proj(x)))


class TinyNet(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 16, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(16)
        self.b1 = Bottleneck(16, 8, 32, 1)
        self.b2 = Bottleneck(32, 16, 32, 2)
        self.head = nn.Conv2d(32, 32, 3, padding=1, bias=False)
        self.bnh = nn.BatchNorm2d(32)
        self.fc = nn.Linear(32, NUM_CLASSES)

    def forward(self, x):
        x = F.relu(self.bn1(self.conv1(x)))
        x = self.b2(self.b1(x))
        x = F.relu(self.bnh(self.head(x)))
        return self.fc(x.mean(dim=(2, 3)))


def manifest_layers():
    """Layer graph mirroring TinyNet.forward, in manifest form."""
    layers = [dict(name="input", op_kind="input", inputs=[], attrs={"shape": [3, IMG, IMG]}, weight_refs={})]

    def conv(name, src, stride, pad):
        layers.append(dict(name=name, op_kind="conv2d", inputs=[src],
                           attrs={"stride": stride, "padding": pad},
                           weight_refs={"weights": f"{name}.weight"}))
        return name

    def bn(name, src):
        layers.append(dict(name=name, op_kind="batchnorm", inputs=[src], attrs={"epsilon": 1e-5},
                           weight_refs={"gamma": f"{name}.weight", "beta": f"{name}.bias",
                                        "mean": f"{name}.running_mean", "var": f"{name}.running_var"}))
        return name

    def relu(name, src):
        layers.append(dict(name=name, op_kind="relu", inputs=[src], attrs={}, weight_refs={}))
        return name

    x = relu("relu1", bn("bn1", conv("conv1", "input", 1, 1)))
    for blk, stride in (("b1", 1), ("b2", 2)):
        y = relu(f"{blk}.relu1", bn(f"{blk}.bn1", conv(f"{blk}.conv1", x, 1, 0)))
        y = relu(f"{blk}.relu2", bn(f"{blk}.bn2", conv(f"{blk}.conv2", y, stride, 1)))
        y = bn(f"{blk}.bn3", conv(f"{blk}.conv3", y, 1, 0))
        p = bn(f"{blk}.bnp", conv(f"{blk}.proj", x, stride, 0))
        layers.append(dict(name=f"{blk}.add", op_kind="add", inputs=[y, p], attrs={}, weight_refs={}))
        x = relu(f"{blk}.relu3", f"{blk}.add")
    x = relu("relu_head", bn("bnh", conv("head", x, 1, 1)))
    layers.append(dict(name="pool", op_kind="global_avg_pool", inputs=[x], attrs={}, weight_refs={}))
    layers.append(dict(name="fc", op_kind="dense", inputs=["pool"], attrs={},
                       weight_refs={"weights": "fc.weight", "bias": "fc.bias"}))
    layers.append(dict(name="softmax", op_kind="softmax", inputs=["fc"], attrs={}, weight_refs={}))
    return layers


def write_snapshot(model, out_dir, label):
    os.makedirs(out_dir, exist_ok=True)
    state = model.state_dict()
    layers = manifest_layers()
    tensors = {}
    for layer in layers:
        for ref in layer["weight_refs"].values():
            arr = state[ref].detach().cpu().numpy().astype(np.float32)
            np.save(os.path.join(out_dir, f"{ref}.npy"), arr)
            tensors[ref] = {"file": f"{ref}.npy", "shape": list(arr.shape)}
    manifest = {"label": label, "tensor_dir": ".", "layers": layers, "tensors": tensors}
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1)
        f.write("\n")


def conv_kernels(model):
    """(layer, kernel) pairs in manifest order, out-channel major then in-channel."""
    out = []
    for layer in manifest_layers():
        if layer["op_kind"] != "conv2d":
            continue
        w = model.state_dict()[layer["weight_refs"]["weights"]].cpu().numpy().astype(np.float32)
        for o in range(w.shape[0]):
            for i in range(w.shape[1]):
                out.append((layer["name"], w[o, i].astype(np.float64)))
    return out


MODES = ["det", "det_gram", "min_eig", "min_eig_real", "spectral_radius",
         "spectral_radius_real", "spectral_norm", "weight"]


def thresholds(mode, n):
    if mode == "det":
        return {1: 1e-4, 2: 1e-8, 3: 1e-12}[n]
    if mode == "det_gram":
        return {1: 1e-8, 2: 1e-16, 3: 1e-24}[n]
    return 1e-4


def numpy_scores(k):
    ev = np.linalg.eigvals(k)
    g = k.T @ k
    return {
        "det": abs(np.linalg.det(k)),
        "det_gram": abs(np.linalg.det(g)),
        "min_eig": np.min(np.abs(ev)),
        "min_eig_real": np.min(np.abs(ev.real)),
        "spectral_radius": np.max(np.abs(ev)),
        "spectral_radius_real": np.max(np.abs(ev.real)),
        "spectral_norm": np.linalg.svd(k, compute_uv=False)[0],
        "weight": np.mean(np.abs(k)),
    }


def mask_census(model):
    kernels = conv_kernels(model)
    counts = {m: 0 for m in MODES}
    pruned_weights = {m: 0 for m in MODES}
    total_weights = 0
    margins = {m: float("inf") for m in MODES}
    for _, k in kernels:
        n = k.shape[0]
        total_weights += n * n
        s = numpy_scores(k)
        for m in MODES:
            t = thresholds(m, n)
            if t > 0 and s[m] > 0:
                margins[m] = min(margins[m], abs(np.log10(s[m]) - np.log10(t)))
            if s[m] < t:
                counts[m] += 1
                pruned_weights[m] += n * n
    return {
        "kernels": len(kernels),
        "weights": total_weights,
        "pruned_kernels": counts,
        "pruned_weights": pruned_weights,
        # distance (decades) of the closest score to its threshold; flags fragile goldens
        "closest_margin_decades": {m: float(v) for m, v in margins.items()},
    }


def accuracy(model, images, labels):
    model.eval()
    with torch.no_grad():
        logits = model(torch.from_numpy(images))
    return float((logits.argmax(dim=1).numpy() == labels).mean())


def train(model, images, labels, epochs, l1_alpha, milestones, on_epoch=None, seed=0):
    torch.manual_seed(seed)
    opt = torch.optim.Adam(model.parameters(), lr=1e-3)
    sched = torch.optim.lr_scheduler.MultiStepLR(opt, milestones=milestones, gamma=0.1)
    x = torch.from_numpy(images)
    y = torch.from_numpy(labels)
    g = torch.Generator().manual_seed(seed)
    for epoch in range(1, epochs + 1):
        model.train()
        perm = torch.randperm(len(x), generator=g)
        for start in range(0, len(x), BATCH):
            idx = perm[start:start + BATCH]
            loss = F.cross_entropy(model(x[idx]), y[idx])
            if l1_alpha > 0:
                l1 = sum(p.abs().sum() for n, p in model.named_parameters() if n.endswith("weight") and p.dim() > 1)
                loss = loss + l1_alpha * l1
            opt.zero_grad()
            loss.backward()
            opt.step()
        sched.step()
        if on_epoch is not None:
            on_epoch(epoch, model)


def sha256_f32(arr):
    return hashlib.sha256(np.ascontiguousarray(arr, dtype="<f4").tobytes()).hexdigest()


def main():
    if os.path.exists(ROOT):
        shutil.rmtree(ROOT)
    os.makedirs(ROOT)
    rng = np.random.default_rng(20240607)
    protos = smooth_prototypes(rng)
    train_x, train_y = make_dataset(rng, protos, TRAIN_IMAGES)
    eval_x, eval_y = make_dataset(rng, protos, EVAL_IMAGES)

    data_dir = os.path.join(ROOT, "data")
    os.makedirs(data_dir)
    np.save(os.path.join(data_dir, "images.npy"), eval_x)
    np.save(os.path.join(data_dir, "labels.npy"), eval_y)

    meta = {"data": {"images": EVAL_IMAGES, "classes": NUM_CLASSES, "shape": [3, IMG, IMG]}}

    torch.manual_seed(1)
    vanilla = TinyNet()
    train(vanilla, train_x, train_y, 12, 0.0, [8, 10], seed=1)
    vanilla.eval()
    write_snapshot(vanilla, os.path.join(ROOT, "tinynet"), "tinynet")

    torch.manual_seed(2)
    l1net = TinyNet()
    series_meta = []

    def checkpoint(epoch, model):
        if epoch % CHECKPOINT_EVERY != 0:
            return
        model.eval()
        d = os.path.join(ROOT, "series", f"epoch_{epoch}")
        write_snapshot(model, d, f"epoch_{epoch}")
        census = mask_census(model)
        series_meta.append({"epoch": epoch, "pruned_kernels": census["pruned_kernels"]})

    train(l1net, train_x, train_y, EPOCHS, L1_ALPHA, [30, 35, 38], on_epoch=checkpoint, seed=2)
    l1net.eval()
    write_snapshot(l1net, os.path.join(ROOT, "tinynet-l1"), "tinynet-l1")

    # reference logits in float64 from the float32-stored weights
    ref_x = eval_x[:REFERENCE_IMAGES]
    for name, model in (("tinynet", vanilla), ("tinynet-l1", l1net)):
        m64 = TinyNet().double()
        m64.load_state_dict({k: v.double() if v.is_floating_point() else v for k, v in model.state_dict().items()})
        m64.eval()
        with torch.no_grad():
            logits = m64(torch.from_numpy(ref_x.astype(np.float64))).numpy()
        np.save(os.path.join(ROOT, name, "reference_logits.npy"), logits)

    w = vanilla.state_dict()["conv1.weight"].numpy().astype(np.float32)
    np.save(os.path.join(ROOT, "conv1.npy"), w)
    meta["conv1"] = {
        "shape": list(w.shape),
        "elements": int(w.size),
        "sum": float(np.sum(w.astype(np.float64))),
        "sha256_le_f32": sha256_f32(w),
    }

    for name, model in (("tinynet", vanilla), ("tinynet-l1", l1net)):
        conv_layers = [l for l in manifest_layers() if l["op_kind"] == "conv2d"]
        census = mask_census(model)
        meta[name] = {
            "conv_layers": len(conv_layers),
            "kernel_count": census["kernels"],
            "weight_count": census["weights"],
            "numpy_masks": census,
            "reference_images": REFERENCE_IMAGES,
            "torch_accuracy": accuracy(model, eval_x, eval_y),
        }

    meta["series"] = {"length": len(series_meta), "epochs": [r["epoch"] for r in series_meta], "numpy_masks": series_meta}

    with open(os.path.join(ROOT, "meta.json"), "w") as f:
        json.dump(meta, f, indent=1)
        f.write("\n")
    print(json.dumps({k: meta[k] for k in ("tinynet", "tinynet-l1")}, indent=1))


if __name__ == "__main__":
    main()
