#!/usr/bin/env python3
# Copyright 2026 The nuq Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Trains the small digits CNN used by the test suite and exports it.

Writes fixtures/digits_cnn.{json,bin} and fixtures/digits/{eval,calib}.
The exported network works on 12-bit integer activation codes. Each layer's
output is rescaled (ReLU networks are positively homogeneous) so that the
99.9th percentile of its calibration activations lands at --target, past the
12-bit range, so a thin tail saturates.
"""

import argparse
import json
import os
import shutil

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from sklearn.datasets import load_digits

WEIGHT_BITS = 14
INPUT_SCALE = 255  # digits pixels are 0..16, so codes top out at 4080


class Net(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 8, 3, padding=1)
        self.conv2 = nn.Conv2d(8, 16, 3, padding=1)
        self.conv3 = nn.Conv2d(16, 32, 3, padding=1)
        self.fc1 = nn.Linear(32 * 4 * 4, 64)
        self.fc2 = nn.Linear(64, 10)

    def forward(self, x, taps=None):
        x = F.max_pool2d(self._tap(F.relu(self.conv1(x)), "conv1", taps), 2)
        x = F.max_pool2d(self._tap(F.relu(self.conv2(x)), "conv2", taps), 2)
        x = F.max_pool2d(self._tap(F.relu(self.conv3(x)), "conv3", taps), 2)
        x = self._tap(F.relu(self.fc1(x.flatten(1))), "fc1", taps)
        return self.fc2(x)

    @staticmethod
    def _tap(x, name, taps):
        if taps is not None:
            taps[name] = x.detach()
        return x


def load_images():
    digits = load_digits()
    img = digits.images.astype(np.float32)  # 0..16
    img = np.kron(img, np.ones((4, 4), dtype=np.float32))  # 32x32, nearest
    return img[:, None, :, :], digits.target.astype(np.int64)


def to_signed(values, scale_hint):
    """Picks the largest f_bits that keeps every code inside 14-bit range."""
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    limit = (1 << (WEIGHT_BITS - 1)) - 1
    f = WEIGHT_BITS - 1
    while f > 0 and round(peak * (1 << f)) > limit:
        f -= 1
    codes = np.rint(values * (1 << f)).astype(np.int64)
    if np.max(np.abs(codes)) > limit:
        raise SystemExit(f"{scale_hint}: values too large for {WEIGHT_BITS}-bit codes")
    return codes, f


def write_dataset(root, images, labels, prefix):
    if os.path.isdir(root):
        shutil.rmtree(root)
    os.makedirs(root)
    with open(os.path.join(root, "labels.csv"), "w", newline="\n") as lf:
        lf.write("filename,label\n")
        for i, (img, lab) in enumerate(zip(images, labels)):
            name = f"{prefix}_{i:04d}.bin"
            codes = np.rint(img * INPUT_SCALE).astype("<u2")
            codes.tofile(os.path.join(root, name))
            lf.write(f"{name},{int(lab)}\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "fixtures"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--target", type=float, default=6000.0)
    ap.add_argument("--eval", type=int, default=500)
    ap.add_argument("--calib", type=int, default=100)
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    torch.use_deterministic_algorithms(True)
    rng = np.random.default_rng(args.seed)

    images, labels = load_images()
    order = rng.permutation(len(images))
    eval_idx, train_idx = order[: args.eval], order[args.eval :]
    calib_idx = train_idx[: args.calib]

    x_train = torch.from_numpy(images[train_idx] / 16.0)
    y_train = torch.from_numpy(labels[train_idx])
    net = Net()
    opt = torch.optim.Adam(net.parameters(), lr=2e-3)
    for _ in range(args.epochs):
        perm = torch.randperm(len(x_train))
        for s in range(0, len(perm), 64):
            b = perm[s : s + 64]
            opt.zero_grad()
            F.cross_entropy(net(x_train[b]), y_train[b]).backward()
            opt.step()
    net.eval()

    with torch.no_grad():
        x_eval = torch.from_numpy(images[eval_idx] / 16.0)
        acc = (net(x_eval).argmax(1).numpy() == labels[eval_idx]).mean()
        taps = {}
        net(torch.from_numpy(images[calib_idx] / 16.0), taps)
    print(f"float top-1 on eval: {acc:.4f}")

    # Integer domain: input code = x_torch * 16 * INPUT_SCALE.
    prev = 16.0 * INPUT_SCALE
    order_names = ["conv1", "conv2", "conv3", "fc1", "fc2"]
    scales = {}
    for name in order_names[:-1]:
        p = float(np.percentile(taps[name].numpy(), 99.9))
        scales[name] = args.target / p
    scales["fc2"] = scales["fc1"]  # logits keep the fc1 scale

    blob = bytearray()
    layers = []
    dims = [1, 32, 32]

    def put(codes, f):
        nonlocal blob
        offset = len(blob)
        lanes = (codes & ((1 << WEIGHT_BITS) - 1)).astype("<u2")
        blob += lanes.tobytes()
        return {"dims": list(codes.shape),
                "format": {"q_bits": WEIGHT_BITS, "f_bits": int(f), "encoding": "twos_complement"},
                "offset": offset, "length": int(codes.size)}

    for name in order_names:
        mod = getattr(net, name)
        s = scales[name]
        w = mod.weight.detach().numpy().astype(np.float64) * s / prev
        b = mod.bias.detach().numpy().astype(np.float64) * s
        wc, wf = to_signed(w, name + " weights")
        bc, bf = to_signed(b, name + " bias")
        bf = min(bf, wf)
        bc = np.rint(b * (1 << bf)).astype(np.int64)
        entry = {"name": name, "weights": put(wc, wf), "bias": put(bc, bf)}
        if isinstance(mod, nn.Conv2d):
            dims = [mod.out_channels, dims[1], dims[2]]
            entry.update(kind="conv2d", in_channels=mod.in_channels,
                         out_channels=mod.out_channels, kernel=[3, 3], stride=1, padding=1,
                         output_dims=dims)
        else:
            dims = [mod.out_features]
            entry.update(kind="fullyconnected", in_features=mod.in_features,
                         out_features=mod.out_features, output_dims=dims)
        layers.append(entry)
        prev = s
        if name != "fc2":
            layers.append({"name": name + "_relu", "kind": "relu", "output_dims": dims})
        if name.startswith("conv"):
            dims = [dims[0], dims[1] // 2, dims[2] // 2]
            layers.append({"name": name.replace("conv", "pool"), "kind": "maxpool",
                           "kernel": [2, 2], "stride": 2, "output_dims": dims})
    layers.append({"name": "prob", "kind": "softmax", "output_dims": dims})

    os.makedirs(args.out, exist_ok=True)
    manifest = {"format": "nuq-model", "version": 1, "name": "digits_cnn",
                "input_dims": [1, 32, 32],
                "activation_format": {"q_bits": 12, "f_bits": 0},
                "blob": "digits_cnn.bin", "topology_only": False, "layers": layers}
    with open(os.path.join(args.out, "digits_cnn.json"), "w", newline="\n") as mf:
        json.dump(manifest, mf, indent=2)
        mf.write("\n")
    with open(os.path.join(args.out, "digits_cnn.bin"), "wb") as bf_:
        bf_.write(bytes(blob))
    write_dataset(os.path.join(args.out, "digits", "eval"), images[eval_idx], labels[eval_idx], "e")
    write_dataset(os.path.join(args.out, "digits", "calib"), images[calib_idx],
                  labels[calib_idx], "c")


if __name__ == "__main__":
    main()
