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
"""Writes the VGG-16 and AlexNet reference data under paper_fixtures/.

Topology only (no weights): the footprint tests need shapes, not values.
"""

import json
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "paper_fixtures")

CONV = [("conv1_1", 64), ("conv1_2", 64), ("pool1", None),
        ("conv2_1", 128), ("conv2_2", 128), ("pool2", None),
        ("conv3_1", 256), ("conv3_2", 256), ("conv3_3", 256), ("pool3", None),
        ("conv4_1", 512), ("conv4_2", 512), ("conv4_3", 512), ("pool4", None),
        ("conv5_1", 512), ("conv5_2", 512), ("conv5_3", 512), ("pool5", None)]
CONV_NAMES = [n for n, c in CONV if c]
FC = [("fc6", 4096), ("fc7", 4096), ("fc8", 1000)]

CODEBOOKS = {
    "conv1_2": [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 3, 6,
                10, 15, 21, 28, 36, 45, 56, 69, 85, 105, 128, 156, 191, 234, 290, 373],
    "conv2_1": [0, 11, 22, 35, 49, 64, 80, 97, 115, 134, 154, 176, 200, 226, 254, 284,
                316, 350, 387, 426, 468, 514, 563, 616, 674, 739, 814, 901, 1015, 1162, 1407,
                1815],
    "conv2_2": [0, 23, 46, 69, 92, 115, 138, 161, 185, 210, 236, 263, 292, 323, 356, 391,
                429, 470, 517, 569, 628, 695, 772, 863, 970, 1094, 1245, 1432, 1666, 1977,
                2425, 3082],
    "conv3_1": [0, 45, 91, 138, 186, 235, 285, 338, 394, 453, 516, 583, 653, 726, 803, 886,
                977, 1075, 1181, 1299, 1428, 1570, 1730, 1908, 2092, 2286, 2517, 2760, 3041,
                3394, 3834, 4096],
    "conv3_2": [0, 45, 90, 136, 183, 232, 282, 333, 386, 441, 498, 558, 621, 689, 763, 843,
                930, 1024, 1128, 1243, 1368, 1505, 1655, 1818, 2000, 2216, 2466, 2730, 3013,
                3368, 3821, 4096],
    "conv3_3": [0, 48, 97, 146, 196, 247, 299, 352, 407, 464, 523, 585, 649, 716, 786, 860,
                940, 1027, 1120, 1222, 1334, 1457, 1598, 1757, 1941, 2151, 2391, 2662, 2983,
                3357, 3820, 4096],
    "conv4_1": [0, 55, 113, 172, 233, 297, 361, 426, 494, 566, 641, 720, 801, 886, 973, 1066,
                1164, 1270, 1384, 1505, 1635, 1775, 1927, 2094, 2266, 2473, 2703, 2943, 3215,
                3525, 3893, 4096],
    "conv4_2": [0, 44, 88, 133, 179, 227, 277, 329, 385, 443, 504, 567, 632, 703, 779, 862,
                956, 1062, 1178, 1302, 1437, 1584, 1752, 1946, 2152, 2397, 2653, 2959, 3250,
                3551, 3888, 4096],
    "conv4_3": [0, 35, 71, 109, 149, 191, 235, 282, 333, 388, 447, 513, 586, 667, 760, 867,
                988, 1128, 1285, 1465, 1680, 1945, 2229, 2527, 2914, 3130, 3282, 3419, 3563,
                3754, 4004, 4096],
    "conv5_1": [0, 28, 58, 91, 129, 169, 215, 267, 323, 384, 452, 527, 612, 713, 824, 952,
                1095, 1265, 1457, 1669, 1840, 2004, 2086, 2143, 2264, 2371, 2485, 2570, 2671,
                2813, 2867, 2998],
    "conv5_2": [0, 16, 34, 54, 77, 103, 132, 165, 203, 247, 296, 356, 425, 499, 585, 687,
                790, 926, 1037, 1160, 1287, 1349, 1413, 1509, 1569, 1634, 1700, 1772, 1830,
                1896, 1998, 2074],
    "conv5_3": [0, 10, 22, 36, 52, 71, 93, 119, 148, 177, 211, 248, 288, 330, 370, 415,
                457, 513, 553, 594, 632, 662, 693, 732, 757, 793, 812, 849, 893, 914, 943, 987],
}

# ENQ widths per index: 13 conv layers then fc6, fc7, fc8. Reference top-5
# accuracy; index 5 carries two reference figures that disagree.
ENQ = {
    1: ([8, 4, 5, 5, 5, 5, 5, 5, 5, 5, 5, 4, 4, 3, 2, 2], ["0.5660"]),
    2: ([8, 4, 5, 5, 5, 5, 5, 5, 5, 5, 5, 4, 4, 4, 2, 2], ["0.7943"]),
    3: ([8, 4, 5, 5, 5, 5, 5, 5, 5, 5, 5, 4, 4, 6, 3, 2], ["0.8346"]),
    4: ([8, 5, 6, 4, 6, 6, 6, 6, 6, 6, 6, 5, 5, 6, 3, 2], ["0.8581"]),
    5: ([8, 5, 6, 5, 5, 4, 6, 6, 6, 6, 6, 5, 5, 6, 3, 2], ["0.8619", "0.8346"]),
    6: ([8, 5, 6, 5, 5, 5, 5, 5, 5, 5, 6, 5, 5, 6, 3, 2], ["0.8625"]),
}

CLNQ = [8, 8, 10, 11, 11, 11, 11, 11, 11, 10, 10, 9, 8]


def topology():
    layers, dims = [], [3, 224, 224]
    for name, ch in CONV:
        if ch:
            layers.append({"name": name, "kind": "conv2d", "in_channels": dims[0],
                           "out_channels": ch, "kernel": [3, 3], "stride": 1, "padding": 1,
                           "output_dims": [ch, dims[1], dims[2]]})
            dims = [ch, dims[1], dims[2]]
            layers.append({"name": name + "_relu", "kind": "relu", "output_dims": dims})
        else:
            dims = [dims[0], dims[1] // 2, dims[2] // 2]
            layers.append({"name": name, "kind": "maxpool", "kernel": [2, 2], "stride": 2,
                           "output_dims": dims})
    features = dims[0] * dims[1] * dims[2]
    for name, out in FC:
        layers.append({"name": name, "kind": "fullyconnected", "in_features": features,
                       "out_features": out, "output_dims": [out]})
        if name != "fc8":
            layers.append({"name": name + "_relu", "kind": "relu", "output_dims": [out]})
        features = out
    layers.append({"name": "prob", "kind": "softmax", "output_dims": [features]})
    return {"format": "nuq-model", "version": 1, "name": "vgg16", "input_dims": [3, 224, 224],
            "activation_format": {"q_bits": 12, "f_bits": 0}, "topology_only": True,
            "layers": layers}


def write(name, text):
    with open(os.path.join(OUT, name), "w", newline="\n") as f:
        f.write(text)


def allocation(summary, rows):
    lines = [f"# {k}: {v}" for k, v in summary] + ["layer,scheme,bits"]
    lines += [f"{n},{s},{b}" for n, s, b in rows]
    return "\n".join(lines) + "\n"


def main():
    os.makedirs(OUT, exist_ok=True)
    write("vgg16_topology.json", json.dumps(topology(), indent=2) + "\n")

    rows = ["layer,bits," + ",".join(f"d{k}" for k in range(32))]
    rows += [f"{n},5," + ",".join(map(str, CODEBOOKS[n])) for n in CONV_NAMES if n in CODEBOOKS]
    write("vgg16_knq5_codebooks.csv", "\n".join(rows) + "\n")

    names = CONV_NAMES + [n for n, _ in FC]
    for idx, (bits, acc) in ENQ.items():
        summary = [("index", idx), ("top5_accuracy", acc[0])]
        if len(acc) > 1:
            summary.append(("top5_accuracy_alt", acc[1]))
        write(f"vgg16_enq_index{idx}.csv",
              allocation(summary, [(n, "enq", b) for n, b in zip(names, bits)]))

    write("vgg16_clnq.csv", allocation([("top5_accuracy", "0.8622"), ("nb_mib", "16.8")],
                                        [(n, "uniform", b) for n, b in zip(CONV_NAMES, CLNQ)]))
    write("vgg16_uniform12.csv",
          allocation([("top5_accuracy", "0.885")], [(n, "uniform", 12) for n in CONV_NAMES]))
    write("vgg16_uniform16.csv",
          allocation([("top5_accuracy", "0.884")], [(n, "uniform", 16) for n in CONV_NAMES]))
    write("vgg16_knq5.csv",
          allocation([("top5_accuracy", "0.8658")], [(n, "knq", 5) for n in CONV_NAMES]))
    write("vgg16_uniform_sweep.csv",
          "q,top5_accuracy\n14,0.884\n13,0.884\n12,0.885\n11,0.870\n10,0.796\n9,0.560\n")
    write("vgg16_knq_preprocess.csv",
          "bits,no_preprocess,with_preprocess\n4,0.628,0.6957\n5,0.858,0.8658\n")
    write("vgg16_footprint.csv",
          "scheme,top5_accuracy,nb_mb,nnb\nhalf,0.884,27,1.6\nenq,0.8625,9.5,0.56\n"
          "knq,0.8658,8.4,0.50\nclnq,0.8622,16.8,1\n")
    # AlexNet figures only. Standard AlexNet conv outputs total 649,984
    # activations (1.24 MiB at 16 bits), about half of the 2.57 MB figure, so
    # no topology is shipped to reconcile against.
    write("alexnet_footprint.csv",
          "scheme,top5_accuracy,nb_mb,nnb\nhalf,0.7995,2.57,2.29\nenq,0.7755,0.48,0.43\n"
          "knq,0.7823,0.48,0.43\nclnq,0.7887,1.12,1\n")
    write("alexnet_knq_preprocess.csv",
          "bits,no_preprocess,with_preprocess\n2,0.3441,0.3903\n3,0.7755,0.7823\n")


if __name__ == "__main__":
    main()
