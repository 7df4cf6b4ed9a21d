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
"""Writes tests/data/kmeans_samples.csv.

Each row is `bits,v1 v2 ...`: a 1- or 2-bit fit over a small 12-bit sample
with at most 12 distinct values. Rows are shuffled so order does not help.
"""

import argparse
import random


def make_row(rng):
    bits = rng.choice((1, 2))
    distinct = rng.randint(1, 12)
    style = rng.choice(("uniform", "clustered", "skewed"))
    if style == "uniform":
        values = rng.sample(range(4096), distinct)
    elif style == "clustered":
        centers = [rng.randrange(4096) for _ in range(rng.randint(1, 4))]
        pool = set()
        while len(pool) < distinct:
            c = rng.choice(centers)
            pool.add(min(4095, max(0, c + rng.randint(-40, 40))))
        values = sorted(pool)
    else:
        # ReLU-like: many small codes, a thin tail
        pool = set()
        while len(pool) < distinct:
            pool.add(min(4095, int(rng.expovariate(1 / 300.0))))
        values = sorted(pool)
    sample = []
    for v in values:
        sample.extend([v] * rng.randint(1, 25))
    rng.shuffle(sample)
    return bits, sample


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="tests/data/kmeans_samples.csv")
    ap.add_argument("--rows", type=int, default=50)
    ap.add_argument("--seed", type=int, default=20261014)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    with open(args.out, "w") as f:
        f.write("# bits,values (space separated 12-bit codes)\n")
        for _ in range(args.rows):
            bits, sample = make_row(rng)
            f.write(f"{bits},{' '.join(map(str, sample))}\n")


if __name__ == "__main__":
    main()
