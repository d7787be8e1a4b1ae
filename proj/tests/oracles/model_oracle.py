# Copyright 2026 The privatemdi Authors
# SPDX-License-Identifier: Apache-2.0
"""Independent reference for fixed-point ring inference.

Reads a model JSON, runs inference with Python integers (ring semantics) and
with exact rationals, and writes the frozen fixture consumed by the C++ tests.

    python3 model_oracle.py model.json out.json
"""

import base64
import json
import sys
from fractions import Fraction


def encode(real, n, f):
    scaled = Fraction(real) * (1 << f)
    mag = abs(scaled)
    r = int(mag) + (1 if mag - int(mag) >= Fraction(1, 2) else 0)
    v = -r if scaled < 0 else r
    return v % (1 << n)


def to_signed(x, n):
    return x - (1 << n) if x >> (n - 1) else x


def load(path):
    with open(path) as fh:
        m = json.load(fh)
    n = m["ring"]["bit_width"]
    width = (n + 7) // 8
    layers = []
    for layer in m["layers"]:
        raw = base64.b64decode(layer["weights"])
        w = [int.from_bytes(raw[i:i + width], "little") for i in range(0, len(raw), width)]
        assert len(w) == layer["rows"] * layer["cols"]
        layers.append((layer["rows"], layer["cols"], layer["activation"], w))
    return m, layers


def ring_infer(layers, x, n, f):
    mod = 1 << n
    for rows, cols, act, w in layers:
        y = [sum(w[r * cols + c] * x[c] for c in range(cols)) % mod for r in range(rows)]
        if act == "relu":
            y = [0 if v >> (n - 1) else v >> f for v in y]
        x = y
    return x


def rational_layer(rows, cols, act, w, x, n, f):
    """One layer over exact rationals from the quantized weights and inputs."""
    y = [sum(Fraction(to_signed(w[r * cols + c], n), 1 << f) * x[c] for c in range(cols)) for r in range(rows)]
    if act == "relu":
        y = [max(Fraction(0), v) for v in y]
    return y


INPUTS = [
    [0.5, -0.25, 0.75, -1.0, 0.125, 0.0, 0.3, -0.6],
    [-0.9, 0.45, 0.2, 0.8, -0.35, 0.65, -0.1, 0.05],
    [0.0] * 8,
    [1.0, 1.0, -1.0, -1.0, 0.5, 0.5, -0.5, -0.5],
]


def main():
    model_path, out_path = sys.argv[1], sys.argv[2]
    m, layers = load(model_path)
    n, f = m["ring"]["bit_width"], m["ring"]["frac_bits"]
    cases = []
    for real in INPUTS:
        x = [encode(v, n, f) for v in real]
        cases.append({"input": x, "output": ring_infer(layers, x, n, f)})

    # Single ReLU layer: the ring result must sit within one step below the rational one.
    rows, cols, act, w = layers[0]
    single = []
    for real in INPUTS:
        x = [encode(v, n, f) for v in real]
        xr = [Fraction(to_signed(v, n), 1 << f) for v in x]
        exact = rational_layer(rows, cols, act, w, xr, n, f)
        single.append({"input": x, "rational": [[e.numerator, e.denominator] for e in exact]})

    with open(out_path, "w") as fh:
        json.dump({"encode_examples": [[-1.5, 16, 4, encode(-1.5, 16, 4)], [1.0, 32, 12, encode(1.0, 32, 12)],
                                       [0.03125, 16, 4, encode(0.03125, 16, 4)],
                                       [-0.03125, 16, 4, encode(-0.03125, 16, 4)]],
                   "cases": cases, "first_layer_rational": single}, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
