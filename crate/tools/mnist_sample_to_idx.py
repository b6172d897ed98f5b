#!/usr/bin/env python3
"""Convert the 10k-digit MNIST sample shipped in the `mnist` npm package into IDX files.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_sample_to_idx.py package/src/digits data/mnist

Writes `mnist10k-images-idx3-ubyte` and `mnist10k-labels-idx1-ubyte`. Pixel values in the
package are normalized floats; they are mapped back to bytes with round(v * 255).
"""
import json
import struct
import sys
from pathlib import Path


def main() -> None:
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    dst.mkdir(parents=True, exist_ok=True)
    pixels = bytearray()
    labels = bytearray()
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        count = len(data) // 784
        for i in range(count):
            row = data[i * 784:(i + 1) * 784]
            pixels.extend(min(255, max(0, round(v * 255))) for v in row)
            labels.append(digit)
    n = len(labels)
    (dst / "mnist10k-images-idx3-ubyte").write_bytes(
        struct.pack(">IIII", 0x00000803, n, 28, 28) + bytes(pixels))
    (dst / "mnist10k-labels-idx1-ubyte").write_bytes(
        struct.pack(">II", 0x00000801, n) + bytes(labels))
    print(f"wrote {n} examples to {dst}")


if __name__ == "__main__":
    main()
