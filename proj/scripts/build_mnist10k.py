#!/usr/bin/env python3
"""Rebuild data/mnist10k/*.gz from the 10,000 MNIST digits shipped in the
`mnist` npm package (cazala/mnist, MIT).

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/build_mnist10k.py package/src/digits data/mnist10k

Pixel values in the package are x/255 rounded to 3 decimals, so rounding
x*255 recovers the original bytes exactly.
"""
import gzip
import json
import pathlib
import struct
import sys


def main(digits_dir: str, out_dir: str) -> None:
    images = bytearray()
    labels = bytearray()
    for digit in range(10):
        path = pathlib.Path(digits_dir) / f"{digit}.json"
        data = json.loads(path.read_text())["data"]
        assert len(data) % 784 == 0
        images.extend(min(255, max(0, round(v * 255))) for v in data)
        labels.extend([digit] * (len(data) // 784))
    n = len(labels)
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(out / "images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, n, 28, 28))
        f.write(bytes(images))
    with gzip.GzipFile(out / "labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, n))
        f.write(bytes(labels))
    print(f"wrote {n} samples to {out}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
