#!/usr/bin/env python3
"""All-pairs cross-correlation of an MRRTAGS1 file, written as delay_ps,counts.

Independent of the Rust correlator; used once to produce the golden histogram.

    brute_force_histogram.py TAGS.bin OUT.csv --a 0 --b 1 --bin 81 --range 81000
"""
import argparse
import struct


def read_tags(path):
    with open(path, "rb") as f:
        data = f.read()
    magic, version, resolution, channels, count = struct.unpack_from("<8sHIBQ", data, 0)
    if magic != b"MRRTAGS1":
        raise SystemExit("bad magic")
    if len(data) != 23 + 9 * count:
        raise SystemExit("length does not match record count")
    tags = []
    for i in range(count):
        ticks, ch = struct.unpack_from("<QB", data, 23 + 9 * i)
        tags.append((ticks * resolution, ch))
    return tags


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("tags")
    ap.add_argument("out")
    ap.add_argument("--a", type=int, default=0)
    ap.add_argument("--b", type=int, default=1)
    ap.add_argument("--bin", type=int, default=81)
    ap.add_argument("--range", type=int, default=81000)
    args = ap.parse_args()

    tags = read_tags(args.tags)
    starts = [t for t, c in tags if c == args.a]
    stops = [t for t, c in tags if c == args.b]
    lo, hi, w = -args.range, args.range, args.bin
    counts = [0] * ((hi - lo) // w)
    for s in starts:
        for e in stops:
            d = e - s
            if lo <= d < hi:
                counts[(d - lo) // w] += 1

    with open(args.out, "w", newline="") as f:
        f.write("delay_ps,counts\n")
        for j, n in enumerate(counts):
            f.write(f"{lo + j * w},{n}\n")


if __name__ == "__main__":
    main()
