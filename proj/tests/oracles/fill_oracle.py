#!/usr/bin/env python3
"""Reference values of the deterministic fill for a 2x2x2 grid, radius 1, seed 0.

Prints C++ hex-float literals: stream 0 over the whole padded 4x4x4 box, then
stream 1 over the 2x2x2 interior, both in (pz, py, px) order.
"""

MASK = (1 << 64) - 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK
    return x ^ (x >> 31)


def fill_value(seed, stream, pz, py, px):
    h = splitmix64(seed)
    for v in (stream, pz, py, px):
        h = splitmix64(h ^ v)
    return (h >> 11) * 2.0 ** -53


def main():
    seed, n, r = 0, 2, 1
    p = n + 2 * r
    s0 = [fill_value(seed, 0, z, y, x) for z in range(p) for y in range(p) for x in range(p)]
    s1 = [fill_value(seed, 1, z, y, x)
          for z in range(r, n + r) for y in range(r, n + r) for x in range(r, n + r)]
    print("// stream 0, padded 4x4x4")
    for v in s0:
        print(f"    {v.hex()},")
    print("// stream 1, interior 2x2x2")
    for v in s1:
        print(f"    {v.hex()},")


if __name__ == "__main__":
    main()
