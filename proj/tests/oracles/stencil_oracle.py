#!/usr/bin/env python3
"""Independent evaluation of the 25-point variable-coefficient update.

Grid 9x9x9, radius 4, seed 7, filled with the same hash as the library
(stream 0 = current level, stream 2 + i = coefficient W_i scaled by 1/16).
Prints the updated value at a few interior points as hex floats.
"""

from fill_oracle import fill_value

R = 4
N = 9
SEED = 7
SCALE = 0.0625


def cur(z, y, x):
    return fill_value(SEED, 0, z + R, y + R, x + R)


def w(i, z, y, x):
    return fill_value(SEED, 2 + i, z + R, y + R, x + R) * SCALE


def update(z, y, x):
    c = cur
    acc = w(0, z, y, x) * c(z, y, x)
    for k in range(1, R + 1):
        base = 1 + 3 * (k - 1)
        acc = acc + w(base, z, y, x) * (c(z, y, x - k) + c(z, y, x + k))
        acc = acc + w(base + 1, z, y, x) * (c(z, y - k, x) + c(z, y + k, x))
        acc = acc + w(base + 2, z, y, x) * (c(z - k, y, x) + c(z + k, y, x))
    return acc


POINTS = [(4, 4, 4), (0, 0, 0), (8, 3, 5), (2, 7, 1)]


def main():
    for p in POINTS:
        print(f"    {{{p[0]}, {p[1]}, {p[2]}, {update(*p).hex()}}},")


if __name__ == "__main__":
    main()
