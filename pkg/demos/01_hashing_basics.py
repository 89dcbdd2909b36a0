"""Keyed modular hashing in five minutes.

Generates a key, hashes two nearby vectors, and shows that the mean Lee
distance between the hashes tracks their Euclidean distance while each hash
on its own looks like uniform noise.
"""

import numpy as np

from modhash import generate_key, hash_vector, lee_distance, mean_lee_distance

seed = bytes.fromhex("11" * 32)
k, m, n = 8, 244, 100

key = generate_key(k, m, n, seed)
print(f"key: k={key.k}, projection {key.m}x{key.n}, delta={key.delta:.4f}")
print(f"projection entry variance ~ pi/2: {key.a.var():.4f}")

rng = np.random.default_rng(1)
x1 = rng.normal(size=n)
direction = rng.normal(size=n)
x2 = x1 + 1.0 * direction / np.linalg.norm(direction)  # distance exactly 1

h1 = hash_vector(key, x1)
h2 = hash_vector(key, x2)
print(f"\nhash of x1, first 20 components: {h1.components[:20]}")
print(f"hash of x2, first 20 components: {h2.components[:20]}")

print(f"\ncomponent histogram of h1: {np.bincount(h1.components, minlength=k)}")
print("(roughly uniform -- a hash alone reveals nothing about x1)")

mean = mean_lee_distance(h1, h2)
print(f"\nmean Lee distance = {mean} = {float(mean):.4f}")
print(f"true Euclidean distance = {np.linalg.norm(x1 - x2):.4f}")
print("below the saturation threshold the two agree to the planned precision")

print(f"\nsingle-component Lee distances are ring distances: lee(1, 5 | k=6) = {lee_distance(1, 5, 6)}")
