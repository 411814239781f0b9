"""Occurrence and transition statistics over sampled progressions."""

import numpy as np

from chordbench.labels import majmin_name
from chordbench.stats import chord_occurrences, chord_transitions
from chordbench.synth import default_pop_model, sample_progression

model = default_pop_model()
tracks = [sample_progression(model, 120.0, seed) for seed in range(24)]

counts = chord_occurrences(tracks)
print("== chord occurrences (runs counted once) ==")
order = np.argsort(counts)[::-1]
for c in order[:8]:
    print(f"  {majmin_name(int(c)):>7}: {counts[c]}")
print(f"  total runs: {counts.sum()}")

matrix = chord_transitions(tracks)
print("\n== most common transitions (changes only) ==")
flat = [(matrix[a, b], a, b) for a in range(25) for b in range(25)]
for n, a, b in sorted(flat, reverse=True)[:8]:
    print(f"  {majmin_name(a):>7} -> {majmin_name(b):<7} {n}")

print("\nfifth-related movement dominates, mirroring the transition model:")
fifths = sum(matrix[a, b] for a in range(24) for b in range(24)
             if (b % 12 - a % 12) % 12 in (5, 7))
print(f"  root movement of a fourth/fifth: {fifths} of {matrix.sum()} changes "
      f"({100.0 * fifths / matrix.sum():.0f}%)")
