"""
Entropy sequences from location traces
======================================

A user who spends the whole day in one grid cell has entropy 0; one who
splits the day evenly over every cell of the study area has entropy 100.
This script builds a small grid, simulates a few traces and prints the
day-by-day entropy of each user.
"""

# %%
import numpy as np

from stentropy.entropy import EntropyConfig, compute_sequences, slice_entropy
from stentropy.grid import CellIndex
from stentropy.synth import SynthProfile, benchmark_grid, generate_dataset
from stentropy.ingest import Gender, Trace

# %%
# A 3 x 3 grid of 500 m cells around Lausanne.
grid = benchmark_grid(3)
print(grid.n, "x", grid.m, "cells, box", (round(grid.min_lat, 5), round(grid.min_lon, 5)),
      "to", (round(grid.max_lat, 5), round(grid.max_lon, 5)))

# %%
# The entropy of a single slice only needs the time spent per cell.
# Half the day at home, a quarter at work, a quarter elsewhere:
day = {CellIndex(0, 0): 43_200, CellIndex(1, 0): 21_600, CellIndex(2, 2): 21_600}
print("home/work/other split:", round(slice_entropy(day, grid), 4))

# %%
# Two kinds of users: homebodies (one or two cells, lopsided days) and
# explorers (six to nine cells, even days).
profiles = [
    SynthProfile(Gender.FEMALE, cells_per_day=(1, 2), dwell_concentration=0.5, days=7),
    SynthProfile(Gender.MALE, cells_per_day=(6, 9), dwell_concentration=20.0, days=7),
]
dataset = generate_dataset(profiles, users_per_profile=3, seed=1, grid=grid)

# %%
sequences = compute_sequences(dataset.traces, grid, EntropyConfig())
for uid, seq in sequences.items():
    kind = dataset.demographics[uid].gender.label
    values = " ".join(f"{v:5.1f}" for v in seq.as_array())
    print(f"{uid} {kind:6s} {values}")

# %%
# Slices without any fix stay missing (NaN in the array view), they are
# never counted as zero entropy.
# Here the phone of u0003 was off from 22:00 on day 1 until the end of day 2.
# (A fix keeps counting for up to an hour, so a fix at 23:45 would still
# credit the first minutes of the next day.)
trace = dataset.traces["u0003"]
elapsed = trace.timestamps - trace.timestamps[0]
keep = (elapsed < 86_400 + 22 * 3600) | (elapsed >= 3 * 86_400)
gappy = Trace("u0003", trace.timestamps[keep], trace.latitudes[keep], trace.longitudes[keep])
seq = compute_sequences({"u0003": gappy}, grid)["u0003"]
print([None if v is None else round(v, 1) for v in seq.values])
