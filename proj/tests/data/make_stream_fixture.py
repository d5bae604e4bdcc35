"""Writes stream_records.csv and stream_locations.csv.

Eighteen sites, 120 months (1995-01 .. 2004-12). Fourteen core sites are
observed on months 20..92 and all miss months 19 and 93; the four extra sites
each miss one month inside that window. The largest complete submatrix is
therefore the 14 core sites over 73 months.
"""
import calendar
import csv
import pathlib

import numpy as np

rng = np.random.default_rng(20240611)
here = pathlib.Path(__file__).resolve().parent

n_core, n_extra, months = 14, 4, 120
p = n_core + n_extra
sites = [f"0335{k:04d}" for k in range(p)]
lon = rng.uniform(-86.6, -85.4, p)
lat = rng.uniform(39.4, 40.6, p)

# Spatial VAR(1) on the 3 nearest neighbours plus self.
xy = np.column_stack([lon, lat])
dist = np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=2)
A = np.zeros((p, p))
for i in range(p):
    for j in np.argsort(dist[i])[:4]:
        A[i, j] = rng.uniform(-1, 1)
A *= 0.7 / np.linalg.norm(A, 2)
y = np.zeros((p, months + 100))
for t in range(1, months + 100):
    y[:, t] = A @ y[:, t - 1] + rng.normal(0, 1, p)
level = 2.0 + 0.4 * y[:, 100:]

observed = np.ones((p, months), dtype=bool)
for i in range(n_core):
    observed[i, 19] = observed[i, 93] = False
    for m in rng.choice(np.r_[0:19, 94:months], size=6, replace=False):
        observed[i, m] = False
for k, gap in enumerate([40, 55, 70, 85]):
    observed[n_core + k, gap] = False
    observed[n_core + k, rng.choice(np.r_[0:19, 94:months], size=3, replace=False)] = False

rows = []
for i, site in enumerate(sites):
    for m in range(months):
        if not observed[i, m]:
            continue
        year, month = 1995 + m // 12, m % 12 + 1
        days = sorted(rng.choice(np.arange(1, calendar.monthrange(year, month)[1] + 1),
                                 size=rng.integers(2, 5), replace=False))
        peak = rng.integers(len(days))
        for k, day in enumerate(days):
            value = level[i, m] if k == peak else level[i, m] - rng.uniform(0.05, 0.5)
            rows.append((site, f"{year:04d}-{month:02d}-{day:02d}", f"{value:.4f}"))
rng.shuffle(rows)

with open(here / "stream_records.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["site_id", "date", "value"])
    w.writerows(rows)
with open(here / "stream_locations.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["site_id", "longitude", "latitude"])
    for s, a, b in zip(sites, lon, lat):
        w.writerow([s, f"{a:.5f}", f"{b:.5f}"])
