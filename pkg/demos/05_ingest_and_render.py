"""Scattered samples -> lattice -> fit -> image files."""

import tempfile
from pathlib import Path

import numpy as np

from latpart import dcart_fit
from latpart.cli import label_colors, render_levels
from latpart.fieldio import write_pgm, write_ppm
from latpart.simulation import bin_ingest

rng = np.random.default_rng(9)
x = rng.uniform(size=(20000, 2))
inside = (np.abs(x[:, 0] - 0.5) < 0.25) & (x[:, 1] > 0.4)
v = inside * 2.0 + rng.normal(0, 0.4, len(x))
field = bin_ingest(zip(x, v), d=2)
print(f"{len(x)} points binned onto {field.shape.n}x{field.shape.n}")

fit = dcart_fit(field, 0.5)
out = Path(tempfile.mkdtemp())
write_pgm(out / "binned.pgm", render_levels(field.values))
write_ppm(out / "leaves.ppm", label_colors(fit.partition.labels()))
print(f"{fit.leaf_count} leaves; images in {out}")
