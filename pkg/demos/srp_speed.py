"""Compare the fast and direct SRP-PHAT maps on growing direction grids.

The fast map precomputes one interpolation table per microphone pair and
reads steered correlations out of pairwise GCC functions. The direct map
phase-shifts every channel spectrum for every direction. Both produce the
same map up to a constant, so only their cost differs.

    python3 demos/srp_speed.py
"""
import numpy as np

from roadsim import DoaGrid, Scene, Trajectory, profile_pipeline

angles = 2 * np.pi * np.arange(8) / 8
mics = np.column_stack([0.1 * np.cos(angles), 0.1 * np.sin(angles), np.ones(8)])
x = np.random.default_rng(1).standard_normal(8000)
scene = Scene(16000.0, x, Trajectory.static((10.0, 4.0, 1.5)), mics)

print(f"{'directions':>10} {'fast ms':>8} {'direct ms':>9} {'speedup':>7}")
for n in (100, 300, 1000, 3000):
    r = profile_pipeline(scene, 10, grid=DoaGrid.fibonacci(n))
    print(f"{n:10d} {r.fast_srp.mean_ms:8.2f} {r.direct_srp.mean_ms:9.2f} {r.speedup:7.1f}")

print("\nstage totals for the last run (s):")
for name, seconds in r.stages.items():
    print(f"  {name:12s} {seconds:.4f}")
