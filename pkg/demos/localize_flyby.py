"""Track a passing noise source with SRP-PHAT and compare to ground truth.

A white-noise source drives along a straight road 15 m from a 4-microphone
square array. The render is clean (no reflection, no air absorption) so the
only thing under test is the localizer itself.

    python3 demos/localize_flyby.py
"""
import numpy as np

from roadsim import DoaGrid, Scene, Trajectory, localize, render, render_ground_truth

fs = 16000.0
mics = np.array([[0.05, 0.05, 1.0], [-0.05, 0.05, 1.0], [-0.05, -0.05, 1.0], [0.05, -0.05, 1.0]])
signal = np.random.default_rng(0).standard_normal(int(3.0 * fs))
scene = Scene(fs, signal, Trajectory.polyline([(-30, 15, 1.0), (30, 15, 1.0)], 20.0), mics,
              reflection=None, air_absorption=False)
channels = render(scene).channels

window = hop = 512
estimates = localize(channels, fs, mics, DoaGrid.ring(5), window=window, hop=hop)
truth = {round(f.time * fs): f.array_azimuth for f in render_ground_truth(scene, hop, window)}

print(" time   truth  estimate")
errors = []
for e in estimates:
    ref = truth[round(e.time * fs)]
    errors.append(abs((e.azimuth - ref + 180) % 360 - 180))
    if len(errors) % 8 == 1:
        print(f"{e.time:5.2f}  {ref:6.1f}  {e.azimuth:6.1f}")
errors = np.array(errors)
print(f"{len(errors)} frames, mean error {errors.mean():.2f} deg, "
      f"{np.mean(errors <= 5) * 100:.0f}% within one 5 deg grid step")
