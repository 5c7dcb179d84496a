"""Regenerates fir128.txt: a synthetic 128-tap room-like impulse response.

12 leading zero taps (propagation delay), then Gaussian taps under an
exponential envelope with time constant 18 taps, each kept with
probability 0.35, scaled to unit peak magnitude.
"""
import numpy as np

rng = np.random.default_rng(20240607)
taps, delay, tau, keep = 128, 12, 18.0, 0.35
h = np.zeros(taps)
n = np.arange(taps - delay)
mask = rng.random(n.size) < keep
mask[0] = True
h[delay:] = rng.standard_normal(n.size) * np.exp(-n / tau) * mask
h /= np.abs(h).max()
with open("fir128.txt", "w") as f:
    f.write("# synthetic 128-tap path, see gen_fir128.py; not a measured response\n")
    for x in h:
        f.write(f"{x:.17e}\n")
