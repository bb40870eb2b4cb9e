"""Matching-pursuit multipath acquisition on DM-RS pilots.

Injects a three-path desk channel, runs the order-recursive LS matching
pursuit over the delay grid, and compares the acquired paths against both
the injected truth and the raw matched-filter delay scan.
"""

import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from nrranging import CellIdentity, generate_pbch_dmrs
from nrranging.ranging import AcquisitionConfig, acquire_multipaths, cir_magnitude, delay_shift

out_dir = pathlib.Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

replica = generate_pbch_dmrs(CellIdentity.from_cell_id(602))
truth = [(1.0, 3.0), (0.708 * np.exp(0.7j), 4.8), (0.316 * np.exp(-2.1j), 6.0)]
rng = np.random.default_rng(4)
snr_db = 15.0

d = np.zeros(replica.count, dtype=complex)
for gain, delay in truth:
    d += gain * delay_shift(replica.values, replica.indices, delay)
sigma = np.sqrt(10 ** (-snr_db / 10))
d += sigma / np.sqrt(2) * (rng.standard_normal(len(d))
                           + 1j * rng.standard_normal(len(d)))

cfg = AcquisitionConfig(delta_tau=0.1, n_tau=101, max_paths=6, power_threshold=0.8)
res = acquire_multipaths(d, replica, cfg)
print(f"injected {len(truth)} paths, acquired {len(res.paths)} "
      f"(threshold {cfg.power_threshold:.0%}, residual "
      f"{res.residual_power_fraction:.3f})")
for p in res.paths:
    print(f"  delay {p.delay:5.2f} samples, |h| {abs(p.coeff):.3f}, "
          f"phase {np.angle(p.coeff):+.2f} rad")
print("residual power after each pick:",
      [f"{f:.3f}" for f in res.residual_history])

scan = cir_magnitude(d, replica, cfg.grid)
fig, ax = plt.subplots(figsize=(9, 4.5))
ax.plot(cfg.grid, scan, label="matched-filter delay scan")
for gain, delay in truth:
    ax.axvline(delay, color="gray", linestyle=":", alpha=0.8)
    ax.plot(delay, abs(gain), "k^", ms=8)
for p in res.paths:
    ax.plot(p.delay, abs(p.coeff), "rx", ms=11, mew=2)
ax.plot([], [], "k^", label="injected")
ax.plot([], [], "rx", label="acquired (LS-MP)")
ax.set_xlabel("delay (samples)")
ax.set_ylabel("magnitude")
ax.set_title(f"Multipath acquisition at SNR {snr_db:.0f} dB")
ax.legend()
fig.tight_layout()
fig.savefig(out_dir / "acquisition.png", dpi=130)
plt.close(fig)
print(f"figure in {out_dir}")
