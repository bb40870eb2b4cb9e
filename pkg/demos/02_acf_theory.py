"""Closed-form DM-RS correlation theory: ACF, S-curves and loop gain.

Reproduces the analysis figures: the pilot-comb ACF mainlobe against the
GPS C/A chip width, the early-minus-late S-curves for several correlator
spacings, and the discriminator gain over spacing.
"""

import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from nrranging.theory import (
    AcfParams,
    discriminator_gain,
    gnss_one_chip_seconds,
    ideal_acf_approx,
    ideal_acf_exact,
    s_curve,
)

out_dir = pathlib.Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

params = AcfParams()
fs = 7.68e6
print(f"pilot comb: spacing {params.kappa}, {params.n_p} pilots, N={params.n_fft}")
print(f"beta = {params.beta}, alpha = {params.alpha}")
print(f"first ACF null at {params.first_null:.4f} samples "
      f"= {params.first_null / fs * 1e6:.4f} us")
print(f"GPS C/A one-chip null: {gnss_one_chip_seconds() * 1e6:.4f} us")

eps = np.linspace(-3, 3, 1201)
exact = np.abs(ideal_acf_exact(params, eps))
approx = np.abs(ideal_acf_approx(params, eps))

fig, ax = plt.subplots(figsize=(8, 4.5))
ax.plot(eps / fs * 1e6, exact, label="exact (Dirichlet)")
ax.plot(eps / fs * 1e6, approx, "--", label="sinc approximation")
chip = gnss_one_chip_seconds() * 1e6
ax.axvline(chip, color="gray", linestyle=":", label="GPS C/A chip")
ax.axvline(-chip, color="gray", linestyle=":")
ax.set_xlabel("delay error (us)")
ax.set_ylabel("|R|")
ax.set_title("Ideal DM-RS ACF vs the GPS C/A chip width")
ax.legend()
fig.tight_layout()
fig.savefig(out_dir / "acf.png", dpi=130)
plt.close(fig)
print(f"max |approx - exact| for |eps|<=2: "
      f"{np.max(np.abs(approx - exact)[np.abs(eps) <= 2]):.2e}")

fig, axes = plt.subplots(1, 2, figsize=(11, 4.2))
eps_s = np.linspace(-1.5, 1.5, 801)
for xi in (0.1, 0.25, 0.5):
    kd = discriminator_gain(xi)
    axes[0].plot(eps_s, s_curve(eps_s, xi) / kd, label=f"xi={xi}")
    print(f"xi={xi}: k_d = {kd:.4f}")
axes[0].plot(eps_s, eps_s, "k:", alpha=0.5, label="ideal a = eps")
axes[0].set_xlabel("timing error (samples)")
axes[0].set_ylabel("normalized discriminator")
axes[0].set_title("Normalized EMLP S-curves")
axes[0].legend()

xis = np.linspace(0.02, 0.5, 100)
axes[1].plot(xis, [discriminator_gain(float(x)) for x in xis])
axes[1].set_xlabel("correlator spacing xi (samples)")
axes[1].set_ylabel("k_d")
axes[1].set_title("Discriminator gain vs spacing")
fig.tight_layout()
fig.savefig(out_dir / "s_curves.png", dpi=130)
plt.close(fig)
print(f"figures in {out_dir}")
