"""Carrier-phase ranging of a simulated pedestrian walk.

A receiver 9 m from the transmitter stands still for a second, then walks
7.2 m straight toward it at 1 m/s through a three-path desk channel at
10 dB SNR.  The full receiver chain runs on per-epoch burst windows; the
plots mirror the field-test style: per-epoch CIR heat map, tracked ToA,
and cumulative carrier-phase distance.
"""

import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from nrranging import CellIdentity, Impairments, Trajectory
from nrranging.pipeline import PipelineConfig, run_scenario_windows
from nrranging.scenario import Scenario, default_desk_channel

out_dir = pathlib.Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

traj = Trajectory(waypoints=((0.0, 9.0), (1.0, 9.0), (8.2, 1.8), (9.0, 1.8)))
scen = Scenario(cell=CellIdentity.from_cell_id(602), n_epochs=450, lead_in=4000,
                channel=default_desk_channel(),
                impairments=Impairments(snr_db=10.0), trajectory=traj, seed=12)
cfg = PipelineConfig(loop_bandwidth_hz=0.5)  # pedestrian loop bandwidth

track, diag = run_scenario_windows(scen, cfg)
t = np.asarray(track.epoch_index) * 0.02
cum = np.asarray(track.cumulative_m)
toa_m = (np.asarray(track.toa_samples) - track.toa_samples[0]) * 299792458.0 / 7.68e6

print(f"tracked {len(track)} epochs ({t[-1]:.1f} s), "
      f"{len(diag.acquisition.paths)} paths acquired")
print(f"carrier-phase cumulative distance: {cum[-1]:.3f} m (true 7.2 m, "
      f"error {abs(cum[-1] - 7.2) * 100:.1f} cm)")
print(f"raw DLL ToA change: {toa_m[-1]:+.2f} m -- multipath coupling biases the "
      "code phase at the meter level, which is what the carrier phase fixes")

fig, axes = plt.subplots(3, 1, figsize=(9, 10), sharex=True)

im = axes[0].imshow(diag.cir.T, aspect="auto", origin="lower",
                    extent=[t[0], t[-1], diag.delay_grid[0], diag.delay_grid[-1]],
                    cmap="inferno")
tracked = np.full((len(track), len(diag.path_snapshots[0])), np.nan)
for i, snap in enumerate(diag.path_snapshots):
    for j, (_, delay, _) in enumerate(snap[:tracked.shape[1]]):
        tracked[i, j] = delay
for j in range(tracked.shape[1]):
    axes[0].plot(t, tracked[:, j], color="cyan", lw=0.7)
axes[0].set_ylabel("delay (samples)")
axes[0].set_title("Per-epoch CIR heat map with tracked path delays")
fig.colorbar(im, ax=axes[0], pad=0.01)

axes[1].plot(t, toa_m)
axes[1].set_ylabel("ToA change (m)")
axes[1].set_title("DLL time-of-arrival track (range units)")

axes[2].plot(t, cum, label="carrier-phase cumulative")
axes[2].plot(t, np.clip((t - 1.0), 0, 7.2), "k:", label="true walked distance")
axes[2].set_xlabel("time (s)")
axes[2].set_ylabel("distance toward gNB (m)")
axes[2].set_title("Carrier-phase ranging")
axes[2].legend()
fig.tight_layout()
fig.savefig(out_dir / "walk_ranging.png", dpi=130)
plt.close(fig)
print(f"figure in {out_dir}")
