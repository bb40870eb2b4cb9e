"""Command-line front end.

Subcommands: ``generate`` (clean SSB capture to an IQ file), ``impair``
(run a capture through a scenario's channel), ``receive`` (full ranging
pipeline over a capture), ``analyze`` (closed-form ACF / S-curve / gain
tables) and ``e2e`` (generate, impair and receive in one run).

Exit codes: 0 success, 2 no SSB detected, 3 capture format or metadata
error, 1 anything else.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .channel import MultipathChannel
from .errors import CaptureFormatError, MetadataError, SsbNotFoundError
from .grid import CellIdentity, Numerology
from .iqfile import IqMeta, IqRecording, read_iq, write_iq
from .pipeline import PipelineConfig, run_pipeline, write_results
from .ranging import AcquisitionConfig
from .scenario import (
    Scenario,
    impair_capture,
    load_scenario,
    save_scenario,
    synthesize_capture,
)
from .theory import AcfParams, discriminator_gain, ideal_acf_approx, ideal_acf_exact, s_curve


def _add_cell_args(p):
    p.add_argument("--cell-id", type=int, default=None, help="cell identity 0..1007")
    p.add_argument("--m1", type=int, default=None, help="SSS sequence number 0..335")
    p.add_argument("--m2", type=int, default=None, help="PSS sequence number 0..2")


def _cell_from_args(args) -> CellIdentity:
    if args.cell_id is not None:
        return CellIdentity.from_cell_id(args.cell_id)
    if args.m1 is not None or args.m2 is not None:
        return CellIdentity(m1=args.m1 or 0, m2=args.m2 or 0)
    return CellIdentity.from_cell_id(602)


def _add_receiver_args(p):
    g = p.add_argument_group("receiver", "defaults follow the reference field setup")
    g.add_argument("--scs", type=float, default=30e3, help="subcarrier spacing in Hz")
    g.add_argument("--delta-tau", type=float, default=0.1,
                   help="acquisition delay-grid step in samples")
    g.add_argument("--n-tau", type=int, default=141, help="delay-grid length")
    g.add_argument("--acq-threshold", type=float, default=0.8,
                   help="acquisition stop at this retained power fraction")
    g.add_argument("--max-paths", type=int, default=6)
    g.add_argument("--xi", type=float, default=0.5,
                   help="early/late correlator spacing in samples")
    g.add_argument("--loop-bandwidth", type=float, default=25.0,
                   help="DLL bandwidth in Hz (25 static / 0.5 dynamic)")
    g.add_argument("--update-period", type=float, default=0.02,
                   help="tracking update period in seconds")
    g.add_argument("--pss-threshold", type=float, default=3.0,
                   help="PSS peak-to-mean detection threshold")
    g.add_argument("--sss-threshold", type=float, default=0.35)
    g.add_argument("--pss-search-decimation", type=int, default=1,
                   help="if >1, search at the reduced rate and refine (faster)")
    g.add_argument("--carrier-freq", type=float, default=2565e6,
                   help="carrier frequency in Hz (sets the ranging wavelength)")
    g.add_argument("--smoothing-window", type=int, default=100,
                   help="Hatch smoothing window in epochs")
    g.add_argument("--no-smooth", action="store_true")
    g.add_argument("--guard", type=int, default=8,
                   help="samples the FFT window backs into the CP")
    g.add_argument("--max-epochs", type=int, default=None)


def _config_from_args(args) -> PipelineConfig:
    return PipelineConfig(
        numerology=Numerology(scs_hz=args.scs),
        acquisition=AcquisitionConfig(delta_tau=args.delta_tau, n_tau=args.n_tau,
                                      max_paths=args.max_paths,
                                      power_threshold=args.acq_threshold),
        xi=args.xi, loop_bandwidth_hz=args.loop_bandwidth,
        update_period_s=args.update_period, pss_threshold=args.pss_threshold,
        sss_threshold=args.sss_threshold,
        pss_search_decimation=args.pss_search_decimation,
        carrier_freq_hz=args.carrier_freq,
        demod_guard=args.guard, smoothing_window=args.smoothing_window,
        smooth=not args.no_smooth, max_epochs=args.max_epochs,
        seed=getattr(args, "seed", 0) or 0)


def _print_summary(track, diag, file=None):
    file = file or sys.stdout
    cfg = diag.config
    fs = cfg.numerology.sample_rate_hz
    s = diag.sync_summary
    print(f"cell {s['cell_id']} (m1={s['m1']}, m2={s['m2']}), "
          f"SSB start {s['ssb_start']}, cfo {s['cfo_hat_norm']:+.2e} subcarriers",
          file=file)
    print(f"acquired {len(diag.acquisition.paths)} paths, residual power "
          f"{diag.acquisition.residual_power_fraction:.3f}", file=file)
    if len(track) > 1:
        toa = np.asarray(track.toa_samples)
        meters = 299792458.0 / fs
        line = (f"epochs {len(track)}, raw ToA sigma {np.std(toa) * meters:.3f} m, "
                f"cumulative {track.cumulative_m[-1]:+.3f} m")
        if diag.toa_smoothed_samples is not None:
            line += f", smoothed ToA sigma {np.std(diag.toa_smoothed_samples) * meters:.3f} m"
        print(line, file=file)


def cmd_generate(args) -> int:
    cell = _cell_from_args(args)
    scen = Scenario(cell=cell, ssb_index=args.ssb_index, n_epochs=args.epochs,
                    lead_in=args.lead_in,
                    channel=MultipathChannel.from_pairs([(1.0, 0.0)]),
                    carrier_freq_hz=args.center_freq, seed=args.seed or 0)
    num = Numerology(scs_hz=args.scs)
    cap = synthesize_capture(scen, num)
    meta = IqMeta(sample_rate_hz=num.sample_rate_hz, center_freq_hz=args.center_freq,
                  fmt=args.format, source="nrranging generate")
    write_iq(args.out, cap, meta)
    print(f"wrote {len(cap)} samples ({args.epochs} SSBs, cell {cell.cell_id}) "
          f"to {args.out}")
    return 0


def cmd_impair(args) -> int:
    scen = load_scenario(args.scenario)
    if args.seed is not None:
        scen.seed = args.seed
    rec = read_iq(args.input)
    num = Numerology(scs_hz=args.scs)
    out = impair_capture(rec.samples, scen, num)
    meta = IqMeta(sample_rate_hz=rec.meta.sample_rate_hz,
                  center_freq_hz=rec.meta.center_freq_hz, fmt=rec.meta.fmt,
                  source=rec.meta.source + "+impaired")
    write_iq(args.out, out, meta)
    print(f"impaired capture written to {args.out}")
    return 0


def cmd_receive(args) -> int:
    rec = read_iq(args.input)
    cfg = _config_from_args(args)
    track, diag = run_pipeline(rec, cfg)
    write_results(track, diag, args.out_dir)
    _print_summary(track, diag)
    print(f"results in {Path(args.out_dir).resolve()}")
    return 0


def cmd_analyze(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = AcfParams()
    eps = np.linspace(-args.eps_max, args.eps_max, args.points)

    with open(out / "acf.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epsilon", "acf_exact_abs", "acf_approx_abs"])
        exact = np.abs(ideal_acf_exact(params, eps))
        approx = np.abs(ideal_acf_approx(params, eps))
        for row in zip(eps, exact, approx):
            w.writerow([f"{v:.9e}" for v in row])

    xis = [0.1, 0.2, 0.3, 0.4, 0.5]
    with open(out / "s_curve.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epsilon"] + [f"s_norm_xi_{xi:.1f}" for xi in xis])
        curves = [s_curve(eps, xi) / discriminator_gain(xi) for xi in xis]
        for i, e in enumerate(eps):
            w.writerow([f"{e:.9e}"] + [f"{c[i]:.9e}" for c in curves])

    with open(out / "gain.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["xi", "k_d"])
        for xi in np.linspace(0.01, 0.5, 50):
            w.writerow([f"{xi:.9e}", f"{discriminator_gain(float(xi)):.9e}"])

    print(f"analysis tables in {out.resolve()} (beta={params.beta}, "
          f"first null {params.first_null:.4f} samples)")
    return 0


def cmd_e2e(args) -> int:
    scen = load_scenario(args.scenario)
    if args.seed is not None:
        scen.seed = args.seed
    num = Numerology(scs_hz=args.scs)
    cap = synthesize_capture(scen, num)
    if args.save_capture:
        meta = IqMeta(sample_rate_hz=num.sample_rate_hz,
                      center_freq_hz=scen.carrier_freq_hz,
                      fmt="cf32le", source="nrranging e2e")
        write_iq(args.save_capture, cap, meta)
    rec = IqRecording(cap, IqMeta(sample_rate_hz=num.sample_rate_hz,
                                  center_freq_hz=scen.carrier_freq_hz,
                                  source="nrranging e2e"))
    cfg = _config_from_args(args)
    track, diag = run_pipeline(rec, cfg)
    write_results(track, diag, args.out_dir)
    _print_summary(track, diag)
    print(f"results in {Path(args.out_dir).resolve()}")
    return 0


def cmd_scenario_template(args) -> int:
    save_scenario(Scenario(), args.out)
    print(f"template scenario written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nrranging",
                                description="5G NR downlink carrier-phase ranging toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a clean SSB capture")
    _add_cell_args(g)
    g.add_argument("--out", required=True)
    g.add_argument("--epochs", type=int, default=10)
    g.add_argument("--lead-in", type=int, default=4000)
    g.add_argument("--ssb-index", type=int, default=0)
    g.add_argument("--scs", type=float, default=30e3)
    g.add_argument("--center-freq", type=float, default=2565e6)
    g.add_argument("--format", choices=["cf32le", "ci16le"], default="cf32le")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    im = sub.add_parser("impair", help="apply a scenario channel to a capture")
    im.add_argument("--scenario", required=True)
    im.add_argument("--in", dest="input", required=True)
    im.add_argument("--out", required=True)
    im.add_argument("--scs", type=float, default=30e3)
    im.add_argument("--seed", type=int, default=None)
    im.set_defaults(func=cmd_impair)

    r = sub.add_parser("receive", help="run the ranging receiver on a capture")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--out-dir", required=True)
    r.add_argument("--seed", type=int, default=0)
    _add_receiver_args(r)
    r.set_defaults(func=cmd_receive)

    a = sub.add_parser("analyze", help="emit closed-form ACF/S-curve/gain tables")
    a.add_argument("--out-dir", required=True)
    a.add_argument("--eps-max", type=float, default=3.0)
    a.add_argument("--points", type=int, default=601)
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("e2e", help="generate, impair and receive in one run")
    e.add_argument("--scenario", required=True)
    e.add_argument("--out-dir", required=True)
    e.add_argument("--save-capture", default=None)
    e.add_argument("--seed", type=int, default=None)
    _add_receiver_args(e)
    e.set_defaults(func=cmd_e2e)

    t = sub.add_parser("scenario-template", help="write a starter scenario JSON")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_scenario_template)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SsbNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (CaptureFormatError, MetadataError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
