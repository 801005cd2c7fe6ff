"""Gap in cross-validated rho between 50 and 1000 epochs at label noise 0.5, per target SNR.

Prints one line per SNR with the mean gap, its standard error and the gap of
each block of five seeds.
"""

import argparse

import numpy as np

from posthoc_bench.harness import run_cv
from posthoc_bench.labeling import NoiseSpec, with_label_noise
from posthoc_bench.pipeline import prepare_recording
from posthoc_bench.source_space import mne_inverse_operator, synth_lead_field, synth_recording


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--snr-db", type=float, nargs="+", default=[10.0, 0.0, -10.0, -20.0])
    parser.add_argument("--n-seeds", type=int, default=20)
    parser.add_argument("--xi", type=float, default=0.5)
    args = parser.parse_args()

    for snr in args.snr_db:
        small, large = [], []
        for seed in range(args.n_seeds):
            lf = synth_lead_field(31, 50, seed)
            x, _ = synth_recording(lf, 1100, 120.0, (8.0, 12.0), 7, snr, seed)
            ds = prepare_recording(x, mne_inverse_operator(lf), (8.0, 12.0)).dataset(7)
            noise = NoiseSpec(args.xi, seed)
            small.append(run_cv(with_label_noise(ds.first_good(50), noise)).mean_rho)
            large.append(run_cv(with_label_noise(ds.first_good(1000), noise)).mean_rho)
        gap = np.array(large) - np.array(small)
        blocks = [gap[i:i + 5].mean() for i in range(0, gap.size - 4, 5)]
        print(
            f"snr {snr:+6.1f} dB  rho50 {np.mean(small):.3f}  rho1000 {np.mean(large):.3f}  "
            f"gap {gap.mean():.3f} +- {gap.std(ddof=1) / np.sqrt(gap.size):.3f}  "
            f"blocks {' '.join(f'{b:.3f}' for b in blocks)}"
        )


if __name__ == "__main__":
    main()
