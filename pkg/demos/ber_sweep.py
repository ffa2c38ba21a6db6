"""
A small BER sweep
=================

The harness runs every (encoder, SNR) point with its own random stream, so
the same seed always gives the same CSV no matter how many threads are used.
The output is plot-ready: one row per point.

Run with ``python demos/ber_sweep.py [out.csv]``.
"""

import sys

from vperturb import EncoderSpec, SimConfig, emit_report, sweep

cfg = SimConfig(
    n_antennas=4,
    encoders=(
        EncoderSpec("lmmse"),
        EncoderSpec("thp", t_count=9),
        EncoderSpec("fse", t_count=3, p=2),
        EncoderSpec("qrdm", t_count=9),
    ),
    snr_db_list=(4.0, 8.0, 12.0),
    target_min_bit_errors=200,
    max_vectors=100_000,
    seed=1,
)

report = sweep(cfg, threads=0)

# A quick look at the table.
for row in report.rows:
    print(f"{row.encoder:16s} {row.snr_db:5.1f} dB  BER {row.ber:.2e}  nodes/vector {row.avg_nodes:7.1f}")

# The full record, including operation counts and retained metrics.
if len(sys.argv) > 1:
    emit_report(report, "csv", sys.argv[1])
    print("wrote", sys.argv[1])
