"""
A tour of the perturbation encoders
===================================

One 4x4 channel, one QPSK data vector, every encoder in the package.
Each tree search returns the perturbation ``t`` it picked, the resulting
search metric (smaller means less transmit power) and how many tree nodes
it visited to get there.
"""

import numpy as np

import vperturb as vp

rng = np.random.default_rng(0)

# A Rayleigh channel for 4 single-antenna users, turned into its 8x8 real image.
ch = vp.draw_channel(4, rng)
h = ch.h_real

# Two QPSK bits per user, mapped to the real levels +-1.
c = vp.qpsk()
s = vp.map_bits(rng.integers(0, 2, 8), c)

# The MMSE search problem at 10 dB. QPSK gives tau = 4 and T = 9 candidates
# per level, i.e. t_i in [-4, 4].
snr_db = 10.0
sigma_n_sq = 2.0 / 10 ** (snr_db / 10)
prob = vp.build_problem(h, s, vp.tau(c), vp.PerturbSet.from_size(9), "mmse", sigma_n_sq, 8, c)

runs = {
    "THP": vp.encode_thp(prob),
    "FSE p=1": vp.encode_fse(prob, p=1),
    "FSE p=2": vp.encode_fse(prob, p=2),
    "QRDM-E (M=T)": vp.encode_qrdm(prob),
    "sphere (optimal)": vp.encode_sphere(prob),
}

print(f"{'encoder':18s} {'metric':>9s} {'nodes':>6s}  t")
for name, res in runs.items():
    print(f"{name:18s} {res.metric:9.3f} {res.counts.nodes_visited:6d}  {res.t}")

# The sphere encoder is exact, so no other encoder can beat its metric.
best = runs["sphere (optimal)"].metric
assert all(r.metric >= best for r in runs.values())

# FSE with both arithmetic shortcuts: the comparison before squaring and
# the table of precomputed products. The answer does not change, but the
# tree search now needs only K*T multiplications.
fast = vp.encode_fse(prob, p=1, compare_before_square=True, use_precompute=True)
assert np.array_equal(fast.t, runs["FSE p=1"].t)
print("\nFSE p=1 arithmetic, plain:     ", vp.count_arithmetic(runs["FSE p=1"]))
print("FSE p=1 arithmetic, shortcuts: ", vp.count_arithmetic(fast))
print("table build cost (per channel):", vp.count_arithmetic(fast, "precompute"))
