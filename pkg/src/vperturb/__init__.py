"""Vector-perturbation precoding for the multi-user MIMO downlink.

A link-level toolkit built around the fixed-complexity sphere encoder (FSE):
tree-search precoders with exact operation counts, the linear and THP
baselines, closed-form complexity figures and a seeded Monte Carlo BER
harness.

>>> import numpy as np
>>> from vperturb import build_problem, encode_fse, qpsk, tau, PerturbSet
>>> h = np.eye(4)
>>> prob = build_problem(h, np.ones(4), tau(qpsk()), PerturbSet.from_size(3))
>>> encode_fse(prob, p=1).t
array([0, 0, 0, 0])
"""

from .batch import build_problems, qrdm_search, tree_search
from .channel import draw_channel, inject_csi_error, real_decompose
from .complexity import (
    arithmetic_totals,
    csi_error_bound,
    fse_nodes,
    neumann_first_order_check,
    qrdme_nodes,
    rho,
    se_worst_case_nodes,
    node_count_table,
)
from .encoders import (
    Criterion,
    EncoderResult,
    OpCounter,
    PerturbationProblem,
    build_precompute_table,
    build_problem,
    count_arithmetic,
    encode_exhaustive,
    encode_fse,
    encode_lmmse,
    encode_lzf,
    encode_qrdm,
    encode_sphere,
    encode_thp,
)
from .errors import *  # noqa: F401,F403
from .modem import Constellation, PerturbSet, demap, map_bits, modulo_reduce, qpsk, square_qam, tau
from .sim import EncoderSpec, SimConfig, SimReport, emit_report, retained_metric_stats, run_point, sweep

__version__ = "0.1.0"
