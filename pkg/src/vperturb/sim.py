"""Monte Carlo BER engine, sweeps and result files.

Signal model (real lattice form, ``K = 2N``)::

    x = P (s + tau t) / sqrt(gamma)          transmitter
    y = H x + n,   n ~ N(0, sigma_n^2 / 2)   per real dimension
    s_hat = slice(mod_tau(sqrt(gamma) y))    each user, independently

``sigma_n^2`` follows from the nominal SNR ``E(ss*) / sigma_n^2`` (i.e.
``gamma = 1``) and ``P_T`` defaults to ``K`` times the per-dimension symbol
energy, so an identity channel needs ``gamma = 1``. Vector-perturbation
encoders normalize ``gamma`` to the actual precoded power of each block of
``n_f`` vectors sharing a channel; linear precoders use the expected power.

Randomness: every (encoder, SNR) point owns a generator seeded with
``SeedSequence(seed, spawn_key=(encoder_index, snr_index))``, so a sweep's
output does not depend on how points are scheduled.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import batch
from .channel import draw_complex_gaussian, inject_csi_error, real_decompose
from .encoders import PerturbationProblem, encode_sphere
from .errors import ConfigInvalid, RankDeficient
from .modem import PerturbSet, demap, map_bits, modulo_reduce, qpsk, square_qam, tau

log = logging.getLogger(__name__)

__all__ = [
    "EncoderSpec",
    "SimConfig",
    "Row",
    "SimReport",
    "sigma_n_sq_for_snr",
    "run_point",
    "sweep",
    "retained_metric_stats",
    "emit_report",
    "report_to_csv",
    "crossing_snr",
    "log_ber_slope",
    "CSV_COLUMNS",
]

CSV_COLUMNS = [
    "encoder", "K", "T", "p", "M", "criterion", "snr_db", "zeta_db", "bits", "errors",
    "ber", "avg_nodes", "avg_mults", "avg_adds", "metric_mean", "metric_std", "seed",
]

KINDS = ("lzf", "lmmse", "thp", "fse", "qrdm", "sphere", "exhaustive")
LINEAR = ("lzf", "lmmse")


@dataclass(frozen=True)
class EncoderSpec:
    kind: str
    t_count: int = 9
    p: int | None = None
    m: int | None = None
    compare_before_square: bool = False
    use_precompute: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigInvalid(f"unknown encoder kind {self.kind!r}")
        if self.kind not in LINEAR and (self.t_count < 1 or self.t_count % 2 == 0):
            raise ConfigInvalid(f"T must be odd, got {self.t_count}")
        if self.kind == "fse" and (self.p is None or self.p < 1):
            raise ConfigInvalid("FSE needs p >= 1")
        if self.m is not None and self.m < 1:
            raise ConfigInvalid("M must be >= 1")

    @property
    def label(self) -> str:
        if self.kind in LINEAR:
            return self.kind.upper()
        if self.kind == "fse":
            return f"FSE-p{self.p}(T={self.t_count})"
        if self.kind == "qrdm":
            return f"QRDM-E(M={self.breadth},T={self.t_count})"
        return f"{self.kind.upper()}(T={self.t_count})"

    @property
    def breadth(self) -> int:
        return self.t_count if self.m is None else self.m

    @classmethod
    def from_dict(cls, d) -> "EncoderSpec":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigInvalid(f"bad encoder spec {d!r}: {exc}") from None


@dataclass(frozen=True)
class SimConfig:
    n_antennas: int = 4
    encoders: tuple[EncoderSpec, ...] = ()
    snr_db_list: tuple[float, ...] = (20.0,)
    target_min_bit_errors: int = 500
    max_vectors: int = 20_000_000
    seed: int = 0
    zeta_db: float | None = None
    n_f: int = 1
    criterion: str = "mmse"
    p_total: float | None = None
    constellation: str = "qpsk"
    batch_size: int = 4096

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ConfigInvalid("n_antennas must be >= 1")
        if not self.snr_db_list:
            raise ConfigInvalid("snr_db_list must be nonempty")
        if list(self.snr_db_list) != sorted(self.snr_db_list):
            raise ConfigInvalid("snr_db_list must be ascending")
        if self.max_vectors < 1 or self.batch_size < 1 or self.n_f < 1:
            raise ConfigInvalid("max_vectors, batch_size and n_f must be >= 1")
        if self.target_min_bit_errors < 0:
            raise ConfigInvalid("target_min_bit_errors must be >= 0")
        if self.criterion not in ("zf", "mmse"):
            raise ConfigInvalid(f"criterion must be zf or mmse, got {self.criterion!r}")
        if self.p_total is not None and self.p_total <= 0:
            raise ConfigInvalid("p_total must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigInvalid("seed must be a 64-bit unsigned integer")
        self.modem  # validates the constellation name

    @property
    def k(self) -> int:
        return 2 * self.n_antennas

    @property
    def modem(self):
        name = self.constellation.lower()
        if name == "qpsk":
            return qpsk()
        if name.endswith("qam"):
            try:
                return square_qam(int(name[:-3]))
            except ValueError as exc:
                raise ConfigInvalid(str(exc)) from None
        raise ConfigInvalid(f"unknown constellation {self.constellation!r}")

    @property
    def power(self) -> float:
        if self.p_total is not None:
            return float(self.p_total)
        return self.k * self.modem.mean_energy

    @classmethod
    def from_dict(cls, d) -> "SimConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        d["encoders"] = tuple(EncoderSpec.from_dict(e) for e in d.get("encoders", ()))
        d["snr_db_list"] = tuple(float(x) for x in d.get("snr_db_list", (20.0,)))
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["encoders"] = [asdict(e) for e in self.encoders]
        d["snr_db_list"] = list(self.snr_db_list)
        return d


@dataclass
class Row:
    encoder: str
    K: int
    T: int | None
    p: int | None
    M: int | None
    criterion: str
    snr_db: float
    zeta_db: float | None
    bits: int
    errors: int
    ber: float
    avg_nodes: float
    avg_mults: float
    avg_adds: float
    metric_mean: float | None
    metric_std: float | None
    seed: int
    wall_time_s: float = 0.0
    avg_gamma: float = math.nan
    redraws: int = 0


@dataclass
class SimReport:
    rows: list[Row] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def select(self, encoder: str) -> list[Row]:
        return [r for r in self.rows if r.encoder == encoder]


def sigma_n_sq_for_snr(snr_db: float, symbol_energy: float) -> float:
    """Complex noise variance for ``SNR = E(ss*) / sigma_n^2`` at ``gamma = 1``."""
    return symbol_energy / 10.0 ** (snr_db / 10.0)


def _point_rng(seed, enc_idx, snr_idx):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(enc_idx, snr_idx)))


class _Tally:
    def __init__(self):
        self.vectors = self.bits = self.errors = 0
        self.nodes = self.mults = self.adds = 0
        self.metric_sum = self.metric_sq = 0.0
        self.metric_n = 0
        self.gamma_sum = 0.0
        self.redraws = 0


def _encode_vp(spec, l, p, s, tau_, tally):
    """Return perturbation indices for a batch and update complexity tallies."""
    values = PerturbSet.from_size(spec.t_count).values
    b, k = s.shape
    if spec.kind in ("thp", "fse", "exhaustive"):
        full = {"thp": 0, "fse": spec.p, "exhaustive": k}[spec.kind]
        if full > k:
            raise ConfigInvalid(f"p = {full} exceeds K = {k}")
        ks, _, leaves = batch.tree_search(l, s, tau_, values, full, spec.compare_before_square)
        c = batch.fixed_search_counts(k, spec.t_count, full, spec.compare_before_square, spec.use_precompute)
    elif spec.kind == "qrdm":
        ks, _, leaves = batch.qrdm_search(l, s, tau_, values, spec.breadth)
        c = batch.qrdm_counts(k, spec.t_count, spec.breadth)
    else:
        ps = PerturbSet.from_size(spec.t_count)
        ks = np.empty((b, k), dtype=np.int64)
        leaves = np.empty((b, 1))
        for n in range(b):
            prob = PerturbationProblem(l[n], p[n], s[n], tau_, ps)
            res = encode_sphere(prob)
            ks[n] = res.t + ps.a
            leaves[n, 0] = res.metric
            tally.nodes += res.counts.nodes_visited
            tally.mults += res.counts.real_mults
            tally.adds += res.counts.real_adds
    if spec.kind != "sphere":
        tally.nodes += c.nodes_visited * b
        tally.mults += c.real_mults * b
        tally.adds += c.real_adds * b
    tally.metric_sum += float(leaves.sum())
    tally.metric_sq += float((leaves * leaves).sum())
    tally.metric_n += leaves.size
    return values[ks]


def _run_batch(cfg: SimConfig, spec: EncoderSpec, noise_var, design_var, nvec, rng, tally):
    c = cfg.modem
    n, k = cfg.n_antennas, cfg.k
    n_ch = -(-nvec // cfg.n_f)
    tau_ = tau(c)
    while True:
        h = real_decompose(draw_complex_gaussian((n_ch, n, n), rng))
        h_tx = h if cfg.zeta_db is None else inject_csi_error(h, cfg.zeta_db, rng)[0]
        try:
            if spec.kind in LINEAR:
                crit = "zf" if spec.kind == "lzf" else "mmse"
                pmat = batch.linear_precoders(h_tx, crit, design_var, cfg.power)
                lmat = None
            else:
                lmat, pmat = batch.build_problems(h_tx, cfg.criterion, design_var, cfg.power)
            break
        except (RankDeficient, np.linalg.LinAlgError):
            tally.redraws += n_ch
    idx = np.arange(nvec) // cfg.n_f
    bits = rng.integers(0, 2, size=(nvec, k * c.bits_per_real_dim), dtype=np.int8)
    s = map_bits(bits, c)
    if spec.kind in LINEAR:
        s_tx = s
        # expected power over the data, per channel
        gam_ch = np.sum(pmat * pmat, axis=(-2, -1)) * c.mean_energy / cfg.power
        gamma = gam_ch[idx]
    else:
        lv = lmat[idx] if cfg.n_f > 1 else lmat
        pv = pmat[idx] if cfg.n_f > 1 else pmat
        s_tx = s + tau_ * _encode_vp(spec, lv, pv, s, tau_, tally)
    xu = np.einsum("bij,bj->bi", pmat[idx], s_tx)
    if spec.kind not in LINEAR:
        pw = np.sum(xu * xu, axis=1)
        gam_ch = np.bincount(idx, weights=pw, minlength=n_ch) / np.bincount(idx, minlength=n_ch) / cfg.power
        gamma = gam_ch[idx]
    sg = np.sqrt(gamma)
    x = xu / sg[:, None]
    y = np.einsum("bij,bj->bi", h[idx], x)
    if noise_var > 0:
        y = y + rng.standard_normal(y.shape) * math.sqrt(noise_var / 2.0)
    r = sg[:, None] * y
    if spec.kind not in LINEAR:
        r = modulo_reduce(r, tau_)
    bits_hat = demap(r, c)
    tally.vectors += nvec
    tally.bits += bits.size
    tally.errors += int(np.count_nonzero(bits_hat != bits))
    tally.gamma_sum += float(gamma.sum())


def run_point(cfg: SimConfig, spec: EncoderSpec, snr_db: float, enc_idx: int = 0, snr_idx: int = 0,
              sigma_n_sq: float | None = None) -> Row:
    """Simulate one (encoder, SNR) point until enough bit errors or the vector cap.

    ``sigma_n_sq`` overrides the channel noise variance (``0`` gives a
    noiseless run); the MMSE precoders are still designed for ``snr_db``.
    """
    t0 = time.perf_counter()
    rng = _point_rng(cfg.seed, enc_idx, snr_idx)
    design_var = sigma_n_sq_for_snr(snr_db, 2.0 * cfg.modem.mean_energy)
    noise_var = design_var if sigma_n_sq is None else sigma_n_sq
    tally = _Tally()
    while tally.vectors < cfg.max_vectors and (
        tally.errors < cfg.target_min_bit_errors or tally.vectors == 0
    ):
        nvec = min(cfg.batch_size, cfg.max_vectors - tally.vectors)
        _run_batch(cfg, spec, noise_var, design_var, nvec, rng, tally)
    vec = max(tally.vectors, 1)
    # linear precoders have no search metric
    mean = std = None
    if tally.metric_n:
        mean = tally.metric_sum / tally.metric_n
        std = math.sqrt(max(tally.metric_sq / tally.metric_n - mean * mean, 0.0))
    row = Row(
        encoder=spec.label,
        K=cfg.k,
        T=None if spec.kind in LINEAR else spec.t_count,
        p=spec.p if spec.kind == "fse" else None,
        M=spec.breadth if spec.kind == "qrdm" else None,
        criterion=("zf" if spec.kind == "lzf" else "mmse") if spec.kind in LINEAR else cfg.criterion,
        snr_db=float(snr_db),
        zeta_db=cfg.zeta_db,
        bits=tally.bits,
        errors=tally.errors,
        ber=tally.errors / tally.bits if tally.bits else math.nan,
        avg_nodes=tally.nodes / vec,
        avg_mults=tally.mults / vec,
        avg_adds=tally.adds / vec,
        metric_mean=mean,
        metric_std=std,
        seed=cfg.seed,
        wall_time_s=time.perf_counter() - t0,
        avg_gamma=tally.gamma_sum / vec,
        redraws=tally.redraws,
    )
    log.info("%s snr=%g dB: %d/%d errors, ber=%.3e (%.1fs)", row.encoder, snr_db, row.errors,
             row.bits, row.ber, row.wall_time_s)
    return row


def sweep(cfg: SimConfig, threads: int = 1, order=None) -> SimReport:
    """Run every (encoder, SNR) point of ``cfg``.

    ``threads = 0`` picks the CPU count. ``order`` optionally permutes the
    execution order of the points; the report is the same either way.
    """
    points = [(e, i) for e in range(len(cfg.encoders)) for i in range(len(cfg.snr_db_list))]
    run_order = list(points) if order is None else [points[j] for j in order]
    if threads == 0:
        import os

        threads = os.cpu_count() or 1

    def work(pt):
        e, i = pt
        return pt, run_point(cfg, cfg.encoders[e], cfg.snr_db_list[i], e, i)

    if threads == 1:
        done = dict(work(pt) for pt in run_order)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = dict(pool.map(work, run_order))
    return SimReport([done[pt] for pt in points], cfg.to_dict())


def retained_metric_stats(cfg: SimConfig, spec: EncoderSpec, n_realizations: int, snr_db: float = 0.0,
                          chunk: int = 20000):
    """Mean and population std of all ``T^p`` retained leaf metrics of an FSE.

    Each realization draws a fresh channel and a uniform data vector; no
    noise is involved. ``snr_db`` only sets the MMSE regularization.
    """
    if spec.kind != "fse":
        raise ConfigInvalid("retained-metric statistics need an FSE encoder")
    rng = _point_rng(cfg.seed, 0, 0)
    c = cfg.modem
    design_var = sigma_n_sq_for_snr(snr_db, 2.0 * c.mean_energy)
    values = PerturbSet.from_size(spec.t_count).values
    total = total_sq = 0.0
    count = 0
    done = 0
    while done < n_realizations:
        b = min(chunk, n_realizations - done)
        h = real_decompose(draw_complex_gaussian((b, cfg.n_antennas, cfg.n_antennas), rng))
        s = map_bits(rng.integers(0, 2, size=(b, cfg.k * c.bits_per_real_dim)), c)
        lmat, _ = batch.build_problems(h, cfg.criterion, design_var, cfg.power)
        _, _, leaves = batch.tree_search(lmat, s, tau(c), values, spec.p, spec.compare_before_square)
        total += float(leaves.sum())
        total_sq += float((leaves * leaves).sum())
        count += leaves.size
        done += b
    mean = total / count
    return mean, math.sqrt(max(total_sq / count - mean * mean, 0.0))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def report_to_csv(report: SimReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def report_to_json(report: SimReport) -> str:
    rows = []
    for r in report.rows:
        d = asdict(r)
        rows.append({c: d[c] for c in CSV_COLUMNS} | {
            "wall_time_s": d["wall_time_s"], "avg_gamma": d["avg_gamma"], "redraws": d["redraws"]})
    return json.dumps({"config": report.config, "rows": rows}, indent=2, allow_nan=True)


def report_from_json(text: str) -> SimReport:
    d = json.loads(text)
    return SimReport([Row(**r) for r in d["rows"]], d["config"])


def emit_report(report: SimReport, fmt: str, path=None) -> str:
    """Serialize ``report`` as ``csv`` or ``json``; write to ``path`` if given.

    Reals use 17 significant digits in CSV so files round-trip exactly.
    """
    if fmt == "csv":
        text = report_to_csv(report)
    elif fmt == "json":
        text = report_to_json(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def crossing_snr(snr_db, ber, target: float = 1e-4) -> float:
    """SNR where the BER curve first drops through ``target``.

    Linear interpolation of ``log10(BER)`` between the bracketing points;
    ``nan`` if the curve never brackets the target.
    """
    snr_db = np.asarray(snr_db, dtype=float)
    ber = np.asarray(ber, dtype=float)
    lt = math.log10(target)
    for i in range(len(ber) - 1):
        a, b = ber[i], ber[i + 1]
        if a >= target > b:
            la = math.log10(a)
            lb = math.log10(b) if b > 0 else lt - 3.0
            return float(snr_db[i] + (la - lt) / (la - lb) * (snr_db[i + 1] - snr_db[i]))
    return math.nan


def log_ber_slope(snr_db, ber) -> float:
    """Least-squares slope of ``log10(BER)`` against SNR in dB."""
    snr_db = np.asarray(snr_db, dtype=float)
    ber = np.asarray(ber, dtype=float)
    ok = ber > 0
    return float(np.polyfit(snr_db[ok], np.log10(ber[ok]), 1)[0])
