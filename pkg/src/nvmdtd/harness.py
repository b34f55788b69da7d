"""Monte-Carlo BER estimation, figure-style sweeps, and recalibration sessions.

Every estimate here is built from per-block random streams keyed by
``(seed, block index)``, so results do not depend on chunking or on the
number of worker threads.  CSV outputs echo every parameter per row and
follow the fixed schema::

    ratio,mu_b,sigma_b_over_mu1,noise_model,detector,r_th,errors,bits,ber,ci

Rows for analytic (non-simulated) references carry ``bits = 0``; rows that
could not run (missing weight assets) carry NaN estimates and keep the
sweep going.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .channel import ChannelParams, NoiseModel, QuantizerSpec, derive_seed, sample_block_matrix
from .detectors import DtdResult, GenieDetector, NnDetector, ThresholdDetector, dtd_search, threshold_detect
from .errors import MissingAssetError, ParameterError
from .nn.training import TrainConfig, TrainResult, train

CSV_HEADER = ["ratio", "mu_b", "sigma_b_over_mu1", "noise_model", "detector",
              "r_th", "errors", "bits", "ber", "ci"]

# Reference detector names; the trailing three need trained weight assets.
ANALYTIC_DETECTORS = ("midpoint", "opt-no-offset", "opt-mean-offset", "opt-full", "optimum-bound")
ASSET_DETECTORS = ("mlp", "rnn", "dtd-mlp", "dtd-rnn")


@dataclass(frozen=True)
class BerEstimate:
    """Monte-Carlo bit error rate with a 3-sigma binomial half width."""

    errors: int
    bits: int
    ber: float
    ci_half_width: float

    @classmethod
    def from_counts(cls, errors: int, bits: int) -> "BerEstimate":
        p = errors / bits
        return cls(
            errors=errors,
            bits=bits,
            ber=p,
            ci_half_width=3.0 * math.sqrt(p * (1.0 - p) / bits),
        )


def estimate_ber(detector, params: ChannelParams, nblocks: int, seed: int,
                 n: int = 71, chunk_blocks: int = 2048, threads: int = 1) -> BerEstimate:
    """Stream blocks through a detector and count bit errors against the truth.

    ``detector`` is called as ``detector(y_chunk, x_chunk)`` on matrices of
    whole blocks and must return hard decisions of the same shape.
    """
    if nblocks < 1:
        raise ParameterError(f"need at least one block, got {nblocks}")
    starts = list(range(0, nblocks, chunk_blocks))

    def chunk_errors(start: int) -> int:
        count = min(chunk_blocks, nblocks - start)
        x, y = sample_block_matrix(params, n, count, seed, start=start)
        decided = detector(y, x)
        return int(np.count_nonzero(np.asarray(decided, dtype=np.uint8) != x))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            errors = sum(pool.map(chunk_errors, starts))
    else:
        errors = sum(chunk_errors(s) for s in starts)
    return BerEstimate.from_counts(errors, nblocks * n)


def dtd_calibrate(detector, params: ChannelParams, m_blocks: int, seed: int,
                  n: int = 71) -> DtdResult:
    """Derive an adjusted threshold from a detector's decisions on ``m_blocks`` blocks."""
    x, y = sample_block_matrix(params, n, m_blocks, seed)
    labels = detector(y, x)
    return dtd_search(y, labels)


@dataclass(frozen=True)
class SweepSpec:
    """Grid of channel operating points times a list of detectors."""

    ratios: tuple[float, ...]
    detectors: tuple[str, ...]
    blocks_per_point: int
    seed: int
    mu_b_values: tuple[float, ...] = (0.0,)
    sigma_b_over_mu1: float = 0.0
    noise_model: NoiseModel = NoiseModel.GAUSSIAN
    n: int = 71
    calib_blocks: int = 100
    quantizer: QuantizerSpec | None = None

    def __post_init__(self):
        if not self.ratios or not self.mu_b_values or not self.detectors:
            raise ParameterError("sweep grids and detector list must be non-empty")
        if self.blocks_per_point < 1 or self.calib_blocks < 1:
            raise ParameterError("block counts must be >= 1")


def _reference_thresholds(params: ChannelParams, point_seed: int, nblocks: int, n: int):
    """The three reference thresholds for one operating point.

    ``no_offset`` ignores the offset entirely, ``mean_offset`` knows only
    its mean, ``full`` uses the complete channel law (numerically for
    Gaussian channels, by empirical search otherwise).
    """
    gaussian = params.noise_model is NoiseModel.GAUSSIAN
    if gaussian:
        no_offset = analytic.optimal_threshold_closed_form(params, b=0.0)
        mean_offset = analytic.optimal_threshold_closed_form(params, b=params.offset_mu_b)
        full = analytic.optimal_threshold_bisection(params)
    else:
        gauss_view = ChannelParams(
            mu0=params.mu0, mu1=params.mu1, sigma0=params.sigma0, sigma1=params.sigma1,
            offset_mu_b=params.offset_mu_b, offset_sigma_b=params.offset_sigma_b,
        )
        no_offset = analytic.optimal_threshold_closed_form(gauss_view, b=0.0)
        mean_offset = analytic.optimal_threshold_closed_form(gauss_view, b=params.offset_mu_b)
        full = analytic.optimal_threshold_empirical(
            params, nblocks, derive_seed(point_seed, 2), n=n
        )
    return {"opt-no-offset": no_offset, "opt-mean-offset": mean_offset, "opt-full": full}


def run_sweep(spec: SweepSpec, assets: dict | None = None, csv_path=None,
              threads: int = 1) -> list[dict]:
    """One row per (operating point, detector); optionally written as CSV.

    ``assets`` maps "mlp"/"rnn" to trained models for the NN and DTD rows.
    Missing assets produce NaN rows instead of aborting the sweep.
    """
    assets = assets or {}
    rows = []
    point_idx = 0
    for ratio in spec.ratios:
        for mu_b in spec.mu_b_values:
            params = ChannelParams.from_ratio(
                ratio, mu_b=mu_b, sigma_b_over_mu1=spec.sigma_b_over_mu1,
                noise_model=spec.noise_model,
            )
            point_seed = derive_seed(spec.seed, point_idx)
            eval_seed = derive_seed(point_seed, 0)
            calib_seed = derive_seed(point_seed, 1)
            refs = _reference_thresholds(params, point_seed, spec.blocks_per_point, spec.n)
            base = {
                "ratio": ratio,
                "mu_b": mu_b,
                "sigma_b_over_mu1": spec.sigma_b_over_mu1,
                "noise_model": spec.noise_model.value,
            }
            for name in spec.detectors:
                rows.append(
                    base | _detector_row(
                        name, params, refs, assets, spec, eval_seed, calib_seed, threads
                    )
                )
            point_idx += 1
    if csv_path is not None:
        write_sweep_csv(csv_path, rows)
    return rows


def _detector_row(name: str, params: ChannelParams, refs: dict, assets: dict,
                  spec: SweepSpec, eval_seed: int, calib_seed: int,
                  threads: int = 1) -> dict:
    r_th = math.nan
    try:
        if name == "midpoint":
            r_th = 0.5 * (params.mu0 + params.mu1)
            det = ThresholdDetector(r_th)
        elif name in refs:
            r_th = refs[name].r_th
            det = ThresholdDetector(r_th)
        elif name == "optimum-bound":
            full = refs["opt-full"]
            return {"detector": name, "r_th": full.r_th, "errors": 0, "bits": 0,
                    "ber": full.ber, "ci": 0.0}
        elif name == "genie":
            det = GenieDetector()
        elif name in ("mlp", "rnn"):
            det = NnDetector(_require_asset(assets, name), spec.quantizer)
        elif name in ("dtd-mlp", "dtd-rnn"):
            kind = name.split("-", 1)[1]
            nn_det = NnDetector(_require_asset(assets, kind), spec.quantizer)
            calib = dtd_calibrate(nn_det, params, spec.calib_blocks, calib_seed, n=spec.n)
            r_th = calib.r_adj
            det = ThresholdDetector(r_th)
        else:
            raise ParameterError(f"unknown detector {name!r}")
    except MissingAssetError:
        return {"detector": name, "r_th": math.nan, "errors": 0, "bits": 0,
                "ber": math.nan, "ci": math.nan}
    est = estimate_ber(det, params, spec.blocks_per_point, eval_seed, n=spec.n,
                       threads=threads)
    return {"detector": name, "r_th": r_th, "errors": est.errors, "bits": est.bits,
            "ber": est.ber, "ci": est.ci_half_width}


def _require_asset(assets: dict, kind: str):
    if kind not in assets or assets[kind] is None:
        raise MissingAssetError(f"no trained {kind} weights available")
    return assets[kind]


def write_sweep_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_HEADER)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def training_curve(kind: str, params: ChannelParams, config: TrainConfig,
                   csv_path=None, n: int = 71, hidden: int = 71) -> TrainResult:
    """Train a detector and optionally persist its per-epoch validation curve."""
    result = train(kind, params, config, n=n, hidden=hidden)
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "val_ber"])
            for epoch, ber in result.curve:
                writer.writerow([epoch, ber])
    return result


@dataclass(frozen=True)
class TriggerPolicy:
    """When to invoke the network for a threshold recalibration.

    ``periodic``: after every ``period`` threshold-detected blocks since the
    last recalibration.  ``on_failure``: when a block's error fraction
    reaches ``threshold``, a stand-in for an ECC decoder failure (the
    default 2/71 corresponds to a single-error-correcting code giving up).
    """

    kind: str
    period: int = 0
    threshold: float = 2.0 / 71.0

    def __post_init__(self):
        if self.kind not in ("periodic", "on_failure"):
            raise ParameterError(f"unknown trigger kind {self.kind!r}")
        if self.kind == "periodic" and self.period < 1:
            raise ParameterError("periodic trigger needs period >= 1")
        if self.kind == "on_failure" and not (0.0 < self.threshold <= 1.0):
            raise ParameterError("failure threshold must be in (0, 1]")


@dataclass(frozen=True)
class DriftSchedule:
    """Piecewise-stationary channel: segments of (start block, params)."""

    segments: tuple[tuple[int, ChannelParams], ...]
    total_blocks: int
    trigger: TriggerPolicy

    def __post_init__(self):
        if not self.segments:
            raise ParameterError("schedule needs at least one segment")
        starts = [s for s, _ in self.segments]
        if starts[0] != 0 or any(b <= a for a, b in zip(starts, starts[1:])):
            raise ParameterError("segment starts must begin at 0 and strictly increase")
        if self.total_blocks <= starts[-1]:
            raise ParameterError("total_blocks must exceed the last segment start")

    def params_at(self, block_index: int) -> tuple[int, ChannelParams]:
        current = 0
        for seg_idx, (start, _) in enumerate(self.segments):
            if block_index >= start:
                current = seg_idx
        return current, self.segments[current][1]


@dataclass
class SegmentStats:
    """Threshold-detector error accounting for one schedule segment.

    ``pre`` covers blocks seen before the first recalibration completed
    inside this segment, ``post`` the blocks after it.  Calibration blocks
    themselves (the ones the network reads) are excluded from both.
    """

    index: int
    start_block: int
    errors_pre: int = 0
    bits_pre: int = 0
    errors_post: int = 0
    bits_post: int = 0
    triggers: int = 0
    nn_blocks: int = 0

    @property
    def ber_pre(self) -> float:
        return self.errors_pre / self.bits_pre if self.bits_pre else math.nan

    @property
    def ber_post(self) -> float:
        return self.errors_post / self.bits_post if self.bits_post else math.nan


@dataclass
class SessionLog:
    segments: list[SegmentStats]
    thresholds: list[tuple[int, float]] = field(default_factory=list)
    final_threshold: float = math.nan

    @property
    def nn_blocks_total(self) -> int:
        return sum(s.nn_blocks for s in self.segments)

    @property
    def triggers_total(self) -> int:
        return sum(s.triggers for s in self.segments)


def simulate_recalibration_session(
    schedule: DriftSchedule,
    detector,
    seed: int,
    m_blocks: int = 100,
    initial_threshold: float | None = None,
    n: int = 71,
) -> SessionLog:
    """Replay the deployment loop: cheap threshold detection, NN only on triggers.

    Blocks stream one at a time under the scheduled channel; each is
    detected with the current threshold.  When the trigger policy fires,
    the next ``m_blocks`` blocks are read by ``detector`` (the expensive
    path), the dynamic threshold search runs over those reads and labels,
    and the resulting threshold replaces the current one.  The log records
    per-segment BER before/after recalibration and how many blocks ever
    touched the network.
    """
    first_params = schedule.segments[0][1]
    r_th = (
        0.5 * (first_params.mu0 + first_params.mu1)
        if initial_threshold is None
        else initial_threshold
    )
    stats = [SegmentStats(index=i, start_block=s) for i, (s, _) in enumerate(schedule.segments)]
    log = SessionLog(segments=stats, thresholds=[(0, r_th)])
    recalibrated_in = [False] * len(stats)
    since_recal = 0

    i = 0
    while i < schedule.total_blocks:
        seg_idx, params = schedule.params_at(i)
        seg = stats[seg_idx]
        x, y = sample_block_matrix(params, n, 1, seed, start=i)
        i += 1
        since_recal += 1
        decided = threshold_detect(y[0], r_th)
        block_errors = int(np.count_nonzero(decided != x[0]))
        if recalibrated_in[seg_idx]:
            seg.errors_post += block_errors
            seg.bits_post += n
        else:
            seg.errors_pre += block_errors
            seg.bits_pre += n

        fire = (
            since_recal >= schedule.trigger.period
            if schedule.trigger.kind == "periodic"
            else block_errors / n >= schedule.trigger.threshold
        )
        if not fire:
            continue
        take = min(m_blocks, schedule.total_blocks - i)
        if take == 0:
            break
        seg.triggers += 1
        reads = []
        labels = []
        for j in range(take):
            seg_j, params_j = schedule.params_at(i)
            xj, yj = sample_block_matrix(params_j, n, 1, seed, start=i)
            i += 1
            stats[seg_j].nn_blocks += 1
            reads.append(yj[0])
            labels.append(np.asarray(detector(yj, xj)[0], dtype=np.uint8))
        result = dtd_search(np.array(reads), np.array(labels))
        r_th = result.r_adj
        recal_seg, _ = schedule.params_at(i - 1)
        recalibrated_in[recal_seg] = True
        log.thresholds.append((i, r_th))
        since_recal = 0

    log.final_threshold = r_th
    return log
