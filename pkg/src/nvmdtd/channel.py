"""Synthetic resistance read channel for a two-state non-volatile memory cell.

A stored bit selects a nominal resistance (``mu0`` for 0, ``mu1`` for 1).
Each read adds zero-mean i.i.d. resistance variation, and reads of the
high state additionally pick up a Gaussian offset that is unknown to the
detector.  All resistances are in kilo-ohms.

Reproducibility: every block of reads is generated from its own random
stream derived from ``(master seed, block index)`` via
:func:`block_stream`, so a dataset is identical whether blocks are
generated sequentially or split across workers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError

# Raw Beta(alpha, 1.2*alpha) facts used by the skewed-noise mode: the draw
# lives on [0, 1] with mean 1/2.2, and its variance never exceeds the
# alpha -> 0 supremum (1.2/4.84).
BETA_SHAPE_RATIO = 1.2
BETA_MEAN = 1.0 / 2.2
BETA_VARIANCE_SUP = 1.2 / 4.84

DATASET_MAGIC = "nvmdtd-v1"


class NoiseModel(Enum):
    GAUSSIAN = "gaussian"
    CENTERED_BETA = "centered-beta"


def derive_sigmas(mu0: float, mu1: float, ratio: float) -> tuple[float, float]:
    """Spread the two states by a common relative variation level.

    Returns ``(sigma0, sigma1) = (ratio * mu0, ratio * mu1)``, the
    fabrication convention that both states share one sigma/mu ratio.
    """
    if mu0 <= 0 or mu1 <= 0:
        raise ParameterError(f"nominal resistances must be positive, got ({mu0}, {mu1})")
    if ratio <= 0:
        raise ParameterError(f"variation ratio must be positive, got {ratio}")
    return ratio * mu0, ratio * mu1


def beta_alpha_for_sigma(sigma: float) -> float:
    """Solve the Beta(alpha, 1.2*alpha) shape so the raw draw has std ``sigma``.

    The variance identity sigma^2 = alpha*beta / ((alpha+beta)^2 (alpha+beta+1))
    with beta = 1.2*alpha collapses to a linear equation in alpha:

        alpha = ((1.2/4.84) / sigma^2 - 1) / 2.2

    which is positive only for sigma^2 < 1.2/4.84.
    """
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    var = sigma * sigma
    if var >= BETA_VARIANCE_SUP:
        raise ParameterError(
            f"sigma^2 = {var:.6g} is not reachable by a Beta(alpha, 1.2*alpha) law; "
            f"it must be below {BETA_VARIANCE_SUP:.6g}"
        )
    return (BETA_VARIANCE_SUP / var - 1.0) / 2.2


@dataclass(frozen=True)
class ChannelParams:
    """Full parameterization of the read channel.

    ``offset_mu_b`` / ``offset_sigma_b`` describe the Gaussian offset added
    to reads of state 1 only; state-0 reads never carry an offset.
    """

    mu0: float
    mu1: float
    sigma0: float
    sigma1: float
    offset_mu_b: float = 0.0
    offset_sigma_b: float = 0.0
    noise_model: NoiseModel = NoiseModel.GAUSSIAN

    def __post_init__(self):
        if not self.mu0 < self.mu1:
            raise ParameterError(f"expected mu0 < mu1, got mu0={self.mu0}, mu1={self.mu1}")
        if self.sigma0 <= 0 or self.sigma1 <= 0:
            raise ParameterError(
                f"sigmas must be positive, got ({self.sigma0}, {self.sigma1})"
            )
        if self.offset_sigma_b < 0:
            raise ParameterError(f"offset sigma must be >= 0, got {self.offset_sigma_b}")
        if self.noise_model is NoiseModel.CENTERED_BETA:
            # Fails fast when either state's sigma is outside the solvable range.
            beta_alpha_for_sigma(self.sigma0)
            beta_alpha_for_sigma(self.sigma1)

    @classmethod
    def from_ratio(
        cls,
        ratio: float,
        mu_b: float = 0.0,
        sigma_b_over_mu1: float = 0.0,
        noise_model: NoiseModel = NoiseModel.GAUSSIAN,
        mu0: float = 1.0,
        mu1: float = 2.0,
    ) -> "ChannelParams":
        """Build params from the relative variation level and offset settings."""
        sigma0, sigma1 = derive_sigmas(mu0, mu1, ratio)
        return cls(
            mu0=mu0,
            mu1=mu1,
            sigma0=sigma0,
            sigma1=sigma1,
            offset_mu_b=mu_b,
            offset_sigma_b=sigma_b_over_mu1 * mu1,
            noise_model=noise_model,
        )

    def sigma_for(self, state: int) -> float:
        return self.sigma0 if state == 0 else self.sigma1

    def content_hash(self) -> str:
        """Stable 16-hex-digit digest of the parameter values."""
        canon = "|".join(
            [
                f"{self.mu0:.17g}",
                f"{self.mu1:.17g}",
                f"{self.sigma0:.17g}",
                f"{self.sigma1:.17g}",
                f"{self.offset_mu_b:.17g}",
                f"{self.offset_sigma_b:.17g}",
                self.noise_model.value,
            ]
        )
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass
class Block:
    """One codeword-length channel use: stored bits and their readback resistances."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.uint8)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ParameterError(
                f"bits and reads must be 1-D and equal length, got {self.x.shape} vs {self.y.shape}"
            )
        if not np.all(np.isfinite(self.y)):
            raise ParameterError("reads contain non-finite values")

    def __len__(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class QuantizerSpec:
    """Uniform read quantizer: clamp to [lo, hi], snap to one of 2^bits cell midpoints."""

    bits: int
    lo: float = 0.5
    hi: float = 2.5

    def __post_init__(self):
        if self.bits < 1:
            raise ParameterError(f"quantizer needs at least 1 bit, got {self.bits}")
        if not self.lo < self.hi:
            raise ParameterError(f"quantizer range is empty: [{self.lo}, {self.hi}]")

    @property
    def levels(self) -> int:
        return 2 ** self.bits

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / self.levels


def quantize(y, spec: QuantizerSpec):
    """Map reads to reconstruction midpoints; values on a cell boundary go up.

    Output stays in kilo-ohms, so downstream detectors need not know
    whether their input was quantized.
    """
    arr = np.asarray(y, dtype=np.float64)
    clamped = np.clip(arr, spec.lo, spec.hi)
    idx = np.floor((clamped - spec.lo) / spec.step)
    idx = np.minimum(idx, spec.levels - 1)
    out = spec.lo + (idx + 0.5) * spec.step
    if np.isscalar(y):
        return float(out)
    return out


def sample_noise(params: ChannelParams, state: int, rng: np.random.Generator, size=None):
    """Draw resistance variation for one state.

    Gaussian mode draws N(0, sigma_state^2).  Centered-Beta mode draws the
    raw Beta(alpha, 1.2*alpha) law matched to sigma_state and subtracts its
    analytic mean 1/2.2, which leaves the variance untouched.
    """
    if state not in (0, 1):
        raise ParameterError(f"state must be 0 or 1, got {state}")
    sigma = params.sigma_for(state)
    if params.noise_model is NoiseModel.GAUSSIAN:
        return sigma * rng.standard_normal(size)
    alpha = beta_alpha_for_sigma(sigma)
    return rng.beta(alpha, BETA_SHAPE_RATIO * alpha, size) - BETA_MEAN


def _sample_raw(params: ChannelParams, n: int, rng: np.random.Generator):
    """Shared sampling core; draw order (bits, variation, offset) is fixed."""
    x = rng.integers(0, 2, size=n, dtype=np.uint8)
    one = x == 1
    if params.noise_model is NoiseModel.GAUSSIAN:
        z = rng.standard_normal(2 * n)
        noise = np.where(one, params.sigma1, params.sigma0) * z[:n]
        z_off = z[n:]
    else:
        a0 = beta_alpha_for_sigma(params.sigma0)
        a1 = beta_alpha_for_sigma(params.sigma1)
        v0 = rng.beta(a0, BETA_SHAPE_RATIO * a0, n)
        v1 = rng.beta(a1, BETA_SHAPE_RATIO * a1, n)
        noise = np.where(one, v1, v0) - BETA_MEAN
        z_off = rng.standard_normal(n)
    offset = params.offset_mu_b + params.offset_sigma_b * z_off
    y = np.where(one, params.mu1, params.mu0) + noise + np.where(one, offset, 0.0)
    return x, y


def sample_block(params: ChannelParams, n: int, rng: np.random.Generator) -> Block:
    """Sample one block of ``n`` uniform bits and their readback resistances.

    Draw order from ``rng`` is fixed (bits, then variation, then offset
    normals) so a given stream always yields the same block.
    """
    if n < 1:
        raise ParameterError(f"block length must be >= 1, got {n}")
    x, y = _sample_raw(params, n, rng)
    return Block(x=x, y=y)


def block_stream(seed: int, index: int) -> np.random.Generator:
    """Independent random stream for block ``index`` under ``seed``.

    Uses SeedSequence spawn keys, numpy's counter-style scheme for carving
    non-overlapping streams out of one master seed.
    """
    if seed < 0 or index < 0:
        raise ParameterError("seed and block index must be non-negative")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def derive_seed(seed: int, *lane: int) -> int:
    """Deterministic 64-bit sub-seed for a named lane under a master seed.

    Separate lanes (training data, validation data, evaluation data, ...)
    get unrelated streams without the caller having to manage offsets.
    """
    state = np.random.SeedSequence(seed, spawn_key=tuple(lane)).generate_state(2)
    return int(state[0]) | (int(state[1]) << 32)


def sample_block_matrix(
    params: ChannelParams, n: int, nblocks: int, seed: int, start: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Blocks ``start .. start+nblocks-1`` as matrices (bits, reads).

    Row ``i`` is exactly ``sample_block(params, n, block_stream(seed, start+i))``,
    so any contiguous slice of a dataset can be produced independently.
    """
    if n < 1:
        raise ParameterError(f"block length must be >= 1, got {n}")
    x = np.empty((nblocks, n), dtype=np.uint8)
    y = np.empty((nblocks, n), dtype=np.float64)
    for i in range(nblocks):
        x[i], y[i] = _sample_raw(params, n, block_stream(seed, start + i))
    return x, y


def save_dataset(path, blocks: list[Block], params: ChannelParams) -> None:
    """Write blocks in the one-line-of-bits / one-line-of-reads text format.

    Reads are kept to 9 significant digits; the format trades bit-exact
    round-tripping for a diffable file.
    """
    blocks = list(blocks)
    if not blocks:
        raise ParameterError("refusing to write an empty dataset")
    n = len(blocks[0])
    lines = [f"{DATASET_MAGIC} {n} {len(blocks)} {params.content_hash()}"]
    for blk in blocks:
        if len(blk) != n:
            raise ParameterError("all blocks in a dataset must share one length")
        lines.append("".join("1" if b else "0" for b in blk.x))
        lines.append(" ".join(f"{v:.9g}" for v in blk.y))
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path, params: ChannelParams | None = None) -> list[Block]:
    """Read a dataset file back; verifies the header and, if given, the params hash."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise FormatError(f"{path}: empty dataset file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != DATASET_MAGIC:
        raise FormatError(f"{path}: bad header {lines[0]!r}")
    n, nblocks = int(header[1]), int(header[2])
    if params is not None and header[3] != params.content_hash():
        raise FormatError(
            f"{path}: dataset was generated under different channel parameters"
        )
    if len(lines) != 1 + 2 * nblocks:
        raise FormatError(
            f"{path}: expected {1 + 2 * nblocks} lines for {nblocks} blocks, got {len(lines)}"
        )
    out = []
    for i in range(nblocks):
        bits_line = lines[1 + 2 * i]
        reads_line = lines[2 + 2 * i]
        if len(bits_line) != n or any(c not in "01" for c in bits_line):
            raise FormatError(f"{path}: malformed bits line for block {i}")
        x = np.frombuffer(bits_line.encode(), dtype=np.uint8) - ord("0")
        y = np.array([float(tok) for tok in reads_line.split()], dtype=np.float64)
        if y.size != n:
            raise FormatError(f"{path}: block {i} has {y.size} reads, expected {n}")
        out.append(Block(x=x.astype(np.uint8), y=y))
    return out
