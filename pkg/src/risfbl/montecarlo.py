"""
Monte Carlo oracle
==================
Literal sampling of the composite channel: complex Gaussian draws for
the direct and per-element links, per-element phase control applied
exactly as the controller would (perfect conjugate alignment, uniformly
spread residuals, or snapping to the nearest quantizer level), then the
received SNR, its empirical statistics, and sample averages of the
instantaneous finite-blocklength metrics.

The stream is counter-based (Philox keyed by seed and stream id) and
the reductions use a fixed pairwise order, so every statistic here is
byte-reproducible for a given configuration.
"""

import math
from dataclasses import dataclass

import numpy as np

from .specfun import DomainError, gamma_cdf
from .channel import GammaFit, LinkGains, Perfect, PhaseModel, QuantizedBits, UniformSpread
from . import fbl


@dataclass(frozen=True)
class McConfig:
    """Sample budget and stream identity of one Monte Carlo run."""

    n_samples: int = 10_000
    seed: int = 20260824
    stream_id: int = 0
    chunk: int = 2_000

    def __post_init__(self):
        if self.n_samples < 2:
            raise DomainError("n_samples must be >= 2")
        if self.chunk < 1:
            raise DomainError("chunk must be >= 1")


@dataclass(frozen=True)
class SampleStats:
    """First two raw moments of a sample with their standard errors."""

    n: int
    m1: float
    m2: float
    m1_se: float
    m2_se: float


def _rng(cfg: McConfig):
    return np.random.Generator(np.random.Philox(key=[cfg.seed, cfg.stream_id]))


def _phase_errors(rng, theta_star, phase: PhaseModel):
    """Residual phase error actually applied on top of perfect alignment."""
    if isinstance(phase, Perfect):
        return np.zeros_like(theta_star)
    if isinstance(phase, UniformSpread):
        s = phase.spread
        return rng.uniform(-s * math.pi, s * math.pi, size=theta_star.shape)
    if isinstance(phase, QuantizedBits):
        # controller snaps the ideal shift to the nearest quantizer level
        step = phase.step
        snapped = np.round(theta_star / step) * step
        return snapped - theta_star
    raise DomainError(f"unknown phase model {phase!r}")


def sample_snr(gains: LinkGains, n_elements: int, phase: PhaseModel,
               rho: float, cfg: McConfig = McConfig()) -> np.ndarray:
    """Draw received-SNR realizations gamma = rho * X.

    Each realization draws the direct link and all element channels as
    circular complex Gaussians, computes the ideal conjugate phase for
    every element, perturbs it per the phase model, and sums coherently.
    """
    if n_elements < 0:
        raise DomainError("n_elements must be >= 0")
    if rho <= 0:
        raise DomainError("rho must be > 0")
    rng = _rng(cfg)
    out = np.empty(cfg.n_samples)
    done = 0
    while done < cfg.n_samples:
        m = min(cfg.chunk, cfg.n_samples - done)
        if gains.direct > 0:
            hd = math.sqrt(gains.direct / 2.0) * (
                rng.standard_normal((m,)) + 1j * rng.standard_normal((m,)))
        else:
            hd = np.zeros(m, dtype=complex)
        if n_elements > 0:
            a = math.sqrt(gains.ap_ris / 2.0) * (
                rng.standard_normal((m, n_elements))
                + 1j * rng.standard_normal((m, n_elements)))
            b = math.sqrt(gains.ris_ac / 2.0) * (
                rng.standard_normal((m, n_elements))
                + 1j * rng.standard_normal((m, n_elements)))
            cascade = a * b
            ref = np.where(np.abs(hd) > 0, np.angle(hd), 0.0)
            theta_star = ref[:, None] - np.angle(cascade)
            phi = _phase_errors(rng, theta_star, phase)
            total = hd + np.sum(cascade * np.exp(1j * (theta_star + phi)), axis=1)
        else:
            total = hd
        out[done:done + m] = np.abs(total) ** 2
        done += m
    return rho * out


def empirical_stats(samples: np.ndarray) -> SampleStats:
    """Raw moments m1 = mean(x), m2 = mean(x^2) with standard errors."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 2:
        raise DomainError("need at least 2 samples")
    m1 = float(np.sum(x)) / n
    x2 = x * x
    m2 = float(np.sum(x2)) / n
    v1 = float(np.sum((x - m1) ** 2)) / (n - 1)
    v2 = float(np.sum((x2 - m2) ** 2)) / (n - 1)
    return SampleStats(n=n, m1=m1, m2=m2,
                       m1_se=math.sqrt(v1 / n), m2_se=math.sqrt(v2 / n))


def ks_distance(samples: np.ndarray, fit: GammaFit) -> float:
    """One-sample Kolmogorov-Smirnov statistic against the Gamma fit."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 2:
        raise DomainError("need at least 2 samples")
    cdf = gamma_cdf(fit.shape, fit.rate, x)
    hi = np.arange(1, n + 1) / n - cdf
    lo = cdf - np.arange(0, n) / n
    return float(max(np.max(hi), np.max(lo)))


@dataclass(frozen=True)
class McAverages:
    """Sample means of the instantaneous FBL metrics."""

    n: int
    avg_rate: float
    avg_rate_se: float
    avg_bler: float
    avg_bler_se: float
    avg_blocklength: float
    avg_blocklength_se: float
    avg_capacity: float
    avg_sqrt_dispersion: float


def mc_avg_metrics(samples: np.ndarray, packet: fbl.PacketConfig) -> McAverages:
    """Average rate, BLER (exact Q, not the linearized surrogate) and
    blocklength over an SNR sample array."""
    g = np.asarray(samples, dtype=float)
    n = g.size
    if n < 2:
        raise DomainError("need at least 2 samples")
    rate = fbl.instantaneous_rate(g, packet.blocklength, packet.target_bler)
    bler = fbl.instantaneous_bler(g, packet.blocklength, packet.info_bits)
    rlen = fbl.instantaneous_blocklength(g, packet.info_bits, packet.target_bler)
    cap = fbl.capacity(g)
    sdisp = np.sqrt(fbl.dispersion(g))

    def mean_se(x):
        m = float(np.sum(x)) / n
        se = math.sqrt(float(np.sum((x - m) ** 2)) / (n - 1) / n)
        return m, se

    r_m, r_se = mean_se(rate)
    b_m, b_se = mean_se(bler)
    l_m, l_se = mean_se(rlen)
    return McAverages(n=n, avg_rate=r_m, avg_rate_se=r_se,
                      avg_bler=b_m, avg_bler_se=b_se,
                      avg_blocklength=l_m, avg_blocklength_se=l_se,
                      avg_capacity=float(np.sum(cap)) / n,
                      avg_sqrt_dispersion=float(np.sum(sdisp)) / n)
