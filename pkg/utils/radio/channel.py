"""Block-fading Kronecker MIMO channels, uplink pilot observations and MMSE estimates.

Vectorization follows the column-major convention: ``vec(H)`` stacks the columns
of ``H``, so for ``H = R_UE^{1/2} Hbar R_BS^{H/2}`` the covariance of ``vec(H)`` is
``sigma^2 * kron(R_BS^T, R_UE)``.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import toeplitz

from utils.radio.topology import Drop

logger = logging.getLogger(__name__)

COHERENCE_TIME_FACTOR = 0.423
PSD_TOLERANCE = 1e-12

# rms delay spread [s] of the LTE extended channel models
CHANNEL_PROFILES = {
    "epa": 43e-9,
    "etu": 991e-9,
}


def matrix_sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    """Hermitian square root through eigendecomposition, tiny negative eigenvalues clamped."""
    eigvals, eigvecs = np.linalg.eigh(matrix)
    scale = max(float(np.max(np.abs(eigvals))), 1.0)
    if np.min(eigvals) < -PSD_TOLERANCE * scale:
        raise ValueError(f"Matrix is not positive semidefinite (min eigenvalue {np.min(eigvals):.3e})")
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.conj().T


def toeplitz_correlation(size: int, beta: float) -> np.ndarray:
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"Correlation coefficient beta must lie in [0, 1), got {beta}")
    return toeplitz(beta ** np.arange(size)).astype(complex)


@dataclass(frozen=True)
class CorrelationModel:
    r_bs: np.ndarray
    r_ue: np.ndarray
    beta: Optional[float] = None

    def __post_init__(self):
        for name, matrix in (("R_BS", self.r_bs), ("R_UE", self.r_ue)):
            size = matrix.shape[0]
            if matrix.shape != (size, size):
                raise ValueError(f"{name} must be square, got shape {matrix.shape}")
            if not np.allclose(matrix, matrix.conj().T, atol=1e-12):
                raise ValueError(f"{name} must be Hermitian")
            if not math.isclose(float(np.real(np.trace(matrix))), size, rel_tol=1e-9):
                raise ValueError(f"{name} must have trace {size}")
        # Raises on non-PSD input
        _ = self.sqrt_bs, self.sqrt_ue

    @classmethod
    def build(cls, ue_antennas: int, bs_antennas: int, beta: float = 0.0) -> "CorrelationModel":
        """Identity at the BS, Toeplitz ``[1, beta, ..., beta^(N-1)]`` at the UE."""
        return cls(
            r_bs=np.eye(bs_antennas, dtype=complex),
            r_ue=toeplitz_correlation(ue_antennas, beta),
            beta=beta,
        )

    @property
    def ue_antennas(self) -> int:
        return self.r_ue.shape[0]

    @property
    def bs_antennas(self) -> int:
        return self.r_bs.shape[0]

    @cached_property
    def sqrt_bs(self) -> np.ndarray:
        return matrix_sqrt_psd(self.r_bs)

    @cached_property
    def sqrt_ue(self) -> np.ndarray:
        return matrix_sqrt_psd(self.r_ue)

    @cached_property
    def vec_covariance(self) -> np.ndarray:
        """Unit-gain covariance of vec(H): kron(R_BS^T, R_UE)."""
        return np.kron(self.r_bs.T, self.r_ue)


def block_size(doppler: float, delay_spread: float) -> int:
    """Resource elements per block, N_E = floor(W_C * T_C)."""
    if doppler <= 0 or delay_spread <= 0:
        raise ValueError(f"Doppler ({doppler}) and delay spread ({delay_spread}) must be positive")
    coherence_bandwidth = 1.0 / delay_spread
    coherence_time = COHERENCE_TIME_FACTOR / doppler
    return int(math.floor(coherence_bandwidth * coherence_time))


@dataclass(frozen=True)
class CoherenceSpec:
    doppler: float
    delay_spread: float
    n_e: int
    n_t: int

    def __post_init__(self):
        if self.n_t < 0:
            raise ValueError(f"N_T must be non-negative, got {self.n_t}")
        if self.n_t >= self.n_e:
            raise ValueError(f"N_T ({self.n_t}) must be smaller than the block size N_E ({self.n_e})")

    @classmethod
    def from_profile(cls, profile: str, doppler: float, n_t: int = 0,
                     delay_spread: Optional[float] = None) -> "CoherenceSpec":
        if profile == "custom":
            if delay_spread is None:
                raise ValueError("The custom channel profile needs an explicit delay spread")
        else:
            delay_spread = CHANNEL_PROFILES[profile]
        return cls(doppler=doppler, delay_spread=delay_spread,
                   n_e=block_size(doppler, delay_spread), n_t=n_t)

    @property
    def overhead_factor(self) -> float:
        return 1.0 - self.n_t / self.n_e

    def check_orthogonal_pilots(self, ue_antennas: int, num_ues: int) -> None:
        if self.n_t < ue_antennas * num_ues:
            raise ValueError(
                f"N_T={self.n_t} below N*K={ue_antennas * num_ues}: pilots cannot be orthogonal"
            )


@dataclass(frozen=True)
class FadingBlock:
    """True channels ``h`` and estimates ``h_hat``, both shaped (K, J, N, M)."""
    t: int
    h: np.ndarray
    h_hat: np.ndarray
    estimation_noise_var: Optional[float] = None

    @property
    def perfect(self) -> bool:
        return self.estimation_noise_var is None


def draw_fading(drop: Drop, corr: CorrelationModel, rng_seed: int, t: int) -> FadingBlock:
    """Independent Kronecker-correlated Rayleigh draw for every (UE, BS) pair of block ``t``."""
    rng = np.random.default_rng([rng_seed, t])
    shape = (drop.num_ues, drop.num_bs, corr.ue_antennas, corr.bs_antennas)
    scale = np.sqrt(drop.large_scale_gain / 2.0)[:, :, None, None]
    h_bar = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    h = corr.sqrt_ue @ h_bar @ corr.sqrt_bs.conj().T
    return FadingBlock(t=t, h=h, h_hat=h)


def pilot_noise_variance(ue_antennas: int, n_t: int, noise_power: float, p_ue: float) -> float:
    if n_t <= 0:
        raise ValueError("Channel estimation needs N_T > 0 pilot resource elements")
    return ue_antennas * noise_power / (n_t * p_ue)


def observe_pilots(block: FadingBlock, spec: CoherenceSpec, p_ue: float, noise_power: float,
                   rng_seed: int) -> Tuple[np.ndarray, float]:
    """Noisy per-entry observations of every channel, plus the per-entry noise variance."""
    num_ues, _, ue_antennas, _ = block.h.shape
    spec.check_orthogonal_pilots(ue_antennas, num_ues)
    noise_var = pilot_noise_variance(ue_antennas, spec.n_t, noise_power, p_ue)

    rng = np.random.default_rng([rng_seed, block.t])
    shape = block.h.shape
    noise = math.sqrt(noise_var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return block.h + noise, noise_var


def vec(matrices: np.ndarray) -> np.ndarray:
    """Column-major vectorization over the last two axes."""
    matrices = np.asarray(matrices)
    return np.swapaxes(matrices, -1, -2).reshape(*matrices.shape[:-2], -1)


def unvec(vectors: np.ndarray, rows: int, cols: int) -> np.ndarray:
    vectors = np.asarray(vectors)
    return np.swapaxes(vectors.reshape(*vectors.shape[:-1], cols, rows), -1, -2)


def kronecker_covariance(gain: float, corr: CorrelationModel) -> np.ndarray:
    return gain * corr.vec_covariance


def mmse_estimate(obs: np.ndarray, covariance: np.ndarray, noise_var: float) -> np.ndarray:
    """vec(H_hat) = Sigma (Sigma + v I)^-1 vec(obs) for a single N x M observation."""
    if noise_var <= 0:
        raise ValueError(f"MMSE estimation needs a positive noise variance, got {noise_var}")
    rows, cols = obs.shape
    regularized = covariance + noise_var * np.eye(covariance.shape[0])
    estimate = covariance @ np.linalg.solve(regularized, vec(obs))
    return unvec(estimate, rows, cols)


def mmse_error_per_entry(covariance: np.ndarray, noise_var: float) -> float:
    """Bayesian MSE per entry: tr(Sigma - Sigma (Sigma + v I)^-1 Sigma) / (MN)."""
    regularized = covariance + noise_var * np.eye(covariance.shape[0])
    error = covariance - covariance @ np.linalg.solve(regularized, covariance)
    return float(np.real(np.trace(error))) / covariance.shape[0]


def estimate_block(block: FadingBlock, drop: Drop, corr: CorrelationModel, spec: CoherenceSpec,
                   p_ue: float, noise_power: float, rng_seed: int) -> FadingBlock:
    """Pilot observation followed by the MMSE estimate of all K x J channels.

    The shared Kronecker structure is diagonalized once, after which each
    (UE, BS) estimate is a per-eigenvalue Wiener gain.
    """
    observations, noise_var = observe_pilots(block, spec, p_ue, noise_power, rng_seed)
    eigvals, eigvecs = np.linalg.eigh(corr.vec_covariance)
    eigvals = np.clip(eigvals, 0.0, None)

    signal = drop.large_scale_gain[:, :, None] * eigvals[None, None, :]
    wiener = signal / (signal + noise_var)
    projected = vec(observations) @ eigvecs.conj()
    estimate = (wiener * projected) @ eigvecs.T

    num_ues, num_bs, ue_antennas, bs_antennas = block.h.shape
    h_hat = unvec(estimate, ue_antennas, bs_antennas)
    logger.debug(f"Block {block.t}: estimated {num_ues * num_bs} channels, noise variance {noise_var:.3e}")
    return FadingBlock(t=block.t, h=block.h, h_hat=h_hat, estimation_noise_var=noise_var)
