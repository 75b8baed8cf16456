"""Nonlinear coupling matrix of the signal comb from dispersion parameters.

Signal comb lines are indexed m in [-M, M].  Two lines (m, n) convert into the
pump line q = m + n with weight sqrt(g0) * sinc(Phi_mn), where the accumulated
phase mismatch is the second-order dispersion expansion

    Phi_mn = beta1 (m + n) + beta2p (m + n)^2 - beta2s (m^2 + n^2),

with Phi_00 = 0 by the quasi-degenerate phase-matching condition.  The beta
coefficients are taken as primitive dimensionless inputs; they are never
re-derived from material data here.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DispersionParams:
    """Dimensionless dispersion inputs plus the coupling-rate scale g0."""

    beta1: float
    beta2s: float
    beta2p: float
    g0: float
    M: int

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("comb halfwidth M must be >= 0")
        if self.g0 <= 0:
            raise ValueError("coupling scale g0 must be positive")

    @property
    def indices(self) -> np.ndarray:
        """Signal comb indices -M .. M."""
        return np.arange(-self.M, self.M + 1)

    @property
    def pump_indices(self) -> np.ndarray:
        """Pump comb indices -2M .. 2M (all possible m + n)."""
        return np.arange(-2 * self.M, 2 * self.M + 1)

    def check_index(self, m: int) -> int:
        if abs(m) > self.M:
            raise IndexError(f"comb index {m} outside [-{self.M}, {self.M}]")
        return int(m)


def sinc(x):
    """sin(x)/x with a series branch near zero (not numpy's normalized sinc)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-4
    xs = x[small]
    out[small] = 1.0 - xs * xs / 6.0 + xs ** 4 / 120.0
    xb = x[~small]
    out[~small] = np.sin(xb) / xb
    return out if out.ndim else float(out)


def phase_mismatch(params: DispersionParams, m: int, n: int) -> float:
    """Phase mismatch Phi_mn of the three-wave process (m, n) -> m + n."""
    m = params.check_index(m)
    n = params.check_index(n)
    s = m + n
    return params.beta1 * s + params.beta2p * s * s - params.beta2s * (m * m + n * n)


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric coupling weights over (m, n) in [-M, M]^2."""

    matrix: np.ndarray  # shape (2M+1, 2M+1), real
    params: DispersionParams

    def value(self, m: int, n: int) -> float:
        M = self.params.M
        return float(self.matrix[self.params.check_index(m) + M,
                                 self.params.check_index(n) + M])

    @property
    def indices(self) -> np.ndarray:
        return self.params.indices


def coupling_matrix(params: DispersionParams) -> CouplingMatrix:
    """Build sqrt(g0) * sinc(Phi_mn) over the full comb, exactly symmetric."""
    m = params.indices.astype(float)
    mm, nn = np.meshgrid(m, m, indexing="ij")
    s = mm + nn
    phi = params.beta1 * s + params.beta2p * s * s - params.beta2s * (mm * mm + nn * nn)
    F = np.sqrt(params.g0) * sinc(phi)
    F = (F + F.T) / 2.0
    F.flags.writeable = False
    return CouplingMatrix(F, params)


def is_parity_symmetric(params: DispersionParams) -> bool:
    """Whether Phi (hence F) is invariant under (m, n) -> (-m, -n)."""
    return params.beta1 == 0.0
