"""Closed-form distortion of the modulo estimator and exact Gaussian leakage.

Distortion: the server's modulo estimate of a sum s under effective Gaussian
noise of scale sigma_eff has pointwise mean squared error

    delta(s) = sum_d sum_l  (sigma^2 + l^2) * (Phi(b/sigma) - Phi(a/sigma))
                          + (a - 2l) * sigma * psi(a/sigma)
                          - (b - 2l) * sigma * psi(b/sigma)

with a = l - s_d - 1/2 and b = l - s_d + 1/2, the integer index l running
over all wrap offsets.  The series is truncated at |l| <= L with a reported
Gaussian tail bound.  delta is even in each coordinate, strictly increasing
in |s_d|, and sandwiched between D*delta(0) and D*delta(a) for s in [-a,a]^D.

Leakage: for the additive baselines the per-dimension conditional mutual
information between the client messages and the transmitted signals, given
the sum, is a Gaussian log-determinant ratio.  Per-client precoding scales
are bijective and drop out.  The modulo scheme leaks exactly zero;
the discrete enumeration oracle validates that claim independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import std_cdf, std_pdf
from .protocol import BASELINE_KINDS, NoiseScheme

__all__ = [
    "DistortionReport",
    "LeakageReport",
    "truncation_order",
    "truncation_tail_bound",
    "delta_pointwise",
    "delta_bounds",
    "delta_derivative",
    "delta_derivative_sign",
    "mask_covariance",
    "sum_complement_basis",
    "leakage_gaussian",
    "leakage_p2",
    "distortion_report",
    "reports_to_csv_rows",
    "REPORT_CSV_COLUMNS",
]


def _check_sigma(sigma_eff: float) -> float:
    if not (math.isfinite(sigma_eff) and sigma_eff > 0):
        raise ValueError(f"sigma_eff must be finite and positive, got {sigma_eff!r}")
    return float(sigma_eff)


def truncation_order(s_max: float, sigma_eff: float) -> int:
    """Default wrap-series truncation L = ceil(1/2 + max|s| + 8 sigma)."""
    return max(1, math.ceil(0.5 + abs(s_max) + 8.0 * sigma_eff))


def truncation_tail_bound(s_max: float, sigma_eff: float, L: int) -> float:
    """Upper bound on the mass dropped beyond |l| <= L.

    The neglected terms total at most (sigma^2 + (L+1)^2) * 2 Q(t) with
    t = (L - max|s| - 1/2) / sigma, Q the standard normal tail.
    """
    t = (L - abs(s_max) - 0.5) / sigma_eff
    q = float(std_cdf(-t))
    return (sigma_eff**2 + (L + 1) ** 2) * 2.0 * q


def delta_pointwise(s, sigma_eff: float, L: int | None = None) -> float:
    """Truncated closed-form pointwise MSE of the modulo estimator at sum s.

    ``s`` is a scalar or a D-vector; the result is the total over dimensions
    (the per-dimension terms are independent and additive).
    """
    sigma = _check_sigma(sigma_eff)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if not np.all(np.isfinite(s_arr)):
        raise ValueError("signal point must be finite")
    s_max = float(np.max(np.abs(s_arr))) if s_arr.size else 0.0
    if L is None:
        L = truncation_order(s_max, sigma)
    if L < 1:
        raise ValueError("truncation order L must be >= 1")
    l = np.arange(-L, L + 1, dtype=float)[:, None]  # (2L+1, 1)
    a = l - s_arr[None, :] - 0.5
    b = l - s_arr[None, :] + 0.5
    phi_a = std_cdf(a / sigma)
    phi_b = std_cdf(b / sigma)
    psi_a = std_pdf(a / sigma)
    psi_b = std_pdf(b / sigma)
    terms = (sigma**2 + l**2) * (phi_b - phi_a) \
        + (a - 2.0 * l) * sigma * psi_a \
        - (b - 2.0 * l) * sigma * psi_b
    return float(np.sum(terms))


def delta_bounds(a: float, sigma_eff: float, D: int = 1) -> tuple[float, float]:
    """Distortion bounds (D * delta(0), D * delta(a)) for sums in [-a, a]^D."""
    if not 0.0 < a < 0.5:
        raise ValueError("half-width a must lie in (0, 1/2)")
    lower = D * delta_pointwise(0.0, sigma_eff)
    upper = D * delta_pointwise(a, sigma_eff)
    return lower, upper


def delta_derivative(s_d: float, sigma_eff: float, L: int | None = None) -> float:
    """d delta / d s_d for one coordinate: 2 s_d sum_l phi_sigma(l - s_d + 1/2)."""
    sigma = _check_sigma(sigma_eff)
    if L is None:
        L = truncation_order(abs(s_d), sigma)
    l = np.arange(-L, L + 1, dtype=float)
    dens = std_pdf((l - s_d + 0.5) / sigma) / sigma
    return float(2.0 * s_d * np.sum(dens))


def delta_derivative_sign(s_d: float, sigma_eff: float) -> int:
    """Sign of the per-dimension distortion slope; equals sign(s_d)."""
    val = delta_derivative(s_d, sigma_eff)
    if s_d == 0.0:
        return 0
    return 1 if val > 0 else -1


def mask_covariance(scheme: NoiseScheme, K: int) -> np.ndarray:
    """Across-client covariance of one mask dimension for a baseline scheme.

    All three have per-client variance sigma^2 (unit diagonal times sigma^2);
    the zero-sum covariance is singular along the all-ones direction by
    construction.
    """
    if scheme.kind not in BASELINE_KINDS:
        raise ValueError(f"mask_covariance needs a baseline scheme, got {scheme.kind!r}")
    sigma2 = float(scheme.sigma) ** 2
    eye = np.eye(K)
    shift = np.roll(eye, 1, axis=1)
    if scheme.kind == "independent":
        return sigma2 * eye
    if scheme.kind == "zero-sum":
        return (sigma2 / 2.0) * (2.0 * eye - shift - shift.T)
    return (sigma2 / 5.0) * (5.0 * eye - 2.0 * (shift + shift.T))


def sum_complement_basis(K: int) -> np.ndarray:
    """Orthonormal (K, K-1) basis of the subspace orthogonal to the all-ones
    vector (Helmert construction), used to restrict singular covariances."""
    b = np.zeros((K, K - 1))
    for j in range(1, K):
        b[:j, j - 1] = 1.0
        b[j, j - 1] = -float(j)
        b[:, j - 1] /= math.sqrt(j * (j + 1.0))
    return b


@dataclass(frozen=True)
class LeakageReport:
    """Per-dimension conditional mutual information about individual messages."""

    scheme: NoiseScheme
    leakage_nats_per_dim: float
    method: str  # "closed-form-gaussian" | "exact-zero" | "oracle"

    @property
    def leakage_bits_per_dim(self) -> float:
        return self.leakage_nats_per_dim / math.log(2.0)


def leakage_gaussian(scheme: NoiseScheme, K: int, sigma_w: float) -> LeakageReport:
    """Exact Gaussian leakage of a baseline scheme, in nats per dimension.

    Messages are i.i.d. N(0, sigma_w^2) per client, so conditioned on their
    sum the message covariance is sigma_w^2 (I - 11^T/K).  The leakage is
    (1/2) log det(Sigma_msg|sum + Sigma_mask) - (1/2) log det(Sigma_mask).
    For the zero-sum scheme both matrices are restricted to the orthogonal
    complement of the all-ones direction first (the dropped component is a
    deterministic function of the sum, so nothing is lost).
    """
    if scheme.kind not in BASELINE_KINDS:
        raise ValueError(f"leakage_gaussian needs a baseline scheme, got {scheme.kind!r}")
    if not (math.isfinite(sigma_w) and sigma_w > 0):
        raise ValueError("sigma_w must be finite and positive")
    if not float(scheme.sigma) > 0:
        raise ValueError("scheme sigma must be positive for a finite leakage")
    cond_msg = sigma_w**2 * (np.eye(K) - np.ones((K, K)) / K)
    cov_mask = mask_covariance(scheme, K)
    if scheme.kind == "zero-sum":
        basis = sum_complement_basis(K)
        cond_msg = basis.T @ cond_msg @ basis
        cov_mask = basis.T @ cov_mask @ basis
    sign_n, logdet_n = np.linalg.slogdet(cov_mask)
    if sign_n <= 0:
        raise np.linalg.LinAlgError(
            f"mask covariance for {scheme.kind} is singular on its evaluation "
            f"subspace (K={K}, sigma={scheme.sigma}); cannot take log det")
    sign_s, logdet_s = np.linalg.slogdet(cond_msg + cov_mask)
    value = max(0.0, 0.5 * (logdet_s - logdet_n))
    return LeakageReport(scheme=scheme, leakage_nats_per_dim=value,
                         method="closed-form-gaussian")


def leakage_p2() -> LeakageReport:
    """The modulo scheme's leakage: exactly zero beyond the aggregate."""
    return LeakageReport(scheme=NoiseScheme.p2_modulo(), leakage_nats_per_dim=0.0,
                         method="exact-zero")


@dataclass(frozen=True)
class DistortionReport:
    """Closed-form vs Monte-Carlo distortion at one signal point."""

    s: np.ndarray
    sigma_eff: float
    delta_closed: float
    delta_mc: float
    mc_stderr: float
    lower: float
    upper: float
    truncation_L: int
    tail_bound: float


def distortion_report(s, sigma_eff: float, a: float, trials: int = 1_000_000,
                      seed=None) -> DistortionReport:
    """Evaluate the closed form, its bounds, and an MC cross-check at s."""
    from .oracle import mc_mse  # local import; oracle pulls no analytics

    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    sigma = _check_sigma(sigma_eff)
    s_max = float(np.max(np.abs(s_arr)))
    L = truncation_order(s_max, sigma)
    closed = delta_pointwise(s_arr, sigma, L=L)
    mc_mean, mc_err = mc_mse(s_arr, sigma, trials, seed=seed)
    lower, upper = delta_bounds(a, sigma, D=s_arr.size)
    return DistortionReport(
        s=s_arr, sigma_eff=sigma, delta_closed=closed, delta_mc=mc_mean,
        mc_stderr=mc_err, lower=lower, upper=upper, truncation_L=L,
        tail_bound=truncation_tail_bound(s_max, sigma, L))


REPORT_CSV_COLUMNS = (
    "scheme", "sigma", "leakage_nats", "leakage_bits",
    "mse_closed", "mse_mc", "mc_stderr", "L", "tail_bound",
)


def reports_to_csv_rows(distortion: list[DistortionReport] | None = None,
                        leakage: list[LeakageReport] | None = None) -> list[dict]:
    """Flatten reports into the shared CSV row schema (blank where not applicable)."""
    rows: list[dict] = []
    for r in distortion or []:
        rows.append({
            "scheme": "p2-modulo", "sigma": "",
            "leakage_nats": 0.0, "leakage_bits": 0.0,
            "mse_closed": r.delta_closed, "mse_mc": r.delta_mc,
            "mc_stderr": r.mc_stderr, "L": r.truncation_L,
            "tail_bound": r.tail_bound,
        })
    for r in leakage or []:
        rows.append({
            "scheme": r.scheme.kind,
            "sigma": "" if r.scheme.sigma is None else r.scheme.sigma,
            "leakage_nats": r.leakage_nats_per_dim,
            "leakage_bits": r.leakage_bits_per_dim,
            "mse_closed": "", "mse_mc": "", "mc_stderr": "",
            "L": "", "tail_bound": "",
        })
    return rows
