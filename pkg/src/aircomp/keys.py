"""Construction, sampling, and verification of modulo-zero-sum secret keys.

K clients share K torus-valued key vectors built from J = K-1 uniform seed
vectors through an integer generator matrix.  The keys are marginally uniform
on [-1/2, 1/2)^D, any K-1 of them are jointly uniform, yet their sum reduces
to exactly zero under the zero-centered modulo, so they cancel in-air.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.stats import kstest

from .numerics import mod1

__all__ = [
    "GeneratorMatrix",
    "SecretKeyBundle",
    "BundleCheck",
    "BundleReport",
    "default_generator",
    "sample_keys",
    "verify_bundle",
    "bundle_to_json",
    "bundle_from_json",
]

# Above this many row subsets the rank condition is not enumerated.
_MAX_RANK_SUBSETS = 20_000


def _int_det(rows: list[list[int]]) -> int:
    """Exact determinant of a square integer matrix (fraction-free Bareiss)."""
    m = [list(map(int, r)) for r in rows]
    n = len(m)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


@dataclass(frozen=True)
class GeneratorMatrix:
    """Integer matrix of shape (K, J) mapping J seed vectors to K keys.

    Invariants enforced on construction:
      * columns sum to zero, so the generated keys cancel in the aggregate;
      * every JxJ submatrix picked from J distinct rows is nonsingular over
        the integers (enumerated exactly while the subset count is tractable).

    ``validate=False`` skips the invariant checks so audit tooling can carry
    a known-bad matrix through ``verify_bundle``, which reports the failures
    instead of raising.
    """

    entries: np.ndarray
    validate: bool = True

    def __post_init__(self) -> None:
        arr = np.asarray(self.entries)
        if arr.ndim != 2:
            raise ValueError("generator must be a 2-D matrix")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("generator entries must be integers")
        arr = arr.astype(np.int64, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        if self.K < 2:
            raise ValueError("need at least 2 clients")
        if not (1 <= self.J <= self.K):
            raise ValueError(f"seed count J={self.J} out of range for K={self.K}")
        if not self.validate:
            return
        if np.any(arr.sum(axis=0) != 0):
            raise ValueError("generator columns must sum to zero")
        ok, bad = self.rank_condition()
        if not ok:
            raise ValueError(f"rows {bad} form a singular {self.J}x{self.J} submatrix")

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def J(self) -> int:
        return self.entries.shape[1]

    def rank_condition(self) -> tuple[bool, tuple[int, ...] | None]:
        """Check every J-row submatrix for full rank; returns (ok, first bad subset).

        Skipped (treated as ok) when the number of subsets exceeds the
        enumeration cap; the default construction never comes close.
        """
        if math.comb(self.K, self.J) > _MAX_RANK_SUBSETS:
            return True, None
        for rows in combinations(range(self.K), self.J):
            if _int_det([list(self.entries[r]) for r in rows]) == 0:
                return False, rows
        return True, None


def default_generator(K: int) -> GeneratorMatrix:
    """The (K, K-1) generator: identity rows stacked on a row of -1s.

    Every (K-1)-row submatrix is unimodular (determinant +/-1), so all rank
    conditions hold, and the single all-rows combination is the only integer
    row combination summing to zero.
    """
    if K < 2:
        raise ValueError("need at least 2 clients")
    ident = np.eye(K - 1, dtype=np.int64)
    last = -np.ones((1, K - 1), dtype=np.int64)
    return GeneratorMatrix(np.vstack([ident, last]))


@dataclass(frozen=True)
class SecretKeyBundle:
    """K key vectors on the torus plus the generator and seed that made them."""

    keys: np.ndarray  # (K, D) floats in [-1/2, 1/2)
    generator: GeneratorMatrix
    seed: int | str

    def __post_init__(self) -> None:
        arr = np.asarray(self.keys, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "keys", arr)

    @property
    def K(self) -> int:
        return self.keys.shape[0]

    @property
    def D(self) -> int:
        return self.keys.shape[1]


def sample_keys(g: GeneratorMatrix, D: int, seed) -> SecretKeyBundle:
    """Draw seed vectors uniform on [-1/2, 1/2)^D and fold through ``g``.

    Uses a counter-based Philox stream keyed by ``seed``, so the bundle is
    bit-reproducible independent of how callers schedule their own work.
    """
    if D < 1:
        raise ValueError("D must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    seeds = rng.random((g.J, D)) - 0.5
    keys = mod1(g.entries @ seeds)
    record = int(seed) if isinstance(seed, (int, np.integer)) else str(seed)
    return SecretKeyBundle(keys=keys, generator=g, seed=record)


@dataclass(frozen=True)
class BundleCheck:
    name: str
    passed: bool
    detail: str
    residual: float = 0.0


@dataclass(frozen=True)
class BundleReport:
    checks: tuple[BundleCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> BundleCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def verify_bundle(b: SecretKeyBundle, zero_tol: float = 1e-12, ks_level: float = 1e-3) -> BundleReport:
    """Check the bundle invariants; failures are reported, never raised.

    Checks: per-dimension modulo-zero-sum residual, torus range, generator
    column sums and rank condition, and a Kolmogorov-Smirnov uniformity test
    per key at significance ``ks_level`` (weak for small D, exact in law).
    """
    checks = []

    residual = float(np.max(np.abs(mod1(b.keys.sum(axis=0))))) if b.D else 0.0
    checks.append(BundleCheck(
        "zero-sum", residual <= zero_tol,
        f"max |mod1(sum_k S_k)| = {residual:.3e}", residual))

    in_range = bool(np.all((b.keys >= -0.5) & (b.keys < 0.5)))
    checks.append(BundleCheck("torus-range", in_range, "all entries in [-1/2, 1/2)"))

    g = b.generator
    col_ok = bool(np.all(g.entries.sum(axis=0) == 0))
    checks.append(BundleCheck("generator-zero-columns", col_ok, "column sums are zero"))

    rank_ok, bad = g.rank_condition()
    checks.append(BundleCheck(
        "generator-rank", rank_ok,
        "all J-row submatrices nonsingular" if rank_ok else f"singular rows {bad}"))

    worst_p = 1.0
    for k in range(b.K):
        p = kstest(b.keys[k], "uniform", args=(-0.5, 1.0)).pvalue
        worst_p = min(worst_p, float(p))
    checks.append(BundleCheck(
        "uniformity-ks", worst_p >= ks_level,
        f"min KS p-value over keys = {worst_p:.3e} (level {ks_level:g})"))

    return BundleReport(tuple(checks))


def bundle_to_json(b: SecretKeyBundle) -> str:
    """Serialize for audit: generator as integer arrays, keys as decimals."""
    doc = {
        "K": b.K,
        "D": b.D,
        "seed": b.seed,
        "generator": b.generator.entries.tolist(),
        "keys": [[repr(float(v)) for v in row] for row in b.keys],
    }
    return json.dumps(doc, indent=2)


def bundle_from_json(text: str) -> SecretKeyBundle:
    doc = json.loads(text)
    gen = GeneratorMatrix(np.asarray(doc["generator"], dtype=np.int64))
    keys = np.array([[float(v) for v in row] for row in doc["keys"]], dtype=float)
    return SecretKeyBundle(keys=keys, generator=gen, seed=doc["seed"])
