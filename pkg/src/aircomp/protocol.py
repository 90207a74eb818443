"""One round of private over-the-air aggregation.

Clients hold message vectors W_k whose sum lies in [-a, a]^D with a < 1/2.
Each client masks its message (modulo masking with shared secret keys, or one
of three additive-noise baselines), precodes by sqrt(P)/h_k against its known
fading coefficient, and all transmit simultaneously; the server sees the
superposition sqrt(P) * sum_k e_k + z and inverts the masking to estimate the
sum.  The modulo scheme reduces the noisy sum back onto the torus; the
baselines read it off linearly and keep whatever mask residue survived.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .keys import SecretKeyBundle, default_generator, sample_keys
from .numerics import mod1

__all__ = [
    "NoiseScheme",
    "MessageModel",
    "ProtocolConfig",
    "ChannelRealization",
    "RoundResult",
    "draw_channel",
    "draw_messages",
    "encode_p2",
    "encode_baseline",
    "mask_matrix",
    "transmit_and_superpose",
    "decode_p2",
    "decode_baseline",
    "run_round",
    "run_round_with_channel",
]

SCHEME_KINDS = ("p2-modulo", "independent", "correlated", "zero-sum")
BASELINE_KINDS = SCHEME_KINDS[1:]


@dataclass(frozen=True)
class NoiseScheme:
    """Masking mechanism tag plus its noise scale.

    ``sigma`` is the per-client, per-dimension mask standard deviation for
    the three additive baselines and must be None for the modulo scheme.
    sigma = 0 is admitted so the baselines' noise-free limit can be probed.
    """

    kind: str
    sigma: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "p2-modulo":
            if self.sigma is not None:
                raise ValueError("p2-modulo takes no sigma")
        else:
            if self.sigma is None or not math.isfinite(self.sigma) or self.sigma < 0:
                raise ValueError(f"{self.kind} needs a finite sigma >= 0")

    @classmethod
    def p2_modulo(cls) -> "NoiseScheme":
        return cls("p2-modulo")

    @classmethod
    def independent(cls, sigma: float) -> "NoiseScheme":
        return cls("independent", sigma)

    @classmethod
    def correlated(cls, sigma: float) -> "NoiseScheme":
        return cls("correlated", sigma)

    @classmethod
    def zero_sum(cls, sigma: float) -> "NoiseScheme":
        return cls("zero-sum", sigma)


@dataclass(frozen=True)
class MessageModel:
    """How per-client messages are drawn.

    uniform-box: W_k ~ Unif([-a/K, a/K)^D), so the sum always stays inside
        the admissible box [-a, a]^D.
    gaussian:    W_k ~ N(0, var * I_D).  With ``truncate_sum`` set, each
        dimension is redrawn until |sum_k W_k[d]| <= a, conditioning the sum
        into the box; otherwise the sum may leave it and the modulo decoder
        wraps accordingly.
    fixed:       every entry of every client's message equals ``value``.
    """

    kind: str
    var: float | None = None
    value: float | None = None
    truncate_sum: bool = False

    def __post_init__(self) -> None:
        if self.kind not in ("uniform-box", "gaussian", "fixed"):
            raise ValueError(f"unknown message model {self.kind!r}")
        if self.kind == "gaussian" and (self.var is None or self.var <= 0):
            raise ValueError("gaussian messages need var > 0")
        if self.kind == "fixed" and self.value is None:
            raise ValueError("fixed messages need a value")

    @classmethod
    def uniform_box(cls) -> "MessageModel":
        return cls("uniform-box")

    @classmethod
    def gaussian(cls, var: float, truncate_sum: bool = False) -> "MessageModel":
        return cls("gaussian", var=var, truncate_sum=truncate_sum)

    @classmethod
    def fixed(cls, value: float) -> "MessageModel":
        return cls("fixed", value=value)


@dataclass(frozen=True)
class ProtocolConfig:
    """All scenario parameters for one aggregation round.

    Powers are per dimension: ``p_e`` bounds E[e_k[d]^2] and ``p_x`` bounds
    the realized per-dimension transmit power E[x_k[d]^2].  ``rician_kappa``
    is the linear (not dB) Rician factor; ``math.inf`` gives a pure
    line-of-sight channel with h_k = 1.
    """

    K: int
    D: int
    a: float
    p_x: float
    p_e: float
    n0: float
    rician_kappa: float
    message: MessageModel
    scheme: NoiseScheme
    seed: int = 0

    def __post_init__(self) -> None:
        if self.K < 2:
            raise ValueError("need at least 2 clients")
        if self.D < 1:
            raise ValueError("need at least 1 dimension")
        if not 0.0 < self.a < 0.5:
            raise ValueError("sum-range half-width a must lie in (0, 1/2)")
        if self.p_x <= 0 or self.p_e <= 0:
            raise ValueError("power budgets must be positive")
        if self.n0 < 0:
            raise ValueError("channel noise variance must be >= 0")
        if not self.rician_kappa > 0:
            raise ValueError("Rician factor must be positive")


@dataclass(frozen=True)
class ChannelRealization:
    """Uplink fading coefficients and the feasible common power scale.

    ``P <= min_k (p_x / p_e) h_k^2`` keeps every client inside its transmit
    budget; ``draw_channel`` uses the equality.  ``eavesdrop_h[k, k']`` holds
    client-to-client coefficients when requested (diagonal unused, zero).
    """

    h: np.ndarray
    P: float
    eavesdrop_h: np.ndarray | None = None

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=float)
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        if np.any(h == 0.0):
            raise ValueError("all fading coefficients must be nonzero")
        if not self.P > 0:
            raise ValueError("power scale P must be positive")


@dataclass(frozen=True)
class RoundResult:
    """Outcome of one simulated round, measured unwrapped against the truth."""

    w_true: np.ndarray
    w_hat: np.ndarray
    per_dim_sq_err: np.ndarray
    tx_powers: np.ndarray  # realized per-dimension power |x_k|^2 / D per client
    wrapped_count: int
    scheme_kind: str
    P: float
    sigma_eff: float
    seed: int | str


def _rician_draw(kappa: float, size, rng: np.random.Generator) -> np.ndarray:
    if math.isinf(kappa):
        return np.ones(size)
    los = math.sqrt(kappa / (kappa + 1.0))
    scatter = math.sqrt(1.0 / (kappa + 1.0))
    h = los + scatter * rng.standard_normal(size)
    # an exactly-zero draw is a measure-zero float pathology; redraw it
    while np.any(h == 0.0):
        zero = h == 0.0
        h[zero] = los + scatter * rng.standard_normal(int(np.sum(zero)))
    return h


def draw_channel(cfg: ProtocolConfig, rng=None, with_eavesdrop: bool = False) -> ChannelRealization:
    """Draw real Rician fading h_k and set P to its feasibility maximum.

    h_k = sqrt(kappa/(kappa+1)) + sqrt(1/(kappa+1)) * N(0, 1), and
    P = min_k (p_x / p_e) * h_k^2, the largest value meeting every client's
    expected-power budget.
    """
    rng = np.random.default_rng(rng)
    h = _rician_draw(cfg.rician_kappa, cfg.K, rng)
    P = (cfg.p_x / cfg.p_e) * float(np.min(h * h))
    eav = None
    if with_eavesdrop:
        eav = _rician_draw(cfg.rician_kappa, (cfg.K, cfg.K), rng)
        np.fill_diagonal(eav, 0.0)
    return ChannelRealization(h=h, P=P, eavesdrop_h=eav)


def draw_messages(cfg: ProtocolConfig, rng=None) -> np.ndarray:
    """Sample the (K, D) message matrix under the configured model."""
    rng = np.random.default_rng(rng)
    m = cfg.message
    if m.kind == "fixed":
        return np.full((cfg.K, cfg.D), float(m.value))
    if m.kind == "uniform-box":
        half = cfg.a / cfg.K
        return (rng.random((cfg.K, cfg.D)) - 0.5) * (2.0 * half)
    w = rng.normal(0.0, math.sqrt(m.var), (cfg.K, cfg.D))
    if m.truncate_sum:
        bad = np.abs(w.sum(axis=0)) > cfg.a
        while np.any(bad):
            w[:, bad] = rng.normal(0.0, math.sqrt(m.var), (cfg.K, int(np.sum(bad))))
            bad = np.abs(w.sum(axis=0)) > cfg.a
    return w


def encode_p2(w_k: np.ndarray, s_k: np.ndarray) -> np.ndarray:
    """Modulo masking: fold message plus key back onto the torus."""
    return mod1(np.asarray(w_k, dtype=float) + np.asarray(s_k, dtype=float))


def mask_matrix(scheme: NoiseScheme, K: int, D: int, rng=None) -> np.ndarray:
    """Draw the (K, D) additive masks for a baseline scheme.

    independent: sigma * Z with i.i.d. standard normal Z.
    correlated:  (sigma/sqrt(5)) (2 I - C) Z with C the one-step circular
                 shift of the identity; per-client variance is sigma^2.
    zero-sum:    (sigma/sqrt(2)) (Z_k - Z_{k+1 cyclic}); per-client variance
                 sigma^2 and the masks sum to the zero vector.
    """
    if scheme.kind not in BASELINE_KINDS:
        raise ValueError(f"mask_matrix needs a baseline scheme, got {scheme.kind!r}")
    rng = np.random.default_rng(rng)
    z = rng.standard_normal((K, D))
    sigma = float(scheme.sigma)
    if scheme.kind == "independent":
        return sigma * z
    if scheme.kind == "zero-sum":
        return (sigma / math.sqrt(2.0)) * (z - np.roll(z, -1, axis=0))
    shift = np.roll(np.eye(K), 1, axis=1)  # one-step right circular shift of I
    g = (sigma / math.sqrt(5.0)) * (2.0 * np.eye(K) - shift)
    return g @ z


def encode_baseline(w: np.ndarray, scheme: NoiseScheme, rng=None) -> np.ndarray:
    """Additive masking of the whole (K, D) message matrix."""
    w = np.asarray(w, dtype=float)
    return w + mask_matrix(scheme, w.shape[0], w.shape[1], rng)


def transmit_and_superpose(e: np.ndarray, ch: ChannelRealization, z) -> tuple[np.ndarray, np.ndarray]:
    """Channel-inversion precoding and in-air superposition.

    Each client sends x_k = (sqrt(P)/h_k) e_k, the channel applies h_k and
    adds ``z``, so y = sqrt(P) sum_k e_k + z.  Returns the received vector
    plus each client's realized per-dimension power |x_k|^2 / D.
    """
    e = np.asarray(e, dtype=float)
    if np.any(ch.h == 0.0):
        raise ValueError("fading coefficient is zero")
    x = (math.sqrt(ch.P) / ch.h)[:, None] * e
    y = (ch.h[:, None] * x).sum(axis=0) + z
    tx_powers = np.mean(x * x, axis=1)
    return y, tx_powers


def decode_p2(y: np.ndarray, P: float) -> np.ndarray:
    """Server estimate for the modulo scheme: fold y / sqrt(P) onto the torus."""
    if not P > 0:
        raise ValueError("P must be positive")
    return mod1(np.asarray(y, dtype=float) / math.sqrt(P))


def decode_baseline(y: np.ndarray, P: float) -> np.ndarray:
    """Linear server estimate y / sqrt(P); mask residue passes through."""
    if not P > 0:
        raise ValueError("P must be positive")
    return np.asarray(y, dtype=float) / math.sqrt(P)


def run_round_with_channel(cfg: ProtocolConfig, ch: ChannelRealization, rng=None,
                           seed_record: int | str = -1) -> RoundResult:
    """Run one round against an already-drawn channel realization."""
    rng = np.random.default_rng(rng)
    w = draw_messages(cfg, rng)
    w_true = w.sum(axis=0)

    if cfg.scheme.kind == "p2-modulo":
        bundle = sample_keys(default_generator(cfg.K), cfg.D, int(rng.integers(2**63)))
        e = encode_p2(w, bundle.keys)
    else:
        e = encode_baseline(w, cfg.scheme, rng)

    z = rng.normal(0.0, math.sqrt(cfg.n0), cfg.D) if cfg.n0 > 0 else np.zeros(cfg.D)
    y, tx_powers = transmit_and_superpose(e, ch, z)

    if cfg.scheme.kind == "p2-modulo":
        w_hat = decode_p2(y, ch.P)
        pre_wrap = w_true + z / math.sqrt(ch.P)
        wrapped = int(np.sum(np.floor(pre_wrap + 0.5) != 0.0))
    else:
        w_hat = decode_baseline(y, ch.P)
        wrapped = 0

    err = w_hat - w_true
    return RoundResult(
        w_true=w_true,
        w_hat=w_hat,
        per_dim_sq_err=err * err,
        tx_powers=tx_powers,
        wrapped_count=wrapped,
        scheme_kind=cfg.scheme.kind,
        P=ch.P,
        sigma_eff=math.sqrt(cfg.n0 / ch.P),
        seed=seed_record,
    )


def run_round(cfg: ProtocolConfig, seed=None) -> RoundResult:
    """Simulate a full round: channel draw, masking, transmission, decode.

    Deterministic given ``seed`` (defaults to ``cfg.seed``); the channel and
    the round body use separately spawned child streams.
    """
    seed = cfg.seed if seed is None else seed
    ss = np.random.SeedSequence(seed)
    ch_seq, round_seq = ss.spawn(2)
    ch = draw_channel(cfg, np.random.default_rng(ch_seq))
    record = int(seed) if isinstance(seed, (int, np.integer)) else str(seed)
    return run_round_with_channel(cfg, ch, np.random.default_rng(round_seq), seed_record=record)
