"""Ground-truth engines: exact finite-group leakage enumeration and MC MSE.

The protocol is replayed on the integers mod q, where every probability is a
ratio of integer counts and conditional mutual information can be computed by
exhaustive enumeration.  Secret keys come from the same generator-matrix
construction as the continuous build, messages take rational distributions on
subsets of Z_q, and all accumulation is integer arithmetic, so a zero mutual
information comes out as an exact 0.0 rather than a small float.  The server
view conditions on the integer message sum; the client view additionally
hands the eavesdropper its own message and key, and observes the other
clients' masked signals noiselessly, which upper-bounds what any fading or
receiver noise would let it learn.

A Monte-Carlo estimator for the continuous modulo estimator's MSE rounds out
the module as the sampling cross-check for the closed-form distortion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .keys import default_generator
from .numerics import mod1

__all__ = [
    "EnumerationLimitError",
    "DiscreteScenario",
    "ExactMI",
    "exact_server_leakage",
    "exact_client_leakage",
    "exact_colluding_pair_leakage",
    "key_subset_counts",
    "scenario_result",
    "mc_mse",
]

KEY_MODELS = ("zero-sum", "independent-uniform", "independent-subset")


class EnumerationLimitError(RuntimeError):
    """The requested exact enumeration exceeds the outcome-count guard."""


@dataclass(frozen=True)
class ExactMI:
    """Exactly enumerated mutual information, in nats."""

    value_nats: float
    enumerated_outcomes: int


@dataclass(frozen=True)
class DiscreteScenario:
    """A finite-group replica of one aggregation round.

    ``message_support`` may be None (uniform on all of Z_q for every client),
    a flat list of residues (shared uniform subset), a list of
    ``(value, weight)`` pairs with integer weights (shared rational law), or
    a per-client list of either form.  A list in which every element is a
    2-int sequence always parses as the shared weighted law; spell per-client
    supports of size two in weighted form to disambiguate.
    ``key_model`` selects the mask law:

      zero-sum            keys from the generator matrix, summing to 0 mod q
      independent-uniform each key independently uniform on Z_q
      independent-subset  each key independently uniform on ``key_subset``

    ``condition_on_sum`` controls whether the client view conditions on the
    aggregate; None resolves to True for K >= 3 (the theorem's statement)
    and False for K = 2, where the sum plus the eavesdropper's own message
    already determines the victim's message and the residual quantity of
    interest is what the broadcast alone reveals.
    """

    q: int
    K: int
    view: str = "server"
    eavesdropper: int = 0
    message_support: object = None
    key_model: str = "zero-sum"
    key_subset: tuple[int, ...] = (0, 1)
    generator: object = None
    condition_on_sum: bool | None = None
    guard: int = 100_000_000

    def __post_init__(self) -> None:
        if self.q < 2:
            raise ValueError("group modulus q must be >= 2")
        if self.K < 2:
            raise ValueError("need at least 2 clients")
        if self.view not in ("server", "client"):
            raise ValueError(f"unknown view {self.view!r}")
        if not 0 <= self.eavesdropper < self.K:
            raise ValueError("eavesdropper index out of range")
        if self.key_model not in KEY_MODELS:
            raise ValueError(f"unknown key model {self.key_model!r}")


def _normalize_support(q: int, K: int, spec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-client (values, integer weights) arrays, validated against Z_q."""

    def one(entry) -> tuple[np.ndarray, np.ndarray]:
        entry = list(entry)
        if entry and isinstance(entry[0], (tuple, list)):
            vals = np.array([v for v, _ in entry], dtype=np.int64)
            wts = np.array([w for _, w in entry], dtype=np.int64)
        else:
            vals = np.array(entry, dtype=np.int64)
            wts = np.ones(len(entry), dtype=np.int64)
        if vals.size == 0:
            raise ValueError("empty message support")
        if np.any((vals < 0) | (vals >= q)):
            raise ValueError("message support values must lie in [0, q)")
        if len(np.unique(vals)) != vals.size:
            raise ValueError("message support values must be distinct")
        if np.any(wts <= 0):
            raise ValueError("message weights must be positive integers")
        return vals, wts

    if spec is None:
        full = np.arange(q, dtype=np.int64)
        return [(full, np.ones(q, dtype=np.int64))] * K
    spec = list(spec)
    # Disambiguate nesting: a 2-tuple of ints is one weighted value, so a
    # list of those is a shared law; any other list-of-lists is per-client.
    def is_weighted_pair(e) -> bool:
        return isinstance(e, (tuple, list)) and len(e) == 2 \
            and all(isinstance(x, (int, np.integer)) for x in e)

    if spec and isinstance(spec[0], (tuple, list)) and not is_weighted_pair(spec[0]):
        if len(spec) != K:
            raise ValueError(f"per-client support needs {K} entries")
        return [one(e) for e in spec]
    shared = one(spec)
    return [shared] * K


def _cartesian(values: list[np.ndarray], weights: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    grids = np.meshgrid(*values, indexing="ij")
    mat = np.stack([g.reshape(-1) for g in grids], axis=1)
    wgrids = np.meshgrid(*weights, indexing="ij")
    ww = wgrids[0].reshape(-1).copy()
    for g in wgrids[1:]:
        ww = ww * g.reshape(-1)
    return mat.astype(np.int64), ww.astype(np.int64)


def _message_enum(sc: DiscreteScenario) -> tuple[np.ndarray, np.ndarray]:
    supports = _normalize_support(sc.q, sc.K, sc.message_support)
    return _cartesian([v for v, _ in supports], [w for _, w in supports])


def _discrete_keys(sc: DiscreteScenario) -> tuple[np.ndarray, np.ndarray]:
    """Enumerate key tuples with integer weights; duplicates are merged."""
    q, K = sc.q, sc.K
    if sc.key_model == "zero-sum":
        gen = sc.generator
        if gen is None:
            gen = default_generator(K).entries
        gen = np.asarray(gen, dtype=np.int64)
        if gen.shape[0] != K:
            raise ValueError("generator row count must equal K")
        J = gen.shape[1]
        seeds, us = _cartesian([np.arange(q, dtype=np.int64)] * J,
                               [np.ones(q, dtype=np.int64)] * J)
        s_mat = np.mod(seeds @ gen.T, q)
    elif sc.key_model == "independent-uniform":
        s_mat, us = _cartesian([np.arange(q, dtype=np.int64)] * K,
                               [np.ones(q, dtype=np.int64)] * K)
    else:
        vals = np.array(sorted(set(int(v) % q for v in sc.key_subset)), dtype=np.int64)
        s_mat, us = _cartesian([vals] * K, [np.ones(vals.size, dtype=np.int64)] * K)
    uniq, inverse = np.unique(s_mat, axis=0, return_inverse=True)
    if uniq.shape[0] != s_mat.shape[0]:
        merged = np.zeros(uniq.shape[0], dtype=np.int64)
        np.add.at(merged, inverse, us)
        return uniq, merged
    return s_mat, us


def _guard(sc: DiscreteScenario, n_msgs: int, n_keys: int) -> int:
    outcomes = n_msgs * n_keys
    if outcomes > sc.guard:
        raise EnumerationLimitError(
            f"joint outcome count {outcomes} exceeds guard {sc.guard}")
    return outcomes


def exact_server_leakage(sc: DiscreteScenario) -> ExactMI:
    """I(messages; masked signals | message sum) at the server, exactly.

    Sums p * log(p_cell * p_sum / (p_msgs * p_signals_sum)) over the full
    joint; with integer weights the log argument is a ratio of integers, so
    cells where it equals one contribute exactly nothing and a perfectly
    private construction yields literal 0.0.
    """
    if sc.view != "server":
        raise ValueError("scenario view must be 'server'")
    q, K = sc.q, sc.K
    w_mat, ww = _message_enum(sc)
    s_mat, us = _discrete_keys(sc)
    outcomes = _guard(sc, w_mat.shape[0], s_mat.shape[0])

    sums = w_mat.sum(axis=1)
    uniq_sums, s_idx = np.unique(sums, return_inverse=True)
    n_sums = uniq_sums.size
    n_sum_w = np.zeros(n_sums, dtype=np.int64)
    np.add.at(n_sum_w, s_idx, ww)

    powers = (q ** np.arange(K)).astype(np.int64)
    joint_es = np.zeros((int(q**K), n_sums), dtype=np.int64)
    for i in range(s_mat.shape[0]):
        code = np.mod(w_mat + s_mat[i], q) @ powers
        np.add.at(joint_es, (code, s_idx), us[i] * ww)

    total = float(ww.sum()) * float(us.sum())
    parts: list[float] = []
    for i in range(s_mat.shape[0]):
        code = np.mod(w_mat + s_mat[i], q) @ powers
        lhs = us[i] * n_sum_w[s_idx]
        rhs = joint_es[code, s_idx]
        neq = lhs != rhs
        if np.any(neq):
            p = (ww[neq] * us[i]).astype(float) / total
            parts.append(float(np.dot(p, np.log(lhs[neq] / rhs[neq].astype(float)))))
    return ExactMI(max(0.0, math.fsum(parts)), outcomes)


def _conditional_mi(q: int, w_mat: np.ndarray, ww: np.ndarray,
                    s_mat: np.ndarray, us: np.ndarray,
                    hidden: list[int], cond_msg: list[int], cond_key: list[int],
                    condition_on_sum: bool) -> float:
    """I(hidden messages; their masked signals | conditioning) by enumeration.

    The conditioning is the tuple of messages at ``cond_msg``, keys at
    ``cond_key``, and optionally the total message sum.  Requires
    hidden + cond_msg to cover all clients (it always does for the client
    and collusion views), which makes each (hidden, observed, conditioning)
    triple hit by exactly one enumeration cell.
    """
    n_hidden = len(hidden)
    powers_h = (q ** np.arange(n_hidden)).astype(np.int64)

    sums = w_mat.sum(axis=1)
    uniq_sums, s_idx = np.unique(sums, return_inverse=True)
    n_sums = uniq_sums.size if condition_on_sum else 1
    if not condition_on_sum:
        s_idx = np.zeros(w_mat.shape[0], dtype=np.int64)

    m_code = w_mat[:, hidden] @ powers_h  # static per message tuple
    cm_code = np.zeros(w_mat.shape[0], dtype=np.int64)
    for j in cond_msg:
        cm_code = cm_code * q + w_mat[:, j]
    n_cm = int(q ** len(cond_msg))
    n_ck = int(q ** len(cond_key))
    n_cond = n_cm * n_ck * n_sums
    c_static = cm_code * (n_ck * n_sums) + s_idx  # add key_code * n_sums per batch

    n_codes = int(q**n_hidden)
    joint_mc = np.zeros((n_codes, n_cond), dtype=np.int64)
    joint_oc = np.zeros((n_codes, n_cond), dtype=np.int64)
    n_cond_w = np.zeros(n_cond, dtype=np.int64)

    def batch_codes(i: int) -> tuple[np.ndarray, np.ndarray]:
        o_code = np.mod(w_mat[:, hidden] + s_mat[i, hidden], q) @ powers_h
        ck = 0
        for j in cond_key:
            ck = ck * q + int(s_mat[i, j])
        return o_code, c_static + ck * n_sums

    for i in range(s_mat.shape[0]):
        o_code, c_code = batch_codes(i)
        wgt = us[i] * ww
        np.add.at(joint_mc, (m_code, c_code), wgt)
        np.add.at(joint_oc, (o_code, c_code), wgt)
        np.add.at(n_cond_w, c_code, wgt)

    total = float(ww.sum()) * float(us.sum())
    parts: list[float] = []
    for i in range(s_mat.shape[0]):
        o_code, c_code = batch_codes(i)
        n_moc = us[i] * ww
        lhs = n_moc * n_cond_w[c_code]
        rhs = joint_mc[m_code, c_code] * joint_oc[o_code, c_code]
        neq = lhs != rhs
        if np.any(neq):
            p = n_moc[neq].astype(float) / total
            parts.append(float(np.dot(p, np.log(lhs[neq] / rhs[neq].astype(float)))))
    return max(0.0, math.fsum(parts))


def exact_client_leakage(sc: DiscreteScenario) -> ExactMI:
    """Leakage to an honest-but-curious client that knows its own message and
    key and observes every other client's masked signal noiselessly.

    Zero (exactly) for K >= 3; strictly positive for K = 2, where the other
    client's key is determined by the eavesdropper's own.
    """
    if sc.view != "client":
        raise ValueError("scenario view must be 'client'")
    k = sc.eavesdropper
    w_mat, ww = _message_enum(sc)
    s_mat, us = _discrete_keys(sc)
    outcomes = _guard(sc, w_mat.shape[0], s_mat.shape[0])
    cond_sum = sc.condition_on_sum
    if cond_sum is None:
        cond_sum = sc.K >= 3
    hidden = [j for j in range(sc.K) if j != k]
    value = _conditional_mi(sc.q, w_mat, ww, s_mat, us,
                            hidden=hidden, cond_msg=[k], cond_key=[k],
                            condition_on_sum=cond_sum)
    return ExactMI(value, outcomes)


def exact_colluding_pair_leakage(sc: DiscreteScenario, pair: tuple[int, int]) -> ExactMI:
    """Exploratory: two clients pool their messages and keys and observe the
    rest.  Reported, not asserted zero; collusion is outside the guarantees."""
    a, b = pair
    if a == b or not (0 <= a < sc.K and 0 <= b < sc.K):
        raise ValueError("pair must be two distinct client indices")
    if sc.K < 4:
        raise ValueError("need at least 4 clients for a colluding pair view")
    w_mat, ww = _message_enum(sc)
    s_mat, us = _discrete_keys(sc)
    outcomes = _guard(sc, w_mat.shape[0], s_mat.shape[0])
    hidden = [j for j in range(sc.K) if j not in (a, b)]
    value = _conditional_mi(sc.q, w_mat, ww, s_mat, us,
                            hidden=hidden, cond_msg=[a, b], cond_key=[a, b],
                            condition_on_sum=True)
    return ExactMI(value, outcomes)


def key_subset_counts(q: int, K: int, subset: list[int],
                      key_model: str = "zero-sum", generator=None) -> np.ndarray:
    """Exact occurrence counts of each value tuple over a subset of keys.

    For the zero-sum construction, any K-1 keys are jointly uniform: every
    tuple in Z_q^{K-1} appears equally often.
    """
    sc = DiscreteScenario(q=q, K=K, key_model=key_model, generator=generator)
    s_mat, us = _discrete_keys(sc)
    subset = list(subset)
    powers = (q ** np.arange(len(subset))).astype(np.int64)
    codes = s_mat[:, subset] @ powers
    counts = np.zeros(int(q ** len(subset)), dtype=np.int64)
    np.add.at(counts, codes, us)
    return counts


def scenario_result(sc: DiscreteScenario) -> dict:
    """Run a scenario and shape the result for the JSON dump format."""
    if sc.view == "server":
        mi = exact_server_leakage(sc)
    else:
        mi = exact_client_leakage(sc)
    return {
        "q": sc.q,
        "K": sc.K,
        "view": sc.view,
        "key_model": sc.key_model,
        "mi_nats": mi.value_nats,
        "outcomes": mi.enumerated_outcomes,
    }


def mc_mse(s, sigma_eff: float, trials: int, seed=None,
           chunk_elements: int = 4_000_000) -> tuple[float, float]:
    """Monte-Carlo MSE of the modulo estimator at sum ``s``: simulate
    mod1(s + n) - s with n ~ N(0, sigma_eff^2 I) and average the squared
    error over trials (summed over dimensions).

    Returns (mean, stderr); the stderr is the usual sqrt(var/n), which for a
    sample mean coincides with the delete-one jackknife estimate.
    Deterministic given ``seed``.
    """
    if trials < 10_000:
        raise ValueError("need at least 1e4 trials for a usable stderr")
    if not (math.isfinite(sigma_eff) and sigma_eff > 0):
        raise ValueError("sigma_eff must be finite and positive")
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    dim = s_arr.size
    rng = np.random.default_rng(seed)
    chunk = max(1, chunk_elements // dim)
    done = 0
    acc = 0.0
    acc_sq = 0.0
    while done < trials:
        m = min(chunk, trials - done)
        noise = rng.normal(0.0, sigma_eff, (m, dim))
        err = mod1(s_arr + noise) - s_arr
        per_trial = np.einsum("ij,ij->i", err, err)
        acc += float(per_trial.sum())
        acc_sq += float(per_trial @ per_trial)
        done += m
    mean = acc / trials
    var = max(0.0, (acc_sq - trials * mean * mean) / (trials - 1))
    return mean, math.sqrt(var / trials)
