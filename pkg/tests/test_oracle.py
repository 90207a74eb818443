import math

import numpy as np
import pytest

from aircomp.oracle import (
    DiscreteScenario,
    EnumerationLimitError,
    ExactMI,
    exact_client_leakage,
    exact_colluding_pair_leakage,
    exact_server_leakage,
    key_subset_counts,
    mc_mse,
    scenario_result,
)

# exact enumeration at q=3, K=2 with uniform messages: the eavesdropper knows
# the victim's key, so the masked signal is a bijection of the message and
# the leakage is the full message entropy ln 3 (pinned regression constant)
K2_CLIENT_LEAKAGE_NATS = 1.0986122886681096


class TestServerView:
    @pytest.mark.parametrize("q,K", [(2, 2), (3, 2), (3, 3), (5, 3), (4, 4), (5, 4)])
    def test_zero_sum_keys_leak_exactly_nothing(self, q, K):
        mi = exact_server_leakage(DiscreteScenario(q=q, K=K))
        assert mi.value_nats == 0.0
        assert mi.enumerated_outcomes == (q**K) * (q ** (K - 1))

    def test_binary_message_support(self):
        mi = exact_server_leakage(DiscreteScenario(q=5, K=3, message_support=[0, 1]))
        assert mi.value_nats == 0.0

    def test_weighted_rational_message_law(self):
        # q=2, K=2 with a biased law: still perfectly private at the server
        mi = exact_server_leakage(
            DiscreteScenario(q=2, K=2, message_support=[(0, 1), (1, 3)]))
        assert mi.value_nats == 0.0

    def test_per_client_supports(self):
        support = [[0, 1, 2], [(0, 1), (2, 1)], [(1, 2), (4, 1)]]
        mi = exact_server_leakage(DiscreteScenario(q=5, K=3, message_support=support))
        assert mi.value_nats == 0.0

    def test_view_mismatch(self):
        with pytest.raises(ValueError):
            exact_server_leakage(DiscreteScenario(q=3, K=2, view="client"))


class TestNegativeControls:
    def test_power_limited_independent_keys_leak(self):
        mi = exact_server_leakage(
            DiscreteScenario(q=5, K=3, key_model="independent-subset"))
        assert mi.value_nats > 1e-3

    def test_full_support_independent_keys_are_per_client_pads(self):
        # independence alone does not leak at the server: each key is a
        # one-time pad; what breaks instead is decodability of the sum
        mi = exact_server_leakage(
            DiscreteScenario(q=5, K=3, key_model="independent-uniform"))
        assert mi.value_nats == 0.0

    def test_degenerate_generator_leaks(self):
        gen = np.array([[1], [1], [-2]])
        mi = exact_server_leakage(DiscreteScenario(q=5, K=3, generator=gen))
        assert mi.value_nats > 1e-3


class TestClientView:
    @pytest.mark.parametrize("q,K", [(2, 3), (3, 3), (5, 3), (3, 4), (4, 4)])
    def test_zero_for_three_plus_clients(self, q, K):
        mi = exact_client_leakage(DiscreteScenario(q=q, K=K, view="client"))
        assert mi.value_nats == 0.0

    def test_zero_for_any_eavesdropper_index(self):
        for k in range(4):
            mi = exact_client_leakage(
                DiscreteScenario(q=3, K=4, view="client", eavesdropper=k))
            assert mi.value_nats == 0.0

    def test_k2_pinned_positive_leakage(self):
        mi = exact_client_leakage(DiscreteScenario(q=3, K=2, view="client"))
        assert mi.value_nats > 1e-3
        assert mi.value_nats == pytest.approx(K2_CLIENT_LEAKAGE_NATS, abs=1e-9)
        assert mi.value_nats == pytest.approx(math.log(3), abs=1e-12)

    def test_k2_degenerates_to_zero_when_conditioned_on_sum(self):
        # sum + own message determine the victim's message, hence zero
        mi = exact_client_leakage(
            DiscreteScenario(q=3, K=2, view="client", condition_on_sum=True))
        assert mi.value_nats == 0.0

    def test_view_mismatch(self):
        with pytest.raises(ValueError):
            exact_client_leakage(DiscreteScenario(q=3, K=3, view="server"))


class TestCollusion:
    def test_pair_view_reported(self):
        mi = exact_colluding_pair_leakage(DiscreteScenario(q=3, K=4, view="client"), (0, 1))
        assert isinstance(mi, ExactMI)
        assert mi.value_nats >= 0.0

    def test_pair_with_structured_key_holder(self):
        mi = exact_colluding_pair_leakage(DiscreteScenario(q=3, K=4, view="client"), (0, 3))
        assert mi.value_nats >= 0.0

    def test_needs_enough_clients(self):
        with pytest.raises(ValueError):
            exact_colluding_pair_leakage(DiscreteScenario(q=3, K=3, view="client"), (0, 1))


class TestGuards:
    def test_enumeration_guard(self):
        with pytest.raises(EnumerationLimitError):
            exact_server_leakage(DiscreteScenario(q=7, K=5, guard=1000))

    def test_scenario_validation(self):
        with pytest.raises(ValueError):
            DiscreteScenario(q=1, K=2)
        with pytest.raises(ValueError):
            DiscreteScenario(q=3, K=1)
        with pytest.raises(ValueError):
            DiscreteScenario(q=3, K=2, view="eve")
        with pytest.raises(ValueError):
            DiscreteScenario(q=3, K=2, eavesdropper=5)
        with pytest.raises(ValueError):
            DiscreteScenario(q=3, K=2, key_model="bogus")

    def test_bad_supports(self):
        with pytest.raises(ValueError):
            exact_server_leakage(DiscreteScenario(q=3, K=2, message_support=[0, 7]))
        with pytest.raises(ValueError):
            exact_server_leakage(DiscreteScenario(q=3, K=2, message_support=[0, 0]))
        with pytest.raises(ValueError):
            exact_server_leakage(DiscreteScenario(q=3, K=2, message_support=[(0, 0)]))


class TestKeyStructure:
    @pytest.mark.parametrize("q,K", [(2, 2), (3, 3), (5, 4), (4, 5)])
    def test_any_k_minus_1_keys_jointly_uniform(self, q, K):
        from itertools import combinations

        for subset in combinations(range(K), K - 1):
            counts = key_subset_counts(q, K, list(subset))
            assert np.all(counts == counts[0])
            assert counts.sum() == q ** (K - 1)

    def test_full_key_tuple_not_uniform(self):
        # all K keys together are constrained to the zero-sum set
        counts = key_subset_counts(3, 3, [0, 1, 2])
        assert np.any(counts == 0)


class TestScenarioResult:
    def test_json_document_shape(self):
        doc = scenario_result(DiscreteScenario(q=3, K=3))
        assert set(doc) == {"q", "K", "view", "key_model", "mi_nats", "outcomes"}
        assert doc["mi_nats"] == 0.0
        doc = scenario_result(DiscreteScenario(q=3, K=2, view="client"))
        assert doc["mi_nats"] > 1e-3


class TestMcMse:
    def test_no_wrap_value(self):
        mean, err = mc_mse(0.0, 0.01, 200_000, seed=2)
        assert abs(mean - 1e-4) <= 3 * err
        assert err < 1e-6

    def test_uniform_limit(self):
        mean, err = mc_mse(0.0, 100.0, 200_000, seed=3)
        assert abs(mean - 1.0 / 12.0) <= 3 * err

    def test_vector_signal_sums_dimensions(self):
        mean, _ = mc_mse([0.0, 0.0], 0.01, 50_000, seed=4)
        assert mean == pytest.approx(2e-4, rel=0.05)

    def test_deterministic(self):
        assert mc_mse(0.1, 0.2, 20_000, seed=9) == mc_mse(0.1, 0.2, 20_000, seed=9)

    def test_stderr_scales_as_inverse_sqrt_trials(self):
        _, e1 = mc_mse(0.2, 0.3, 20_000, seed=11)
        _, e2 = mc_mse(0.2, 0.3, 200_000, seed=12)
        ratio = e1 / e2
        assert abs(ratio - math.sqrt(10.0)) <= 0.2 * math.sqrt(10.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            mc_mse(0.0, 0.1, 5000)
        with pytest.raises(ValueError):
            mc_mse(0.0, 0.0, 20_000)
