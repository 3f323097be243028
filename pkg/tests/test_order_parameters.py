"""Order-parameter state container."""

import numpy as np
import pytest

from concept_drift_dynamics.utils.errors import InconsistentStateError
from concept_drift_dynamics.utils.order_parameters import STATE_FIELDS, OrderParameterState


class TestConversions:
    def test_array_order(self):
        state = OrderParameterState.from_array(np.arange(7.0))
        assert [getattr(state, name) for name in STATE_FIELDS] == list(range(7))
        np.testing.assert_array_equal(state.as_array(), np.arange(7.0))

    def test_matrices(self):
        state = OrderParameterState.from_matrices([[1.0, 2.0], [3.0, 4.0]], [[5.0, 6.0], [6.0, 7.0]])
        np.testing.assert_array_equal(state.R, [[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(state.Q, [[5.0, 6.0], [6.0, 7.0]])

    def test_symmetric(self):
        state = OrderParameterState.symmetric(0.1, 0.5, 0.4)
        assert state.as_dict() == {"R11": 0.1, "R12": 0.1, "R21": 0.1, "R22": 0.1, "Q11": 0.5, "Q12": 0.4, "Q22": 0.5}

    def test_wrong_length(self):
        with pytest.raises(InconsistentStateError):
            OrderParameterState.from_array([1.0, 2.0])


class TestGramConsistency:
    def test_consistent_state(self):
        state = OrderParameterState(0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0)
        assert state.gram_violation() == 0.0
        assert state.check() is state

    @pytest.mark.parametrize(
        "values",
        [
            (0.0, 0.0, 0.0, 0.0, -0.1, 0.0, 1.0),
            (0.0, 0.0, 0.0, 0.0, 1.0, 1.1, 1.0),
            (0.0, 0.0, 0.0, float("nan"), 1.0, 0.0, 1.0),
        ],
    )
    def test_inconsistent_states(self, values):
        state = OrderParameterState(*values)
        assert not state.is_valid()
        with pytest.raises(InconsistentStateError):
            state.check()

    def test_tolerance(self):
        state = OrderParameterState(0.0, 0.0, 0.0, 0.0, 1.0, 1.0 + 1e-9, 1.0)
        assert not state.is_valid()
        assert state.is_valid(tolerance=1e-6)
