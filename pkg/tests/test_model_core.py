import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serls.errors import InvalidInputError, InvalidWeightsError, UnknownCharacteristicError
from serls.model_core import (
    CharacteristicLayout,
    Coefficients,
    ConstraintSet,
    ObservationSet,
    assemble_design,
    normalize_weights,
)


class TestNormalizeWeights:
    def test_uniform(self):
        np.testing.assert_allclose(normalize_weights([1, 1, 1, 1]), [0.25] * 4)

    def test_already_normalized(self):
        np.testing.assert_allclose(normalize_weights([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])

    def test_proportional_scaling(self):
        np.testing.assert_allclose(normalize_weights([2, 0, 6]), [0.25, 0.0, 0.75])

    def test_all_zero_rejected(self):
        with pytest.raises(InvalidWeightsError):
            normalize_weights([0.0, 0.0])

    def test_negative_rejected(self):
        with pytest.raises(InvalidWeightsError):
            normalize_weights([1.0, -0.5])

    @given(
        st.lists(st.floats(min_value=0.0, max_value=1e6), min_size=1, max_size=30).filter(
            lambda ws: sum(ws) > 1e-8
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_sums_to_one_and_idempotent(self, ws):
        w = normalize_weights(ws)
        assert abs(float(np.sum(w)) - 1.0) <= 1e-12
        np.testing.assert_allclose(normalize_weights(w), w, rtol=0, atol=1e-15)

    @given(st.integers(min_value=1, max_value=20), st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=50, deadline=None)
    def test_proportions_preserved(self, n, seed):
        rng = np.random.default_rng(seed)
        raw = rng.uniform(0.1, 5.0, size=n)
        w = normalize_weights(raw)
        np.testing.assert_allclose(w / w[0], raw / raw[0], rtol=1e-12)


class TestObservationSet:
    def test_uniform_default_weights(self):
        obs = ObservationSet(y=[1.0, 2.0], x_raw=[[1.0], [2.0]])
        np.testing.assert_allclose(obs.w, [0.5, 0.5])
        assert obs.n == 2 and obs.p == 1

    def test_auto_normalization(self):
        obs = ObservationSet(y=[1.0, 2.0], x_raw=[[1.0], [2.0]], w_raw=[2.0, 2.0])
        np.testing.assert_allclose(obs.w, [0.5, 0.5])

    def test_intercept_only_allowed(self):
        obs = ObservationSet(y=[1.0, 2.0], x_raw=np.zeros((2, 0)))
        assert obs.p == 0

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            ObservationSet(y=[np.nan], x_raw=[[1.0]])

    def test_row_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            ObservationSet(y=[1.0, 2.0], x_raw=[[1.0]])


class TestAssembleDesign:
    def test_single_row(self):
        obs = ObservationSet(y=[0.0], x_raw=[[5.0]])
        np.testing.assert_array_equal(assemble_design(obs).xr, [[1.0, 5.0]])

    def test_direct_prepend(self):
        obs = ObservationSet(y=[0.0, 0.0], x_raw=[[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(
            assemble_design(obs).xr, [[1.0, 1.0, 2.0], [1.0, 3.0, 4.0]]
        )

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            ObservationSet(y=[], x_raw=np.zeros((0, 1)))

    @given(
        st.integers(min_value=1, max_value=12),
        st.integers(min_value=0, max_value=5),
        st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=50, deadline=None)
    def test_dropping_intercept_recovers_x_raw(self, n, p, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, p))
        obs = ObservationSet(y=rng.normal(size=n), x_raw=x)
        design = assemble_design(obs)
        np.testing.assert_array_equal(design.xr[:, 1:], x)
        assert np.all(design.xr[:, 0] == 1.0)


class TestConstraintSet:
    def test_from_triplets_prepends_zero_intercept_column(self):
        cs = ConstraintSet.from_triplets(
            p=3,
            equality=[(0, 1, 1.0), (0, 2, 1.0)],
            equality_targets=[2.0],
            zero=[(0, 3, 1.0)],
            inequality=[(0, 1, 1.0), (0, 2, -1.0)],
        )
        np.testing.assert_array_equal(cs.air, [[0.0, 1.0, 1.0, 0.0]])
        np.testing.assert_array_equal(cs.iw, [2.0])
        np.testing.assert_array_equal(cs.acr, [[0.0, 0.0, 0.0, 1.0]])
        np.testing.assert_array_equal(cs.apr, [[0.0, 1.0, -1.0, 0.0]])

    def test_intercept_column_constraint_rejected(self):
        with pytest.raises(InvalidInputError):
            ConstraintSet.from_triplets(p=2, equality=[(0, 0, 1.0)], equality_targets=[1.0])

    def test_direct_construction_rejects_nonzero_intercept_entries(self):
        with pytest.raises(InvalidInputError):
            ConstraintSet(
                air=np.array([[1.0, 1.0]]),
                iw=np.array([0.0]),
                acr=np.zeros((0, 2)),
                apr=np.zeros((0, 2)),
            )

    def test_row_target_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            ConstraintSet(
                air=np.array([[0.0, 1.0]]),
                iw=np.array([0.0, 1.0]),
                acr=np.zeros((0, 2)),
                apr=np.zeros((0, 2)),
            )

    def test_out_of_range_column_rejected(self):
        with pytest.raises(InvalidInputError):
            ConstraintSet.from_triplets(p=2, inequality=[(0, 3, 1.0)])

    def test_empty(self):
        cs = ConstraintSet.empty(4)
        assert cs.air.shape == (0, 5) and cs.apr.shape == (0, 5)


class TestCharacteristicLayout:
    def test_lookup(self):
        layout = CharacteristicLayout([("a", [1, 2]), ("b", [4])])
        assert layout.columns("a") == (1, 2)
        assert layout.names == ["a", "b"]

    def test_unknown_name(self):
        layout = CharacteristicLayout([("a", [1])])
        with pytest.raises(UnknownCharacteristicError):
            layout.columns("missing")

    def test_intercept_membership_rejected(self):
        with pytest.raises(InvalidInputError):
            CharacteristicLayout([("a", [0, 1])])

    def test_overlapping_groups_rejected(self):
        with pytest.raises(InvalidInputError):
            CharacteristicLayout([("a", [1, 2]), ("b", [2, 3])])


class TestCoefficients:
    def test_fields(self):
        c = Coefficients(np.array([1.0, 2.0, 3.0]))
        assert c.intercept == 1.0
        np.testing.assert_array_equal(c.weights, [2.0, 3.0])

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            Coefficients(np.array([np.inf]))
