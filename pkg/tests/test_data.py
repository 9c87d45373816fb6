"""Data generators, initial-value sampling, and CSV ingestion."""

import numpy as np
import pytest

from sepident.data import (
    DEFAULT_INIT_RANGES,
    InitRanges,
    SynthSpec,
    gen_complex_exponential,
    gen_rbf_ar_series,
    load_series,
    ozone_transform,
    sample_initial_values,
    sample_rbf_initial,
    save_series,
)
from sepident.errors import SeriesFormatError
from sepident.models import ComplexExponential3, ParameterState, RbfArx, RbfArxSpec, SeriesRecord


class TestGenComplexExponential:
    def test_zero_state_noise_free(self):
        """With inputs pinned to 0 and no noise every target equals 5."""
        spec = SynthSpec(noise_std=0.0, sample_count=20, seed=1)
        obs = gen_complex_exponential(spec, x_override=np.zeros(3))
        assert all(o.y == pytest.approx(5.0, abs=1e-14) for o in obs)

    def test_same_seed_identical(self):
        spec = SynthSpec(sample_count=50, seed=7)
        a = gen_complex_exponential(spec)
        b = gen_complex_exponential(spec)
        for oa, ob in zip(a, b):
            assert oa.y == ob.y
            np.testing.assert_array_equal(oa.x, ob.x)

    def test_noise_standard_deviation(self):
        """Generated minus noise-free targets have the configured spread."""
        n = 100_000
        noisy = gen_complex_exponential(SynthSpec(noise_std=0.2, sample_count=n, seed=3))
        clean = gen_complex_exponential(SynthSpec(noise_std=0.0, sample_count=n, seed=3))
        diff = np.array([a.y - b.y for a, b in zip(noisy, clean)])
        assert 0.195 <= diff.std() <= 0.205

    def test_noise_free_equals_model_prediction(self):
        model = ComplexExponential3()
        spec = SynthSpec(noise_std=0.0, sample_count=30, seed=11)
        truth = ParameterState(np.asarray(spec.true_a), np.asarray(spec.true_c))
        for o in gen_complex_exponential(spec):
            assert o.y == model.predict(truth, o.x)

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            SynthSpec(sample_count=0)
        with pytest.raises(ValueError):
            SynthSpec(noise_std=-0.1)


class TestSampleInitialValues:
    def test_degenerate_ranges_exact(self):
        ranges = InitRanges(a=((2.0, 2.0),) * 4, c=((1.5, 1.5),) * 3)
        st = sample_initial_values(ranges, seed=5)
        np.testing.assert_array_equal(st.a, [2.0] * 4)
        np.testing.assert_array_equal(st.c, [1.5] * 3)

    def test_default_ranges_respected(self):
        for seed in range(10_000):
            st = sample_initial_values(DEFAULT_INIT_RANGES, seed)
            assert 0.5 <= st.a[0] <= 1.5

    def test_third_nonlinear_parameter_mean(self):
        """a3 ~ U(2, 4): the empirical mean over many draws is near 3."""
        draws = np.array([sample_initial_values(DEFAULT_INIT_RANGES, s).a[2] for s in range(100_000)])
        assert draws.mean() == pytest.approx(3.0, abs=0.02)

    def test_invalid_range_rejected(self):
        with pytest.raises(ValueError):
            InitRanges(a=((1.0, 0.5),), c=((0.0, 1.0),))


class TestLoadSeries:
    def test_two_row_fixture(self, tmp_path):
        path = tmp_path / "series.csv"
        path.write_text("t,y,u1\n0,1.5,10.0\n1,-2.25,11.5\n")
        records = load_series(path)
        assert records == [SeriesRecord(0, 1.5, (10.0,)), SeriesRecord(1, -2.25, (11.5,))]

    def test_non_numeric_cell_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,y\n0,1.0\n1,oops\n")
        with pytest.raises(SeriesFormatError) as err:
            load_series(path)
        assert err.value.row == 3  # 1-based file row (header is row 1)
        assert err.value.column == "y"

    def test_missing_column(self, tmp_path):
        path = tmp_path / "missing.csv"
        path.write_text("time,y\n0,1.0\n")
        with pytest.raises(SeriesFormatError) as err:
            load_series(path)
        assert err.value.column == "t"

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(SeriesFormatError, match="empty"):
            load_series(path)

    def test_schema_remapping(self, tmp_path):
        path = tmp_path / "renamed.csv"
        path.write_text("time,thickness,pressure\n0,1.0,9.0\n")
        records = load_series(path, schema={"t": "time", "y": "thickness", "u": ["pressure"]})
        assert records == [SeriesRecord(0, 1.0, (9.0,))]

    def test_round_trip(self, tmp_path, rng):
        records = [
            SeriesRecord(t=i, y=float(rng.standard_normal()), u=(float(rng.standard_normal()),))
            for i in range(25)
        ]
        path = tmp_path / "roundtrip.csv"
        save_series(path, records)
        assert load_series(path) == records


class TestShippedFixture:
    def test_example_series_loads(self):
        """The in-repo sample file stays valid against the documented schema."""
        from pathlib import Path

        path = Path(__file__).resolve().parent.parent / "fixtures" / "example_series.csv"
        records = load_series(path)
        assert len(records) == 120
        assert records[0].t == 0
        assert np.isfinite([r.y for r in records]).all()


class TestOzoneTransform:
    def test_known_points(self):
        assert ozone_transform([260.0 + np.e])[0] == pytest.approx(1.0, rel=1e-12)
        assert ozone_transform([261.0])[0] == 0.0

    def test_matches_elementwise_oracle(self, rng):
        y = 260.0 + rng.uniform(0.5, 100, 40)
        np.testing.assert_allclose(ozone_transform(y), [np.log(v - 260.0) for v in y], rtol=1e-14)

    def test_domain_violation_names_index(self):
        with pytest.raises(ValueError, match="index 2"):
            ozone_transform([300.0, 290.0, 260.0, 310.0])


class TestRbfSeriesGeneration:
    def make_model(self):
        model = RbfArx(RbfArxSpec(p=2, q=0, m=1, d=1))
        truth = ParameterState(
            model.pack_nonlinear([2.0], [[1.2]]), np.array([0.3, 1.2, 1.5, -1.0, -0.6, 0.35])
        )
        return model, truth

    def test_deterministic_and_finite(self):
        model, truth = self.make_model()
        s1 = gen_rbf_ar_series(model, truth, length=200, noise_std=0.05, seed=9)
        s2 = gen_rbf_ar_series(model, truth, length=200, noise_std=0.05, seed=9)
        assert s1 == s2
        assert len(s1) == 200
        assert np.isfinite([r.y for r in s1]).all()

    def test_exogenous_models_rejected(self):
        model = RbfArx(RbfArxSpec(p=1, q=1, m=1, d=1, input_dim=1))
        truth = ParameterState(np.ones(model.k), np.zeros(model.n))
        with pytest.raises(ValueError):
            gen_rbf_ar_series(model, truth, length=10, noise_std=0.1, seed=0)

    def test_initial_sample_in_configured_boxes(self, rng):
        model, _ = self.make_model()
        y = rng.uniform(-1, 3, 100)
        st = sample_rbf_initial(model, y, seed=4, width_range=(0.5, 1.5))
        widths, centers = model.unpack_nonlinear(st.a)
        assert 0.5 <= widths[0] <= 1.5
        assert y.min() <= centers[0, 0] <= y.max()
        np.testing.assert_array_equal(st.c, np.zeros(model.n))
