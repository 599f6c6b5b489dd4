import math

import numpy as np
import pytest

from stosir.model import (
    ModelParams,
    ParameterError,
    State,
    derive_constants,
    make_catalog_incidence,
    make_custom_incidence,
    validate_assumption,
)


class TestDeriveConstants:
    def test_extinction_preset_values(self):
        # a1=3, b1=b2=sigma1=sigma2=1 forces c1=c2=1.5, a=3, b=6
        d = derive_constants(ModelParams(a1=3, b1=1, b2=1, sigma1=1, sigma2=1))
        assert d.c1 == 1.5
        assert d.c2 == 1.5
        assert d.a == 3.0
        assert d.b == 6.0

    def test_permanence_preset_values(self):
        d = derive_constants(ModelParams(a1=10, b1=1, b2=1, sigma1=1, sigma2=1))
        assert (d.c1, d.c2, d.a, d.b) == (1.5, 1.5, 3.0, 20.0)

    def test_sigma1_zero_rejected(self):
        with pytest.raises(ParameterError):
            ModelParams(a1=3, b1=1, b2=1, sigma1=0.0, sigma2=1)

    @pytest.mark.parametrize("field,value", [
        ("a1", 0.0), ("a1", -1.0), ("b1", 0.0), ("b2", -2.0),
        ("a1", math.nan), ("sigma1", math.inf),
    ])
    def test_invalid_inputs_rejected(self, field, value):
        kw = dict(a1=3.0, b1=1.0, b2=1.0, sigma1=1.0, sigma2=1.0)
        kw[field] = value
        with pytest.raises(ParameterError):
            ModelParams(**kw)

    def test_sigma2_zero_allowed(self):
        d = derive_constants(ModelParams(a1=3, b1=1, b2=1, sigma1=1, sigma2=0))
        assert d.c2 == 1.0

    def test_shape_exceeds_one_on_random_params(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            p = ModelParams(
                a1=float(rng.uniform(0.1, 20)),
                b1=float(rng.uniform(0.05, 5)),
                b2=float(rng.uniform(0.05, 5)),
                sigma1=float(rng.uniform(0.05, 4)),
                sigma2=float(rng.uniform(0.0, 4)),
            )
            assert derive_constants(p).a > 1.0

    def test_deterministic(self):
        p = ModelParams(a1=2.7, b1=0.9, b2=1.1, sigma1=0.8, sigma2=0.3)
        assert derive_constants(p) == derive_constants(p)


class TestState:
    def test_positive_required(self):
        with pytest.raises(ParameterError):
            State(s=0.0, i=1.0)
        with pytest.raises(ParameterError):
            State(s=1.0, i=-0.5)


class TestCatalog:
    def test_ratio_example_point_values(self):
        m = make_catalog_incidence("ratio_example", c=1, m=1)
        assert m.f(1.0, 0.0) == 0.5
        assert m.g(1.0, 0.0) == 0.5

    def test_bilinear_point_values(self):
        m = make_catalog_incidence("bilinear", beta=2)
        assert m.f(3.0, 0.0) == 6.0
        assert m.f(3.0, 17.3) == 6.0
        assert m.g(3.0, 17.3) == 0.0

    def test_ratio_bound_k_supremum(self):
        # sup of m*s/(1+s+i) over the quadrant is m (s -> inf, i = 0)
        m = make_catalog_incidence("ratio_example", c=6, m=1)
        assert m.bound_k == 1.0
        s = np.geomspace(1e-6, 1e9, 4000)
        i = np.linspace(0.0, 50.0, 31)
        vals = m.g(s[:, None], i[None, :])
        assert vals.max() <= 1.0
        assert m.g(1e12, 0.0) > 1.0 - 1e-10

    def test_f_vanishes_at_s_zero_exactly(self):
        i = np.linspace(0.0, 100.0, 101)
        for kind, coef in [
            ("bilinear", dict(beta=2.0)),
            ("holling2", dict(beta=1.5, m1=0.7)),
            ("beddington_deangelis", dict(beta=2.0, m1=0.5, m2=0.25)),
            ("nonlinear", dict(beta=1.0, l=2.0, m2=1.0, h=1.0)),
            ("nonlinear", dict(beta=1.0, l=0.5, m2=1.0, h=1.0)),
            ("ratio_example", dict(c=3.0, m=0.5)),
        ]:
            m = make_catalog_incidence(kind, **coef)
            assert np.all(np.asarray(m.f(0.0, i)) == 0.0), kind
            assert np.all(np.asarray(m.g(0.0, i)) == 0.0), kind

    def test_unknown_kind(self):
        with pytest.raises(ParameterError, match="unknown incidence kind"):
            make_catalog_incidence("mass_action", beta=1.0)

    def test_nonpositive_coefficient(self):
        with pytest.raises(ParameterError):
            make_catalog_incidence("bilinear", beta=0.0)
        with pytest.raises(ParameterError):
            make_catalog_incidence("ratio_example", c=1.0, m=-2.0)

    def test_wrong_coefficients(self):
        with pytest.raises(ParameterError, match="missing"):
            make_catalog_incidence("holling2", beta=1.0)
        with pytest.raises(ParameterError, match="unexpected"):
            make_catalog_incidence("bilinear", beta=1.0, m1=2.0)

    def test_assumption_flags(self):
        assert make_catalog_incidence("bilinear", beta=2).satisfies_assumption
        assert make_catalog_incidence("holling2", beta=2, m1=1).satisfies_assumption
        assert make_catalog_incidence(
            "beddington_deangelis", beta=2, m1=1, m2=1).satisfies_assumption
        assert make_catalog_incidence(
            "ratio_example", c=1, m=1).satisfies_assumption
        assert not make_catalog_incidence(
            "nonlinear", beta=1, l=0.5, m2=1, h=1).satisfies_assumption
        assert not make_catalog_incidence(
            "nonlinear", beta=1, l=2.0, m2=1, h=1).satisfies_assumption

    def test_nonlinear_singular_below_one(self):
        m = make_catalog_incidence("nonlinear", beta=1, l=0.5, m2=1, h=1)
        assert math.isinf(m.f(1.0, 0.0))
        assert m.f(1.0, 1e-8) > 1e3

    def test_nonlinear_l_one_and_above_at_i_zero(self):
        m1 = make_catalog_incidence("nonlinear", beta=2, l=1.0, m2=1, h=1)
        assert m1.f(3.0, 0.0) == 6.0
        m2 = make_catalog_incidence("nonlinear", beta=2, l=2.0, m2=1, h=1)
        assert m2.f(3.0, 0.0) == 0.0

    def test_incidence_rate_is_i_times_f(self):
        m = make_catalog_incidence("ratio_example", c=2, m=1)
        s, i = 1.5, 0.7
        assert m.incidence_rate(s, i) == pytest.approx(i * m.f(s, i), rel=1e-15)

    def test_evaluation_pure(self):
        m = make_catalog_incidence("holling2", beta=2, m1=1)
        first = m.f(np.array([1.0, 2.0]), np.array([0.5, 0.5]))
        second = m.f(np.array([1.0, 2.0]), np.array([0.5, 0.5]))
        np.testing.assert_array_equal(first, second)


class TestValidateAssumption:
    def test_ratio_example_all_clauses_pass(self):
        m = make_catalog_incidence("ratio_example", c=1, m=1)
        report = validate_assumption(m)
        assert report.all_passed, report.to_text()

    @pytest.mark.parametrize("kind,coef", [
        ("bilinear", dict(beta=2.0)),
        ("holling2", dict(beta=1.5, m1=0.7)),
        ("beddington_deangelis", dict(beta=2.0, m1=0.5, m2=4.0)),
        ("ratio_example", dict(c=6.0, m=1.0)),
    ])
    def test_flagged_true_models_pass(self, kind, coef):
        m = make_catalog_incidence(kind, **coef)
        assert m.satisfies_assumption
        report = validate_assumption(m, tolerance=1e-9)
        assert report.all_passed, report.to_text()

    def test_nonlinear_lipschitz_fails_near_i_zero(self):
        m = make_catalog_incidence("nonlinear", beta=1, l=0.5, m2=1, h=1)
        report = validate_assumption(m)
        failed = {c.name for c in report.clauses if not c.passed}
        assert "f Lipschitz (joint, const F)" in failed

    def test_zero_g_passes_with_k_zero(self):
        m = make_catalog_incidence("bilinear", beta=1.0)
        report = validate_assumption(m)
        clause = {c.name: c for c in report.clauses}["g bounded (g <= K)"]
        assert clause.passed
        assert clause.worst == 0.0

    def test_budget_precondition(self):
        m = make_catalog_incidence("bilinear", beta=1.0)
        with pytest.raises(ParameterError):
            validate_assumption(m, sample_budget=999)

    def test_custom_model_with_wrong_constant_fails(self):
        m = make_custom_incidence(
            lambda s, i: 3.0 * np.asarray(s),
            lambda s, i: np.zeros_like(np.asarray(s, dtype=float)),
            lipschitz_f=1.0, lipschitz_g=0.0, bound_k=0.0)
        report = validate_assumption(m)
        failed = {c.name for c in report.clauses if not c.passed}
        assert "f Lipschitz (joint, const F)" in failed

    def test_report_text_renders(self):
        m = make_catalog_incidence("ratio_example", c=1, m=1)
        text = validate_assumption(m).to_text()
        assert "all clauses" in text and "pass" in text
