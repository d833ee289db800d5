"""Tests for the synthetic panel generator and its ground-truth record."""
import json

import numpy as np
import pytest

from pdbench.frame import CANONICAL_COLUMNS
from pdbench.synthetic import (
    DEFAULT_AR_PARAMS,
    ArParams,
    CrisisRegime,
    SyntheticSpec,
    generate_synthetic,
    period_labels,
    write_ground_truth,
)


def test_same_seed_is_bit_identical():
    # [TRIVIAL] determinism contract
    f1, t1 = generate_synthetic(SyntheticSpec(seed=123))
    f2, t2 = generate_synthetic(SyntheticSpec(seed=123))
    assert f1.index == f2.index
    for col in f1.columns:
        assert np.array_equal(f1.column(col), f2.column(col))
    assert t1 == t2


def test_different_seed_differs():
    f1, _ = generate_synthetic(SyntheticSpec(seed=1))
    f2, _ = generate_synthetic(SyntheticSpec(seed=2))
    assert not np.array_equal(f1.column("PD"), f2.column("PD"))


def test_default_shape_matches_panel_layout():
    frame, _ = generate_synthetic(SyntheticSpec())
    assert len(frame.index) == 69
    assert frame.columns == CANONICAL_COLUMNS
    assert frame.index[0] == "2002Q2"
    assert frame.index[-1] == "2019Q2"


def test_pd_strictly_inside_percent_range():
    for seed in range(10):
        frame, _ = generate_synthetic(SyntheticSpec(seed=seed))
        pd = frame.column("PD")
        assert np.all(pd > 0.0)
        assert np.all(pd < 100.0)


def test_crisis_regime_raises_default_probability():
    # [DERIVED: simulation] negative GDP shock regime lifts PD on average.
    inside_means, outside_means, rises = [], [], 0
    for seed in range(50):
        frame, truth = generate_synthetic(SyntheticSpec(seed=seed))
        pd = frame.column("PD")
        regime = truth["regimes"][0]
        lo, hi = regime["start"] - 1, regime["end"]
        inside = pd[lo:hi].mean()
        outside = np.concatenate([pd[:lo], pd[hi:]]).mean()
        inside_means.append(inside)
        outside_means.append(outside)
        rises += inside > outside
    assert np.mean(inside_means) > np.mean(outside_means)
    assert rises >= 45


def test_saturating_noise_is_rejected():
    with pytest.raises(ValueError, match="reduce noise_scale"):
        generate_synthetic(SyntheticSpec(seed=0, noise_scale=50.0))


def test_validation_rejects_bad_specs():
    with pytest.raises(ValueError):
        SyntheticSpec(n_quarters=4).validate()
    with pytest.raises(ValueError):
        SyntheticSpec(n_covariates=9).validate()
    with pytest.raises(ValueError):
        SyntheticSpec(start_quarter=5).validate()
    with pytest.raises(ValueError):
        SyntheticSpec(pd_base=0.0).validate()
    with pytest.raises(ValueError):
        SyntheticSpec(persistence=1.0).validate()
    with pytest.raises(ValueError):
        SyntheticSpec(noise_scale=-0.1).validate()
    with pytest.raises(ValueError):
        SyntheticSpec(coefficients=(("XXX", 0, 1.0),)).validate()
    with pytest.raises(ValueError):
        SyntheticSpec(coefficients=(("GDP", -1, 1.0),)).validate()
    with pytest.raises(ValueError):
        SyntheticSpec(regimes=(CrisisRegime(0, 5),)).validate()
    with pytest.raises(ValueError):
        SyntheticSpec(regimes=(CrisisRegime(60, 80),)).validate()
    with pytest.raises(ValueError):
        SyntheticSpec(
            regimes=(CrisisRegime(5, 8, (("XXX", 1.0),)),)
        ).validate()
    params = dict(DEFAULT_AR_PARAMS)
    params["GDP"] = ArParams(mean=0.5, phi=1.0, sigma=0.5)
    with pytest.raises(ValueError):
        SyntheticSpec(ar_params=params).validate()


def test_covariate_subset_requires_consistent_coefficients():
    # The shipped coefficients reference EQP, which a 3-covariate panel
    # does not contain.
    with pytest.raises(ValueError):
        SyntheticSpec(n_covariates=3).validate()
    spec = SyntheticSpec(
        n_covariates=3,
        coefficients=(("GDP", 1, -0.2), ("UNE", 0, 0.2)),
        regimes=(CrisisRegime(25, 32, (("GDP", -1.2), ("UNE", 0.6))),),
    )
    frame, _ = generate_synthetic(spec)
    assert frame.columns == ("PD", "GDP", "UNE", "INF")


def test_period_labels_wrap_years():
    labels = period_labels(2002, 2, 5)
    assert labels == ("2002Q2", "2002Q3", "2002Q4", "2003Q1", "2003Q2")


def test_ground_truth_roundtrips_through_json(tmp_path):
    _, truth = generate_synthetic(SyntheticSpec(seed=7))
    path = tmp_path / "truth.json"
    write_ground_truth(truth, path)
    loaded = json.loads(path.read_text())
    assert loaded == truth
    assert loaded["target"]["active_variables"] == ["EQP", "GDP", "UNE"]
    assert loaded["regimes"][0]["shocks"]["GDP"] == -1.2


def noise_free_spec(**overrides):
    params = {
        name: ArParams(mean=p.mean, phi=p.phi, sigma=0.0, seasonal=p.seasonal)
        for name, p in DEFAULT_AR_PARAMS.items()
    }
    defaults = dict(ar_params=params, noise_scale=0.0, regimes=())
    defaults.update(overrides)
    return SyntheticSpec(**defaults)


def test_noise_free_covariate_is_mean_plus_seasonal():
    # With sigma = 0 the AR recursion stays at its mean, so each series
    # reduces to mean + seasonal cycle exactly.
    spec = noise_free_spec()
    frame, _ = generate_synthetic(spec)
    une = frame.column("UNE")
    params = spec.ar_params["UNE"]
    quarter_of = (np.arange(spec.start_quarter - 1, spec.start_quarter - 1 + 69)) % 4
    expected = params.mean + np.asarray(params.seasonal)[quarter_of]
    assert np.allclose(une, expected, atol=1e-12)


def test_ground_truth_record_reproduces_noise_free_target():
    # [DERIVED] re-simulate the latent recursion from the truth record
    # alone; in the noise-free case it must match the generated PD.
    spec = noise_free_spec()
    frame, truth = generate_synthetic(spec)
    t_info = truth["target"]
    n = truth["n_quarters"]
    start_q = int(truth["start"].split("Q")[1])
    quarter_of = (np.arange(start_q - 1, start_q - 1 + n)) % 4
    standardized = {}
    for name, cov in truth["covariates"].items():
        series = frame.column(name)
        sd = cov["long_run_sd"]
        standardized[name] = (series - cov["mean"]) / (sd if sd > 0 else 1.0)
    latent = np.empty(n)
    state = 0.0
    for t in range(n):
        signal = sum(
            c["value"] * standardized[c["variable"]][t - c["lag"]]
            for c in t_info["coefficients"]
            if t - c["lag"] >= 0
        )
        state = t_info["persistence"] * state + signal
        latent[t] = t_info["base_logit"] + state + t_info["seasonal"][quarter_of[t]]
    reproduced = 100.0 / (1.0 + np.exp(-latent))
    assert np.allclose(reproduced, frame.column("PD"), atol=1e-10)


def test_crisis_shock_shifts_covariate_path_exactly():
    calm = noise_free_spec()
    shocked = noise_free_spec(
        regimes=(CrisisRegime(10, 14, (("GDP", -1.5),)),)
    )
    f_calm, _ = generate_synthetic(calm)
    f_shock, _ = generate_synthetic(shocked)
    delta = f_shock.column("GDP") - f_calm.column("GDP")
    expected = np.zeros(69)
    expected[9:14] = -1.5
    assert np.allclose(delta, expected, atol=1e-12)
