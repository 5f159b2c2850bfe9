"""Parameter validation and the closed-form derived scales."""

import math

import numpy as np
import pytest

from glassclock.scales import (
    ModelParams,
    derive_scales,
    params_from_dict,
    params_from_json,
    power_normalize,
    threshold_level,
)


def test_alpha_quarter_power():
    scales = derive_scales(ModelParams(N=16, c=0.25, omega=0.76))
    assert scales.alpha == 0.5
    assert scales.log_t == 8.0


def test_limit_constants_beta_one_p_two():
    scales = derive_scales(ModelParams(N=64, p=2, beta=1.0))
    assert scales.K == 4.0
    assert scales.K1 == 2.0
    assert scales.d_N == pytest.approx(scales.alpha * math.sqrt(2.0))


def test_jump_scale_closed_form():
    scales = derive_scales(ModelParams(N=16, c=0.25, beta=1.0, omega=0.76))
    expected = 2.0 * math.sqrt(32.0 * math.pi) * math.e**2
    assert scales.r == pytest.approx(expected, rel=1e-12)
    assert scales.r == pytest.approx(148.17, abs=0.01)


def test_nu_floor():
    assert ModelParams(N=16, c=0.25, omega=0.76).nu == 8
    assert ModelParams(N=128).nu == 50


def test_rem_variant_rescales_rate():
    scales = derive_scales(ModelParams(N=128))
    rem = scales.rem_variant()
    assert rem.K == 1.0
    assert rem.r == pytest.approx(scales.alpha**2 * scales.r, rel=1e-15)
    assert rem.nu == scales.nu


def test_threshold_level_examples():
    scales = derive_scales(ModelParams(N=16, c=0.25, beta=1.0, omega=0.76))
    assert threshold_level(scales, 16, 1.0, 1.0) == pytest.approx(2.0)
    assert threshold_level(scales, 16, 1.0, math.e) == pytest.approx(2.5)
    assert threshold_level(scales, 16, 1.0, 1.0 / math.e) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        threshold_level(scales, 16, 1.0, 0.0)


def test_power_normalize_conventions():
    assert power_normalize(0.0, 0.37) == 1.0
    assert power_normalize(-np.inf, 0.37) == 0.0
    assert power_normalize(math.log(3.0), 1.0) == pytest.approx(3.0)
    ys = power_normalize(np.array([-np.inf, -1.0, 0.0, 2.0]), 0.5)
    assert np.all(np.diff(ys) > 0) and ys[0] == 0.0
    with pytest.raises(ValueError):
        power_normalize(1.0, 0.0)


def test_derive_scales_is_pure():
    a = derive_scales(ModelParams(N=96, p=3, beta=0.75, c=0.2, omega=0.75))
    b = derive_scales(ModelParams(N=96, p=3, beta=0.75, c=0.2, omega=0.75))
    assert a == b


@pytest.mark.parametrize(
    "kwargs",
    [
        {"N": 1},
        {"N": 16, "p": 1},
        {"N": 16, "beta": 0.0},
        {"N": 16, "c": 0.6},
        {"N": 16, "c": 0.25, "omega": 0.70},
        {"N": 16, "c": 0.25, "omega": 1.0},
        {"N": 16, "epsilon_aging": 0.0},
        {"N": 16, "theta": -1.0},
        # block too long: nu = floor(16**0.79) = 8 and p*(nu-1) = 21 >= 16
        {"N": 16, "p": 3, "c": 0.25, "omega": 0.79},
    ],
)
def test_invalid_params_rejected(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def test_p_three_large_c_warns_not_errors():
    with pytest.warns(UserWarning):
        ModelParams(N=128, p=3, c=0.25, omega=0.76)


def test_params_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError):
        params_from_dict({"N": 32, "gamma": 1.0})
    with pytest.raises(ValueError):
        params_from_dict({"p": 2})
    mp = params_from_json('{"N": 32, "beta": 0.75}')
    assert mp == ModelParams(N=32, beta=0.75)
