import json
import math

import numpy as np
import pytest

from eseplab.core import (ARRIVAL, ESEP, ESEP_B, EXPIRATION, HAWKES, HESEP, NGESEP, SIS, EmpiricalSummary,
                          ModelParams, RngStreamSpec, SamplePath, burn_in, reconstruct_state, validate_params)
from eseplab.errors import AffineMismatch, CapacityMissing, MissingField, NonPositiveRate, TimeOutOfRange
from eseplab.laws import Law
from eseplab.simulators import simulate_esep, simulate_hawkes, simulate_hesep

BASE = ModelParams(baseline=10.0, jump=2.0, expire_rate=3.0)


def test_fig3_params_valid_and_stable():
    p = validate_params(BASE, ESEP)
    assert p.stable is True
    assert p.intensity0 == 10.0


def test_unstable_flag_set():
    p = validate_params(ModelParams(baseline=1.0, jump=2.0, expire_rate=1.0), ESEP)
    assert p.stable is False


def test_affine_mismatch():
    with pytest.raises(AffineMismatch):
        validate_params(BASE.with_(q0=1, intensity0=10.0), ESEP)
    assert validate_params(BASE.with_(q0=1, intensity0=12.0), ESEP).intensity0 == 12.0


def test_hawkes_intensity_floor():
    with pytest.raises(AffineMismatch):
        validate_params(ModelParams(baseline=5.0, jump=1.0, decay_rate=2.0, intensity0=4.0), HAWKES)


def test_hesep_intensity_range():
    p = ModelParams(baseline=1.0, jump=2.0, decay_rate=1.0, expire_rate=1.0, q0=2)
    assert validate_params(p.with_(intensity0=3.0), HESEP).intensity0 == 3.0
    with pytest.raises(AffineMismatch):
        validate_params(p.with_(intensity0=6.0), HESEP)


def test_rate_errors():
    with pytest.raises(NonPositiveRate):
        validate_params(BASE.with_(baseline=0.0), ESEP)
    with pytest.raises(NonPositiveRate):
        validate_params(BASE.with_(jump=-1.0), ESEP)
    with pytest.raises(NonPositiveRate):
        validate_params(BASE.with_(expire_rate=0.0), ESEP)


def test_capacity_and_population_placement():
    with pytest.raises(CapacityMissing):
        validate_params(BASE, ESEP_B)
    with pytest.raises(MissingField):
        validate_params(BASE, SIS)
    with pytest.raises(MissingField):
        validate_params(ModelParams(baseline=1.0, jump=1.0), NGESEP)
    # pure-death SIS is the one place a zero baseline is allowed
    assert validate_params(ModelParams(baseline=0.0, jump=0.0, expire_rate=1.0, population=5, q0=5), SIS)


def test_params_dict_round_trip():
    p = ModelParams(baseline=1.0, jump=1.0, batch_law=Law.geometric_mean(4.0), duration_law=Law.lognormal(0.1, 0.5))
    assert ModelParams.from_dict(json.loads(json.dumps(p.to_dict()))) == p


def test_burn_in_rule():
    assert burn_in(BASE) == pytest.approx(20.0)


def test_rng_streams_reproducible_and_distinct():
    a = RngStreamSpec(5, 1).generator().random(4)
    b = RngStreamSpec(5, 1).generator().random(4)
    c = RngStreamSpec(5, 2).generator().random(4)
    d = RngStreamSpec(5, 1).child(0).generator().random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def _path(times, kinds, p=BASE, model=ESEP, horizon=5.0):
    t = np.asarray(times, dtype=float)
    return SamplePath(model, validate_params(p, model), horizon, 0, 0, t, np.asarray(kinds, dtype=np.int8),
                      np.ones(t.size, dtype=np.int64))


def test_reconstruct_empty_path():
    p = BASE.with_(q0=2)
    assert reconstruct_state(_path([], [], p), 3.0) == (2, 0, 14.0)


def test_reconstruct_one_arrival():
    q, n, lam = reconstruct_state(_path([1.0], [ARRIVAL]), 1.5)
    assert (q, n, lam) == (1, 1, 12.0)
    # right-continuous at the event time
    assert reconstruct_state(_path([1.0], [ARRIVAL]), 1.0)[0] == 1


def test_reconstruct_arrival_then_expiration():
    assert reconstruct_state(_path([1.0, 2.0], [ARRIVAL, EXPIRATION]), 3.0) == (0, 1, 10.0)


def test_reconstruct_outside_horizon():
    with pytest.raises(TimeOutOfRange):
        reconstruct_state(_path([], []), 6.0)


def test_path_serialization_round_trip():
    path = simulate_esep(BASE, 3.0, RngStreamSpec(11, 3))
    back = SamplePath.from_json(path.to_json())
    assert back.same_events(path)
    assert back.params == path.params
    assert path.to_csv().splitlines()[0] == "time,kind,batch"


def test_hawkes_and_hesep_replay_intensity():
    hp = ModelParams(baseline=2.0, jump=1.0, decay_rate=2.0)
    path = simulate_hawkes(hp, None, 4.0, RngStreamSpec(2))
    arr = path.arrival_times()
    t = 3.3
    expected = 2.0 + np.sum(np.exp(-2.0 * (t - arr[arr <= t])))
    assert reconstruct_state(path, t)[2] == pytest.approx(expected, rel=1e-12)
    hs = simulate_hesep(ModelParams(baseline=2.0, jump=1.0, decay_rate=1.0, expire_rate=1.0), 4.0, RngStreamSpec(2))
    q, n, lam = reconstruct_state(hs, 4.0)
    assert 2.0 <= lam <= 2.0 + q + 1e-12


def test_empirical_summary():
    s = EmpiricalSummary.from_values([1, 1, 3], discrete=True, seed=9, last_stream=2)
    assert s.histogram == {1: 2, 3: 1}
    assert s.mean == pytest.approx(5 / 3)
    assert s.to_dict()["seed_range"] == [9, 0, 2]
    c = EmpiricalSummary.from_values([0.5, 0.1], discrete=False, seed=1)
    assert list(c.histogram) == [0.1, 0.5]
    assert math.isclose(c.variance, 0.08)
