import math

import numpy as np
import pytest

from zgff.errors import (DegenerateInputError, InfeasibleError,
                         ResourceLimitError, StructureError)
from zgff.fs import FSModel, fs_quantile
from zgff.rw import (IncrementLaw, TiltedBridgeSpec, basic_increment_law,
                     enumerate_bridge, enumerated_increment_law,
                     fs_comparison, sample_tilted_bridge,
                     transfer_matrix_exact)


def test_basic_law_examples():
    law = basic_increment_law(0.25)
    assert law.y_variance == pytest.approx(0.5)
    assert law.mean == (1.0, 0.0)
    assert law.y_symmetric()
    with pytest.raises(StructureError):
        basic_increment_law(0.0)      # documented degenerate boundary case
    with pytest.raises(StructureError):
        basic_increment_law(0.5)


def test_increment_law_validation():
    with pytest.raises(StructureError):
        IncrementLaw(steps=[(1, 0), (1, 1)], probs=[0.6, 0.5])
    with pytest.raises(StructureError):
        IncrementLaw(steps=[(0, 1)], probs=[1.0])


def test_enumerated_law_properties():
    law = enumerated_increment_law(6.0, k_max=6)
    assert law.truncated_mass < 1e-3
    assert law.mean[0] > 0
    assert abs(law.mean[1]) < 1e-12
    assert law.y_symmetric(tol=1e-12)
    assert law.tail_rate > 0.3        # exponential tails, rate in beta units
    v5 = enumerated_increment_law(5.0, k_max=6).y_variance
    v7 = enumerated_increment_law(7.0, k_max=6).y_variance
    assert v7 < v5                    # sigma^2 decreasing in beta
    with pytest.raises(ResourceLimitError):
        enumerated_increment_law(6.0, k_max=9)


def test_unit_step_projection():
    law = enumerated_increment_law(6.0, k_max=6)
    unit, dropped = law.unit_step_projection()
    assert all(dx == 1 for dx, _ in unit.steps)
    assert dropped < 0.01
    assert abs(sum(unit.probs) - 1.0) < 1e-12


def test_two_path_bridge_closed_form():
    flat = IncrementLaw(steps=[(1, 0), (1, 1), (1, -1)], probs=[1 / 3] * 3)
    spec = TiltedBridgeSpec(u=(0, 0), v=(2, 0), floor=0, tilt_N=1.0, law=flat)
    paths, w = enumerate_bridge(spec)
    probs = w / w.sum()
    low = probs[[list(p) == [0, 0, 0] for p in paths].index(True)]
    assert low == pytest.approx(1.0 / (1.0 + math.exp(-1.0)), abs=1e-12)


def test_bridge_spec_validation():
    law = basic_increment_law(0.25)
    with pytest.raises(StructureError):
        TiltedBridgeSpec(u=(2, 0), v=(1, 0), floor=0, tilt_N=1.0, law=law)
    with pytest.raises(InfeasibleError):
        TiltedBridgeSpec(u=(0, 0), v=(4, 0), floor=1, tilt_N=1.0, law=law)
    with pytest.raises(InfeasibleError):
        TiltedBridgeSpec(u=(0, 5), v=(4, 5), floor=0, tilt_N=1.0, law=law,
                         ceiling=4)


def test_infeasible_endpoints_under_support():
    law = basic_increment_law(0.25)
    spec = TiltedBridgeSpec(u=(0, 0), v=(3, 9), floor=0, tilt_N=math.inf,
                            law=law)
    with pytest.raises(InfeasibleError):
        transfer_matrix_exact(spec)


def test_transfer_matches_enumeration_to_1e12():
    law = basic_increment_law(0.25)
    spec = TiltedBridgeSpec(u=(0, 1), v=(6, 2), floor=0, tilt_N=5.0, law=law,
                            ceiling=6)
    heights, marg = transfer_matrix_exact(spec)
    paths, w = enumerate_bridge(spec)
    w = w / w.sum()
    for col in range(7):
        exact = np.zeros(len(heights))
        for pth, ww in zip(paths, w):
            exact[pth[col] - heights[0]] += ww
        assert np.abs(exact - marg[col]).max() < 1e-12
        assert abs(marg[col].sum() - 1.0) < 1e-12


def test_untilted_bridge_symmetries():
    law = basic_increment_law(0.3)
    spec = TiltedBridgeSpec(u=(0, 4), v=(8, 4), floor=0, tilt_N=math.inf,
                            law=law, ceiling=8)
    heights, m = transfer_matrix_exact(spec)
    # time reversal: marginals symmetric in the column index
    assert np.abs(m - m[::-1]).max() < 1e-14
    # y-reflection about the endpoint line when no floor binds
    i4 = list(heights).index(4)
    mid = m[4]
    for d in range(1, 4):
        assert mid[i4 + d] == pytest.approx(mid[i4 - d], abs=1e-14)


def test_tilt_lowers_marginals_stochastically():
    law = basic_increment_law(0.25)
    kw = dict(u=(0, 3), v=(8, 3), floor=0, law=law, ceiling=10)
    _, m_un = transfer_matrix_exact(TiltedBridgeSpec(tilt_N=math.inf, **kw))
    _, m_t3 = transfer_matrix_exact(TiltedBridgeSpec(tilt_N=3.0, **kw))
    _, m_t9 = transfer_matrix_exact(TiltedBridgeSpec(tilt_N=9.0, **kw))
    for col in range(1, 8):
        cdf_un = np.cumsum(m_un[col])
        cdf_t9 = np.cumsum(m_t9[col])
        cdf_t3 = np.cumsum(m_t3[col])
        assert np.all(cdf_t3 >= cdf_t9 - 1e-14)
        assert np.all(cdf_t9 >= cdf_un - 1e-14)


def test_tilt_to_infinity_matches_untilted_enumeration():
    law = basic_increment_law(0.25)
    spec_inf = TiltedBridgeSpec(u=(0, 2), v=(6, 2), floor=0, tilt_N=math.inf,
                                law=law, ceiling=6)
    heights, m = transfer_matrix_exact(spec_inf)
    paths, w = enumerate_bridge(spec_inf)
    w = w / w.sum()
    mid = np.zeros(len(heights))
    for pth, ww in zip(paths, w):
        mid[pth[3] - heights[0]] += ww
    assert 0.5 * np.abs(mid - m[3]).sum() < 1e-12   # TV, exact on both sides


def test_oracle_caps_enforced():
    law = basic_increment_law(0.25)
    wide = TiltedBridgeSpec(u=(0, 1), v=(30, 1), floor=0, tilt_N=5.0, law=law,
                            ceiling=10)
    with pytest.raises(ResourceLimitError):
        transfer_matrix_exact(wide)
    heights, _ = transfer_matrix_exact(
        TiltedBridgeSpec(u=(0, 1), v=(10, 1), floor=0, tilt_N=5.0, law=law,
                         ceiling=60), height_cap=None, enforce_caps=True)
    assert len(heights) <= 41


def test_transfer_sampler_matches_exact_marginals():
    law = basic_increment_law(0.25)
    spec = TiltedBridgeSpec(u=(0, 1), v=(12, 1), floor=0, tilt_N=4.0, law=law,
                            ceiling=12)
    heights, marg = transfer_matrix_exact(spec)
    paths, diag = sample_tilted_bridge(spec, 30000, seed=4, method="transfer")
    assert diag["method"] == "transfer"
    assert paths.shape == (30000, 13)
    assert np.all(paths >= 0)
    assert np.all(paths[:, 0] == 1) and np.all(paths[:, -1] == 1)
    for col in (3, 6, 9):
        emp = np.bincount(paths[:, col], minlength=heights[-1] + 1)[heights[0]:]
        emp = emp / len(paths)
        se = np.sqrt(np.maximum(marg[col] * (1 - marg[col]), 1e-12) / len(paths))
        assert np.all(np.abs(emp - marg[col]) <= 4 * se + 1e-9)


def test_enumerate_sampler_on_short_bridge():
    law = basic_increment_law(0.25)
    spec = TiltedBridgeSpec(u=(0, 0), v=(5, 1), floor=0, tilt_N=3.0, law=law)
    paths, diag = sample_tilted_bridge(spec, 500, seed=1, method="auto")
    assert diag["method"] == "enumerate"
    assert np.all(paths[:, -1] == 1)


def test_mcmc_sampler_validated_against_oracle():
    law = basic_increment_law(0.25)
    spec = TiltedBridgeSpec(u=(0, 1), v=(10, 1), floor=0, tilt_N=4.0, law=law,
                            ceiling=10)
    heights, marg = transfer_matrix_exact(spec)
    samples, diag = sample_tilted_bridge(spec, 20000, seed=2, method="mcmc",
                                         mcmc_sweeps_per_sample=6)
    assert 0.05 < diag["acceptance_rate"] < 0.95
    col = 5
    emp = np.bincount(samples[:, col], minlength=heights[-1] + 1)[heights[0]:]
    emp = emp / len(samples)
    tau = max(diag["midpoint_autocorr_samples"], 0.5)
    n_eff = len(samples) / (2 * tau)
    se = np.sqrt(np.maximum(marg[col] * (1 - marg[col]), 1e-12) / n_eff)
    assert np.all(np.abs(emp - marg[col]) <= 5 * se + 1e-9)


def test_mcmc_infeasible_initial_path():
    law = IncrementLaw(steps=[(1, 1), (1, -1)], probs=[0.5, 0.5])
    spec = TiltedBridgeSpec(u=(0, 0), v=(4, 1), floor=0, tilt_N=math.inf,
                            law=law)
    with pytest.raises(InfeasibleError):
        sample_tilted_bridge(spec, 10, seed=0, method="mcmc")


def test_fs_comparison_self_consistency_and_power():
    sigma = math.sqrt(0.5)
    model = FSModel(sigma=sigma)
    N = 800.0
    W = int(6 * math.ceil(N ** (2 / 3)))
    rng = np.random.default_rng(6)
    n = 4000
    scale = N ** (1 / 3)
    fake = fs_quantile(rng.random((n, W + 1)), model) * scale
    rep = fs_comparison(fake, N, sigma)
    for t, ks in rep["ks"].items():
        assert ks < 1.36 / math.sqrt(n) * 1.6
    rep_bad = fs_comparison(fake, N, 2 * sigma)
    assert min(rep_bad["ks"].values()) > 3 * max(rep["ks"].values())
    with pytest.raises(DegenerateInputError):
        fs_comparison(fake[:50], N, sigma)
    with pytest.raises(StructureError):
        fs_comparison(fake[:, : W // 2], N, sigma)
