import math

import numpy as np
import pytest

from cascadelab.spectral import SpectralModel, phi_tilde
from cascadelab.cascade import (CascadeSpec, generate_leaves,
                                partition_function, log_partition_function,
                                normalized_statistic, build_measure,
                                max_leaf_mass, limit_max_leaf_mass, sample_total_mass,
                                modulus_statistic, submodulus_statistic,
                                DyadicMeasure, Tag, write_masses, read_masses,
                                CascadeError, LevelCapError, MemoryBudgetError)
from cascadelab.estimators import ks_distance, ks_critical

GAUSS = SpectralModel.gaussian_critical()
STUB = SpectralModel.degenerate(-0.7)


def test_degenerate_stub_leaves():
    ens = generate_leaves(CascadeSpec(3, STUB, seed=1))
    assert np.allclose(ens.potentials(), 3 * -0.7)
    assert len(ens.potentials()) == 8


def test_level_cap():
    with pytest.raises(LevelCapError):
        CascadeSpec(31, GAUSS, seed=1)
    with pytest.raises(CascadeError):
        CascadeSpec(4, GAUSS, seed=1, beta=0.0)


def test_same_spec_bit_identical_streams():
    a = generate_leaves(CascadeSpec(10, GAUSS, seed=42)).potentials()
    b = generate_leaves(CascadeSpec(10, GAUSS, seed=42)).potentials()
    assert np.array_equal(a, b)
    c = generate_leaves(CascadeSpec(10, GAUSS, seed=43)).potentials()
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("n", [1, 5, 9, 12])
def test_streaming_matches_full_array_bitwise(n):
    ens = generate_leaves(CascadeSpec(n, GAUSS, seed=7))
    full = ens.potentials()
    streamed = np.concatenate(list(ens.iter_blocks(block_exp=4)))
    assert np.array_equal(full, streamed)


def test_iteration_contract_depth_first():
    ens = generate_leaves(CascadeSpec(6, GAUSS, seed=3))
    pairs = list(ens)
    assert [i for i, _ in pairs] == list(range(64))
    assert np.array_equal(np.array([x for _, x in pairs]), ens.potentials())


def test_subtree_reproducible_in_isolation():
    ens = generate_leaves(CascadeSpec(12, GAUSS, seed=11))
    full = ens.potentials()
    sub = ens.subtree_potentials(4, 9)
    width = 1 << (12 - 4)
    assert np.array_equal(sub, full[9 * width:(9 + 1) * width])


def test_siblings_share_prefix_increments():
    # X of two siblings differ only by the last increment
    ens = generate_leaves(CascadeSpec(8, GAUSS, seed=5))
    x = ens.potentials()
    parents = generate_leaves(CascadeSpec(7, GAUSS, seed=5)).potentials()
    # same seed: the depth-7 tree is the prefix of the depth-8 tree
    rebuilt = np.repeat(parents, 2) + ens._level_draws(8, 0, 256)
    assert np.array_equal(x, rebuilt)


def test_increment_law_at_depth_one():
    spec = CascadeSpec(1, GAUSS, seed=9)
    vals = np.concatenate([generate_leaves(spec, r).potentials() for r in range(3000)])
    se = math.sqrt(2 * math.log(2)) / math.sqrt(len(vals))
    assert abs(vals.mean() - (-2 * math.log(2))) < 3.5 * se


def test_partition_function_stub_closed_form():
    for n, beta in ((4, 1.0), (6, 2.0)):
        ens = generate_leaves(CascadeSpec(n, STUB, seed=1, beta=beta))
        expected = 2 ** n * math.exp(beta * -0.7 * n)
        assert partition_function(ens, beta) == pytest.approx(expected, rel=1e-12)


def test_partition_function_two_leaves_definition():
    ens = generate_leaves(CascadeSpec(1, GAUSS, seed=21))
    a, b = ens.potentials()
    z = partition_function(ens, 0.8)
    assert z == pytest.approx(math.exp(0.8 * a) + math.exp(0.8 * b), rel=1e-14)


def test_log_sum_exp_path_matches_plain():
    # large beta pushes exponents over the switch threshold
    big = SpectralModel.degenerate(200.0)
    ens = generate_leaves(CascadeSpec(4, big, seed=1, beta=1.0))
    logz = log_partition_function(ens, 1.0)
    assert logz == pytest.approx(math.log(16) + 800.0, rel=1e-12)
    with pytest.raises(CascadeError):
        partition_function(ens, 1.0)  # e^800 overflows a double


def test_normalized_statistic():
    ens = generate_leaves(CascadeSpec(4, STUB, seed=1))
    # theta = 1: sqrt(4) * 16 e^{-2.8}
    assert normalized_statistic(ens, 1.0) == pytest.approx(2 * 16 * math.exp(4 * -0.7), rel=1e-12)
    assert normalized_statistic(ens, 2.0) == pytest.approx(
        4 ** 3.0 * partition_function(ens, 2.0), rel=1e-12)
    with pytest.raises(CascadeError):
        normalized_statistic(ens, 0.5)


def test_build_measure_regimes_and_tags():
    ens = generate_leaves(CascadeSpec(6, GAUSS, seed=2))
    assert build_measure(ens, 0.5).tag == Tag.SUBCRITICAL
    assert build_measure(ens, 1.0).tag == Tag.CRITICAL
    assert build_measure(ens, 2.0).tag == Tag.SUPERCRITICAL
    x = ens.potentials()
    crit = build_measure(ens, 1.0)
    assert np.allclose(crit.masses, math.sqrt(6) * np.exp(x), rtol=1e-13)
    sub = build_measure(ens, 0.5)
    assert np.allclose(sub.masses, 2.0 ** (-6 * 0.25) * np.exp(0.5 * x), rtol=1e-13)
    sup = build_measure(ens, 2.0)
    assert np.allclose(sup.masses, 6.0 ** 3 * np.exp(2 * x), rtol=1e-13)


def test_build_measure_degenerate_stub_example():
    stub = SpectralModel.degenerate(-math.log(2))
    ens = generate_leaves(CascadeSpec(4, stub, seed=1))
    meas = build_measure(ens, 1.0)
    assert np.allclose(meas.masses, 0.125)


def test_uniform_stub():
    meas = DyadicMeasure.uniform(10)
    assert meas.tag == Tag.UNIFORM_STUB
    assert meas.total() == pytest.approx(1.0, abs=1e-15)
    assert max_leaf_mass(meas) == 2.0 ** -10


def test_cdf_nondecreasing_and_total():
    ens = generate_leaves(CascadeSpec(8, GAUSS, seed=13))
    meas = build_measure(ens, 1.0)
    cdf = meas.cdf()
    assert np.all(np.diff(cdf) >= 0)
    assert cdf[-1] == pytest.approx(meas.total(), rel=1e-12)


def test_aggregate_preserves_mass():
    meas = build_measure(generate_leaves(CascadeSpec(10, GAUSS, seed=4)), 1.0)
    for level in (0, 3, 10):
        agg = meas.aggregate(level)
        assert len(agg) == 1 << level
        assert agg.sum() == pytest.approx(meas.masses.sum(), rel=1e-12)


def test_subcritical_mean_is_one():
    spec = CascadeSpec(10, GAUSS, seed=6, beta=0.5)
    s = sample_total_mass(spec, 0.5, 1500)
    se = s.std(ddof=1) / math.sqrt(len(s))
    assert abs(s.mean() - 1.0) <= 3.0 * se


def test_sample_total_mass_replica_slices_stable():
    # dropping or re-chunking replicas leaves the others untouched
    spec = CascadeSpec(6, GAUSS, seed=17)
    full = sample_total_mass(spec, 1.0, 10)
    tail_part = sample_total_mass(spec, 1.0, 4, replica_start=6)
    assert np.array_equal(full[6:], tail_part)


def test_sample_total_mass_degenerate_all_equal():
    spec = CascadeSpec(5, STUB, seed=1, beta=1.0)
    s = sample_total_mass(spec, 1.0, 5)
    assert np.all(s == s[0])


def test_measure_permutation_invariance():
    spec = CascadeSpec(7, GAUSS, seed=23)
    masses = {r: build_measure(generate_leaves(spec, r), 1.0).masses for r in (2, 0, 1)}
    again = {r: build_measure(generate_leaves(spec, r), 1.0).masses for r in (0, 1, 2)}
    for r in (0, 1, 2):
        assert np.array_equal(masses[r], again[r])


def test_modulus_statistic_uniform_oracle():
    meas = DyadicMeasure.uniform(20)
    # direct evaluation over the 20 levels; the maximum sits at level 1
    expected = max(2.0 ** -k * math.log1p(2.0 ** k) ** 0.4 for k in range(1, 21))
    assert expected == pytest.approx(0.5191678438656323, rel=1e-12)
    assert modulus_statistic(meas, 0.4) == pytest.approx(expected, rel=1e-12)


def test_modulus_monotone_in_gamma():
    meas = build_measure(generate_leaves(CascadeSpec(10, GAUSS, seed=3)), 1.0)
    vals = [modulus_statistic(meas, g) for g in (0.2, 0.4, 0.6, 0.8)]
    # interval weights log(1 + 1/|I|) all exceed 1, so the statistic grows with gamma
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_modulus_rejects_bad_gamma():
    with pytest.raises(CascadeError):
        modulus_statistic(DyadicMeasure.uniform(4), 0.0)


def test_submodulus_uniform_oracle():
    meas = DyadicMeasure.uniform(20)
    expected = max(2.0 ** (-k * 0.75) * math.log1p(2.0 ** k) ** 0.2 for k in range(1, 21))
    assert expected == pytest.approx(0.6058936399826189, rel=1e-12)
    # phi_tilde(0.5) = 0.25 for the critical Gaussian family
    assert submodulus_statistic(meas, 0.5, 0.4) == pytest.approx(expected, rel=1e-12)


def test_submodulus_single_level():
    meas = DyadicMeasure(1, np.array([0.3, 0.2]), Tag.RAW)
    got = submodulus_statistic(meas, 0.5, 0.25)
    expected = 0.3 * 2.0 ** 0.25 * math.log1p(2.0) ** (0.25 * 0.5)
    assert got == pytest.approx(expected, rel=1e-12)


def test_submodulus_preconditions():
    meas = DyadicMeasure.uniform(4)
    with pytest.raises(CascadeError):
        submodulus_statistic(meas, 1.2, 0.3)
    with pytest.raises(CascadeError):
        submodulus_statistic(meas, 0.5, 0.7)


def test_empty_cells_contribute_zero_to_modulus():
    masses = np.zeros(8)
    masses[3] = 1.0
    meas = DyadicMeasure(3, masses, Tag.RAW)
    v = modulus_statistic(meas, 0.4)
    assert v == pytest.approx(max(1.0 * math.log1p(2.0 ** k) ** 0.4 for k in (1, 2, 3)), rel=1e-12)


def test_self_similarity_one_generation():
    # Z_{n+1} equals e^{b xi0} Z_n + e^{b xi1} Z_n' in law, exactly at every depth
    from cascadelab import rng as _rng
    n, reps, beta = 8, 4000, 1.0
    spec_fine = CascadeSpec(n + 1, GAUSS, seed=31)
    spec_base = CascadeSpec(n, GAUSS, seed=31)
    z_fine = np.array([partition_function(generate_leaves(spec_fine, r), beta)
                       for r in range(reps)])
    za = np.array([partition_function(generate_leaves(spec_base, r), beta)
                   for r in range(reps, 2 * reps)])
    zb = np.array([partition_function(generate_leaves(spec_base, r), beta)
                   for r in range(2 * reps, 3 * reps)])
    key = _rng.derive_key(31, _rng.PURPOSE_SCRATCH, 990)
    x = _rng.normals(key, 0, 2 * reps, GAUSS.mean, GAUSS.std)
    comp = np.exp(beta * x[0::2]) * za + np.exp(beta * x[1::2]) * zb
    assert ks_distance(z_fine, comp) < ks_critical(reps, reps)


def test_limit_max_mass_pool_contract():
    spec = CascadeSpec(8, GAUSS, seed=3)
    pool = np.abs(np.random.default_rng(0).standard_normal(2000)) + 0.1
    v1 = limit_max_leaf_mass(spec, pool, replica=0)
    v2 = limit_max_leaf_mass(spec, pool, replica=0)
    assert v1 == v2 > 0
    with pytest.raises(CascadeError):
        limit_max_leaf_mass(spec, pool[:10], replica=0)


def test_binary_dump_round_trip(tmp_path):
    meas = build_measure(generate_leaves(CascadeSpec(6, GAUSS, seed=8)), 1.0)
    path = tmp_path / "masses.casc"
    write_masses(path, meas)
    raw = path.read_bytes()
    assert raw[:4] == b"CASC"
    assert int.from_bytes(raw[4:8], "little") == 1   # version
    assert int.from_bytes(raw[8:12], "little") == 6  # level
    assert int.from_bytes(raw[12:16], "little") == 64
    assert len(raw) == 16 + 64 * 8
    back = read_masses(path)
    assert back.level_n == 6
    assert np.array_equal(back.masses, meas.masses)


def test_binary_dump_rejects_garbage(tmp_path):
    p = tmp_path / "bad.casc"
    p.write_bytes(b"NOPE" + b"\0" * 12)
    with pytest.raises(CascadeError):
        read_masses(p)


def test_memory_guard():
    spec = CascadeSpec(30, GAUSS, seed=1)
    with pytest.raises(MemoryBudgetError):
        generate_leaves(spec).potentials()
