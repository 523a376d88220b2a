import numpy as np
import pytest

from otfsim.channel import (
    ChannelRealization,
    PathTap,
    apply_channel_operator,
    build_channel_matrix,
)
from otfsim.equalization import (
    EqualizedFrame,
    compute_llrs,
    lmmse_equalize,
    single_tap_equalize,
)
from otfsim.mapping import by_name, qpsk
from otfsim.transforms import GridTransform


def random_channel(rng, m, n, n_taps=3):
    taps = []
    seen = set()
    while len(taps) < n_taps:
        l = int(rng.integers(0, min(4, m)))
        k = int(rng.integers(-2, 3))
        if (l, k) in seen:
            continue
        seen.add((l, k))
        g = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2)
        taps.append(PathTap(g, l, k))
    return ChannelRealization(tuple(taps), m, n)


def explicit_mmse(h, a, noise_var, r):
    """Direct textbook evaluation on dense matrices."""
    g = h @ a
    core = np.linalg.solve(g @ g.conj().T + noise_var * np.eye(g.shape[0]), r)
    return g.conj().T @ core


def test_scalar_closed_form():
    # one flat tap h: x_hat = conj(h) r / (|h|^2 + rho)
    h = 0.6 - 0.8j
    ch = ChannelRealization((PathTap(h, 0, 0),), 4, 2)
    t = GridTransform(4, 2, "otfs")
    x = np.ones(8, dtype=complex)
    r = apply_channel_operator(ch, t.apply(x))
    out = lmmse_equalize(r, ch, t, noise_var=0.5)
    expect = np.conj(h) * h / (abs(h) ** 2 + 0.5)
    np.testing.assert_allclose(out.symbols, expect * x, atol=1e-12)
    # output noise: sigma^2 |h|^2 / (|h|^2 + rho)^2 on every symbol
    expect_var = 0.5 * abs(h) ** 2 / (abs(h) ** 2 + 0.5) ** 2
    np.testing.assert_allclose(out.noise_vars, expect_var, atol=1e-12)


@pytest.mark.parametrize("kind", ["otfs", "block_ofdm"])
def test_matches_explicit_formula(kind):
    rng = np.random.default_rng(1)
    m, n = 8, 4
    ch = random_channel(rng, m, n)
    t = GridTransform(m, n, kind)
    r = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    out = lmmse_equalize(r, ch, t, noise_var=0.3)
    expect = explicit_mmse(build_channel_matrix(ch), t.dense(), 0.3, r)
    np.testing.assert_allclose(out.symbols, expect, atol=1e-10)


def test_dense_noise_vars_match_combiner_rows():
    rng = np.random.default_rng(2)
    m, n = 8, 4
    ch = random_channel(rng, m, n)
    t = GridTransform(m, n, "otfs")
    out = lmmse_equalize(np.zeros(32), ch, t, noise_var=0.2)
    g = build_channel_matrix(ch) @ t.dense()
    w = g.conj().T @ np.linalg.inv(g @ g.conj().T + 0.2 * np.eye(32))
    expect = 0.2 * np.sum(np.abs(w) ** 2, axis=1)
    np.testing.assert_allclose(out.noise_vars, expect, atol=1e-12)


def test_zero_forcing_limit():
    # vanishing noise: the equalizer inverts the channel
    rng = np.random.default_rng(3)
    m, n = 8, 4
    ch = random_channel(rng, m, n)
    t = GridTransform(m, n, "otfs")
    x = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    r = apply_channel_operator(ch, t.apply(x))
    out = lmmse_equalize(r, ch, t, noise_var=1e-12)
    np.testing.assert_allclose(out.symbols, x, atol=1e-6)


def test_cg_agrees_with_dense():
    rng = np.random.default_rng(4)
    m, n = 16, 8
    ch = random_channel(rng, m, n, n_taps=4)
    t = GridTransform(m, n, "otfs")
    r = rng.standard_normal(128) + 1j * rng.standard_normal(128)
    dense = lmmse_equalize(r, ch, t, noise_var=0.25, mode="dense")
    iterative = lmmse_equalize(r, ch, t, noise_var=0.25, mode="cg", cg_tol=1e-12)
    np.testing.assert_allclose(iterative.symbols, dense.symbols, atol=1e-8)


def test_stochastic_variances_track_exact():
    rng = np.random.default_rng(5)
    m, n = 16, 8
    ch = random_channel(rng, m, n, n_taps=4)
    t = GridTransform(m, n, "otfs")
    dense = lmmse_equalize(np.zeros(128), ch, t, noise_var=0.25, mode="dense")
    est = lmmse_equalize(
        np.zeros(128), ch, t, noise_var=0.25, mode="cg",
        variance_probes=64, probe_seed=9,
    )
    ratio = est.noise_vars / dense.noise_vars
    assert np.median(np.abs(ratio - 1.0)) < 0.4
    assert abs(np.mean(est.noise_vars) / np.mean(dense.noise_vars) - 1.0) < 0.1


def test_mode_and_shape_validation():
    ch = ChannelRealization((PathTap(1.0, 0, 0),), 4, 2)
    t = GridTransform(4, 2, "otfs")
    with pytest.raises(ValueError):
        lmmse_equalize(np.zeros(7), ch, t, 0.1)
    with pytest.raises(ValueError):
        lmmse_equalize(np.zeros(8), ch, GridTransform(4, 4, "otfs"), 0.1)
    with pytest.raises(ValueError):
        lmmse_equalize(np.zeros(8), ch, t, 0.1, mode="newton")
    with pytest.raises(ValueError):
        lmmse_equalize(np.zeros(8), ch, t, -0.1)
    with pytest.raises(ValueError):
        lmmse_equalize(np.zeros(8), ch, t, 0.1, data_var=0.0)


def test_single_tap_division_and_noise():
    y = np.array([[2.0 + 2.0j, 1.0]], dtype=complex)
    h = np.array([[2.0, 0.5j]], dtype=complex)
    out = single_tap_equalize(y, h, noise_var=0.1)
    np.testing.assert_allclose(out.symbols, [1.0 + 1.0j, -2.0j])
    np.testing.assert_allclose(out.noise_vars, [0.1 / 4.0, 0.1 / 0.25])
    assert not out.erasures.any()


def test_faded_cells_become_erasures():
    y = np.array([1.0 + 1.0j, 3.0 + 2.0j], dtype=complex)
    h = np.array([1e-15, 1.0], dtype=complex)
    out = single_tap_equalize(y, h, noise_var=0.1)
    assert out.erasures.tolist() == [True, False]
    assert out.symbols[0] == 0.0
    assert out.noise_vars[0] == 1.0
    llrs = compute_llrs(out, qpsk())
    np.testing.assert_array_equal(llrs[0], 0.0)
    assert (llrs[1] != 0).all()


def test_llr_frozen_qpsk_example():
    # symbol exactly on the bits-(0,0) point, noise 0.5: the competing
    # bit-1 point sits sqrt(2) away on each axis, so both LLRs are
    # (2 - 0) / 0.5 = +4, positive favouring bit 0
    const = qpsk()
    x0 = const.map_bits(np.array([0, 0]))
    assert x0[0] == pytest.approx((-1 - 1j) / np.sqrt(2))
    eq = EqualizedFrame(x0, np.array([0.5]))
    np.testing.assert_allclose(compute_llrs(eq, const), [[4.0, 4.0]], atol=1e-12)


def test_llrs_scale_inversely_with_noise():
    rng = np.random.default_rng(6)
    const = by_name("16qam")
    sym = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    a = compute_llrs(EqualizedFrame(sym, np.full(20, 0.5)), const)
    b = compute_llrs(EqualizedFrame(sym, np.full(20, 0.25)), const)
    np.testing.assert_allclose(b, 2.0 * a, atol=1e-9)


def test_llr_sign_recovers_transmitted_bits():
    rng = np.random.default_rng(7)
    const = by_name("16qam")
    bits = rng.integers(0, 2, 400)
    sym = const.map_bits(bits)
    noisy = sym + 0.05 * (rng.standard_normal(100) + 1j * rng.standard_normal(100))
    llrs = compute_llrs(EqualizedFrame(noisy, np.full(100, 0.005)), const)
    hard = (llrs.ravel() < 0).astype(int)
    np.testing.assert_array_equal(hard, bits)


def test_equalized_frame_validation():
    with pytest.raises(ValueError):
        EqualizedFrame(np.zeros(3), np.zeros(2))
    with pytest.raises(ValueError):
        EqualizedFrame(np.zeros(2), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        EqualizedFrame(np.zeros(2), np.array([1.0, np.inf]))


def test_perturbing_the_equalizer_never_helps():
    # the computed matrix minimizes mean squared symbol error, so any
    # perturbed variant must do worse on a common set of noise draws
    rng = np.random.default_rng(8)
    m, n = 8, 8
    ch = random_channel(rng, m, n)
    t = GridTransform(m, n, "otfs")
    g = build_channel_matrix(ch) @ t.dense()
    nv = 0.1
    w = g.conj().T @ np.linalg.inv(g @ g.conj().T + nv * np.eye(m * n))
    draws = 1000
    x = (rng.standard_normal((m * n, draws)) + 1j * rng.standard_normal((m * n, draws))) / np.sqrt(2)
    noise = np.sqrt(nv / 2) * (
        rng.standard_normal((m * n, draws)) + 1j * rng.standard_normal((m * n, draws))
    )
    r = g @ x + noise
    base = np.mean(np.abs(w @ r - x) ** 2)
    for _ in range(10):
        d = rng.standard_normal(w.shape) + 1j * rng.standard_normal(w.shape)
        d *= 0.1 * np.linalg.norm(w) / np.linalg.norm(d)
        assert np.mean(np.abs((w + d) @ r - x) ** 2) > base


def test_llrs_invariant_under_common_rescaling():
    # scaling symbols and constellation by c and variances by c^2 is a
    # pure change of units
    rng = np.random.default_rng(9)
    const = by_name("16qam")
    sym = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    nv = 10 ** rng.uniform(-2, 0, 50)
    base = compute_llrs(EqualizedFrame(sym, nv), const)
    c = 3.7
    scaled_const = type(const)(const.name, const.points * c, const.bits)
    scaled = compute_llrs(EqualizedFrame(sym * c, nv * c * c), scaled_const)
    np.testing.assert_allclose(scaled, base, atol=1e-12)


def test_llr_signs_match_nearest_point_decisions():
    # for any input, per-bit signs agree with the minimum-distance symbol
    rng = np.random.default_rng(10)
    const = by_name("16qam")
    sym = 1.5 * (rng.standard_normal(500) + 1j * rng.standard_normal(500))
    llrs = compute_llrs(EqualizedFrame(sym, np.full(500, 0.3)), const)
    hard = (llrs.ravel() < 0).astype(np.uint8)
    np.testing.assert_array_equal(hard, const.hard_bits(sym))
