import math

import numpy as np
import pytest

from heatctrl.biorthogonal import (
    ControlSignal,
    assemble_control,
    biorthogonality_matrix,
    control_cost,
    gram_minimal_family,
    invert_to_time,
)
from heatctrl.errors import ConfigurationError, TruncationError
from heatctrl.spectral import HeatState


class BoxEvaluator:
    """G(x) = sinc(x T/2): inverse transform is a box on [-T/2, T/2]."""

    def __init__(self, T):
        self.tau = T / 2.0

    def log_G_array(self, xs):
        v = np.sinc(np.asarray(xs) * self.tau / np.pi)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(v)), np.where(v < 0, np.pi, 0.0)

    def tail_cut(self, rel_tol):
        return 4000.0 / self.tau


def test_box_sinc_pair():
    T = 1.0
    sig = invert_to_time(BoxEvaluator(T), T, tol=1e-9)
    inside = sig.eval(np.linspace(-0.4, 0.4, 9))
    assert np.allclose(inside, 1.0 / T, atol=2e-3)
    assert sig.norm() == pytest.approx(1.0 / math.sqrt(T), abs=2e-3)


def test_invert_requires_matching_type(families):
    ev = families[1.0].evaluators[0]
    with pytest.raises(ConfigurationError):
        invert_to_time(ev, 2.0)


def test_plancherel_time_vs_frequency(families):
    for T, fam in families.items():
        for n in (1, 2, 7, 12):
            s = fam.signals[n - 1]
            tg = np.linspace(s.t0, s.t1, len(s.samples))
            tnorm = math.sqrt(float(np.trapezoid(s.samples**2, tg)))
            fnorm = s.meta["freq_norm"]
            assert abs(tnorm - fnorm) <= 1e-3 * fnorm


def test_forward_transform_round_trip(families):
    fam = families[1.0]
    rng = np.random.default_rng(0)
    for n in (1, 3):
        s = fam.signals[n - 1]
        ev = fam.evaluators[n - 1]
        tg = np.linspace(s.t0, s.t1, len(s.samples))
        probes = rng.uniform(0.5, 150.0, 25)
        lm, ph = ev.log_G_array(probes)
        Gshape = np.exp(lm + 1j * ph) / math.sqrt(2.0 * math.pi)
        scale = float(np.max(np.abs(Gshape)))
        for x, want in zip(probes, Gshape):
            got = np.trapezoid(s.samples * np.exp(1j * x * tg), tg) / math.sqrt(2 * math.pi)
            assert abs(got - want) <= 1e-3 * (abs(want) + 1e-6 * scale)


def test_signal_window_support(families):
    fam = families[1.0]
    s = fam.signals[0]
    assert s.t0 == pytest.approx(-0.5) and s.t1 == pytest.approx(0.5, abs=1e-3)
    # the representation is tiny just outside the window (type < T/2)
    outside = s.eval(np.array([0.55, -0.55]))
    assert np.max(np.abs(outside)) < 1e-6 * max(np.max(np.abs(s.samples)), 1.0)


def test_multiplier_biorthogonality_auto(families):
    for T, fam in families.items():
        B = biorthogonality_matrix(fam, 12, method="auto")
        assert np.max(np.abs(B - np.eye(12))) <= 1e-3


def test_quadrature_moments_where_certifiable(families):
    fam = families[1.0]
    cache = {}
    for n, k in [(1, 1), (1, 2), (2, 1), (3, 2)]:
        q, amp = fam.moment_quadrature(n, k, node_cache=cache)
        assert q == pytest.approx(1.0 if n == k else 0.0, abs=5e-4)


# ---- gram oracle -----------------------------------------------------------


def test_gram_singleton_closed_form():
    fam = gram_minimal_family([1.0], 1, 2.0)
    # Gamma_11 = sinh(2)/1, ||g_1|| = 1/sqrt(sinh 2)
    assert fam.norms[0] == pytest.approx(1.0 / math.sqrt(math.sinh(2.0)), rel=1e-12)
    assert fam.norms[0] == pytest.approx(0.52510, abs=1e-5)
    B = biorthogonality_matrix(fam, 1)
    assert B[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_gram_two_mode_identity():
    fam = gram_minimal_family([1.0, 4.0], 2, 2.0)
    B = biorthogonality_matrix(fam, 2)
    assert np.max(np.abs(B - np.eye(2))) <= 1e-10
    solo = gram_minimal_family([1.0], 1, 2.0)
    assert fam.norms[0] > solo.norms[0]  # norms grow with the constraint count


def test_gram_identity_full(gram12):
    for T, fam in gram12.items():
        B = biorthogonality_matrix(fam, 12)
        assert np.max(np.abs(B - np.eye(12))) <= 1e-10


def test_gram_rejects_duplicates():
    with pytest.raises(ConfigurationError):
        gram_minimal_family([1.0, 1.0, 4.0], 3, 1.0)


def test_gram_signal_samples_match_rep(gram12):
    fam = gram12[1.0]
    s = fam.signals[2]
    grid = np.linspace(s.t0, s.t1, len(s.samples))
    idx = np.arange(0, len(grid), 37)
    assert np.allclose(s.samples[idx], s.rep.eval(grid[idx]), rtol=1e-9, atol=1e-9)


def test_minimality_ordering(families, gram12):
    # minimal-norm family never exceeds the multiplier family mode by mode
    for T in (0.5, 1.0, 2.0):
        for n in range(1, 13):
            assert gram12[T].norms[n - 1] <= families[T].norms[n - 1] * (1 + 1e-6)


# ---- assembly --------------------------------------------------------------


def test_assemble_zero_data(basis64, families):
    u0 = HeatState(np.zeros(5), basis64.basis_id)
    g = assemble_control(basis64, u0, families[1.0], 1.0)
    assert control_cost(g) == 0.0


def test_assemble_single_mode_closed_form(basis64, families):
    fam = families[1.0]
    u0 = HeatState(np.array([2.5]), basis64.basis_id)
    g = assemble_control(basis64, u0, fam, 1.0)
    want = abs(2.5 / basis64.traces[0]) * math.exp(-0.5) * fam.norms[0]
    assert control_cost(g) == pytest.approx(want, rel=1e-9)
    # pointwise: g(t) = -(c/gamma) e^{-lam T/2} s_1(-t)
    ts = np.linspace(-0.4, 0.4, 7)
    want_vals = -(2.5 / basis64.traces[0]) * math.exp(-0.5) * fam.signals[0].eval(-ts)
    assert np.allclose(g.eval(ts), want_vals, rtol=1e-9, atol=1e-12)


def test_assemble_moment_identity(basis64, families):
    # int e^{-lam_n (T/2 - t)} gamma_n g(t) dt = -e^{-lam_n T} c_n
    fam = families[1.0]
    rng = np.random.default_rng(4)
    c = rng.standard_normal(6)
    u0 = HeatState(c, basis64.basis_id)
    g = assemble_control(basis64, u0, fam, 1.0)
    for n in range(1, 7):
        lam = float(basis64.lambdas[n - 1])
        lhs = basis64.traces[n - 1] * g.rep.duhamel_weights(lam, 1.0)
        rhs = -math.exp(-lam) * c[n - 1]
        assert lhs == pytest.approx(rhs, abs=5e-8 * np.linalg.norm(c))


def test_assemble_rejects_live_tail(basis64, families):
    c = np.zeros(20)
    c[17] = 1.0  # far beyond the 12-mode family, not decayed at T=1? lam=324: decayed
    # a mode whose weight beats the tail rule must raise: use large coefficient
    c[17] = math.exp(200.0)
    u0 = HeatState(c, basis64.basis_id)
    with pytest.raises(TruncationError):
        assemble_control(basis64, u0, families[1.0], 1.0)


def test_control_cost_basics():
    sig = ControlSignal(t0=0.0, t1=2.0, samples=np.ones(513))
    assert control_cost(sig) == pytest.approx(math.sqrt(2.0), rel=1e-12)
    zero = ControlSignal(t0=0.0, t1=2.0, samples=np.zeros(17))
    assert control_cost(zero) == 0.0


def test_norm_stable_under_grid_refinement(families):
    # quadrature L2 norm stable under 2x refinement of the sample grid
    from heatctrl.quadrature import trapezoid_refine_check
    s = families[1.0].signals[1]
    val, delta = trapezoid_refine_check(
        lambda ts: s.eval_dense(ts) ** 2, s.t0, s.t1, n=len(s.samples))
    assert delta <= 1e-6 * val
    assert math.sqrt(val) == pytest.approx(s.norm(), rel=1e-6)


def test_signal_csv_round_trip(tmp_path, families):
    s = families[1.0].signals[0]
    path = tmp_path / "sig.csv"
    s.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,value"
    assert len(lines) == len(s.samples) + 1


def test_family_manifest_json(families):
    doc = families[1.0].manifest_json()
    import json
    parsed = json.loads(doc)
    assert parsed["kind"] == "multiplier"
    assert len(parsed["lambdas"]) == 12
    assert parsed["window"] == [-0.5, 0.5]
