"""Time-side biorthogonal controls and null-control assembly.

The frequency data G_n built in :mod:`heatctrl.entire` turns into time
signals by the unitary Fourier pair

    g_n(t) = (2 pi)^{-1/2} int G_n(x) e^{ixt} dx ,    ||g_n|| = ||G_n||.

Because G_n has exponential type tau_M < T/2, the trapezoid sum on a
uniform frequency grid with step h reproduces g_n *exactly* on the window
(the aliases g_n(t + 2 pi m / h) sit outside it), so the only numerical
errors are the frequency cut at X_max and value roundoff.

The stored family signal is  s_n(t) = (2 pi)^{-1/2} g_n(-t), which makes

    int_{-T/2}^{T/2} s_n(t) e^{-lambda_k t} dt = delta_nk

hold exactly; the frequency-side normalization G_n(i lambda_n) = 1 differs
from this by the time flip and the 2 pi of the transform, and the two are
reconciled here once and for all.

A Gram-matrix family (minimal-norm biorthogonal on the span of the first N
exponentials) is provided as an independent oracle.  Its linear algebra is
exponentially ill-conditioned in lambda_N T, so it is carried in mpmath at
a self-chosen precision and validated by residual.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import mpmath as mp
import numpy as np

from .errors import ConfigurationError, IllConditionedError, TruncationError
from .entire import GnEvaluator
from .quadrature import gauss_legendre_panels
from .spectral import HeatState, SpectralBasis

__all__ = [
    "ControlSignal",
    "BiorthogonalFamily",
    "FourierRep",
    "ExpSumRep",
    "invert_to_time",
    "build_multiplier_family",
    "gram_minimal_family",
    "biorthogonality_matrix",
    "assemble_control",
    "control_cost",
]

_LOG_BUDGET = 600.0  # ln-magnitude ceiling before linear float work is refused


# ---------------------------------------------------------------------------
# signal representations


@dataclass(frozen=True)
class FourierRep:
    """Uniform-grid frequency representation of a real windowed signal.

    signal(t) = (h / 2 pi) * (Re V[0] + 2 sum_{i>=1} Re(V[i] e^{-i x_i t}))
    with x_i = i h.  Exact on the window by the band-limit argument above.
    """

    h: float
    values: np.ndarray  # complex, index i <-> frequency i*h

    def eval(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.full(ts.shape, 0.5 * np.real(self.values[0]))
        xs = self.h * np.arange(len(self.values))
        for lo in range(1, len(self.values), 512):
            blk = slice(lo, min(lo + 512, len(self.values)))
            out += np.real(self.values[blk][None, :]
                           * np.exp(-1j * ts[:, None] * xs[blk][None, :])).sum(axis=1)
        return (self.h / math.pi) * out

    def norm_l2(self) -> float:
        # alias-free Parseval over one period = over the support
        s = 0.5 * abs(self.values[0]) ** 2 + np.sum(np.abs(self.values[1:]) ** 2)
        return math.sqrt(self.h / math.pi * s)

    def fft_samples(self, t0: float, t1: float, n_target: int):
        """(times, values) on a uniform grid of ~n_target points covering [t0, t1]."""
        span = t1 - t0
        dt_target = span / max(n_target - 1, 1)
        m = 1 << int(math.ceil(math.log2(max(
            len(self.values), 2.0 * math.pi / (self.h * dt_target), 2))))
        buf = np.zeros(m, dtype=complex)
        xs = self.h * np.arange(len(self.values))
        buf[: len(self.values)] = self.values * np.exp(-1j * xs * t0)
        spec = np.fft.fft(buf)  # spec_k = sum_i buf_i e^{-2 pi i ik/m}
        dt = 2.0 * math.pi / (self.h * m)
        stride = max(1, int(dt_target / dt))
        n_out = int(span / (stride * dt)) + 1
        idx = stride * np.arange(n_out)
        ts = t0 + dt * idx
        vals = (self.h / math.pi) * (np.real(spec[idx]) - 0.5 * np.real(self.values[0]))
        return ts, vals

    def duhamel_weights(self, lam: float, T: float) -> float:
        """int_0^T e^{-lam (T - u)} signal(u - T/2) du, exactly per frequency.

        int_0^T e^{-lam(T-u)} e^{-i x (u - T/2)} du
            = e^{i x T/2} (e^{-i x T} - e^{-lam T}) / (lam - i x).
        """
        xs = self.h * np.arange(len(self.values))
        ker = np.exp(1j * xs * T / 2.0) * (np.exp(-1j * xs * T) - math.exp(-lam * T)) / (lam - 1j * xs)
        total = 0.5 * np.real(self.values[0]) * np.real(ker[0]) \
            + np.sum(np.real(self.values[1:] * ker[1:]))
        return (self.h / math.pi) * total


@dataclass(frozen=True)
class ExpSumRep:
    """Exponential-sum representation  sum_k c_k e^{-lam_k (t + T/2)}  in mpmath.

    Kept in mp because the coefficients cancel catastrophically in float;
    every consumer extracts what it needs through exact antiderivatives.
    """

    lambdas: tuple
    coeffs: tuple  # mp.mpf
    T: float
    dps: int

    def eval(self, ts) -> np.ndarray:
        """Pointwise values; a float path is used when the coefficients fit.

        Float evaluation costs ~cond(Gram) * eps of relative noise, fine for
        sampling and norms; exact quantities (moments, Duhamel weights) stay
        in mp regardless.
        """
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        cf = self._float_coeffs()
        if cf is not None:
            u = ts[:, None] + self.T / 2.0
            lam = np.asarray(self.lambdas)
            return (np.exp(-u * lam[None, :]) * cf[None, :]).sum(axis=1)
        out = np.empty(ts.shape)
        with mp.workdps(self.dps):
            for i, t in enumerate(ts):
                u = mp.mpf(float(t)) + mp.mpf(self.T) / 2
                out[i] = float(mp.fsum(c * mp.e ** (-l * u)
                                       for c, l in zip(self.coeffs, self.lambdas)))
        return out

    def _float_coeffs(self):
        with mp.workdps(self.dps):
            if all(abs(c) < mp.mpf("1e290") for c in self.coeffs):
                return np.array([float(c) for c in self.coeffs])
        return None

    def moment(self, lam_k: float) -> float:
        """int_{-T/2}^{T/2} signal(t) e^{-lam_k t} dt, exact in mp."""
        with mp.workdps(self.dps):
            T = mp.mpf(self.T)
            lk = mp.mpf(lam_k)
            total = mp.mpf(0)
            for c, l in zip(self.coeffs, self.lambdas):
                s = l + lk
                piece = (1 - mp.e ** (-s * T)) / s if s != 0 else T
                total += c * mp.e ** (lk * T / 2) * piece
            return float(total)

    def norm_l2(self) -> float:
        with mp.workdps(self.dps):
            T = mp.mpf(self.T)
            total = mp.mpf(0)
            for cj, lj in zip(self.coeffs, self.lambdas):
                for ck, lk in zip(self.coeffs, self.lambdas):
                    s = lj + lk
                    piece = (1 - mp.e ** (-s * T)) / s if s != 0 else T
                    total += cj * ck * piece
            # the quadratic form can round to a tiny negative for a zero signal
            return float(mp.sqrt(max(total, mp.mpf(0))))

    def duhamel_weights(self, lam: float, T: float) -> float:
        """int_0^T e^{-lam (T-u)} signal(u - T/2) du, exact in mp."""
        with mp.workdps(self.dps):
            lam_ = mp.mpf(lam)
            T_ = mp.mpf(T)
            total = mp.mpf(0)
            for c, l in zip(self.coeffs, self.lambdas):
                if abs(lam_ - l) > mp.mpf("1e-30"):
                    piece = (mp.e ** (-l * T_) - mp.e ** (-lam_ * T_)) / (lam_ - l)
                else:
                    piece = T_ * mp.e ** (-lam_ * T_)
                total += c * piece
            return float(total)


@dataclass
class ControlSignal:
    """A sampled scalar control on a window, with its defining representation."""

    t0: float
    t1: float
    samples: np.ndarray
    rep: object = None  # FourierRep | ExpSumRep | None
    norm_cache: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def window(self):
        return (self.t0, self.t1)

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / max(len(self.samples) - 1, 1)

    def eval(self, ts) -> np.ndarray:
        if self.rep is not None:
            return self.rep.eval(ts)
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        grid = np.linspace(self.t0, self.t1, len(self.samples))
        return np.interp(ts, grid, self.samples)

    def eval_dense(self, ts) -> np.ndarray:
        """eval for large monotone grids; Fourier reps go through one FFT.

        The FFT output is 4x oversampled and interpolated, which keeps the
        error at the 1e-9 level of the representation itself while avoiding
        the O(n_t * n_freq) direct sum.
        """
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if isinstance(self.rep, FourierRep) and len(ts) > 512:
            t0, t1 = float(ts[0]), float(ts[-1])
            span = max(t1 - t0, 1e-9)
            tf, vf = self.rep.fft_samples(t0 - 0.02 * span, t1 + 0.02 * span,
                                          4 * len(ts))
            return np.interp(ts, tf, vf)
        return self.eval(ts)

    def norm(self) -> float:
        if self.norm_cache is None:
            if self.rep is not None and hasattr(self.rep, "norm_l2"):
                self.norm_cache = float(self.rep.norm_l2())
            else:
                self.norm_cache = math.sqrt(
                    float(np.trapezoid(self.samples**2, dx=self.dt)))
        return self.norm_cache

    def to_csv(self, path):
        grid = np.linspace(self.t0, self.t1, len(self.samples))
        with open(path, "w") as fh:
            fh.write("t,value\n")
            for t, v in zip(grid, self.samples):
                fh.write(f"{t:.17g},{v:.17g}\n")


def control_cost(g: ControlSignal) -> float:
    """L^2 norm of the control over its window."""
    return g.norm()


# ---------------------------------------------------------------------------
# multiplier family


def _frequency_grid(tau_type: float, T: float, X_max: float):
    """Step and count with the periodization past the window: 2 pi / h >
    tau_M + T/2 + margin, and never coarser than the FFT coverage needs."""
    h = 2.0 * math.pi / (tau_type + T / 2.0 + 0.75)
    h = min(h, 2.0 * math.pi / (1.05 * T))
    n = int(math.ceil(X_max / h)) + 1
    return h, n


def invert_to_time(evaluator, T: float, tol: float = 1e-9,
                   n_samples: int = 4096) -> ControlSignal:
    """Biorthogonal time signal of one evaluator on the window [-T/2, T/2].

    The quadrature is the uniform trapezoid sum over |x| <= X_max with the
    envelope tail below tol of the norm; the stored signal is the flipped,
    (2 pi)^{-1/2}-scaled inverse transform, so its exponential moments are
    delta_nk.  Norm bookkeeping keeps the unitary pair (s_n, G_n / sqrt(2 pi)).
    """
    if abs(evaluator.tau - T / 2.0) > 1e-12:
        raise ConfigurationError(
            f"evaluator type {evaluator.tau} does not match window length {T}")
    X_max = evaluator.tail_cut(tol)
    spec = getattr(evaluator, "spec", None)
    tau_type = spec.type_sum()[0] if spec is not None else evaluator.tau
    h, n = _frequency_grid(tau_type, T, X_max)
    xs = h * np.arange(n)
    lm, ph = evaluator.log_G_array(xs)
    peak = float(np.max(lm))
    if peak > _LOG_BUDGET:
        raise TruncationError(
            f"peak log-magnitude {peak:.1f} exceeds the float budget", achieved=peak)
    vals = np.exp(lm + 1j * ph)
    return _signal_from_values(h, vals, T, n_samples, meta={
        "X_max": X_max, "tail_tol": tol, "n_freq": n})


def _signal_from_values(h, vals, T, n_samples, meta=None) -> ControlSignal:
    # s(t) = (2 pi)^{-1/2} raw(-t) with raw the unitary inverse transform of G;
    # under the e^{-ixt} kernel of FourierRep.eval this is values = G samples,
    # and then int s(t) e^{-lambda_k t} dt = G(i lambda_k) exactly.
    rep = FourierRep(h=h, values=np.asarray(vals, dtype=complex))
    ts, sm = rep.fft_samples(-T / 2.0, T / 2.0, n_samples)
    sig = ControlSignal(t0=float(ts[0]), t1=float(ts[-1]), samples=sm, rep=rep,
                        meta=meta or {})
    sig.meta["freq_norm"] = rep.norm_l2()
    return sig


@dataclass
class BiorthogonalFamily:
    """Signals biorthogonal to the decaying exponentials on a centered window."""

    lambdas: np.ndarray
    T: float
    signals: list
    kind: str  # "multiplier" | "gram"
    norms: np.ndarray
    evaluators: list = field(default_factory=list)  # multiplier kind
    traces_id: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.signals)

    def moment(self, n: int, k: int) -> float:
        """int s_n(t) e^{-lambda_k t} dt through the stable representation.

        For the gram kind this is exact mp arithmetic.  For the multiplier
        kind it equals G_n(i lambda_k) by the Paley-Wiener identity (the
        signal normalization absorbs the transform constants), whose zero
        structure is exact in log-domain; the raw time integral amplifies
        signal error by e^{lambda_k T / 2} and stops being computable in
        floats once lambda_k T is large.
        """
        lam_k = float(self.lambdas[k - 1])
        sig = self.signals[n - 1]
        if isinstance(sig.rep, ExpSumRep):
            return sig.rep.moment(lam_k)
        ev = self.evaluators[n - 1]
        val = ev.log_G(1j * lam_k)
        if val.is_zero:
            return 0.0
        return val.abs_linear() * math.cos(val.phase)

    def moment_quadrature(self, n: int, k: int, order: int = 24,
                          node_cache: Optional[dict] = None):
        """(value, amplification) of the same moment by honest time quadrature.

        Composite Gauss-Legendre against e^{-lambda_k u} on the shifted
        window; the amplification e^{lambda_k T/2} multiplying the
        quadrature's own error is returned so callers can see when this
        route stops certifying anything.  ``node_cache`` reuses signal
        values across calls with the same (n, rate) node layout.
        """
        lam_k = float(self.lambdas[k - 1])
        sig = self.signals[n - 1]
        amp = lam_k * self.T / 2.0
        if amp > _LOG_BUDGET:
            raise TruncationError("moment weight exceeds the float budget", achieved=amp)
        rate_key = int(math.ceil(lam_k * self.T / 8.0))
        key = (n, rate_key, order)
        if node_cache is not None and key in node_cache:
            nodes, weights, vals = node_cache[key]
        else:
            nodes, weights = gauss_legendre_panels(0.0, self.T, rate=lam_k, order=order)
            vals = sig.eval(nodes - self.T / 2.0)
            if node_cache is not None:
                node_cache[key] = (nodes, weights, vals)
        damped = float(np.sum(weights * vals * np.exp(-lam_k * nodes)))
        return damped * math.exp(amp), math.exp(amp)

    def manifest(self) -> dict:
        return {
            "kind": self.kind,
            "lambdas": [float(v) for v in self.lambdas],
            "window": [-self.T / 2.0, self.T / 2.0],
            "norms": [float(v) for v in self.norms],
            "meta": {k: v for k, v in self.meta.items() if _json_ok(v)},
        }

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), indent=2)


def _json_ok(v):
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


def build_multiplier_family(basis: SpectralBasis, T: float, count: int,
                            eps: float = 0.05, tol: float = 1e-9,
                            n_samples: int = 4096) -> BiorthogonalFamily:
    """Family of `count` biorthogonal signals from the entire-function route.

    Heavy grid work (the full eigenvalue product and the multiplier on the
    shared frequency grid) is done once; each mode then differs by one
    factor and its two normalizers.
    """
    from .entire import _log_abs_M_real_array, _log_f_all_imag_array

    if count < 1 or count > basis.n_modes:
        raise ConfigurationError("count outside stored mode range")
    if basis.lambdas[0] <= 0:
        raise ConfigurationError("family needs a reduced basis with lambda_1 > 0")
    tau = T / 2.0
    evs = [GnEvaluator.build(basis, n, tau=tau, eps=eps, tol=tol)
           for n in range(1, count + 1)]
    spec = evs[0].spec
    X_max = max(ev.tail_cut(tol) for ev in evs)
    tau_type = spec.type_sum()[0]
    h, n_freq = _frequency_grid(tau_type, T, X_max)
    xs = h * np.arange(n_freq)

    lm_f, ph_f = _log_f_all_imag_array(basis, xs, tol=tol)
    lm_m, sign_m = _log_abs_M_real_array(spec, xs)
    ph_m = np.where(sign_m < 0, math.pi, 0.0)
    lm_m = np.where(sign_m == 0.0, -np.inf, lm_m)

    signals, norms = [], []
    for ev in evs:
        lam_n = float(basis.lambdas[ev.n - 1])
        r = xs / lam_n
        lm = lm_f - 0.5 * np.log1p(r * r) + lm_m - ev.log_M_ilam - ev.log_fn_lam.logmag
        ph = ph_f - np.arctan(r) + ph_m - ev.log_fn_lam.phase
        peak = float(np.max(lm))
        if peak > _LOG_BUDGET:
            raise TruncationError(
                f"mode {ev.n}: peak log-magnitude {peak:.1f} over budget (T too small)",
                achieved=peak)
        vals = np.exp(lm + 1j * ph)
        sig = _signal_from_values(h, vals, T, n_samples,
                                  meta={"X_max": X_max, "tail_tol": tol, "n": ev.n})
        signals.append(sig)
        norms.append(sig.meta["freq_norm"])

    return BiorthogonalFamily(
        lambdas=basis.lambdas[:count].copy(), T=T, signals=signals,
        kind="multiplier", norms=np.asarray(norms), evaluators=evs,
        traces_id=basis.basis_id,
        meta={"eps": eps, "tol": tol, "h": h, "n_freq": n_freq, "X_max": X_max,
              "tau_type": tau_type},
    )


# ---------------------------------------------------------------------------
# gram oracle family


def _gram_dps(lambdas, T: float, extra: int = 60) -> int:
    amp_digits = (lambdas[-1] - lambdas[0]) * T / 2.0 / math.log(10.0)
    cond_digits = 3.0 * len(lambdas)  # generous for lambda ~ n^2 Cauchy kernels
    return int(extra + amp_digits + cond_digits)


def gram_minimal_family(lambdas: Sequence[float], count: int, T: float,
                        cond_threshold: float = 1e250,
                        n_samples: int = 1024) -> BiorthogonalFamily:
    """Minimal-norm biorthogonal family on the span of the first N exponentials.

    Solves the Gram system of {e^{-lambda_k t}} on the centered window.  The
    system is scaled to the [0, T] Gram matrix Gamma0 (entries in (0, T])
    and inverted in mpmath; precision is chosen from the amplification
    e^{(lambda_N - lambda_1) T/2} plus a conditioning allowance, and the
    inverse is validated by its residual.  Norms obey
    ||g_n||^2 = e^{-lambda_n T} (Gamma0^{-1})_{nn}.
    """
    lams = np.asarray(lambdas, dtype=float)[:count]
    if len(lams) < count:
        raise ConfigurationError("fewer lambdas than requested count")
    if len(np.unique(lams)) != count:
        raise ConfigurationError("lambdas must be distinct")
    dps = _gram_dps(lams, T)
    if dps > 2000:
        raise IllConditionedError(
            f"gram system needs ~{dps} digits (lambda_N T too large); "
            "reduce the mode count or the window", cond=float(dps))

    with mp.workdps(dps):
        Tm = mp.mpf(T)
        lm = [mp.mpf(float(v)) for v in lams]
        G0 = mp.matrix(count, count)
        for j in range(count):
            for k in range(j, count):
                s = lm[j] + lm[k]
                G0[j, k] = G0[k, j] = (1 - mp.e ** (-s * Tm)) / s
        R = mp.inverse(G0)
        resid = mp.mnorm(R * G0 - mp.eye(count), 1)
        # crude 1-norm condition estimate
        cond = mp.mnorm(G0, 1) * mp.mnorm(R, 1)
        if float(cond) > cond_threshold:
            raise IllConditionedError(
                f"Gram matrix condition {mp.nstr(cond, 3)} above threshold",
                cond=float(cond))
        if resid > mp.mpf(10) ** (-(dps // 2)):
            raise IllConditionedError(
                f"Gram inverse residual {mp.nstr(resid, 3)} too large at dps={dps}",
                cond=float(cond))

        signals, norms = [], []
        for n in range(count):
            pref = mp.e ** (-lm[n] * Tm / 2)
            coeffs = tuple(pref * R[n, k] for k in range(count))
            rep = ExpSumRep(lambdas=tuple(float(v) for v in lams),
                            coeffs=coeffs, T=T, dps=dps)
            nrm = float(mp.sqrt(mp.e ** (-lm[n] * Tm) * R[n, n]))
            ts = np.linspace(-T / 2.0, T / 2.0, n_samples)
            sig = ControlSignal(t0=-T / 2.0, t1=T / 2.0, samples=rep.eval(ts),
                                rep=rep, norm_cache=nrm,
                                meta={"dps": dps, "n": n + 1})
            signals.append(sig)
            norms.append(nrm)

    return BiorthogonalFamily(
        lambdas=lams.copy(), T=T, signals=signals, kind="gram",
        norms=np.asarray(norms),
        meta={"dps": dps, "cond": float(cond), "residual": float(resid)},
    )


# ---------------------------------------------------------------------------
# biorthogonality matrix and control assembly


def biorthogonality_matrix(family: BiorthogonalFamily, k_max: int,
                           method: str = "auto") -> np.ndarray:
    """B[n, k] = int s_n(t) e^{-lambda_k t} dt for n, k <= k_max.

    method "quadrature" forces the time-side Gauss-Legendre route;
    "analytic" uses each family's stable representation; "auto" runs the
    quadrature exactly where it still certifies the entry, i.e. while

        e^{lambda_k T / 2} * ||g_n|| * max(tol, 1e-8)  <=  1e-4,

    the left side being the amplification of the signal's own error budget
    (beyond it the raw integral is exponentially ill-posed in floats and
    only the stable representation carries information).
    """
    if k_max > family.count or k_max > len(family.lambdas):
        raise ConfigurationError("k_max exceeds family size")
    tol = float(family.meta.get("tol", 1e-9))
    B = np.empty((k_max, k_max))
    cache: dict = {}
    for n in range(1, k_max + 1):
        for k in range(1, k_max + 1):
            log_amp = float(family.lambdas[k - 1]) * family.T / 2.0
            certifiable = (family.kind == "multiplier"
                           and log_amp + math.log(max(family.norms[n - 1], 1e-300))
                           + math.log(max(tol, 1e-8)) <= math.log(1e-4))
            if method == "quadrature" or (method == "auto" and certifiable):
                B[n - 1, k - 1] = family.moment_quadrature(n, k, node_cache=cache)[0]
            else:
                B[n - 1, k - 1] = family.moment(n, k)
    return B


def assemble_control(basis: SpectralBasis, u0: HeatState,
                     family: BiorthogonalFamily, T: float,
                     tail_rtol: float = 1e-12) -> ControlSignal:
    """Null-control for initial data u0 as a weighted sum of family signals.

    g(t) = - sum_n (c_n / gamma_n) e^{-lambda_n T/2} s_n(-t) on [-T/2, T/2].
    Terms stop once the remaining tail bound drops below tail_rtol times the
    accumulated cost; live coefficients past the family raise TruncationError.
    """
    if abs(family.T - T) > 1e-12:
        raise ConfigurationError("family window does not match T")
    if basis.lambdas[0] <= 0:
        raise ConfigurationError("assemble_control expects a reduced basis")
    coeffs = np.asarray(u0.coeffs, dtype=float)
    n_live = int(np.max(np.nonzero(coeffs)[0])) + 1 if np.any(coeffs != 0) else 0

    weights = []
    cost_sq = 0.0
    for n in range(1, n_live + 1):
        c = coeffs[n - 1]
        if n > family.count:
            bound = abs(c) / abs(basis.traces[n - 1]) * math.exp(
                -basis.lambdas[n - 1] * T / 2.0)
            if bound**2 > (tail_rtol**2) * max(cost_sq, 1e-300):
                raise TruncationError(
                    f"mode {n} carries weight beyond the family "
                    f"(tail bound {bound:.2e})", achieved=bound)
            continue
        w = -c / float(basis.traces[n - 1]) * math.exp(-float(basis.lambdas[n - 1]) * T / 2.0)
        weights.append((n, w))
        cost_sq += (w * family.norms[n - 1]) ** 2

    if not weights:
        zero = np.zeros(129)
        return ControlSignal(t0=-T / 2.0, t1=T / 2.0, samples=zero,
                             norm_cache=0.0, meta={"terms": 0})

    if family.kind == "multiplier":
        base = family.signals[weights[0][0] - 1].rep
        acc = np.zeros_like(base.values)
        for n, w in weights:
            rep_n = family.signals[n - 1].rep
            # s_n(-t) has frequency values conj(V_n)
            acc = acc + w * np.conj(rep_n.values)
        rep = FourierRep(h=base.h, values=acc)
        ts, sm = rep.fft_samples(-T / 2.0, T / 2.0, 4096)
        sig = ControlSignal(t0=float(ts[0]), t1=float(ts[-1]), samples=sm, rep=rep,
                            meta={"terms": len(weights)})
        sig.norm_cache = rep.norm_l2()
        return sig

    # gram: combine exponential sums in mp; s_n(-t) swaps the time direction,
    # turning e^{-lam (t + T/2)} into e^{+lam t - lam T/2}; fold through the
    # identity e^{-lam(-t + T/2)} = e^{-lam T} e^{+lam(t + T/2)} ... keep mp.
    dps = family.signals[0].rep.dps
    lams = family.signals[0].rep.lambdas
    with mp.workdps(dps):
        acc = [mp.mpf(0)] * len(lams)
        for n, w in weights:
            rep_n = family.signals[n - 1].rep
            for k, c in enumerate(rep_n.coeffs):
                acc[k] += mp.mpf(w) * c
        rep = _FlippedExpSumRep(lambdas=lams, coeffs=tuple(acc), T=T, dps=dps)
    ts = np.linspace(-T / 2.0, T / 2.0, 1025)
    sig = ControlSignal(t0=-T / 2.0, t1=T / 2.0, samples=rep.eval(ts), rep=rep,
                        meta={"terms": len(weights)})
    sig.norm_cache = rep.norm_l2()
    return sig


@dataclass(frozen=True)
class _FlippedExpSumRep(ExpSumRep):
    """ExpSumRep composed with t -> -t (sum of growing exponentials on the window)."""

    def eval(self, ts):
        return super().eval(-np.atleast_1d(np.asarray(ts, dtype=float)))

    def moment(self, lam_k: float) -> float:
        raise NotImplementedError("assembled controls are paired through Duhamel")

    def norm_l2(self) -> float:
        return super().norm_l2()  # flip preserves the L2 norm on the centered window

    def duhamel_weights(self, lam: float, T: float) -> float:
        """int_0^T e^{-lam (T-u)} base(T/2 - u) du with base(v) = sum c e^{-l (v+T/2)}.

        Substituting v = T/2 - u gives int_0^T base(v') e^{-lam v'} ... kept in mp:
        int_0^T e^{-lam(T-u)} sum_k c_k e^{-l_k (T - u)} du
            = sum_k c_k (1 - e^{-(lam + l_k) T}) / (lam + l_k).
        """
        with mp.workdps(self.dps):
            lam_ = mp.mpf(lam)
            T_ = mp.mpf(T)
            total = mp.mpf(0)
            for c, l in zip(self.coeffs, self.lambdas):
                s = lam_ + l
                total += c * (1 - mp.e ** (-s * T_)) / s
            return float(total)
