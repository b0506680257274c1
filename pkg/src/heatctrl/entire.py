"""Entire functions driving the biorthogonal construction.

Three families are evaluated here, all in log-domain arithmetic because
their magnitudes travel between exp(-900) and exp(+900):

* the eigenvalue products  f_n(z) = prod_{k != n} (1 - z / lambda_k),
  whose infinite tails are summed in closed form through log-Gamma
  (prod_{k>K} (1 - w^2/(k+b)^2) = Gamma(1+B)^2 / (Gamma(1+B+w) Gamma(1+B-w))
  with B = K + b), so a 64-mode basis still yields 1e-12 products;

* the even multiplier  M(z) = prod_n sinc(z / a_n)  built from a K-fold
  zero at a0 plus the lattice (m/A)^2, m > K, whose counting function
  vanishes below a0 and tracks [A sqrt(r)] above it;

* the normalized frequency data  G_n = F_n M_n  with F_n(z) =
  f_n(-iz)/f_n(lambda_n) and M_n(z) = M(z)/M(i lambda_n), which is what the
  Fourier side of the control synthesis integrates.

Real-axis grids are evaluated through array paths that share work across
the whole grid; scalars go through LogComplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import loggamma, polygamma, zeta

from .errors import ConfigurationError, TruncationError
from .logdomain import LogComplex, log_abs_sinc_real, log_sinc, wrap_phase_array
from .spectral import SpectralBasis

__all__ = [
    "MultiplierSpec",
    "GnEvaluator",
    "sigma_star",
    "make_multiplier",
    "log_M",
    "log_f_n",
    "log_F_n",
    "log_F_n_alt",
    "log_G_n",
    "ALPHA_2",
]

ALPHA_2 = 2.0 * (36.0 / 37.0) ** 2
_SLOPE_RATIO = 37.0 / 18.0  # d/A floor from the small-x multiplier estimate


def sigma_star(tol: float = 1e-12):
    """The series Sigma* = sum_k zeta(2k) / (k (4k-1) pi^{2k}) and the two rates.

    Terms fall off like pi^{-2k}; summation stops once a term drops below
    tol / 10 and the geometric tail is folded into the result.  Returns
    (Sigma*, alpha_1, alpha_2) with alpha_1 = 4/(2 + Sigma*) and
    alpha_2 = 2 (36/37)^2.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    total = 0.0
    k = 1
    while True:
        term = zeta(2.0 * k) / (k * (4.0 * k - 1.0) * math.pi ** (2 * k))
        total += term
        if term < tol / 10.0 or k > 400:
            # remaining terms are below term * r / (1 - r) with r ~ pi^-2
            total += term * 0.113
            break
        k += 1
    alpha1 = 4.0 / (2.0 + total)
    return total, alpha1, ALPHA_2


# ---------------------------------------------------------------------------
# multiplier


@dataclass(frozen=True)
class MultiplierSpec:
    """Zero data of the even sinc-product multiplier.

    Zeros: a0 with multiplicity K, then (m/A)^2 for integers m > K.  The
    counting function is 0 below a0 and max(K, [A sqrt(r)]) above, and the
    exponential type sum_n 1/a_n stays below tau.
    """

    d: float
    tau: float
    A: float
    a0: float
    K: int

    def __post_init__(self):
        eps = self.eps_ratio
        # open interval, with a guard band so d = 37A/18 is rejected despite rounding
        if not (1e-9 < eps < 1.0 / 6.0 - 1e-9):
            raise ConfigurationError(
                f"slope ratio d/A - 37/18 = {eps:.6g} outside (0, 1/6)")
        if self.a0 < self.A ** (-2.0):
            raise ConfigurationError(
                f"a0 = {self.a0:.6g} below A^-2; tau = {self.tau:.6g} too large")

    @property
    def eps_ratio(self) -> float:
        return self.d / self.A - _SLOPE_RATIO

    @property
    def m_start(self) -> int:
        return self.K + 1

    def lattice_zero(self, m) -> np.ndarray:
        return (np.asarray(m, dtype=float) / self.A) ** 2

    def type_sum(self):
        """(sum_n 1/a_n computed exactly, the budget tau)."""
        exact = self.K / self.a0 + self.A**2 * float(polygamma(1, self.m_start))
        return exact, self.tau

    def zeros(self, count: int) -> np.ndarray:
        lattice = self.lattice_zero(np.arange(self.m_start, self.m_start + max(0, count - self.K)))
        return np.concatenate([np.full(min(self.K, count), self.a0), lattice])[:count]

    def counting_function(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        above = np.maximum(self.K, np.floor(self.A * np.sqrt(np.maximum(r, 0.0))))
        return np.where(r >= self.a0, above, 0.0)


def make_multiplier(d: float, tau: float) -> MultiplierSpec:
    """Multiplier spec for decay rate d and type budget tau.

    Policy: slope ratio fixed at the midpoint 1/12 of its admissible
    interval, A = d / (37/18 + 1/12), a0 = (2A/tau)^2, K = ceil(A sqrt(a0)).
    The zero lattice starts at m = K + 1 so the type sum stays under tau
    even when the ceiling rounds K up.
    """
    if d <= 0 or tau <= 0:
        raise ConfigurationError("d and tau must be positive")
    A = d / (_SLOPE_RATIO + 1.0 / 12.0)
    a0 = (2.0 * A / tau) ** 2
    K = int(math.ceil(A * math.sqrt(a0) - 1e-12))
    return MultiplierSpec(d=d, tau=tau, A=A, a0=a0, K=K)


def _lattice_cutoff(spec: MultiplierSpec, absz_max: float) -> int:
    """Largest lattice index evaluated directly: a_m <= 2 |z|."""
    return max(spec.m_start - 1, int(math.floor(spec.A * math.sqrt(2.0 * max(absz_max, 0.0)))))


def _log_sinc_tail_powers(spec: MultiplierSpec, m_big: int, n_terms: int = 12):
    """Coefficients c_j with  sum_{m>m_big} log sinc(z/a_m) = sum_j c_j z^{2j}.

    From log sinc t = -sum_j zeta(2j)/(j pi^{2j}) t^{2j} and a_m = (m/A)^2:
    c_j = -zeta(2j)/(j pi^{2j}) A^{4j} zeta_H(4j, m_big+1).
    """
    js = np.arange(1, n_terms + 1, dtype=float)
    coef = -(zeta(2 * js) / (js * np.pi ** (2 * js)))
    coef = coef * spec.A ** (4 * js) * zeta(4 * js, m_big + 1)
    return coef


def log_M(spec: MultiplierSpec, z: complex, tol: float = 1e-12) -> LogComplex:
    """log of  prod_n sinc(z / a_n)  at a single complex point.

    Zeros with a_n <= 2|z| are multiplied in directly; the remainder is the
    quadratic-and-beyond sinc series summed in closed form over the lattice,
    with the neglected part below tol.  Always converges; |M(ix)| >= 1 comes
    out of sinh(t)/t >= 1 factor by factor.
    """
    z = complex(z)
    out = log_sinc(z / spec.a0) ** spec.K
    m_big = _lattice_cutoff(spec, abs(z))
    if m_big >= spec.m_start:
        for m in range(spec.m_start, m_big + 1):
            out = out * log_sinc(z / spec.lattice_zero(m))
        if out.is_zero:
            return out
    coef = _log_sinc_tail_powers(spec, max(m_big, spec.m_start - 1))
    zz = z * z
    acc = 0.0 + 0.0j
    power = 1.0 + 0.0j
    for c in coef:
        power *= zz
        acc += c * power
    return out * LogComplex(acc.real, acc.imag)


def _log_abs_M_real_array(spec: MultiplierSpec, xs: np.ndarray):
    """(ln|M(x)|, sign) on a real grid, sharing the lattice across the grid."""
    xs = np.abs(np.asarray(xs, dtype=float))
    block = log_abs_sinc_real(xs / spec.a0)
    logmag = spec.K * block
    sign = np.where(np.sin(xs / spec.a0) < 0, -1.0, 1.0) ** spec.K
    sign = np.where(np.isneginf(block), 0.0, sign)

    m_big = _lattice_cutoff(spec, float(np.max(xs, initial=0.0)))
    if m_big >= spec.m_start:
        ms = np.arange(spec.m_start, m_big + 1, dtype=float)
        zeros_m = (ms / spec.A) ** 2
        # chunked so the (n_x, n_m) intermediate stays modest
        for lo in range(0, len(zeros_m), 256):
            blk = zeros_m[lo: lo + 256]
            theta = xs[:, None] / blk[None, :]
            logmag += np.sum(log_abs_sinc_real(theta), axis=1)
            sign *= np.prod(np.where(np.sin(theta) < 0, -1.0, 1.0), axis=1)

    coef = _log_sinc_tail_powers(spec, max(m_big, spec.m_start - 1))
    xx = xs * xs
    tail = np.zeros_like(xs)
    power = np.ones_like(xs)
    for c in coef:
        power = power * xx
        tail += c * power
    return logmag + tail, sign


def _log_M_imag(spec: MultiplierSpec, y: float, tol: float = 1e-12) -> float:
    """ln M(iy) for real y (positive real value, used as the G_n normalizer)."""
    return log_M(spec, 1j * float(y), tol=tol).logmag


# ---------------------------------------------------------------------------
# eigenvalue products


def _gamma_tail_quadratic(a: float, b: float, K: int, Z) -> np.ndarray:
    """sum_{k>K} log(1 - Z / (a (k+b)^2)) via the log-Gamma closed form.

    prod_{k>K} (1 - w^2/(k+b)^2) = Gamma(1+B)^2 / (Gamma(1+B+w) Gamma(1+B-w))
    with B = K + b and w = sqrt(Z/a); vectorized over Z.
    """
    B = K + b
    w = np.sqrt(np.asarray(Z, dtype=complex) / a)
    return 2.0 * loggamma(1.0 + B) - loggamma(1.0 + B + w) - loggamma(1.0 + B - w)


def _model_tail(basis: SpectralBasis, K: int, z) -> np.ndarray:
    """sum_{k>K} log(1 - z/mu_k) for the basis tail model mu_k = a(k+b)^2 + s."""
    t = basis.tail
    if t.s == 0.0:
        return _gamma_tail_quadratic(t.a, t.b, K, z)
    return (_gamma_tail_quadratic(t.a, t.b, K, np.asarray(z, dtype=complex) - t.s)
            - _gamma_tail_quadratic(t.a, t.b, K, -t.s))


def _tail_start_index(basis: SpectralBasis, absz: float, n_protect: int = 0) -> int:
    """Smallest K so the tail model holds and mu_{K+1} >= 2 |z|."""
    t = basis.tail
    need = max(0.0, (2.0 * absz - t.s) / t.a)
    K = int(math.ceil(math.sqrt(need) - t.b)) if need > 0 else 0
    return max(K, n_protect + 1, 8, basis.n_modes // 2 if not t.exact else 0)


def _model_tail_error(basis: SpectralBasis, K: int, absz: float) -> float:
    """Bound on the tail error from using the model from index K+1 on.

    The model replaces measured eigenvalues on (K, n_modes] and extrapolates
    beyond; both carry |lambda - model| <= delta, and K is chosen so that
    mu_{K+1} >= 2|z|, hence |d log(1 - z/mu)/d mu| <= 2|z|/mu^2.
    """
    t = basis.tail
    if t.exact:
        return 0.0
    return float(t.delta * 2.0 * absz * zeta(4.0, K + 1 + t.b) / t.a**2)


def log_f_n(basis: SpectralBasis, n: int, z: complex, tol: float = 1e-10) -> LogComplex:
    """log of  prod_{k != n} (1 - z / lambda_k)  over the full spectrum.

    Stored eigenvalues are multiplied in directly, the infinite remainder is
    the closed-form Gamma tail of the basis model.  Exact zeros (z equal to a
    stored lambda_k) are returned as log-domain zeros.
    """
    if not 1 <= n <= basis.n_modes:
        raise ConfigurationError(f"mode index {n} outside stored range")
    z = complex(z)
    K = _tail_start_index(basis, abs(z), n_protect=n)
    if K > basis.n_modes and not basis.tail.exact:
        raise TruncationError(
            f"|z| = {abs(z):.3g} needs modes beyond the stored {basis.n_modes} "
            "and the tail model is not exact", achieved=None)
    err = _model_tail_error(basis, K, abs(z))
    if err > tol:
        raise TruncationError(
            f"tail model error bound {err:.2e} exceeds tol {tol:.2e}", achieved=err)

    ks = np.arange(1, K + 1)
    lam = basis.lam_extended(ks)
    if z.imag == 0.0:
        # real arithmetic keeps 1 - lam_k/lam_k an exact zero
        factors = (1.0 - z.real / lam[ks != n]).astype(complex)
    else:
        factors = 1.0 - z / lam[ks != n]
    if np.any(factors == 0.0):
        return LogComplex.zero()
    total = complex(np.sum(np.log(factors))) + complex(_model_tail(basis, K, z))
    return LogComplex(total.real, total.imag)


def log_F_n(basis: SpectralBasis, n: int, z: complex, tol: float = 1e-10) -> LogComplex:
    """log of the normalized product F_n(z) = f_n(-iz) / f_n(lambda_n).

    Real z is the frequency axis used in the L^2 estimates; z = i lambda_k
    hits the interpolation data (zero for k != n, one at k = n).
    """
    num = log_f_n(basis, n, -1j * complex(z), tol=tol)
    den = log_f_n(basis, n, complex(basis.lambdas[n - 1]), tol=tol)
    return num / den


def log_F_n_alt(basis: SpectralBasis, n: int, z: complex, tol: float = 1e-10) -> LogComplex:
    """log of  prod_{k != n} [1 - ((z - lambda_n)/(lambda_k - lambda_n))^2].

    Cross-check family with the same zeros along the shifted real axis and
    growth 2 pi sqrt|z - lambda_n|; normalized to 1 at z = lambda_n.
    """
    if not 1 <= n <= basis.n_modes:
        raise ConfigurationError(f"mode index {n} outside stored range")
    z = complex(z)
    lam_n = float(basis.lambdas[n - 1])
    w = z - lam_n
    K = _tail_start_index(basis, abs(w) + abs(lam_n), n_protect=n)
    if K > basis.n_modes and not basis.tail.exact:
        raise TruncationError(
            "alt product needs modes beyond the stored range", achieved=None)
    err = 2.0 * _model_tail_error(basis, K, abs(w) + abs(lam_n))
    if err > tol:
        raise TruncationError(
            f"tail model error bound {err:.2e} exceeds tol {tol:.2e}", achieved=err)

    ks = np.arange(1, K + 1)
    lam = basis.lam_extended(ks)
    gaps = lam[ks != n] - lam_n
    if w.imag == 0.0:
        factors = (1.0 - (w.real / gaps) ** 2).astype(complex)
    else:
        factors = 1.0 - (w / gaps) ** 2
    if np.any(factors == 0.0):
        return LogComplex.zero()
    total = complex(np.sum(np.log(factors)))
    # tail: split each quadratic factor into (1 -+ w/(mu_k - lambda_n))
    t = basis.tail
    for ww in (w, -w):
        total += complex(_gamma_tail_quadratic(t.a, t.b, K, ww + (lam_n - t.s))
                         - _gamma_tail_quadratic(t.a, t.b, K, lam_n - t.s))
    return LogComplex(total.real, total.imag)


# ---------------------------------------------------------------------------
# shared real-axis grid evaluation


def _log_f_all_imag_array(basis: SpectralBasis, xs: np.ndarray, tol: float = 1e-10):
    """(logmag, phase) of  prod_{k>=1} (1 - (-ix)/lambda_k)  over a real grid.

    The hot path of the Fourier-side synthesis: stored modes vectorized
    against the whole grid, model modes likewise, Gamma tail beyond.
    """
    xs = np.asarray(xs, dtype=float)
    absmax = float(np.max(np.abs(xs), initial=0.0))
    K = _tail_start_index(basis, absmax)
    if K > basis.n_modes and not basis.tail.exact:
        raise TruncationError("grid reaches past the stored modes of a numeric basis",
                              achieved=None)
    err = _model_tail_error(basis, K, absmax)
    if err > tol:
        raise TruncationError(f"tail model error bound {err:.2e} exceeds tol",
                              achieved=err)

    logmag = np.zeros_like(xs)
    phase = np.zeros_like(xs)
    ks = np.arange(1, K + 1)
    lam = basis.lam_extended(ks)
    for lo in range(0, K, 256):
        blk = lam[lo: lo + 256]
        r = xs[:, None] / blk[None, :]
        logmag += 0.5 * np.sum(np.log1p(r * r), axis=1)
        phase += np.sum(np.arctan(r), axis=1)

    tail = _model_tail(basis, K, -1j * xs)
    return logmag + tail.real, wrap_phase_array(phase + tail.imag)


# ---------------------------------------------------------------------------
# G_n evaluator


@dataclass(frozen=True)
class GnEvaluator:
    """Evaluator of G_n = F_n M_n with its normalizers and fitted envelope.

    The envelope  ln|G_n(x)| <= env_const - eps sqrt|x|  is fitted once on a
    log grid at construction and drives every later truncation decision.
    """

    basis: SpectralBasis
    n: int
    eps: float
    tau: float
    spec: MultiplierSpec
    log_fn_lam: LogComplex = field(repr=False)
    log_M_ilam: float
    env_const: float
    tol: float

    @staticmethod
    def build(basis: SpectralBasis, n: int, T: Optional[float] = None,
              eps: float = 0.05, tau: Optional[float] = None,
              tol: float = 1e-10) -> "GnEvaluator":
        """Construct for window length T (tau = T/2) or an explicit tau."""
        if tau is None:
            if T is None:
                raise ConfigurationError("give either T or tau")
            tau = T / 2.0
        d = math.pi + 2.0 * eps
        spec = make_multiplier(d, tau)
        log_fn_lam = log_f_n(basis, n, complex(basis.lambdas[n - 1]), tol=tol)
        lam_n = float(basis.lambdas[n - 1])
        log_M_ilam = _log_M_imag(spec, lam_n)

        ev = GnEvaluator(basis=basis, n=n, eps=eps, tau=tau, spec=spec,
                         log_fn_lam=log_fn_lam, log_M_ilam=log_M_ilam,
                         env_const=math.inf, tol=tol)
        env = ev._fit_envelope()
        return GnEvaluator(basis=basis, n=n, eps=eps, tau=tau, spec=spec,
                           log_fn_lam=log_fn_lam, log_M_ilam=log_M_ilam,
                           env_const=env, tol=tol)

    # -- evaluation -----------------------------------------------------

    def log_G_array(self, xs: np.ndarray):
        """(logmag, phase) of G_n on a real grid."""
        xs = np.asarray(xs, dtype=float)
        sgn = np.sign(xs)
        ax = np.abs(xs)
        lm_f, ph_f = _log_f_all_imag_array(self.basis, ax, tol=self.tol)
        lam_n = float(self.basis.lambdas[self.n - 1])
        r = ax / lam_n
        lm_f -= 0.5 * np.log1p(r * r)
        ph_f -= np.arctan(r)
        lm_m, sign_m = _log_abs_M_real_array(self.spec, ax)
        logmag = lm_f + lm_m - self.log_M_ilam - self.log_fn_lam.logmag
        phase = ph_f - self.log_fn_lam.phase + np.where(sign_m < 0, math.pi, 0.0)
        logmag = np.where(sign_m == 0.0, -np.inf, logmag)
        # G_n(-x) = conj(G_n(x)) on the real axis
        phase = wrap_phase_array(np.where(sgn < 0, -phase, phase))
        return logmag, phase

    def log_G(self, z: complex) -> LogComplex:
        """G_n at a single point, real or complex (i lambda_k reachable)."""
        z = complex(z)
        if z.imag == 0.0:
            lm, ph = self.log_G_array(np.array([z.real]))
            return LogComplex(float(lm[0]), float(ph[0]))
        fn = log_f_n(self.basis, self.n, -1j * z, tol=self.tol)
        m = log_M(self.spec, z, tol=self.tol)
        return (fn / self.log_fn_lam) * m / LogComplex(self.log_M_ilam, 0.0)

    def envelope(self, x) -> np.ndarray:
        """Upper bound for ln|G_n| on the real axis."""
        return self.env_const - self.eps * np.sqrt(np.abs(np.asarray(x, dtype=float)))

    def _fit_envelope(self) -> float:
        lam_n = float(self.basis.lambdas[self.n - 1])
        hi = max(64.0 * self.spec.a0, 16.0 * lam_n, 1e3)
        while True:
            xs = np.geomspace(1e-2, hi, 600)
            lm, _ = self.log_G_array(xs)
            resid = lm + self.eps * np.sqrt(xs)
            k = int(np.argmax(resid))
            if k < len(xs) - 10 or hi > 1e14:
                break
            hi *= 16.0
        # small additive margin over the sampled sup
        return float(resid[k]) + 0.5

    def tail_cut(self, rel_tol: float) -> float:
        """X so the envelope mass beyond X is below rel_tol of the total.

        Uses int_X^inf e^{c - eps sqrt x} dx = e^c (2/eps^2) (1 + eps sqrt X)
        e^{-eps sqrt X} against the full-line value e^c (2/eps^2) * 2.
        """
        if not 0 < rel_tol < 1:
            raise ConfigurationError("rel_tol must be in (0, 1)")
        u = 20.0  # solves (1+u) e^-u = 2 rel_tol, refined below
        for _ in range(60):
            u = -math.log(2.0 * rel_tol / (1.0 + u))
        return (u / self.eps) ** 2

    def norm_freq_sq(self, rel_tol: float = 1e-9):
        """integral of |G_n|^2 over the real line by envelope-cut trapezoid.

        Returns (log of the integral, X_max used).  |G|^2 is band-limited to
        [-2 tau_M, 2 tau_M] (autocorrelation support), so the trapezoid sum
        is alias-free once the spacing is below pi / tau_M; only the X cut
        and value roundoff remain.
        """
        X = self.tail_cut(rel_tol)
        h = math.pi / (4.0 * max(self.tau, 0.25))
        n = min(int(X / h) + 2, 4_000_001)
        xs = np.linspace(0.0, X, n)
        lm, _ = self.log_G_array(xs)
        peak = float(np.max(lm))
        vals = np.exp(2.0 * (lm - peak))
        integral = 2.0 * np.trapezoid(vals, dx=float(xs[1] - xs[0]))
        return 2.0 * peak + math.log(integral), X


def log_G_n(evaluator: GnEvaluator, x) -> LogComplex:
    """G_n at a real frequency (module-level convenience wrapper)."""
    return evaluator.log_G(x)
