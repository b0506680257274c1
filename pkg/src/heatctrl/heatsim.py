"""Spectral simulation of the controlled heat equation on an interval.

States live in eigenbasis coordinates, so free evolution is the diagonal
decay e^{-lambda_j t} and boundary or interior control enters through the
modal Duhamel formula

    u_j(t) = e^{-lambda_j t} c_j + int_0^t e^{-lambda_j (t - u)} b_j(u) du,

with b_j = gamma_j g(u) for boundary control (gamma_j the control-side
trace) or the region-projected source for interior control.  When the
control carries a closed-form representation the Duhamel integral at the
final time is evaluated exactly per frequency; trajectory rows use an
exponentially weighted trapezoid on the control's sample grid.

Also here: heat-kernel evaluation with a computed tail bound, observability
quotients over a region, and the truncated-kernel lower-bound experiment
for the small-time cost rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .biorthogonal import ControlSignal
from .errors import ConfigurationError, DegenerateInputError, TruncationError
from .spectral import HeatState, SpectralBasis

__all__ = [
    "Trajectory",
    "ObservationRegion",
    "LowerBoundReport",
    "evolve_free",
    "simulate_boundary_control",
    "simulate_interior_control",
    "heat_kernel_eval",
    "observability_quotient",
    "lower_bound_experiment",
    "region_mass_matrix",
]


@dataclass(frozen=True)
class ObservationRegion:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ConfigurationError("region must have a < b")

    def clipped(self, X: float) -> "ObservationRegion":
        if self.a < 0 or self.b > X:
            raise ConfigurationError("region outside the interval")
        return self

    @property
    def length(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    coeffs: np.ndarray  # (n_times, n_modes)
    basis: SpectralBasis

    def state_at(self, idx: int) -> HeatState:
        return HeatState(self.coeffs[idx], self.basis.basis_id)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.coeffs, axis=1)

    def to_csv(self, path):
        with open(path, "w") as fh:
            cols = ",".join(f"mode{j+1}" for j in range(self.coeffs.shape[1]))
            fh.write(f"t,norm,{cols}\n")
            for t, row in zip(self.times, self.coeffs):
                fh.write(f"{t:.17g},{np.linalg.norm(row):.17g},"
                         + ",".join(f"{v:.17g}" for v in row) + "\n")


def evolve_free(basis: SpectralBasis, state: HeatState, dt: float) -> HeatState:
    """Diagonal decay c_j -> e^{-lambda_j dt} c_j."""
    if dt < 0:
        raise ConfigurationError("dt must be nonnegative")
    if state.basis_id != basis.basis_id:
        raise ConfigurationError("state/basis mismatch")
    lam = basis.lambdas[: len(state.coeffs)]
    return HeatState(state.coeffs * np.exp(-lam * dt), basis.basis_id)


def _control_on_simulation_window(g: ControlSignal, T: float):
    """Return a callable u in [0, T] -> g value, accepting either window layout."""
    lo, hi = g.window
    if abs(lo - (-T / 2.0)) < 1e-9 * max(1.0, T) and abs(hi - T / 2.0) < 2e-2 * T + 1e-9:
        return lambda u: g.eval_dense(np.asarray(u) - T / 2.0), -T / 2.0
    if abs(lo) < 1e-9 * max(1.0, T) and abs(hi - T) < 2e-2 * T + 1e-9:
        return lambda u: g.eval_dense(np.asarray(u)), 0.0
    raise ConfigurationError(
        f"control window {g.window} does not line up with [0, {T}] "
        f"or [-{T/2}, {T/2}]")


def _duhamel_exact_final(basis, g: ControlSignal, T: float, n_modes: int):
    """int_0^T e^{-lam_j (T-u)} g(u - T/2) du via the signal representation."""
    out = np.empty(n_modes)
    for j in range(n_modes):
        out[j] = g.rep.duhamel_weights(float(basis.lambdas[j]), T)
    return out


def simulate_boundary_control(basis: SpectralBasis, u0: HeatState,
                              g: ControlSignal, T: float,
                              n_times: int = 129,
                              n_modes: Optional[int] = None) -> Trajectory:
    """Trajectory of the boundary-controlled problem on [0, T].

    The terminal row is replaced by the exact per-frequency Duhamel value
    when the control carries its defining representation; intermediate rows
    use the exponentially weighted trapezoid on the control samples.
    """
    if u0.basis_id != basis.basis_id:
        raise ConfigurationError("state/basis mismatch")
    n_modes = basis.n_modes if n_modes is None else min(n_modes, basis.n_modes)
    coeffs0 = np.zeros(n_modes)
    coeffs0[: len(u0.coeffs)] = u0.coeffs[:n_modes]
    g_of_u, _shift = _control_on_simulation_window(g, T)

    n_fine = (max(4096, 8 * (n_times - 1)) // (n_times - 1)) * (n_times - 1) + 1
    us = np.linspace(0.0, T, n_fine)
    gu = np.asarray(g_of_u(us), dtype=float)

    times = np.linspace(0.0, T, n_times)
    lam = basis.lambdas[:n_modes]
    gam = basis.traces[:n_modes]
    co = np.empty((n_times, n_modes))
    co[0] = coeffs0

    # incremental exponentially weighted trapezoid, snapshots at the nested rows
    du = us[1] - us[0]
    decay = np.exp(-lam * du)
    stride = (n_fine - 1) // (n_times - 1)
    integ = np.zeros(n_modes)
    k = 1
    for i in range(1, n_fine):
        integ = integ * decay + 0.5 * du * (gu[i - 1] * decay + gu[i])
        if i == k * stride:
            co[k] = coeffs0 * np.exp(-lam * us[i]) + gam * integ
            k += 1

    # exact terminal row when a representation is available
    if g.rep is not None and hasattr(g.rep, "duhamel_weights"):
        co[-1] = coeffs0 * np.exp(-lam * T) + gam * _duhamel_exact_final(
            basis, g, T, n_modes)
    return Trajectory(times=times, coeffs=co, basis=basis)


def region_mass_matrix(basis: SpectralBasis, region: ObservationRegion,
                       n_modes: int, oversample: int = 4) -> np.ndarray:
    """M[j, k] = int_region e_j e_k dx by oversampled trapezoid.

    Grid resolution follows the shortest retained wavelength times the
    oversampling factor.
    """
    region.clipped(basis.X)
    lam_max = float(basis.lambdas[n_modes - 1])
    n_pts = int(oversample * max(64, math.sqrt(max(lam_max, 1.0)) / math.pi
                                 * 2.0 * region.length * 8))
    xs = np.linspace(region.a, region.b, n_pts)
    E = basis.eigfun_matrix(xs, count=n_modes)
    w = np.full(n_pts, xs[1] - xs[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return (E * w) @ E.T


def simulate_interior_control(basis: SpectralBasis, u0: HeatState, forcing,
                              region: ObservationRegion, T: float,
                              n_times: int = 129,
                              n_modes: Optional[int] = None) -> Trajectory:
    """Interior control 1_region * forcing(t, x) through the modal Duhamel sum.

    ``forcing`` is a callable (t_array, x_array) -> field array of shape
    (len(t), len(x)); its region projection onto each mode is integrated in
    time with the same exponentially weighted trapezoid as the boundary path.
    """
    if u0.basis_id != basis.basis_id:
        raise ConfigurationError("state/basis mismatch")
    n_modes = basis.n_modes if n_modes is None else min(n_modes, basis.n_modes)
    coeffs0 = np.zeros(n_modes)
    coeffs0[: len(u0.coeffs)] = u0.coeffs[:n_modes]

    lam_max = float(basis.lambdas[n_modes - 1])
    n_x = int(4 * max(64, math.sqrt(max(lam_max, 1.0)) / math.pi * 2.0
                      * region.length * 8))
    xs = np.linspace(region.a, region.b, n_x)
    wx = np.full(n_x, xs[1] - xs[0])
    wx[0] *= 0.5
    wx[-1] *= 0.5
    E = basis.eigfun_matrix(xs, count=n_modes)

    n_fine = max(2049, 8 * n_times)
    us = np.linspace(0.0, T, n_fine)
    F = np.asarray(forcing(us, xs), dtype=float)
    if F.shape != (n_fine, n_x):
        raise ConfigurationError("forcing returned a field of the wrong shape")
    b = F @ (E * wx).T  # (n_fine, n_modes) source coefficients

    lam = basis.lambdas[:n_modes]
    du = us[1] - us[0]
    decay = np.exp(-lam * du)
    times = np.linspace(0.0, T, n_times)
    stride = (n_fine - 1) // (n_times - 1)
    co = np.empty((n_times, n_modes))
    co[0] = coeffs0
    integ = np.zeros(n_modes)
    k = 1
    for i in range(1, n_fine):
        integ = integ * decay + 0.5 * du * (b[i - 1] * decay + b[i])
        if i == k * stride and k < n_times:
            co[k] = coeffs0 * np.exp(-lam * us[i]) + integ
            k += 1
    return Trajectory(times=times, coeffs=co, basis=basis)


def heat_kernel_eval(basis: SpectralBasis, t: float, x: float, y: float,
                     tol: float = 1e-10):
    """k(t, x, y) = sum_j e^{-lambda_j t} e_j(y) e_j(x), with its tail bound.

    Returns (value, tail_bound).  The bound uses the sup of the stored
    eigenfunction amplitudes and a geometric majorant of the remaining
    decay; if it exceeds tol the mode count is insufficient for this t.
    """
    if t <= 0:
        raise ConfigurationError("t must be positive")
    xs = np.array([x, y])
    J = basis.n_modes
    E = basis.eigfun_matrix(xs, count=J)
    lam = basis.lambdas
    # product grouped first so k(t, x, y) == k(t, y, x) bit for bit
    value = float(np.sum(np.exp(-lam * t) * (E[:, 0] * E[:, 1])))

    amp2 = float(np.max(E * E)) if basis.kind == "numeric-SL" else 2.0 / basis.X
    lam_next = float(basis.tail.lam(J + 1))
    gap = float(basis.tail.lam(J + 2) - lam_next)
    ratio = math.exp(-gap * t)
    bound = amp2 * math.exp(-lam_next * t) / max(1.0 - ratio, 1e-16)
    if bound > tol:
        raise TruncationError(
            f"kernel tail bound {bound:.2e} above tol at t = {t}", achieved=bound)
    return value, bound


def observability_quotient(traj: Trajectory, region: ObservationRegion,
                           T: float) -> float:
    """||u(T)|| / ||u||_{L^2((0,T) x region)} from a stored trajectory."""
    if traj.times[0] > 1e-12 or traj.times[-1] < T - 1e-12:
        raise ConfigurationError("trajectory does not cover [0, T]")
    n_modes = traj.coeffs.shape[1]
    M = region_mass_matrix(traj.basis, region, n_modes)
    dens = np.einsum("tj,jk,tk->t", traj.coeffs, M, traj.coeffs)
    dens = np.maximum(dens, 0.0)
    mask = traj.times <= T + 1e-12
    window_sq = float(np.trapezoid(dens[mask], traj.times[mask]))
    if window_sq <= 0:
        raise DegenerateInputError("observation window carries no signal")
    idx = int(np.argmin(np.abs(traj.times - T)))
    final = float(np.linalg.norm(traj.coeffs[idx]))
    return final / math.sqrt(window_sq)


@dataclass(frozen=True)
class LowerBoundReport:
    T: float
    q: float
    minus_T_ln_q: float
    d_squared_over_4: float
    eps: float
    y: float
    modes_used: int

    def as_dict(self) -> dict:
        return {
            "T": self.T,
            "q": self.q,
            "minus_T_ln_q": self.minus_T_ln_q,
            "d_squared_over_4": self.d_squared_over_4,
            "eps": self.eps,
            "y": self.y,
            "modes_used": self.modes_used,
        }


def distance_to_region(y: float, region: ObservationRegion, X: float) -> float:
    """Euclidean distance from y to the closed region inside [0, X]."""
    if region.a <= y <= region.b:
        return 0.0
    return min(abs(y - region.a), abs(y - region.b))


def lower_bound_experiment(basis: SpectralBasis, region: ObservationRegion,
                           y: float, T: float, eps: Optional[float] = None,
                           n_times: int = 513) -> LowerBoundReport:
    """Observability quotient of near-kernel data concentrated away from the region.

    Data: c_j = e^{-eps T lambda_j} e_j(y) over the modes with
    sqrt(lambda_j) <= 1/(eps T); the free solution is compared on the
    region against its final norm, and -T ln q estimates the small-time
    rate, to be held against d(y, region)^2 / 4.
    """
    region.clipped(basis.X)
    if region.a <= y <= region.b:
        raise ConfigurationError("y must lie outside the closed region")
    d = distance_to_region(y, region, basis.X)
    if eps is None:
        beta = 0.9 * d * d / 4.0
        eps = min(0.2, 1.0 / (8.0 * beta))
    cutoff = 1.0 / (eps * T)
    lam = basis.lambdas
    live = np.sqrt(np.maximum(lam, 0.0)) <= cutoff
    if np.sqrt(max(lam[-1], 0.0)) < cutoff:
        raise TruncationError(
            f"need modes with sqrt(lambda) up to {cutoff:.1f}, basis stops at "
            f"{math.sqrt(max(lam[-1], 0.0)):.1f}", achieved=float(np.sqrt(lam[-1])))
    n_live = int(np.max(np.nonzero(live)[0])) + 1

    ey = basis.eigfun_matrix(np.array([y]), count=n_live)[:, 0]
    c0 = np.exp(-eps * T * lam[:n_live]) * ey
    times = np.linspace(0.0, T, n_times)
    co = c0[None, :] * np.exp(-lam[None, :n_live] * times[:, None])
    traj = Trajectory(times=times, coeffs=co, basis=basis)
    q = 1.0 / observability_quotient(traj, region, T)
    return LowerBoundReport(
        T=T, q=q, minus_T_ln_q=-T * math.log(q), d_squared_over_4=d * d / 4.0,
        eps=eps, y=y, modes_used=n_live)
