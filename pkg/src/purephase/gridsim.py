"""Discretized two-particle wavefunction: the independent numerical oracle.

Every closed-form quantity in the analytic modules has a counterpart here
computed by FFT propagation and quadrature on an (x1, x2) grid.  Conventions
match :mod:`purephase.optics`: Fresnel kernel exp(+1j*k*(x-x')^2/(2*z)) (so the
transfer function is exp(-1j*q^2*z*lam/(4*pi))) and Fourier transforms with
the exp(-1j*q*x) kernel, which is numpy's forward FFT.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .states import DomainError, GaussianBiphotonState

__all__ = ["GridSpec", "GridState", "discretize", "auto_grid_spec", "fft_fresnel", "grid_pft"]


@dataclass(frozen=True)
class GridSpec:
    """Uniform centred grid: axis i has n_i samples at pitch dx_i, origin -n_i/2*dx_i."""

    n1: int
    n2: int
    dx1: float
    dx2: float

    def __post_init__(self):
        for name in ("n1", "n2"):
            n = getattr(self, name)
            if n < 4 or (n & (n - 1)) != 0:
                raise DomainError(f"{name} must be a power of two >= 4, got {n}")
        for name in ("dx1", "dx2"):
            if not (getattr(self, name) > 0.0):
                raise DomainError(f"{name} must be positive")

    def axis(self, which: int) -> np.ndarray:
        n = self.n1 if which == 1 else self.n2
        dx = self.dx1 if which == 1 else self.dx2
        return (np.arange(n) - n // 2) * dx


@dataclass(frozen=True)
class GridState:
    """Complex two-particle amplitude sampled on a uniform grid.

    axis 0 of ``amplitudes`` is the first particle's coordinate.  After a
    partial Fourier transform the first axis holds a spatial frequency in
    rad/um instead of a position; the bookkeeping is identical.
    """

    amplitudes: np.ndarray
    dx1: float
    dx2: float
    x1_0: float
    x2_0: float
    wavelength: float

    @property
    def x1_axis(self) -> np.ndarray:
        return self.x1_0 + np.arange(self.amplitudes.shape[0]) * self.dx1

    @property
    def x2_axis(self) -> np.ndarray:
        return self.x2_0 + np.arange(self.amplitudes.shape[1]) * self.dx2

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.dx1 * self.dx2)

    def normalized(self) -> "GridState":
        return replace(self, amplitudes=self.amplitudes / math.sqrt(self.norm()))

    def density(self) -> np.ndarray:
        """|psi|^2 normalised as a continuous density (integrates to 1)."""
        d = np.abs(self.amplitudes) ** 2
        return d / (d.sum() * self.dx1 * self.dx2)

    # -- quadrature estimates ------------------------------------------------

    def marginal(self, which: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """(axis, density) of one particle's marginal distribution."""
        d = self.density()
        if which == 1:
            return self.x1_axis, d.sum(axis=1) * self.dx2
        return self.x2_axis, d.sum(axis=0) * self.dx1

    def marginal_std(self, which: int = 1) -> float:
        x, p = self.marginal(which)
        dx = self.dx1 if which == 1 else self.dx2
        total = p.sum() * dx
        mean = (x * p).sum() * dx / total
        var = ((x - mean) ** 2 * p).sum() * dx / total
        return math.sqrt(var)

    def conditional_slice(self, which: int = 1, at: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """Density profile of one particle with the other fixed at the nearest column."""
        d = self.density()
        if which == 1:
            idx = int(np.argmin(np.abs(self.x2_axis - at)))
            prof = d[:, idx]
            return self.x1_axis, prof
        idx = int(np.argmin(np.abs(self.x1_axis - at)))
        return self.x2_axis, d[idx, :]

    def conditional_std(self, which: int = 1, at: float = 0.0) -> float:
        x, p = self.conditional_slice(which, at)
        if p.sum() <= 0.0:
            raise DomainError("empty conditional slice")
        mean = (x * p).sum() / p.sum()
        var = ((x - mean) ** 2 * p).sum() / p.sum()
        return math.sqrt(var)

    def fedorov_ratio(self) -> float:
        return self.marginal_std(1) / self.conditional_std(1, 0.0)

    def conditional_mean_profile(self, which: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-column mean of the ``which`` coordinate, with column weights.

        Used to regress the conditional-mean slope against the closed form.
        """
        d = self.density()
        if which != 1:
            d = d.T
        x = self.x1_axis if which == 1 else self.x2_axis
        y = self.x2_axis if which == 1 else self.x1_axis
        weights = d.sum(axis=0)
        means = np.where(weights > 0, (x[:, None] * d).sum(axis=0) / np.maximum(weights, 1e-300), 0.0)
        return y, means, weights


# ---------------------------------------------------------------------------
# construction


def _sampling_requirements(state: GaussianBiphotonState, spec: GridSpec):
    """Check extent, pitch and phase-sampling adequacy; raise listing required n."""
    marg = [state.marginal_position_std(1), state.marginal_position_std(2)]
    cond = [state.conditional_position_std(1), state.conditional_position_std(2)]
    for axis, (n, dx) in enumerate(((spec.n1, spec.dx1), (spec.n2, spec.dx2))):
        extent = n * dx
        if extent < 8.0 * marg[axis]:
            need = 2 ** math.ceil(math.log2(8.0 * marg[axis] / dx))
            raise DomainError(
                f"grid axis {axis + 1} extent {extent:.3g} um < 8 marginal sigma "
                f"({8 * marg[axis]:.3g} um); need n >= {need} at this pitch"
            )
        if dx > cond[axis] / 8.0:
            raise DomainError(
                f"grid axis {axis + 1} pitch {dx:.3g} um exceeds sigma_min/8 = "
                f"{cond[axis] / 8.0:.3g} um"
            )
    # local phase gradient at the grid corner must stay below Nyquist
    half1 = spec.n1 * spec.dx1 / 2.0
    half2 = spec.n2 * spec.dx2 / 2.0
    k1 = 2.0 * (abs(state.m11.imag) * half1 + abs(state.m12.imag) * half2)
    k2 = 2.0 * (abs(state.m22.imag) * half2 + abs(state.m12.imag) * half1)
    if k1 * spec.dx1 > math.pi or k2 * spec.dx2 > math.pi:
        raise DomainError(
            "grid pitch cannot resolve the quadratic phase at the grid edge "
            f"(needs dx1 <= {math.pi / max(k1, 1e-300):.3g}, dx2 <= {math.pi / max(k2, 1e-300):.3g})"
        )


def auto_grid_spec(
    state: GaussianBiphotonState,
    extent_sigmas: float = 12.0,
    points_per_sigma: float = 8.0,
    max_n: int = 4096,
) -> GridSpec:
    """Smallest power-of-two grid meeting the sampling invariants with margin."""
    sigma_m = [state.marginal_position_std(1), state.marginal_position_std(2)]
    sigma_c = [state.conditional_position_std(1), state.conditional_position_std(2)]
    im_diag = [abs(state.m11.imag), abs(state.m22.imag)]
    im_cross = abs(state.m12.imag)
    dx = [sigma_c[0] / points_per_sigma, sigma_c[1] / points_per_sigma]
    n = [8, 8]
    for _ in range(80):
        for i in (0, 1):
            n[i] = max(8, 2 ** math.ceil(math.log2(extent_sigmas * sigma_m[i] / dx[i])))
        half = [n[0] * dx[0] / 2.0, n[1] * dx[1] / 2.0]
        ok = True
        for i in (0, 1):
            kmax = 2.0 * (im_diag[i] * half[i] + im_cross * half[1 - i])
            if kmax * dx[i] > 0.9 * math.pi:
                dx[i] = 0.8 * 0.9 * math.pi / kmax
                ok = False
        if ok:
            break
    if max(n) > max_n:
        raise DomainError(f"state needs n={max(n)} > max_n={max_n} grid points per axis")
    return GridSpec(n[0], n[1], dx[0], dx[1])


def discretize(state: GaussianBiphotonState, spec: GridSpec) -> GridState:
    """Pointwise evaluation of the state on the grid, renormalised to unit norm."""
    _sampling_requirements(state, spec)
    x1 = spec.axis(1)[:, None]
    x2 = spec.axis(2)[None, :]
    amp = state.evaluate(x1, x2)
    g = GridState(amp, spec.dx1, spec.dx2, float(spec.axis(1)[0]), float(spec.axis(2)[0]), state.wavelength)
    return g.normalized()


# ---------------------------------------------------------------------------
# propagation and transforms


def _axis_freq(n: int, dx: float) -> np.ndarray:
    return 2.0 * math.pi * np.fft.fftfreq(n, d=dx)


def _spectral_std(g: GridState, axis: int) -> float:
    spec = np.fft.fft(g.amplitudes, axis=axis)
    power = np.abs(spec) ** 2
    q = _axis_freq(g.amplitudes.shape[axis], g.dx1 if axis == 0 else g.dx2)
    shape = [1, 1]
    shape[axis] = q.size
    q = q.reshape(shape)
    total = power.sum()
    mean = (q * power).sum() / total
    return math.sqrt(((q - mean) ** 2 * power).sum() / total)


def fft_fresnel(g: GridState, z: float, target: str = "both") -> GridState:
    """Fresnel-propagate along the targeted axis (or both) by distance z (um).

    The propagated field must stay inside the grid: the marginal width after
    propagation is bounded by sigma_x + |z|*sigma_q/k, and that bound has to
    fit within a quarter of the grid extent per side.
    """
    axes = {"photon1": (0,), "photon2": (1,), "both": (0, 1)}.get(target)
    if axes is None:
        raise DomainError(f"target must be photon1, photon2 or both, got {target!r}")
    if z == 0.0:
        return g
    k = 2.0 * math.pi / g.wavelength
    amp = g.amplitudes
    for axis in axes:
        n = amp.shape[axis]
        dx = g.dx1 if axis == 0 else g.dx2
        sigma_x = g.marginal_std(axis + 1)
        sigma_q = _spectral_std(g, axis)
        predicted = sigma_x + abs(z) * sigma_q / k
        if n * dx < 8.0 * predicted:
            raise DomainError(
                f"propagation by {z:.3g} um grows axis {axis + 1} to sigma ~ "
                f"{predicted:.3g} um; grid extent {n * dx:.3g} um < 8 sigma"
            )
        q = _axis_freq(n, dx)
        shape = [1, 1]
        shape[axis] = n
        transfer = np.exp(-1j * q * q * z / (2.0 * k)).reshape(shape)
        amp = np.fft.ifft(np.fft.fft(amp, axis=axis) * transfer, axis=axis)
    return replace(g, amplitudes=amp)


def grid_pft(g: GridState, target: str = "photon1") -> GridState:
    """Partial Fourier transform: targeted axis goes to spatial frequency (rad/um)."""
    axes = {"photon1": (0,), "photon2": (1,), "both": (0, 1)}.get(target)
    if axes is None:
        raise DomainError(f"target must be photon1, photon2 or both, got {target!r}")
    amp = g.amplitudes
    dx = [g.dx1, g.dx2]
    origin = [g.x1_0, g.x2_0]
    for axis in axes:
        n = amp.shape[axis]
        q = _axis_freq(n, dx[axis])
        shape = [1, 1]
        shape[axis] = n
        spec = np.fft.fft(amp, axis=axis)
        # continuum amplitude: dx * exp(-i q x0) * DFT, unitary 1/sqrt(2 pi)
        spec = spec * np.exp(-1j * q * origin[axis]).reshape(shape)
        spec = np.fft.fftshift(spec, axes=axis) * dx[axis] / math.sqrt(2.0 * math.pi)
        dq = 2.0 * math.pi / (n * dx[axis])
        amp = spec
        dx[axis] = dq
        origin[axis] = -(n // 2) * dq
    return GridState(amp, dx[0], dx[1], origin[0], origin[1], g.wavelength)
