"""Quantum statistics: complete Fermi-Dirac / Bose-Einstein integrals,
fugacity solves, degeneracy classification and the threshold hbar*.

Conventions
-----------
``K_nu(z) = Gamma(nu)^{-1} int_0^inf x^{nu-1} / (z^{-1} e^x + s) dx`` with
``s = +1`` (Fermi, ``F_nu = -Li_nu(-z)``) or ``s = -1`` (Bose, ``B_nu = Li_nu(z)``).
Fermi quantities are solved on the scale ``mu = ln z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, optimize, special

CLASSICAL, FERMI, BOSE = "classical", "fermi", "bose"

# Sommerfeld expansion replaces quadrature of the Fermi integral above this mu
MU_SOMMERFELD = 25.0
SATURATION_TOL = 1e-9


class BracketError(ValueError):
    """No sign change on the (expanded) bracket."""


class IterationCapError(RuntimeError):
    """Root finder hit its iteration cap."""


# ---------------------------------------------------------------- Gamma, zeta


def zeta(nu: float) -> float:
    """Riemann zeta for ``nu > 1``."""
    if not nu > 1:
        raise ValueError(f"zeta requires nu > 1, got {nu}")
    return float(special.zeta(nu))


def gamma_fn(nu: float) -> float:
    """Euler Gamma for ``nu > 0``."""
    if not nu > 0:
        raise ValueError(f"gamma_fn requires nu > 0, got {nu}")
    return float(special.gamma(nu))


# ---------------------------------------------------------------- polylog


def _li_series(s: float, x: float) -> float:
    """``sum_k x^k / k^s`` for ``|x| <= 3/4``; truncated below 1e-18."""
    if x == 0.0:
        return 0.0
    kmax = int(math.ceil(42.0 / -math.log(abs(x)))) + 2
    k = np.arange(1, kmax + 1, dtype=float)
    terms = np.exp(k * math.log(abs(x)) - s * np.log(k))
    if x < 0:
        terms[::2] *= -1.0
    return float(np.sum(terms[::-1]))


def _li_log_expansion(s: float, mu: float) -> float:
    """``Li_s(e^mu)`` for ``-2 < mu <= 0`` by the expansion about ``mu = 0``.

    ``Li_s(e^mu) = Gamma(1-s)(-mu)^{s-1} + sum_k zeta(s-k) mu^k / k!`` for
    non-integer ``s``; integer ``s = m`` replaces the singular pair by
    ``mu^{m-1}/(m-1)! (H_{m-1} - ln(-mu))``.
    """
    m = round(s)
    integer = abs(s - m) < 1e-14 and m >= 1
    total = 0.0
    if integer:
        if mu < 0:
            harmonic = sum(1.0 / i for i in range(1, m))
            total += mu ** (m - 1) / math.factorial(m - 1) * (harmonic - math.log(-mu))
    elif mu < 0:
        total += float(special.gamma(1.0 - s)) * (-mu) ** (s - 1.0)
    elif s < 1:
        raise ValueError("Li_s(1) diverges for s <= 1")
    term_scale = 1.0
    for k in range(0, 120):
        if k > 0:
            term_scale *= mu / k
        if integer and k == m - 1:
            continue
        t = float(special.zeta(s - k)) * term_scale
        total += t
        # zeta vanishes at negative even integers, so zero terms do not signal convergence
        if k > 4 and t != 0 and abs(t) < 1e-18 * max(abs(total), 1e-300):
            break
    return total


def _bose_quad(nu: float, z: float) -> float:
    """Defining-integral evaluation of ``B_nu(z)``; reference path."""
    mu = math.log(z)

    def occ(x):
        # 1 / (e^{x - mu} - 1), written to stay accurate near x - mu -> 0
        with np.errstate(over="ignore"):
            return 1.0 / np.expm1(x - mu)

    head, _ = integrate.quad(occ, 0.0, 1.0, weight="alg", wvar=(nu - 1.0, 0.0),
                             epsabs=0.0, epsrel=1e-13, limit=200)
    tail, _ = integrate.quad(lambda x: x ** (nu - 1.0) * occ(x), 1.0, np.inf,
                             epsabs=0.0, epsrel=1e-13, limit=200)
    return (head + tail) / gamma_fn(nu)


def _bose_scalar(nu: float, z: float) -> float:
    if not z > 0:
        raise ValueError(f"bose_integral requires z > 0, got {z}")
    if z > 1 or (z == 1 and nu <= 1):
        raise ValueError(f"bose_integral outside domain: nu={nu}, z={z}")
    if nu == 1:
        return -math.log1p(-z)
    if z <= 0.75:
        return _li_series(nu, z)
    return _li_log_expansion(nu, math.log(z))


def bose_integral(nu: float, z):
    """Complete Bose-Einstein integral ``B_nu(z) = Li_nu(z)``.

    Parameters
    ----------
    nu : float
        Order, ``nu > 0``.
    z : float or array_like
        Fugacity, ``0 < z < 1`` (``z = 1`` allowed when ``nu > 1``).
    """
    if np.ndim(z) == 0:
        return _bose_scalar(float(nu), float(z))
    return np.array([_bose_scalar(float(nu), float(v)) for v in np.ravel(z)]).reshape(np.shape(z))


# ---------------------------------------------------------------- Fermi


def _fermi_quad_mu(nu: float, mu: float) -> float:
    """Adaptive quadrature of the defining integral, split at ``x = mu``."""
    a = max(mu, 1.0)
    occ = lambda x: special.expit(mu - x)
    head, _ = integrate.quad(occ, 0.0, a, weight="alg", wvar=(nu - 1.0, 0.0),
                             epsabs=0.0, epsrel=1e-13, limit=400)
    mid, _ = integrate.quad(lambda x: x ** (nu - 1.0) * occ(x), a, a + 60.0,
                            epsabs=0.0, epsrel=1e-13, limit=400)
    tail, _ = integrate.quad(lambda x: x ** (nu - 1.0) * occ(x), a + 60.0, np.inf,
                             epsabs=0.0, epsrel=1e-10, limit=100)
    return (head + mid + tail) / gamma_fn(nu)


def _fermi_sommerfeld_mu(nu: float, mu: float) -> float:
    """Sommerfeld series at large ``mu`` (exact for integer ``nu``).

    ``F_nu(e^mu) = 2 sum_k eta(2k) mu^{nu-2k} / Gamma(nu+1-2k)
    - cos(pi nu) F_nu(e^{-mu})`` with ``eta(0) = 1/2`` and
    ``eta(2k) = (1 - 2^{1-2k}) zeta(2k)``; summed until the terms stop
    shrinking.  The leading correction is ``pi^2 nu(nu-1) / (6 mu^2)``.
    """
    total = mu**nu * special.rgamma(nu + 1.0)
    prev = math.inf
    for k in range(1, 60):
        eta = (1.0 - 2.0 ** (1 - 2 * k)) * float(special.zeta(2 * k))
        t = 2.0 * eta * mu ** (nu - 2 * k) * special.rgamma(nu + 1.0 - 2 * k)
        if abs(t) >= prev:
            break
        total += t
        prev = abs(t) if t != 0 else prev
        if abs(t) < 1e-18 * abs(total):
            break
    return total - math.cos(math.pi * nu) * _fermi_small(nu, math.exp(-mu))


def _fermi_small(nu: float, z: float) -> float:
    """``F_nu(z)`` for ``0 < z <= 1``."""
    if z <= 0.5:
        return -_li_series(nu, -z)
    if nu == 1:
        return math.log1p(z)
    if nu < 1:
        return _fermi_quad_mu(nu, math.log(z))
    # F_nu(z) = Li_nu(z) - 2^{1-nu} Li_nu(z^2)
    return _bose_scalar(nu, z) - 2.0 ** (1.0 - nu) * _bose_scalar(nu, z * z)


def fermi_integral_mu(nu: float, mu: float) -> float:
    """``F_nu(e^mu)`` evaluated on the ``mu = ln z`` scale."""
    if mu <= 0:
        return _fermi_small(nu, math.exp(mu))
    if mu >= MU_SOMMERFELD:
        return _fermi_sommerfeld_mu(nu, mu)
    return _fermi_quad_mu(nu, mu)


def fermi_integral(nu: float, z):
    """Complete Fermi-Dirac integral ``F_nu(z) = -Li_nu(-z)``.

    Parameters
    ----------
    nu : float
        Order, ``nu > 0``.
    z : float or array_like
        Fugacity, ``z > 0``.
    """

    def one(v):
        if not v > 0:
            raise ValueError(f"fermi_integral requires z > 0, got {v}")
        return fermi_integral_mu(float(nu), math.log(v))

    if np.ndim(z) == 0:
        return one(float(z))
    return np.array([one(float(v)) for v in np.ravel(z)]).reshape(np.shape(z))


# ---------------------------------------------------------------- root finding


def brent(f, lo: float, hi: float, tol: float = 1e-14, maxiter: int = 200) -> float:
    """Bracketed root of ``f`` on ``[lo, hi]`` by Brent's method.

    Raises
    ------
    BracketError
        ``f(lo)`` and ``f(hi)`` share a strict sign.
    IterationCapError
        No convergence within ``maxiter`` iterations.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f = ({flo}, {fhi})")
    try:
        return optimize.brentq(f, lo, hi, xtol=tol, rtol=max(tol, 4 * np.finfo(float).eps),
                               maxiter=maxiter)
    except RuntimeError as exc:
        raise IterationCapError(str(exc)) from exc


def _expand_up(f, lo: float, hi: float, limit: float, grow: float = 2.0):
    """Grow ``hi`` geometrically until ``f`` changes sign or ``limit`` is hit."""
    flo = f(lo)
    while np.sign(f(hi)) == np.sign(flo) and hi < limit:
        hi = min(limit, lo + (hi - lo) * grow)
    return hi


# ---------------------------------------------------------------- statistics


@dataclass(frozen=True)
class ParticleStatistics:
    """Particle kind with its Planck constant.

    Attributes
    ----------
    kind : str
        ``"classical"``, ``"fermi"`` or ``"bose"``.
    hbar : float
        Rescaled Planck constant (ignored for classical particles).
    dim : int
        Velocity dimension.
    """

    kind: str
    hbar: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if self.kind not in (CLASSICAL, FERMI, BOSE):
            raise ValueError(f"unknown statistics {self.kind!r}")
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.kind != CLASSICAL and not self.hbar > 0:
            raise ValueError("hbar must be positive")

    @property
    def nu(self) -> float:
        return self.dim / 2.0

    def alpha(self) -> float:
        if self.kind == CLASSICAL:
            return 0.0
        a = self.hbar**self.dim
        return a if self.kind == FERMI else -a

    def K(self, nu: float, z: float) -> float:
        """The complete integral matching this statistics."""
        return fermi_integral(nu, z) if self.kind == FERMI else bose_integral(nu, z)

    def K_mu(self, nu: float, mu: float) -> float:
        if self.kind == FERMI:
            return fermi_integral_mu(nu, mu)
        return bose_integral(nu, math.exp(mu))


@dataclass
class MassTemperatureSolution:
    """Fugacity and energy for given mass and temperature.

    Unpacks as ``z, e``.  For the 3D Bose condensate branch ``z = 1`` and
    ``m0`` holds the mass in excess of the critical density.
    """

    z: Optional[float]
    e: float
    condensate: bool = False
    m0: float = 0.0

    def __iter__(self):
        return iter((self.z, self.e))


REGULAR, CONDENSATE, SATURATED, UNDETERMINED = (
    "Regular", "CondensateBE3D", "SaturatedFD", "UndeterminedFD")


@dataclass
class DegeneracyReport:
    """Outcome of the mass/energy fugacity problem.

    Attributes
    ----------
    eta : float or None
        Degeneracy parameter ``|alpha| rho (d / (4 pi e))^{d/2}``.
    regime : str
        One of ``Regular``, ``CondensateBE3D``, ``SaturatedFD``,
        ``UndeterminedFD``.
    z, T, m0 : float or None
        Solved fugacity, temperature and condensate mass when defined.
    """

    eta: Optional[float]
    regime: str
    z: Optional[float] = None
    T: Optional[float] = None
    m0: float = 0.0
    upper: float = math.inf


def i_eq_upper(stats: ParticleStatistics) -> float:
    """Supremum of the admissible degeneracy interval."""
    nu = stats.nu
    if stats.kind == FERMI:
        return math.exp(nu * special.gammaln(nu + 2) - (nu + 1) * special.gammaln(nu + 1))
    if stats.kind == BOSE:
        if stats.dim == 2:
            return math.inf
        return zeta(nu) ** (nu + 1) / zeta(nu + 1) ** nu
    return math.inf


def degeneracy_eta(stats: ParticleStatistics, rho: float, e: float) -> float:
    d = stats.dim
    return abs(stats.alpha()) * rho * (d / (4.0 * math.pi * e)) ** (d / 2.0)


def _mu_bracket_bose():
    return math.log(1e-14), math.log1p(-1e-14)


def solve_from_mass_temperature(stats: ParticleStatistics, rho: float, T: float) -> MassTemperatureSolution:
    """Fugacity ``z`` and energy ``e`` from mass and temperature.

    Solves ``rho = (2 pi T)^{d/2} K_{d/2}(z) / |alpha|`` and returns
    ``e = (d T / 2) K_{d/2+1}(z) / K_{d/2}(z)``.
    """
    if not (rho > 0 and T > 0):
        raise ValueError("rho and T must be positive")
    d, nu = stats.dim, stats.nu
    if stats.kind == CLASSICAL:
        return MassTemperatureSolution(None, d * T / 2.0)
    target = abs(stats.alpha()) * rho / (2.0 * math.pi * T) ** nu
    if stats.kind == FERMI:
        g = lambda mu: math.log(fermi_integral_mu(nu, mu)) - math.log(target)
        lo, hi = -40.0, 200.0
        while g(lo) > 0 and lo > -700:
            lo *= 2
        hi = _expand_up(g, lo, hi, 1e12)
        mu = brent(g, lo, hi)
    elif stats.dim == 2:
        # B_1 inverts in closed form
        mu = math.log(-math.expm1(-target))
    else:
        crit = zeta(nu)
        if target >= crit:
            rho_c = (2.0 * math.pi * T) ** nu * crit / abs(stats.alpha())
            e = (d * T / 2.0) * zeta(nu + 1) / crit * rho_c / rho
            return MassTemperatureSolution(1.0, e, condensate=target > crit, m0=rho - rho_c)
        g = lambda mu: bose_integral(nu, math.exp(mu)) - target
        lo, hi = _mu_bracket_bose()
        while g(lo) > 0 and lo > -700:
            lo *= 2
        mu = brent(g, lo, hi)
    z = math.exp(mu)
    e = (d * T / 2.0) * stats.K_mu(nu + 1, mu) / stats.K_mu(nu, mu)
    return MassTemperatureSolution(z, e)


def _log_ratio(stats: ParticleStatistics, mu: float) -> float:
    nu = stats.nu
    return (nu + 1) * math.log(stats.K_mu(nu, mu)) - nu * math.log(stats.K_mu(nu + 1, mu))


def solve_from_mass_energy(stats: ParticleStatistics, rho: float, e: float) -> DegeneracyReport:
    """Classify and solve the equilibrium for given mass and internal energy.

    Solves ``eta = K_nu(z)^{nu+1} / K_{nu+1}(z)^nu`` with ``nu = d/2`` when
    ``eta`` lies in the admissible interval, then recovers ``T`` from the
    mass relation.
    """
    if not (rho > 0 and e > 0):
        raise ValueError("rho and e must be positive")
    d, nu = stats.dim, stats.nu
    if stats.kind == CLASSICAL:
        return DegeneracyReport(None, REGULAR, None, 2.0 * e / d)
    eta = degeneracy_eta(stats, rho, e)
    upper = i_eq_upper(stats)
    a = abs(stats.alpha())
    if stats.kind == FERMI:
        if abs(eta - upper) <= SATURATION_TOL * upper:
            return DegeneracyReport(eta, SATURATED, math.inf, 0.0, upper=upper)
        if eta > upper:
            return DegeneracyReport(eta, UNDETERMINED, upper=upper)
    elif d == 3 and eta > upper:
        T = 2.0 * e * zeta(1.5) / (3.0 * zeta(2.5))
        m0 = rho - (2.0 * math.pi * T) ** 1.5 * zeta(1.5) / a
        return DegeneracyReport(eta, CONDENSATE, 1.0, T, m0, upper=upper)
    elif d == 3 and eta == upper:
        mu = 0.0
        T = (a * rho / stats.K_mu(nu, mu)) ** (1.0 / nu) / (2.0 * math.pi)
        return DegeneracyReport(eta, REGULAR, 1.0, T, upper=upper)

    target = math.log(eta)
    g = lambda mu: _log_ratio(stats, mu) - target
    if stats.kind == FERMI:
        lo, hi = -40.0, 200.0
        while g(lo) > 0 and lo > -700:
            lo *= 2
        hi = _expand_up(g, lo, hi, 1e9)
    else:
        lo, hi = _mu_bracket_bose()
        while g(lo) > 0 and lo > -700:
            lo *= 2
        while g(hi) < 0 and hi < -1e-300:
            hi *= 1e-2
    mu = brent(g, lo, hi)
    T = (a * rho / stats.K_mu(nu, mu)) ** (1.0 / nu) / (2.0 * math.pi)
    return DegeneracyReport(eta, REGULAR, math.exp(mu), T, upper=upper)


def hbar_star(kind: str, dim: int, rho: float, e: float) -> Optional[float]:
    """Planck constant at which the degeneracy parameter reaches ``sup I_eq``.

    Returns ``None`` when no finite threshold exists (classical, 2D Bose).
    """
    if not (rho > 0 and e > 0):
        raise ValueError("rho and e must be positive")
    upper = i_eq_upper(ParticleStatistics(kind, 1.0, dim))
    if not math.isfinite(upper):
        return None
    return (upper * (4.0 * math.pi * e / dim) ** (dim / 2.0) / rho) ** (1.0 / dim)
