"""One-group structural model ``mu ~ g``, ``z | mu ~ N(mu, 1)``.

For priors that are finite mixtures of normals (point masses allowed as
zero-sd components) everything is available in closed form: the marginal
density of z, the posterior of mu given z, and its cumulants at z = 0.  The
Taylor-expansion nulls are built from those cumulants, and a finite-difference
differentiator of ``log f`` provides an independent cross-check.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, InputError
from .ingest import SQRT_2PI, norm_cdf, norm_pdf
from .nullfit import NullModel


@dataclass(frozen=True)
class PriorMixture:
    """Prior ``g(mu) = sum_c w_c N(m_c, s_c^2)``; ``s_c = 0`` is a point mass."""

    weights: tuple
    means: tuple
    sds: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        m = tuple(float(v) for v in self.means)
        s = tuple(float(v) for v in self.sds)
        if not (len(w) == len(m) == len(s)) or not w:
            raise InputError("weights, means and sds must have the same nonzero length")
        if any(v <= 0 for v in w):
            raise InputError("mixture weights must be positive")
        if abs(sum(w) - 1.0) > 1e-12:
            raise InputError(f"mixture weights sum to {sum(w)}, not 1")
        if any(v < 0 for v in s):
            raise InputError("component sds must be nonnegative")
        if len(set(zip(m, s))) != len(m):
            raise InputError("duplicate (mean, sd) component")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "sds", s)

    @classmethod
    def from_components(cls, components):
        """Build from ``[(weight, mean, sd), ...]``."""
        w, m, s = zip(*components)
        return cls(w, m, s)

    @property
    def components(self):
        return list(zip(self.weights, self.means, self.sds))

    def sample(self, size, rng):
        """Draw `size` values of mu."""
        rng = np.random.default_rng(rng)
        comp = rng.choice(len(self.weights), size=size, p=np.array(self.weights))
        m = np.array(self.means)[comp]
        s = np.array(self.sds)[comp]
        return m + s * rng.standard_normal(size), comp

    def to_dict(self):
        return {"components": [{"weight": w, "mean": m, "sd": s} for w, m, s in self.components]}

    @classmethod
    def from_dict(cls, d):
        try:
            comps = d["components"] if isinstance(d, dict) else d
            return cls.from_components([(c["weight"], c["mean"], c["sd"]) for c in comps])
        except (KeyError, TypeError):
            raise InputError('prior must look like {"components": [{"weight": .., "mean": .., '
                             '"sd": ..}, ...]}') from None


def convolve_prior(prior, z):
    """Marginal density of z: ``sum_c w_c phi_{m_c, sqrt(1 + s_c^2)}(z)``."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    for w, m, s in prior.components:
        out = out + w * norm_pdf(z, m, math.sqrt(1.0 + s * s))
    return out if out.ndim else float(out)


def component_posteriors(prior, z):
    """Posterior mixture of mu given a scalar z.

    Returns arrays ``(weights, means, sds)``; component c's posterior is
    ``N((z s^2 + m)/(1 + s^2), s^2/(1 + s^2))``, reweighted by its marginal
    likelihood at z.
    """
    w = np.array(prior.weights)
    m = np.array(prior.means)
    s2 = np.array(prior.sds) ** 2
    marg_sd = np.sqrt(1.0 + s2)
    # log-scale weights avoid underflow far in the tails
    logw = np.log(w) - 0.5 * ((z - m) / marg_sd) ** 2 - np.log(marg_sd)
    logw -= logw.max()
    pw = np.exp(logw)
    pw /= pw.sum()
    pm = (z * s2 + m) / (1.0 + s2)
    ps = np.sqrt(s2 / (1.0 + s2))
    return pw, pm, ps


@dataclass(frozen=True)
class PosteriorCumulants:
    """Posterior mean, variance and third central moment of mu given z = 0."""

    E0: float
    V0: float
    S0: float

    @property
    def Vbar0(self):
        return 1.0 - self.V0


def posterior_cumulants_zero(prior):
    """Exact cumulants of the posterior of mu at z = 0."""
    pw, pm, ps = component_posteriors(prior, 0.0)
    E = float(np.sum(pw * pm))
    d = pm - E
    V = float(np.sum(pw * (ps ** 2 + d ** 2)))
    S = float(np.sum(pw * (d ** 3 + 3 * d * ps ** 2)))
    return PosteriorCumulants(E, V, S)


_STENCILS = {
    # (coefficients on offsets -2..2, divisor power, error order)
    0: None,
    1: (np.array([1, -8, 0, 8, -1]) / 12.0, 1, 4),
    2: (np.array([-1, 16, -30, 16, -1]) / 12.0, 2, 4),
    3: (np.array([-1, 2, 0, -2, 1]) / 2.0, 3, 2),
    4: (np.array([1, -4, 6, -4, 1]) / 1.0, 4, 2),
}


def derivatives_at_zero(f, J=4, h=0.1):
    """Derivatives of ``log f`` at 0 up to order `J` (at most 4).

    Five-point central differences at steps h, h/2 and h/4, combined by a
    Richardson table; central stencils have even-power error expansions, so
    each level removes the next even order.  Returns an array of length J+1
    whose first entry is ``log f(0)``.
    """
    if not 0 <= J <= 4:
        raise DomainError("J must be between 0 and 4")
    offsets = np.arange(-2, 3)

    def logf(x):
        v = np.asarray(f(x), dtype=float)
        if np.any(~(v > 0)):
            raise DomainError("density must be positive near 0")
        return np.log(v)

    l0 = float(logf(np.array([0.0]))[0])
    out = [l0]
    steps = (h, h / 2, h / 4)
    vals = [logf(offsets * step) for step in steps]
    for j in range(1, J + 1):
        coef, power, order = _STENCILS[j]
        row = [float(coef @ v) / step ** power for v, step in zip(vals, steps)]
        while len(row) > 1:
            r = 2.0 ** order
            row = [(r * fine - coarse) / (r - 1) for coarse, fine in zip(row, row[1:])]
            order += 2
        out.append(row[0])
    return np.array(out)


def taylor_null(cumulants, f0_at_0, J=2):
    """Null model of the J-th Taylor expansion, J in {0, 1, 2}.

    ``J=0``: N(0, 1); ``J=1``: N(E0, 1); ``J=2``: N(E0/Vbar0, 1/Vbar0), each
    scaled so the null sub-density matches f at zero.
    """
    E0, Vb = cumulants.E0, cumulants.Vbar0
    base = f0_at_0 * SQRT_2PI
    if J == 0:
        return NullModel(0.0, 1.0, base, "taylor(0)")
    if J == 1:
        return NullModel(E0, 1.0, base * math.exp(E0 ** 2 / 2), "taylor(1)")
    if J == 2:
        if not Vb > 0:
            raise DomainError(f"Vbar0 = {Vb:.4g} <= 0: J=2 null undefined")
        p0 = f0_at_0 * math.sqrt(2 * math.pi / Vb) * math.exp(E0 ** 2 / (2 * Vb))
        return NullModel(E0 / Vb, 1.0 / math.sqrt(Vb), p0, "taylor(2)")
    raise DomainError("taylor_null supports J = 0, 1, 2; use taylor_p0 for J = 3")


def _taylor_exponent(cumulants, J, z):
    z = np.asarray(z, dtype=float)
    e = np.zeros_like(z)
    if J >= 1:
        e = e + cumulants.E0 * z
    if J >= 2:
        e = e - cumulants.Vbar0 * z ** 2 / 2
    else:
        e = e - z ** 2 / 2
    if J >= 3:
        e = e + cumulants.S0 * z ** 3 / 6
    return e


def taylor_subdensity(cumulants, f0_at_0, J, z):
    """Null sub-density ``p0 f0(z) = f(0) exp(...)`` of the J-th expansion."""
    if J not in (0, 1, 2, 3):
        raise DomainError("J must be 0, 1, 2 or 3")
    if J >= 2 and not cumulants.Vbar0 > 0:
        raise DomainError(f"Vbar0 = {cumulants.Vbar0:.4g} <= 0")
    return f0_at_0 * np.exp(_taylor_exponent(cumulants, J, z))


def taylor_fdr(f, cumulants, J, z):
    """fdr of the J-th expansion: ``f(0) exp(exponent_J(z)) / f(z)``."""
    f0 = float(f(0.0))
    out = taylor_subdensity(cumulants, f0, J, z) / np.asarray(f(z), dtype=float)
    return out if np.ndim(out) else float(out)


def taylor_p0(cumulants, f0_at_0, J, lim=10.0, tol=1e-8):
    """Null proportion as the integral of the J-th null sub-density over [-lim, lim]."""
    val, _ = integrate.quad(lambda t: float(taylor_subdensity(cumulants, f0_at_0, J, t)),
                            -lim, lim, epsabs=tol, epsrel=tol, limit=200)
    return val


def posterior_prob_uninteresting(prior, cut, z, inclusive=False):
    """Posterior ``Pr{mu < cut | z}`` (``<=`` when `inclusive`); exact."""
    pw, pm, ps = component_posteriors(prior, float(z))
    if math.isinf(cut):
        return 1.0 if cut > 0 else 0.0
    total = 0.0
    for w, m, s in zip(pw, pm, ps):
        if s == 0:
            hit = m <= cut if inclusive else m < cut
            total += w * float(hit)
        else:
            total += w * float(norm_cdf(cut, m, s))
    return total


def prob_atom(prior, at, z):
    """Posterior probability that mu equals the point mass at `at`."""
    return (posterior_prob_uninteresting(prior, at, z, inclusive=True)
            - posterior_prob_uninteresting(prior, at, z, inclusive=False))
