"""Confidence intervals for cases picked out by a selection rule.

Two constructions are offered: intervals ``z_i +- w`` whose common half-width
is widened to control the false coverage rate among the BH-selected cases,
and Bayes intervals for the nonnull component of a point-mass + normal prior.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, InputError
from .fdr import bh_select
from .ingest import ZSample, norm_ppf
from .nullfit import theoretical_null
from .onegroup import PriorMixture, component_posteriors

INTERVAL_MODES = ("paper", "by")


@dataclass(frozen=True, eq=False)
class SelectionIntervals:
    """Intervals for the selected cases, all of half-width `half_width`."""

    ids: tuple
    index: np.ndarray
    z: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    threshold: float
    half_width: float
    q: float
    N: int
    mode: str
    covered: np.ndarray | None = None

    @property
    def R(self):
        return int(self.index.size)

    @property
    def noncovered(self):
        if self.covered is None:
            return None
        return int(np.sum(~self.covered))

    @property
    def fcr_realized(self):
        """Fraction of selected intervals missing their parameter (0 if none selected)."""
        if self.covered is None:
            return None
        return self.noncovered / self.R if self.R else 0.0

    def rows(self):
        for k in range(self.R):
            row = {"id": self.ids[k], "z": float(self.z[k]),
                   "lo": float(self.lo[k]), "hi": float(self.hi[k])}
            if self.covered is not None:
                row["covered"] = bool(self.covered[k])
            yield row

    def summary(self):
        return {
            "R": self.R,
            "N": self.N,
            "q": self.q,
            "mode": self.mode,
            "z0": None if math.isnan(self.threshold) else self.threshold,
            "half_width": None if math.isnan(self.half_width) else self.half_width,
            "noncovered": self.noncovered,
            "fcr_realized": self.fcr_realized,
        }


def fcr_half_width(R, N, q, mode="paper"):
    """Common half-width for R selected of N at level q.

    ``mode='paper'`` uses ``Phi^{-1}(1 - Rq/N)``; ``mode='by'`` uses the
    two-sided marginal level, ``Phi^{-1}(1 - Rq/(2N))``.
    """
    if mode not in INTERVAL_MODES:
        raise ConfigError(f"interval mode must be one of {INTERVAL_MODES}, got {mode!r}")
    if R <= 0:
        return math.nan
    alpha = R * q / N
    if mode == "by":
        alpha /= 2.0
    return norm_ppf(1.0 - alpha)


def fcr_intervals(z, q, side="two", mode="paper", truth=None):
    """BH-select under the theoretical null (p0 = 1) and build ``z_i +- w``.

    Parameters
    ----------
    z : ZSample or array_like
    q : float
        Level in (0, 1), used both for selection and for the half-width.
    side : {'left', 'right', 'two'}
    mode : {'paper', 'by'}
        Half-width convention, see :func:`fcr_half_width`.
    truth : array_like, optional
        True parameters mu_i for all N cases; enables coverage accounting.
    """
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    sample = z if isinstance(z, ZSample) else ZSample(z)
    x = sample.values
    sel = bh_select(x, theoretical_null(), q, side)
    idx = np.sort(sel.selected)
    w = fcr_half_width(idx.size, sample.N, q, mode)
    zs = x[idx]
    covered = None
    if truth is not None:
        mu = np.asarray(truth, dtype=float).ravel()
        if mu.size != sample.N:
            raise InputError(f"{mu.size} true values for {sample.N} cases")
        covered = np.abs(mu[idx] - zs) <= w
    labels = sample.labels()
    return SelectionIntervals(tuple(labels[i] for i in idx), idx, zs, zs - w, zs + w,
                              sel.threshold, w, q, sample.N, mode, covered)


@dataclass(frozen=True)
class BayesInterval:
    """Posterior summary for one z under a point-mass + normal prior.

    With probability `fdr_at_z` the case is null (mu = atom); otherwise mu is
    normal and lies in ``[lo, hi]`` with probability `level`.
    """

    z: float
    fdr_at_z: float
    nonnull_center: float
    nonnull_sd: float
    nonnull_halfwidth: float
    level: float

    @property
    def lo(self):
        return self.nonnull_center - self.nonnull_halfwidth

    @property
    def hi(self):
        return self.nonnull_center + self.nonnull_halfwidth


def _split_prior(prior):
    comps = prior.components
    atoms = [c for c in comps if c[2] == 0]
    normals = [c for c in comps if c[2] > 0]
    if len(comps) != 2 or len(atoms) != 1 or len(normals) != 1:
        raise InputError("prior must have exactly one point mass and one normal component")
    return comps.index(atoms[0]), comps.index(normals[0])


def bayes_intervals(prior: PriorMixture, z, level=0.95):
    """Bayes intervals for the nonnull part of the posterior.

    Returns one :class:`BayesInterval` for scalar `z`, a list for arrays.
    """
    if not 0 < level < 1:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    ia, inorm = _split_prior(prior)
    mult = norm_ppf(0.5 + level / 2.0)
    out = []
    for zi in np.atleast_1d(np.asarray(z, dtype=float)):
        pw, pm, ps = component_posteriors(prior, float(zi))
        sd = float(ps[inorm])
        out.append(BayesInterval(float(zi), float(pw[ia]), float(pm[inorm]), sd, mult * sd, level))
    return out[0] if np.ndim(z) == 0 else out
