"""Local and tail-area false discovery rates, BH selection and related
conversions for the two-groups model.
"""

import math
from dataclasses import dataclass

import numpy as np

from .density import DEFAULT_DEGREE, bin_zvalues, fit_mixture_density
from .errors import ConfigError, DomainError, InputError
from .ingest import ZSample
from .nullfit import NullModel, analytic_null, geometric_null, theoretical_null

DEFAULT_FDR_THRESHOLD = 0.2


def local_fdr(z, null, fit, raw=False):
    """Estimated local fdr ``p0 f0(z) / f_hat(z)``.

    Values are clamped to [0, 1] unless ``raw=True``.  Points outside the
    fitted range trigger :class:`ExtrapolationWarning` from the density.
    """
    z_arr = np.asarray(z, dtype=float)
    ratio = null.p0 * null.pdf(z_arr) / fit(z_arr)
    out = ratio if raw else np.minimum(ratio, 1.0)
    return out if np.ndim(out) else float(out)


def bin_fdr(count, center, width, N, null):
    """Bin-level fdr: expected null count ``p0 N width f0(center)`` over the observed count."""
    if count <= 0:
        raise DomainError("bin count must be positive")
    expected = null.p0 * N * width * null.pdf(center)
    return expected / count


def fitted_tail_mass(fit, null, z, side="left"):
    """Tail probability of the fitted mixture beyond `z`.

    Inside the binned range this integrates ``f_hat``; beyond the range, where
    there are no data, the tail is completed with the null sub-density
    ``p0 f0`` so that the tail Fdr is the f-average of the local fdr.
    """
    z = np.asarray(z, dtype=float)
    lo, hi = fit.range
    p0 = null.p0
    if side == "left":
        inner = fit.cumulative(np.clip(z, lo, hi))
        out = np.where(z <= lo, p0 * null.cdf(z), p0 * null.cdf(lo) + inner)
    elif side == "right":
        total = fit.cumulative(hi)
        inner = total - fit.cumulative(np.clip(z, lo, hi))
        out = np.where(z >= hi, p0 * null.sf(z), p0 * null.sf(hi) + inner)
    else:
        raise ConfigError(f"side must be 'left' or 'right', got {side!r}")
    return out if out.ndim else float(out)


def tail_fdr(z, null, F, side="left", raw=False):
    """Tail-area Fdr ``p0 F0(z) / F(z)`` (left) or its upper-tail mirror.

    Parameters
    ----------
    z : float or array_like
    null : NullModel
    F : MixtureDensityFit or array_like
        A fitted density (its integral is used for the denominator) or the
        observed z-values (empirical cdf).
    side : {'left', 'right'}
    """
    z_arr = np.asarray(z, dtype=float)
    if side == "left":
        num = null.p0 * null.cdf(z_arr)
    elif side == "right":
        num = null.p0 * null.sf(z_arr)
    else:
        raise ConfigError(f"side must be 'left' or 'right', got {side!r}")

    if hasattr(F, "cumulative"):
        den = fitted_tail_mass(F, null, z_arr, side)
    else:
        data = np.sort(np.asarray(F, dtype=float).ravel())
        if side == "left":
            den = np.searchsorted(data, z_arr, side="right") / data.size
        else:
            den = (data.size - np.searchsorted(data, z_arr, side="left")) / data.size
    den = np.asarray(den, dtype=float)
    if np.any(den <= 0):
        raise DomainError("tail Fdr undefined where the estimated tail probability is 0")
    ratio = num / den
    out = ratio if raw else np.clip(ratio, 0.0, 1.0)
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# Benjamini-Hochberg
# ---------------------------------------------------------------------------

def bh_pvalues(p, q, p0=1.0):
    """Step-up selection on p-values: reject the k smallest where k is the
    largest index with ``p0 * p_(k) * N / k <= q``.  Returns a boolean mask."""
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    p = np.asarray(p, dtype=float).ravel()
    N = p.size
    order = np.argsort(p, kind="stable")
    ps = p[order]
    k = np.arange(1, N + 1)
    ok = p0 * ps * N <= q * k
    mask = np.zeros(N, dtype=bool)
    if ok.any():
        kmax = int(np.nonzero(ok)[0].max())
        mask[p <= ps[kmax]] = True
    return mask


def null_pvalues(z, null, side="left"):
    """p-values of z under `null`: lower tail, upper tail, or two-sided."""
    z = np.asarray(z, dtype=float)
    if side == "left":
        return null.cdf(z)
    if side == "right":
        return null.sf(z)
    if side in ("two", "two-sided"):
        return np.minimum(1.0, 2.0 * np.minimum(null.cdf(z), null.sf(z)))
    raise ConfigError(f"unknown side {side!r}")


@dataclass(frozen=True)
class BHSelection:
    """Indices selected by the step-up rule and the boundary of the rejection region."""

    selected: np.ndarray
    threshold: float
    p_cutoff: float
    q: float
    side: str

    @property
    def R(self):
        return int(self.selected.size)


def bh_select(z, null, q, side="left"):
    """Benjamini-Hochberg selection from z-values.

    Uses ``Fdr_bar(z) = p0 F0(z) / F_bar(z)`` with the empirical cdf; the
    rejection region is the largest tail region with ``Fdr_bar <= q``.  For
    ``side='two'`` the p-values are ``2 min(F0, 1-F0)``.  `threshold` is the
    selected z closest to the null centre (NaN for an empty selection).
    """
    z = np.asarray(z, dtype=float).ravel()
    p = null_pvalues(z, null, side)
    mask = bh_pvalues(p, q, null.p0)
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        return BHSelection(idx, math.nan, math.nan, q, side)
    sel = z[idx]
    if side == "left":
        thr = float(sel.max())
    elif side == "right":
        thr = float(sel.min())
    else:
        thr = float(np.min(np.abs(sel - null.delta0)))
    return BHSelection(idx, thr, float(p[idx].max()), q, side)


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------

def _logit(p):
    return math.log(p / (1.0 - p))


def lehmann_link(Fdr, gamma):
    """Local fdr implied by a tail Fdr under Lehmann alternatives ``F1 = F0^gamma``.

    ``logit(fdr) = logit(Fdr) + log(1/gamma)``.
    """
    if not 0 < Fdr < 1:
        raise DomainError(f"Fdr must lie in (0, 1), got {Fdr}")
    if not 0 < gamma <= 1:
        raise DomainError(f"gamma must lie in (0, 1], got {gamma}")
    lg = _logit(Fdr) + math.log(1.0 / gamma)
    return 1.0 / (1.0 + math.exp(-lg))


def posterior_odds(fdr, p1_over_p0=None):
    """Posterior odds of nonnull, ``(1 - fdr)/fdr``, and the Bayes factor
    ``odds / (p1/p0)`` when the prior ratio is given.  ``fdr = 0`` gives inf."""
    if not 0 <= fdr <= 1:
        raise DomainError(f"fdr must lie in [0, 1], got {fdr}")
    odds = math.inf if fdr == 0 else (1.0 - fdr) / fdr
    if p1_over_p0 is None:
        return odds, None
    if not p1_over_p0 > 0:
        raise DomainError("p1/p0 must be positive")
    return odds, odds / p1_over_p0


def prior_adjust(fdr, p0_global, p0_case):
    """Adjust a local fdr for a case-specific prior null probability."""
    for name, v in (("p0_global", p0_global), ("p0_case", p0_case)):
        if not 0 < v < 1:
            raise DomainError(f"{name} must lie in (0, 1), got {v}")
    fdr = np.asarray(fdr, dtype=float)
    r = (p0_case / (1 - p0_case)) / (p0_global / (1 - p0_global))
    out = fdr * r / (1.0 - (1.0 - r) * fdr)
    return out if out.ndim else float(out)


def nonnull_counts(counts, fdr_k):
    """Estimated nonnull counts per bin, ``(1 - fdr_k) y_k``."""
    y = np.asarray(getattr(counts, "counts", counts), dtype=float)
    f = np.asarray(fdr_k, dtype=float)
    if y.shape != f.shape:
        raise InputError(f"{y.size} bins but {f.size} fdr values")
    return (1.0 - f) * y


def power_diagnostic(y1, fdr_k):
    """Expected nonnull fdr: the y1-weighted average of the bin fdr values."""
    y1 = np.asarray(y1, dtype=float)
    f = np.asarray(fdr_k, dtype=float)
    total = y1.sum()
    if not total > 0:
        raise DomainError("no nonnull counts; power diagnostic undefined")
    return float(np.sum(y1 * f) / total)


@dataclass(frozen=True)
class PowerReport:
    nonnull: np.ndarray
    bin_fdr: np.ndarray
    efdr1: float
    n_left: int
    n_right: int


def power_report(z, fit, null, threshold=DEFAULT_FDR_THRESHOLD):
    """Nonnull counts, expected nonnull fdr and reportable cases per tail."""
    fdr_k = local_fdr(fit.midpoints, null, fit)
    y1 = nonnull_counts(fit.counts, fdr_k)
    z = np.asarray(z, dtype=float)
    fz = local_fdr(z, null, fit)
    hit = fz <= threshold
    return PowerReport(y1, fdr_k, power_diagnostic(y1, fdr_k),
                       int(np.count_nonzero(hit & (z < null.delta0))),
                       int(np.count_nonzero(hit & (z >= null.delta0))))


# ---------------------------------------------------------------------------
# Whole pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FdrResult:
    """Per-case fdr analysis of a z-sample."""

    sample: ZSample
    fdr: np.ndarray
    fdr_raw: np.ndarray
    Fdr_left: np.ndarray
    Fdr_right: np.ndarray
    selected_bh: np.ndarray
    selected_fdr: np.ndarray
    null: NullModel
    fit: object
    q: float
    threshold: float

    def rows(self):
        for i, cid in enumerate(self.sample.labels()):
            yield {
                "id": cid,
                "z": float(self.sample.values[i]),
                "fdr": float(self.fdr[i]),
                "Fdr_left": float(self.Fdr_left[i]),
                "Fdr_right": float(self.Fdr_right[i]),
                "selected_bh": bool(self.selected_bh[i]),
                "selected_fdr20": bool(self.selected_fdr[i]),
            }


def estimate_null(z, fit, method="geometric", p0=None):
    """Dispatch to one of the null estimators by name."""
    if method == "theoretical":
        return theoretical_null(1.0 if p0 is None else p0)
    if method == "geometric":
        model = geometric_null(fit)
    elif method == "analytic":
        model = analytic_null(z).null
    else:
        raise ConfigError(f"unknown null method {method!r}")
    if p0 is not None:
        model = NullModel(model.delta0, model.sigma0, p0, model.method, model.interval)
    return model


def analyze(z, null="geometric", p0=None, bins=None, degree=DEFAULT_DEGREE,
            basis="polynomial", q=0.1, threshold=DEFAULT_FDR_THRESHOLD, side="two",
            ecdf=False):
    """Fit the mixture density and a null, then report per-case fdr and Fdr.

    `null` is a method name or a ready :class:`NullModel`.  BH selection uses
    the same null, at level `q` on the requested `side`.
    """
    sample = z if isinstance(z, ZSample) else ZSample(z)
    hist = bin_zvalues(sample, bins=bins)
    fit = fit_mixture_density(hist, degree=degree, basis=basis)
    model = null if isinstance(null, NullModel) else estimate_null(sample, fit, null, p0)
    x = sample.values
    fdr_raw = local_fdr(x, model, fit, raw=True)
    fdr = np.minimum(fdr_raw, 1.0)
    F = x if ecdf else fit
    left = tail_fdr(x, model, F, "left")
    right = tail_fdr(x, model, F, "right")
    sel = np.zeros(x.size, dtype=bool)
    sel[bh_select(x, model, q, side).selected] = True
    return FdrResult(sample, fdr, fdr_raw, np.atleast_1d(left), np.atleast_1d(right), sel,
                     fdr <= threshold, model, fit, q, threshold)
