"""Histogram binning and Lindsey's-method estimation of the mixture density.

The bin counts ``y_k`` are modelled as independent Poisson variables with
``log E[y_k] = log(N * width) + log f(x_k)``, ``log f`` expanded in a
polynomial (or natural cubic spline) basis of the bin midpoints.  Maximum
likelihood is found by iteratively reweighted least squares.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ConfigError, ExtrapolationWarning, FitError, InputError
from .ingest import ZSample

DEFAULT_BINS = 90
DEFAULT_DEGREE = 7
MAX_IRLS_ITER = 50


@dataclass(frozen=True, eq=False)
class BinnedHistogram:
    """Equal-width histogram of z-values."""

    edges: np.ndarray
    counts: np.ndarray
    N: int = field(init=False)
    width: float = field(init=False)
    midpoints: np.ndarray = field(init=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        counts = np.asarray(self.counts)
        if edges.ndim != 1 or counts.shape != (edges.size - 1,):
            raise InputError("need K+1 edges for K counts")
        if np.any(counts < 0):
            raise InputError("counts must be nonnegative")
        d = np.diff(edges)
        if np.any(d <= 0):
            raise InputError("edges must be increasing")
        width = float(edges[-1] - edges[0]) / d.size
        if np.max(np.abs(d - width)) > 1e-9 * max(1.0, abs(width)):
            raise InputError("edges must be uniformly spaced")
        # real-valued counts (exact expectations) are allowed for testing
        if np.all(counts == np.round(counts)):
            counts = counts.astype(np.int64)
        else:
            counts = counts.astype(float)
        for a in (edges, counts):
            a.setflags(write=False)
        mid = 0.5 * (edges[:-1] + edges[1:])
        mid.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)
        total = counts.sum()
        object.__setattr__(self, "N", int(total) if counts.dtype.kind == "i" else float(total))
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "midpoints", mid)

    @property
    def K(self):
        return self.counts.size

    @property
    def range(self):
        return float(self.edges[0]), float(self.edges[-1])

    def quantile(self, prob):
        """Quantile of the binned sample by linear interpolation of the cdf."""
        cum = np.concatenate([[0.0], np.cumsum(self.counts)]) / self.N
        prob = np.asarray(prob, dtype=float)
        # bins with zero count give flat cdf runs; np.interp needs increasing xp
        keep = np.concatenate([[True], np.diff(cum) > 0])
        return np.interp(prob, cum[keep], self.edges[keep])


def bin_zvalues(z, bins=None, width=None, range=None):
    """Bin z-values into an equal-width histogram.

    Parameters
    ----------
    z : ZSample or array_like
    bins : int, optional
        Number of bins K (at least 10).  Ignored when `width` is given.
    width : float, optional
        Bin width.  With `range` the number of bins is ``ceil(span/width)``.
    range : (float, float), optional
        Histogram limits; must cover the data.  Default is
        ``[min - width/2, max + width/2]``.

    Values falling exactly on an interior edge are counted in the bin to the
    right of that edge.
    """
    x = np.asarray(z, dtype=float).ravel()
    if x.size == 0:
        raise InputError("nothing to bin")
    lo_data, hi_data = float(x.min()), float(x.max())

    if width is None:
        K = DEFAULT_BINS if bins is None else int(bins)
        if K < 10:
            raise ConfigError(f"need at least 10 bins, got {K}")
        if range is None:
            span = hi_data - lo_data
            width = span / (K - 1) if span > 0 else 0.2
            lo = lo_data - width / 2
        else:
            lo, hi = map(float, range)
            width = (hi - lo) / K
    else:
        width = float(width)
        if not width > 0:
            raise ConfigError("bin width must be positive")
        if range is None:
            lo = lo_data - width / 2
            K = int(np.floor((hi_data - lo) / width)) + 1
        else:
            lo, hi = map(float, range)
            K = max(1, int(np.ceil((hi - lo) / width - 1e-9)))

    if range is not None:
        lo_r, hi_r = map(float, range)
        if not lo_r < hi_r:
            raise ConfigError("range must satisfy lo < hi")
        if lo_data < lo_r or hi_data > hi_r:
            raise ConfigError(f"range {range} does not cover data [{lo_data}, {hi_data}]")

    edges = lo + width * np.arange(K + 1)
    idx = np.searchsorted(edges, x, side="right") - 1
    idx = np.clip(idx, 0, K - 1)
    counts = np.bincount(idx, minlength=K)
    return BinnedHistogram(edges, counts)


# ---------------------------------------------------------------------------
# Bases
# ---------------------------------------------------------------------------

def _poly_basis(s, degree):
    return np.vander(s, degree + 1, increasing=True)


def _ns_basis(s, knots):
    # natural cubic spline, truncated-power form; includes intercept column
    knots = np.asarray(knots)
    K = knots.size
    last = knots[-1]

    def d(k):
        return (np.maximum(s - knots[k], 0) ** 3 - np.maximum(s - last, 0) ** 3) / (last - knots[k])

    cols = [np.ones_like(s), s]
    dK = d(K - 2)
    for k in range(K - 2):
        cols.append(d(k) - dK)
    return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class MixtureDensityFit:
    """Fitted exponential-family density ``f(z) = exp(sum_j beta_j b_j(s(z)))/(N width)``.

    ``s(z) = (z - center)/scale`` standardizes z before the basis is applied;
    coefficients live on that standardized scale.
    """

    basis: str
    degree: int
    coef: np.ndarray
    center: float
    scale: float
    knots: tuple
    fitted: np.ndarray
    deviance: float
    N: int
    width: float
    edges: np.ndarray
    counts: np.ndarray
    iterations: int

    def design(self, z):
        s = (np.atleast_1d(np.asarray(z, dtype=float)) - self.center) / self.scale
        if self.basis == "polynomial":
            return _poly_basis(s, self.degree)
        return _ns_basis(s, self.knots)

    def log_mean(self, z):
        """log nu(z) = log(N width f(z))."""
        return self.design(z) @ self.coef

    @property
    def range(self):
        return float(self.edges[0]), float(self.edges[-1])

    @property
    def midpoints(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def in_range(self, z, margin=1.0):
        """True where z lies within the binned range plus `margin` bins."""
        lo, hi = self.range
        z = np.asarray(z, dtype=float)
        pad = margin * self.width
        return (z >= lo - pad) & (z <= hi + pad)

    def __call__(self, z):
        return eval_density(self, z)

    def log_density(self, z):
        out = self.log_mean(z) - np.log(self.N * self.width)
        return out if np.ndim(z) else float(out[0])

    def gradient(self):
        """Score vector of the Poisson log-likelihood at the fitted coefficients."""
        X = self.design(self.midpoints)
        return X.T @ (self.counts - self.fitted)

    def cumulative(self, z, grid_points=4001):
        """``int_{lo}^{z} f(t) dt`` over the binned range (z clipped to it)."""
        grid, cum = self._cum_grid(grid_points)
        zc = np.clip(np.asarray(z, dtype=float), grid[0], grid[-1])
        out = np.interp(zc, grid, cum)
        return out if np.ndim(out) else float(out)

    def total_mass(self):
        return float(self._cum_grid()[1][-1])

    def _cum_grid(self, grid_points=4001):
        cache = self.__dict__.get("_cum_cache")
        if cache is None or cache[0].size != grid_points:
            lo, hi = self.range
            grid = np.linspace(lo, hi, grid_points)
            dens = np.exp(self.log_mean(grid)) / (self.N * self.width)
            cum = integrate.cumulative_simpson(dens, x=grid, initial=0.0)
            cache = (grid, cum)
            object.__setattr__(self, "_cum_cache", cache)
        return cache


def fit_mixture_density(hist, degree=DEFAULT_DEGREE, basis="polynomial",
                        tol=1e-8, max_iter=MAX_IRLS_ITER):
    """Fit ``log f`` by Poisson regression on histogram counts (Lindsey's method).

    Parameters
    ----------
    hist : BinnedHistogram
    degree : int
        Polynomial degree, or degrees of freedom of the natural spline
        (knots at equally spaced quantiles of the bin midpoints).
    basis : {'polynomial', 'spline'}
    tol : float
        Convergence threshold on the relative change of the deviance.

    Returns
    -------
    MixtureDensityFit
    """
    if basis not in ("polynomial", "spline"):
        raise ConfigError(f"unknown basis {basis!r}")
    degree = int(degree)
    if not 2 <= degree <= 10:
        raise ConfigError(f"degree must be in [2, 10], got {degree}")
    y = hist.counts.astype(float)
    if np.count_nonzero(y) < degree + 3:
        raise ConfigError(f"need at least {degree + 3} nonempty bins for degree {degree}, "
                          f"have {np.count_nonzero(y)}")

    x = hist.midpoints
    center = float(x.mean())
    scale = float(x.std())
    s = (x - center) / scale
    knots = ()
    if basis == "polynomial":
        X = _poly_basis(s, degree)
    else:
        knots = tuple(np.quantile(s, np.linspace(0, 1, degree + 1)))
        X = _ns_basis(s, knots)

    def deviance(mu):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(y > 0, y * np.log(y / mu), 0.0)
        return float(2.0 * np.sum(t - (y - mu)))

    mu = y + 0.5
    eta = np.log(mu)
    beta = None
    dev = deviance(mu)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = np.sqrt(mu)
        work = eta + (y - mu) / mu
        new_beta, *_ = np.linalg.lstsq(X * w[:, None], work * w, rcond=None)
        new_eta = X @ new_beta
        new_mu = np.exp(new_eta)
        new_dev = deviance(new_mu)
        # step halving guards against overshoot from poor starting values
        halvings = 0
        while beta is not None and (not np.isfinite(new_dev) or new_dev > dev * (1 + 1e-12)) and halvings < 30:
            new_beta = 0.5 * (beta + new_beta)
            new_eta = X @ new_beta
            new_mu = np.exp(new_eta)
            new_dev = deviance(new_mu)
            halvings += 1
        if not np.isfinite(new_dev):
            raise FitError("IRLS diverged", deviance=dev)
        change = abs(dev - new_dev) / (abs(new_dev) + 0.1)
        beta, eta, mu, dev = new_beta, new_eta, new_mu, new_dev
        if change < tol and it > 1:
            converged = True
            break
    if not converged:
        raise FitError(f"IRLS did not converge in {max_iter} iterations", deviance=dev)

    # one extra Newton step drives the score to rounding level
    w = np.sqrt(mu)
    step, *_ = np.linalg.lstsq(X * w[:, None], (y - mu) / w, rcond=None)
    polished = beta + step
    mu_p = np.exp(X @ polished)
    dev_p = deviance(mu_p)
    if np.isfinite(dev_p) and dev_p <= dev + 1e-9:
        beta, mu, dev = polished, mu_p, dev_p

    mu.setflags(write=False)
    beta.setflags(write=False)
    return MixtureDensityFit(basis=basis, degree=degree, coef=beta, center=center,
                             scale=scale, knots=knots, fitted=mu, deviance=dev,
                             N=hist.N, width=hist.width, edges=hist.edges,
                             counts=hist.counts, iterations=it)


def eval_density(fit, z):
    """Evaluate the fitted density at `z`.

    Emits :class:`ExtrapolationWarning` when any point lies more than one bin
    outside the fitted range.
    """
    z_arr = np.asarray(z, dtype=float)
    if not np.all(fit.in_range(z_arr)):
        warnings.warn("density evaluated outside the binned range", ExtrapolationWarning,
                      stacklevel=2)
    out = np.exp(fit.log_mean(z_arr.ravel())) / (fit.N * fit.width)
    if z_arr.ndim == 0:
        return float(out[0])
    return out.reshape(z_arr.shape)


def fit_density(z, bins=None, width=None, range=None, degree=DEFAULT_DEGREE, basis="polynomial"):
    """Bin `z` and fit the mixture density in one call."""
    hist = bin_zvalues(z, bins=bins, width=width, range=range)
    return fit_mixture_density(hist, degree=degree, basis=basis)


def bootstrap_se(z, statistic, B=200, seed=None):
    """Nonparametric bootstrap standard error of ``statistic(ZSample)``.

    Cases are resampled with replacement; each replicate draws from its own
    child stream of ``numpy.random.SeedSequence(seed)``.  Replicates whose
    statistic raises a fit error are dropped.  Returns ``(se, n_ok)``.
    """
    values = np.asarray(z, dtype=float)
    children = np.random.SeedSequence(seed).spawn(B)
    reps = []
    for child in children:
        rng = np.random.default_rng(child)
        sample = ZSample(values[rng.integers(0, values.size, values.size)])
        try:
            reps.append(np.asarray(statistic(sample), dtype=float))
        except (FitError, ConfigError):
            continue
    if len(reps) < 2:
        raise FitError("too few successful bootstrap replicates")
    reps = np.array(reps)
    return reps.std(axis=0, ddof=1), len(reps)
