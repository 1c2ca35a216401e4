"""Null-distribution estimation: theoretical, geometric and analytic empirical
nulls, plus correlation-induced dispersion.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ConfigError, DegenerateInputError, DomainError, InputError, NullFitError
from .ingest import norm_cdf, norm_pdf, norm_sf

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NullModel:
    """Normal null ``N(delta0, sigma0^2)`` with null proportion.

    ``p0_raw`` is the estimate as computed and may exceed 1; :attr:`p0` is the
    value used downstream, ``min(p0_raw, 1)``.
    """

    delta0: float
    sigma0: float
    p0_raw: float = 1.0
    method: str = "theoretical"
    interval: tuple | None = None

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise DomainError(f"sigma0 must be positive, got {self.sigma0}")
        if not self.p0_raw > 0:
            raise DomainError(f"p0 must be positive, got {self.p0_raw}")

    @property
    def p0(self):
        return min(self.p0_raw, 1.0)

    @property
    def p0_clamped(self):
        return self.p0_raw > 1.0

    def pdf(self, z):
        return norm_pdf(z, self.delta0, self.sigma0)

    def cdf(self, z):
        return norm_cdf(z, self.delta0, self.sigma0)

    def sf(self, z):
        return norm_sf(z, self.delta0, self.sigma0)

    def to_dict(self):
        return {
            "method": self.method,
            "delta0": self.delta0,
            "sigma0": self.sigma0,
            "p0_raw": self.p0_raw,
            "p0_used": self.p0,
            "interval": list(self.interval) if self.interval is not None else None,
        }


def theoretical_null(p0=1.0):
    """The classical ``N(0, 1)`` null; ``p0 = 1`` gives the BH upper bound."""
    return NullModel(0.0, 1.0, float(p0), "theoretical")


# ---------------------------------------------------------------------------
# Geometric (central matching) empirical null
# ---------------------------------------------------------------------------

def null_from_quadratic(beta0, beta1, beta2, method="geometric"):
    """Invert ``log f(z) ~ beta0 + beta1 z + beta2 z^2`` to (delta0, sigma0, p0)."""
    if not beta2 < 0:
        raise NullFitError("no central peak: quadratic coefficient is not negative")
    sigma0 = (-2.0 * beta2) ** -0.5
    delta0 = beta1 * sigma0 ** 2
    log_p0 = beta0 + 0.5 * (delta0 ** 2 / sigma0 ** 2 + math.log(2 * math.pi * sigma0 ** 2))
    return NullModel(float(delta0), float(sigma0), float(math.exp(log_p0)), method)


def quadratic_from_null(delta0, sigma0, p0):
    """Coefficients of ``log(p0 phi_{delta0,sigma0}(z))`` as a quadratic in z."""
    s2 = sigma0 ** 2
    beta0 = math.log(p0) - 0.5 * (delta0 ** 2 / s2 + math.log(2 * math.pi * s2))
    return beta0, delta0 / s2, -0.5 / s2


GEOMETRIC_WINDOW = 0.75
ANALYTIC_HALFWIDTH = 2.0


def geometric_null(fit, window=GEOMETRIC_WINDOW):
    """Match a quadratic to ``log f_hat`` near zero.

    Bins whose midpoints lie between the ``(1-window)/2`` and ``(1+window)/2``
    quantiles of the binned sample are used, weighted by their counts; empty
    bins are skipped.  The default central 75% keeps the sd of sigma0 near
    0.04 at N = 1500 while the bias stays below 0.02.

    Parameters
    ----------
    fit : MixtureDensityFit
    window : float
        Central-mass fraction, in (0.2, 0.9].
    """
    if not 0.2 < window <= 0.9:
        raise ConfigError(f"window must lie in (0.2, 0.9], got {window}")
    counts = np.asarray(fit.counts, dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(counts)]) / counts.sum()
    keep = np.concatenate([[True], np.diff(cum) > 0])
    lo, hi = np.interp([(1 - window) / 2, (1 + window) / 2], cum[keep], fit.edges[keep])
    x = fit.midpoints
    sel = (x >= lo) & (x <= hi) & (counts > 0)
    if np.count_nonzero(sel) < 3:
        raise NullFitError("fewer than 3 occupied bins in the central window")
    xs = x[sel]
    w = np.sqrt(counts[sel])
    A = np.column_stack([np.ones_like(xs), xs, xs ** 2])
    target = fit.log_density(xs)
    beta, *_ = np.linalg.lstsq(A * w[:, None], target * w, rcond=None)
    model = null_from_quadratic(*beta)
    return NullModel(model.delta0, model.sigma0, model.p0_raw, "geometric", (float(lo), float(hi)))


# ---------------------------------------------------------------------------
# Analytic (truncated-likelihood) empirical null
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticNullFit:
    a: float
    b: float
    N0: int
    N: int
    theta: float
    P0: float
    null: NullModel
    iterations: int = field(default=0, compare=False)


def _truncated_std_moments(alpha, beta, kmax=4):
    """Raw moments E[W^k], k=0..kmax, of N(0,1) truncated to [alpha, beta]."""
    Z = special.ndtr(beta) - special.ndtr(alpha)
    pa, pb = norm_pdf(alpha), norm_pdf(beta)
    m = [1.0, (pa - pb) / Z]
    for k in range(2, kmax + 1):
        m.append((k - 1) * m[k - 2] + (alpha ** (k - 1) * pa - beta ** (k - 1) * pb) / Z)
    return np.array(m), Z


def _truncated_moments(delta, sigma, a, b):
    """E[z^k], k=0..4, for N(delta, sigma^2) truncated to [a, b], and the mass."""
    m, Z = _truncated_std_moments((a - delta) / sigma, (b - delta) / sigma)
    out = np.zeros(5)
    for k in range(5):
        out[k] = sum(math.comb(k, j) * delta ** (k - j) * sigma ** j * m[j] for j in range(k + 1))
    return out, Z


def truncated_normal_mle(x, a, b, tol=1e-8, max_iter=100):
    """MLE of (delta, sigma) for normal data observed only inside [a, b].

    Newton's method on the natural parameters (eta1, eta2) = (delta/sigma^2,
    -1/(2 sigma^2)), where the log-likelihood is concave.  Steps are halved
    until the likelihood increases and eta2 stays negative.  Convergence is
    declared when the per-observation score has max-norm below `tol`.

    Returns ``(delta, sigma, iterations)``.
    """
    x = np.asarray(x, dtype=float)
    s1, s2 = x.mean(), np.mean(x * x)

    def loglik(delta, sigma):
        with np.errstate(all="ignore"):
            _, Z = _truncated_moments(delta, sigma, a, b)
        if not Z > 0 or not math.isfinite(delta):
            return -np.inf
        log_norm = math.log(sigma) + 0.5 * LOG_2PI + math.log(Z) + delta ** 2 / (2 * sigma ** 2)
        e1, e2 = delta / sigma ** 2, -0.5 / sigma ** 2
        return e1 * s1 + e2 * s2 - log_norm

    delta = float(x.mean())
    sd = float(x.std())
    # inflate the interior sd by the truncation variance factor
    m, _ = _truncated_std_moments((a - delta) / sd, (b - delta) / sd)
    factor = m[2] - m[1] ** 2
    sigma = sd / math.sqrt(factor) if factor > 0.05 else sd * 3
    eta = np.array([delta / sigma ** 2, -0.5 / sigma ** 2])
    ll = loglik(delta, sigma)

    for it in range(1, max_iter + 1):
        mom, _ = _truncated_moments(delta, sigma, a, b)
        grad = np.array([s1 - mom[1], s2 - mom[2]])
        if np.max(np.abs(grad)) < tol:
            return delta, sigma, it
        cov = np.array([[mom[2] - mom[1] ** 2, mom[3] - mom[1] * mom[2]],
                        [mom[3] - mom[1] * mom[2], mom[4] - mom[2] ** 2]])
        try:
            step = np.linalg.solve(cov, grad)
        except np.linalg.LinAlgError:
            raise NullFitError("singular information matrix in truncated-normal fit") from None
        t = 1.0
        for _ in range(60):
            new = eta + t * step
            if new[1] < 0:
                nd, ns = -new[0] / (2 * new[1]), math.sqrt(-0.5 / new[1])
                nll = loglik(nd, ns)
                if nll >= ll - 1e-14 * abs(ll):
                    break
            t *= 0.5
        else:
            raise NullFitError("truncated-normal Newton step could not improve the likelihood")
        eta, delta, sigma, ll = new, nd, ns, nll
    raise NullFitError(f"truncated-normal MLE did not converge in {max_iter} iterations")


def default_analytic_interval(z, halfwidth=ANALYTIC_HALFWIDTH):
    """``median +/- halfwidth * IQR/1.349`` of the sample."""
    x = np.asarray(z, dtype=float).ravel()
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    s = (q3 - q1) / 1.349
    return float(med - halfwidth * s), float(med + halfwidth * s)


def analytic_null(z, interval=None, quantiles=None):
    """Analytic empirical null from the z-values inside a central interval.

    The nonnull density is assumed to vanish on ``[a, b]``; (delta0, sigma0)
    maximize the truncated-normal likelihood of the ``N0`` interior values,
    ``theta = N0/N`` and ``p0 = theta / P0(delta0, sigma0)``.

    Parameters
    ----------
    z : ZSample or array_like
    interval : (a, b), optional
        Explicit interval.
    quantiles : (float, float), optional
        Use these sample quantiles as the interval instead.  When neither is
        given the interval is the median +/- 2 robust sds (IQR/1.349).  The
        narrower interquartile interval often holds data flatter than a
        uniform at N ~ 1500, where the truncated MLE does not exist.
    """
    x = np.asarray(z, dtype=float).ravel()
    N = x.size
    if interval is None and quantiles is not None:
        a, b = (float(v) for v in np.quantile(x, quantiles))
    elif interval is None:
        a, b = default_analytic_interval(x)
    else:
        a, b = (float(v) for v in interval)
    if not a < b:
        raise ConfigError("analytic null interval needs a < b")
    inside = x[(x >= a) & (x <= b)]
    N0 = inside.size
    if N0 < 25:
        raise InputError(f"only {N0} z-values inside [{a:.4g}, {b:.4g}]; need at least 25")
    if np.ptp(inside) == 0:
        raise DegenerateInputError("all z-values inside the interval are identical")
    delta0, sigma0, iters = truncated_normal_mle(inside, a, b)
    P0 = float(norm_cdf(b, delta0, sigma0) - norm_cdf(a, delta0, sigma0))
    theta = N0 / N
    null = NullModel(float(delta0), float(sigma0), theta / P0, "analytic", (a, b))
    return AnalyticNullFit(a, b, N0, N, theta, P0, null, iters)


# ---------------------------------------------------------------------------
# Correlation and dispersion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RmsCorrelation:
    """Root-mean-square row correlation and its independence-corrected version."""

    alpha: float
    alpha_corrected: float
    floor: float
    n_pairs: int
    n_skipped: int
    at_floor: bool


def estimate_rms_correlation(X, rng=None, max_pairs=50_000):
    """Estimate the rms correlation between rows of an expression matrix.

    Columns are standardized to mean 0 and sd 1 first.  When there are more
    than `max_pairs` row pairs, that many pairs are drawn at random from `rng`.
    Under independence ``E[rho_hat^2] = 1/(n-1)``; the corrected value
    subtracts this floor, ``alpha_c^2 = max(0, mean rho_hat^2 - 1/(n-1))``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 3:
        raise InputError("need a matrix with at least 2 rows and 3 columns")
    n = X.shape[1]
    # constant rows carry no correlation information
    ok = np.ptp(X, axis=1) > 0
    n_skipped = int(np.count_nonzero(~ok))
    if n_skipped:
        warnings.warn(f"skipped {n_skipped} constant rows", RuntimeWarning, stacklevel=2)
    X = X[ok]
    if X.shape[0] < 2:
        raise DegenerateInputError("fewer than two non-constant rows")
    col_sd = X.std(axis=0)
    if np.any(col_sd == 0):
        raise DegenerateInputError("constant column in expression matrix")
    Xs = (X - X.mean(axis=0)) / col_sd

    R = Xs - Xs.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(R, axis=1)
    if np.any(norms == 0):
        raise DegenerateInputError("a row is constant after column standardization")
    R = R / norms[:, None]
    m = R.shape[0]

    total_pairs = m * (m - 1) // 2
    if total_pairs <= max_pairs:
        C = R @ R.T
        iu = np.triu_indices(m, k=1)
        rho = C[iu]
    else:
        rng = np.random.default_rng(rng)
        i = rng.integers(0, m, max_pairs)
        j = rng.integers(0, m - 1, max_pairs)
        j = np.where(j >= i, j + 1, j)
        rho = np.einsum("ij,ij->i", R[i], R[j])
    rho = np.clip(rho, -1.0, 1.0)
    ms = float(np.mean(rho ** 2))
    floor = 1.0 / (n - 1)
    se = float(np.std(rho ** 2) / math.sqrt(rho.size))
    return RmsCorrelation(alpha=math.sqrt(ms), alpha_corrected=math.sqrt(max(0.0, ms - floor)),
                          floor=floor, n_pairs=int(rho.size), n_skipped=n_skipped,
                          at_floor=ms <= floor + 2 * se)


def dispersion_from_A(A):
    """Null sd implied by the dispersion variate: ``sqrt(1 + sqrt(2) A)``."""
    v = 1.0 + math.sqrt(2.0) * A
    if not v > 0:
        raise DomainError(f"1 + sqrt(2)*A must be positive, got {v}")
    return math.sqrt(v)
