"""Seeded simulation models and Monte Carlo experiment runners.

Random numbers come from numpy's PCG64 generator.  Each experiment seeds a
:class:`numpy.random.SeedSequence` and spawns one independent child stream per
replicate, so a replicate's draws do not depend on how many replicates run
before it.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .density import bin_zvalues, fit_mixture_density
from .errors import ConfigError, ExperimentError, ExtrapolationWarning, FdrkitError, InputError
from .fdr import bh_select, local_fdr, tail_fdr
from .ingest import ZSample, norm_pdf
from .nullfit import analytic_null, geometric_null, theoretical_null
from .onegroup import PriorMixture
from .selectci import bayes_intervals, fcr_intervals

PRNG_ALGORITHM = "PCG64"

# mu = 0 w.p. 0.9, mu ~ N(3, 1) w.p. 0.1
PRIOR_TWO_GROUPS = PriorMixture((0.9, 0.1), (0.0, 3.0), (0.0, 1.0))
# blurred null: 0.9 N(0, 0.5^2) + 0.1 N(2.5, 0.5^2)
PRIOR_BLURRED = PriorMixture((0.9, 0.1), (0.0, 2.5), (0.5, 0.5))
# mu = 0 w.p. 0.9, mu ~ N(-3, 1) w.p. 0.1
PRIOR_LEFT = PriorMixture((0.9, 0.1), (0.0, -3.0), (0.0, 1.0))

TABLE1_Z = (1.5, 2.0, 2.5, 3.0, 3.5, 4.0)
EXPERIMENTS = ("table1", "table2", "fig6", "fig8")
DEFAULT_REPS = {"table1": 250, "table2": 250, "fig6": 1000, "fig8": 100}
MAX_FAILURE_RATE = 0.10


@dataclass(frozen=True)
class SimSpec:
    """A named generator plus its parameters.

    ``model='prior-mixture'`` draws mu from `prior` and z ~ N(mu, 1);
    ``model='correlated-blocks'`` uses the block-equicorrelated null of
    :func:`simulate_correlated`.
    """

    model: str = "prior-mixture"
    N: int = 1500
    prior: PriorMixture = PRIOR_TWO_GROUPS
    n_null: int = 2700
    n_nonnull: int = 300
    nonnull_mean: float = 2.5
    nonnull_sd: float = 1.5
    blocks: int = 10
    rho: float = 0.5

    def __post_init__(self):
        if self.model not in ("prior-mixture", "correlated-blocks"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.model == "prior-mixture" and self.N < 1:
            raise ConfigError("N must be positive")
        if self.model == "correlated-blocks":
            if not 0 <= self.rho < 1:
                raise ConfigError(f"within-block correlation must lie in [0, 1), got {self.rho}")
            if not 1 <= self.blocks <= self.n_null:
                raise ConfigError(f"blocks must lie in [1, {self.n_null}], got {self.blocks}")

    def to_dict(self):
        d = {"model": self.model}
        if self.model == "prior-mixture":
            d.update(N=self.N, prior=self.prior.to_dict())
        else:
            d.update(n_null=self.n_null, n_nonnull=self.n_nonnull, nonnull_mean=self.nonnull_mean,
                     nonnull_sd=self.nonnull_sd, blocks=self.blocks, rho=self.rho)
        return d


@dataclass(frozen=True, eq=False)
class Truth:
    """Ground truth behind a simulated sample."""

    mu: np.ndarray
    null: np.ndarray
    block_variate: float = math.nan

    @property
    def n_null(self):
        return int(self.null.sum())

    @property
    def n_nonnull(self):
        return int((~self.null).sum())


def simulate_two_groups(prior=PRIOR_TWO_GROUPS, N=1500, seed=None):
    """Draw mu_i from `prior` and z_i ~ N(mu_i, 1).

    A case is null when its mu came from a point-mass component at 0, or from
    the first component when the prior has no point mass.
    """
    rng = np.random.default_rng(seed)
    mu, comp = prior.sample(N, rng)
    z = mu + rng.standard_normal(N)
    atoms = [c for c, (_, m, s) in enumerate(prior.components) if s == 0 and m == 0]
    null_comps = atoms or [0]
    return ZSample(z), Truth(mu, np.isin(comp, null_comps))


def block_sizes(n, blocks):
    """Split n into `blocks` near-equal sizes."""
    base, extra = divmod(n, blocks)
    return np.array([base + (b < extra) for b in range(blocks)])


def implied_alpha(n_null, blocks, rho):
    """RMS correlation among null z's: ``sqrt(fraction of within-block pairs) * rho``."""
    sizes = block_sizes(n_null, blocks)
    within = float(np.sum(sizes * (sizes - 1)))
    return math.sqrt(within / (n_null * (n_null - 1))) * rho


def rho_for_alpha(alpha, n_null, blocks):
    """Within-block correlation giving RMS correlation `alpha`; ConfigError if infeasible."""
    top = implied_alpha(n_null, blocks, 1.0)
    if not 0 <= alpha < top:
        raise ConfigError(f"alpha = {alpha} is not achievable with {blocks} blocks; range is [0, {top:.4f})")
    return alpha / top


def simulate_correlated(spec=None, seed=None, alpha=None):
    """Block-correlated nulls followed by independent nonnulls.

    Null z's are ``sqrt(rho) g_b + sqrt(1 - rho) e_i`` for a shared block
    factor g_b, so each is exactly N(0, 1) with correlation rho inside a block
    and 0 across blocks.  Nonnulls are N(nonnull_mean, nonnull_sd^2).  When
    `alpha` is given it overrides ``spec.rho`` via :func:`rho_for_alpha`.

    ``Truth.block_variate`` is the realized ``A = rho sum_b w_b (g_b^2 - 1) / sqrt(2)``
    (w_b the block fractions), for which the null second moment is
    ``1 + sqrt(2) A`` in expectation.
    """
    spec = spec or SimSpec(model="correlated-blocks")
    rho = spec.rho if alpha is None else rho_for_alpha(alpha, spec.n_null, spec.blocks)
    rng = np.random.default_rng(seed)
    sizes = block_sizes(spec.n_null, spec.blocks)
    g = rng.standard_normal(spec.blocks)
    z0 = math.sqrt(rho) * np.repeat(g, sizes) + math.sqrt(1 - rho) * rng.standard_normal(spec.n_null)
    z1 = spec.nonnull_mean + spec.nonnull_sd * rng.standard_normal(spec.n_nonnull)
    A = rho * float(np.sum(sizes / spec.n_null * (g ** 2 - 1))) / math.sqrt(2)
    mu = np.concatenate([np.zeros(spec.n_null), np.full(spec.n_nonnull, spec.nonnull_mean)])
    null = np.concatenate([np.ones(spec.n_null, bool), np.zeros(spec.n_nonnull, bool)])
    return ZSample(np.concatenate([z0, z1])), Truth(mu, null, A)


def sigma0_percentile(z, literal=False):
    """Half the distance between the +-1 sd percentiles (15.87, 84.13).

    ``literal=True`` uses the 16th and 86th percentiles instead.
    """
    x = np.asarray(z, dtype=float).ravel()
    if x.size < 100:
        raise InputError(f"need at least 100 z-values, got {x.size}")
    lo, hi = (16.0, 86.0) if literal else (100 * stats.norm.cdf(-1), 100 * stats.norm.cdf(1))
    a, b = np.percentile(x, [lo, hi])
    return float((b - a) / 2)


def fdp(selected, null):
    """False discovery proportion: nulls among `selected` (indices) over max(1, R)."""
    selected = np.asarray(selected, dtype=int).ravel()
    null = np.asarray(null, dtype=bool)
    if selected.size == 0:
        return 0.0
    return float(np.sum(null[selected])) / selected.size


# ---------------------------------------------------------------------------
# Replicates
# ---------------------------------------------------------------------------

def _two_groups_replicate(rng, N):
    """One draw of the two-groups model with every fit Tables 1 and 2 need."""
    z, truth = simulate_two_groups(PRIOR_TWO_GROUPS, N, rng)
    x = z.values
    zs = np.array(TABLE1_Z)
    hist = bin_zvalues(x)
    spline = fit_mixture_density(hist, basis="spline")
    poly = fit_mixture_density(hist, basis="polynomial")
    geo = geometric_null(poly)
    ana = analytic_null(x).null
    theo = theoretical_null(PRIOR_TWO_GROUPS.weights[0])
    rec = {"n_null": truth.n_null, "n_nonnull": truth.n_nonnull,
           "geo_delta0": geo.delta0, "geo_sigma0": geo.sigma0, "geo_p0": geo.p0_raw,
           "ana_delta0": ana.delta0, "ana_sigma0": ana.sigma0, "ana_p0": ana.p0_raw}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        for tag, null in (("theo", theo), ("emp", ana)):
            lf = np.log(local_fdr(zs, null, spline, raw=True))
            lF = np.log(tail_fdr(zs, null, x, side="right", raw=True))
            for zz, a, b in zip(TABLE1_Z, lf, lF):
                rec[f"logfdr_{tag}_{zz:g}"] = float(a)
                rec[f"logFdr_{tag}_{zz:g}"] = float(b)
    return rec


def _fig6_replicate(rng, q=0.1):
    z, truth = simulate_correlated(seed=rng)
    sel = bh_select(z.values, theoretical_null(), q, side="two")
    return {"n_null": truth.n_null, "n_nonnull": truth.n_nonnull,
            "sigma0": sigma0_percentile(z), "fdp": fdp(sel.selected, truth.null),
            "R": sel.R, "A": truth.block_variate}


def _fig8_replicate(rng, N=10_000, q=0.05, level=0.95):
    z, truth = simulate_two_groups(PRIOR_LEFT, N, rng)
    rec = {"n_null": truth.n_null, "n_nonnull": truth.n_nonnull}
    for mode in ("paper", "by"):
        iv = fcr_intervals(z, q, side="left", mode=mode, truth=truth.mu)
        rec["R"] = iv.R
        rec["z0"] = iv.threshold
        rec[f"half_width_{mode}"] = iv.half_width
        rec[f"fcr_{mode}"] = iv.fcr_realized
    sel = iv.index
    nonnull = sel[~truth.null[sel]]
    if nonnull.size:
        bi = bayes_intervals(PRIOR_LEFT, z.values[nonnull], level)
        lo = np.array([b.lo for b in bi])
        hi = np.array([b.hi for b in bi])
        mu = truth.mu[nonnull]
        covered = int(np.sum((mu >= lo) & (mu <= hi)))
    else:
        covered = 0
    rec["bayes_n"] = int(nonnull.size)
    rec["bayes_covered"] = covered
    return rec


_REPLICATES = {
    "table1": lambda rng, kw: _two_groups_replicate(rng, kw.get("N", 1500)),
    "table2": lambda rng, kw: _two_groups_replicate(rng, kw.get("N", 1500)),
    "fig6": lambda rng, kw: _fig6_replicate(rng, kw.get("q", 0.1)),
    "fig8": lambda rng, kw: _fig8_replicate(rng, kw.get("N", 10_000), kw.get("q", 0.05)),
}


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def _col(records, key):
    return np.array([r[key] for r in records], dtype=float)


def _mean_sd(records, key):
    v = _col(records, key)
    return {"mean": float(v.mean()), "sd": float(v.std(ddof=1)) if v.size > 1 else math.nan}


def true_fdr(z, prior=PRIOR_TWO_GROUPS):
    """Exact local fdr ``p0 phi(z) / f(z)`` under a point-mass + normal prior."""
    from .onegroup import convolve_prior
    w0 = sum(w for w, m, s in prior.components if s == 0 and m == 0)
    return w0 * norm_pdf(z) / convolve_prior(prior, z)


def aggregate(name, records):
    """Summary statistics of an experiment, recomputable from its records."""
    if not records:
        return {}
    if name == "table2":
        return {f"{meth}_{par}": _mean_sd(records, f"{meth}_{par}")
                for meth in ("geo", "ana") for par in ("delta0", "sigma0", "p0")}
    if name == "table1":
        out = {"z": list(TABLE1_Z), "true_fdr": [float(true_fdr(zz)) for zz in TABLE1_Z]}
        for kind in ("logfdr", "logFdr"):
            for tag in ("theo", "emp"):
                out[f"sd_{kind}_{tag}"] = [_mean_sd(records, f"{kind}_{tag}_{zz:g}")["sd"]
                                           for zz in TABLE1_Z]
        return out
    if name == "fig6":
        s = _col(records, "sigma0")
        f = _col(records, "fdp")
        k = max(1, int(round(0.05 * s.size)))
        order = np.argsort(s, kind="stable")
        A = _col(records, "A")
        slope = float(np.polyfit(A, s ** 2, 1)[0]) if np.ptp(A) > 0 else math.nan
        rank = float(stats.spearmanr(s, f)[0]) if np.ptp(s) > 0 and np.ptp(f) > 0 else math.nan
        return {
            "mean_fdp": float(f.mean()),
            "se_fdp": float(f.std(ddof=1) / math.sqrt(f.size)) if f.size > 1 else math.nan,
            "fdp_low5": float(f[order[:k]].mean()),
            "fdp_high5": float(f[order[-k:]].mean()),
            "spearman_sigma0_fdp": rank,
            "sigma0": {"mean": float(s.mean()), "q05": float(np.quantile(s, 0.05)),
                       "q95": float(np.quantile(s, 0.95))},
            "dispersion_slope": slope,
        }
    if name == "fig8":
        out = {"R": _mean_sd(records, "R")}
        for mode in ("paper", "by"):
            v = _col(records, f"fcr_{mode}")
            out[f"fcr_{mode}"] = {"mean": float(v.mean()),
                                  "se": float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan}
        n = _col(records, "bayes_n").sum()
        c = _col(records, "bayes_covered").sum()
        out["bayes_coverage"] = {"rate": float(c / n) if n else math.nan, "n": int(n),
                                 "se": float(math.sqrt(0.95 * 0.05 / n)) if n else math.nan}
        return out
    raise ConfigError(f"unknown experiment {name!r}")


@dataclass
class SimReport:
    name: str
    reps: int
    seed: int | None
    records: list
    failures: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {"experiment": self.name, "reps": self.reps, "seed": self.seed,
                "prng": PRNG_ALGORITHM, "config": self.config,
                "n_ok": len(self.records), "failures": self.failures,
                "aggregates": self.aggregates, "records": self.records}

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=False, allow_nan=True)


def run_experiment(name, reps=None, seed=None, **overrides):
    """Run one of the canned experiments.

    Parameters
    ----------
    name : {'table1', 'table2', 'fig6', 'fig8'}
    reps : int, optional
        Replicate count; defaults to the desk-scale value for `name`.
    seed : int, optional
        Root seed; each replicate gets its own spawned substream.
    **overrides
        ``N`` (table1/table2/fig8) and ``q`` (fig6/fig8).

    Replicates that raise a package error are recorded in ``failures``; more
    than 10% failures raises :class:`ExperimentError`.
    """
    if name not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {name!r}")
    reps = DEFAULT_REPS[name] if reps is None else int(reps)
    if reps < 1:
        raise ConfigError("reps must be positive")
    run = _REPLICATES[name]
    records, failures = [], []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(reps)):
        rng = np.random.Generator(np.random.PCG64(child))
        try:
            rec = run(rng, overrides)
        except (FdrkitError, FloatingPointError, np.linalg.LinAlgError) as exc:
            failures.append({"replicate": i, "error": f"{type(exc).__name__}: {exc}"})
            continue
        rec["replicate"] = i
        records.append(rec)
    if len(failures) > MAX_FAILURE_RATE * reps:
        raise ExperimentError(f"{name}: {len(failures)} of {reps} replicates failed; "
                              f"first: {failures[0]['error']}")
    config = {"experiment": name, "reps": reps, "seed": seed, **overrides}
    return SimReport(name, reps, seed, records, failures, aggregate(name, records), config)
