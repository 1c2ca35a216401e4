"""Gene-set enrichment by set-average z-values.

A set S of m cases is scored by ``zbar_S``, the mean of its z-values, and
compared against one of three null references:

``rowrand``
    random m-subsets of all N z-values (rows treated as exchangeable);
``colperm``
    relabel the expression-matrix columns across the two groups, recompute
    every row's z-value and take the set mean again;
``restand``
    the column-permutation draws, but each statistic standardized by the mean
    and sd of the whole z-vector it came from, ``(zbar_S - mu_z) / sigma_z``.

p-values use the add-one rule ``(1 + #{null at least as extreme}) / (B + 1)``;
exhaustive enumeration (``count / total``) is available for small problems.
"""

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError, ParseError
from .ingest import ZSample, t_to_z

METHODS = ("rowrand", "colperm", "restand")
ALTERNATIVES = ("two-sided", "greater", "less")
DEFAULT_B = 999
# upper limit on subsets/relabelings enumerated by exhaustive=True
MAX_EXHAUSTIVE = 200_000
# number of random keys drawn per chunk when sampling row subsets
_CHUNK = 4_000_000


@dataclass(frozen=True, eq=False)
class ExpressionMatrix:
    """N rows (cases) by n columns (samples) split into two groups.

    Row z-values come from pooled two-sample t statistics, second group
    minus first, mapped to the z scale with ``n - 2`` degrees of freedom.
    """

    values: np.ndarray
    row_ids: tuple
    groups: tuple
    column_ids: tuple | None = None

    def __post_init__(self):
        X = np.array(self.values, dtype=float)
        if X.ndim != 2:
            raise InputError("expression matrix must be two-dimensional")
        if not np.all(np.isfinite(X)):
            raise InputError("expression matrix has missing or non-finite values")
        rows = tuple(str(r) for r in self.row_ids)
        groups = tuple(str(g) for g in self.groups)
        if len(rows) != X.shape[0]:
            raise InputError(f"{len(rows)} row ids for {X.shape[0]} rows")
        if len(set(rows)) != len(rows):
            raise InputError("row ids must be unique")
        if len(groups) != X.shape[1]:
            raise InputError(f"{len(groups)} group labels for {X.shape[1]} columns")
        levels = list(dict.fromkeys(groups))
        if len(levels) != 2:
            raise InputError(f"need exactly two groups, got {levels}")
        if min(groups.count(g) for g in levels) < 2:
            raise InputError("each group needs at least two columns")
        X.setflags(write=False)
        object.__setattr__(self, "values", X)
        object.__setattr__(self, "row_ids", rows)
        object.__setattr__(self, "groups", groups)

    @property
    def shape(self):
        return self.values.shape

    @property
    def levels(self):
        return tuple(dict.fromkeys(self.groups))

    def indicator(self):
        """Boolean mask of second-group columns."""
        return np.array([g == self.levels[1] for g in self.groups])

    def standardized(self):
        """Copy with every column centred to mean 0 and scaled to sd 1."""
        X = self.values
        sd = X.std(axis=0)
        sd[sd == 0] = 1.0
        return ExpressionMatrix((X - X.mean(axis=0)) / sd, self.row_ids, self.groups, self.column_ids)

    def row_z(self):
        """Row z-values for the observed group labels."""
        return ZSample(row_zvalues(self.values, self.indicator()[:, None])[:, 0], self.row_ids)


def row_zvalues(X, G):
    """Row z-values for each labelling in the columns of boolean `G` (n x B).

    All labellings must have the same group sizes.  Returns an N x B array.
    """
    X = np.asarray(X, dtype=float)
    G = np.asarray(G, dtype=float)
    n = X.shape[1]
    n2 = G[:, 0].sum()
    n1 = n - n2
    tot1, tot2 = X.sum(axis=1, keepdims=True), (X * X).sum(axis=1, keepdims=True)
    s1 = X @ G
    ss = (X * X) @ G
    m2 = s1 / n2
    m1 = (tot1 - s1) / n1
    # pooled within-group sum of squares
    wss = (ss - n2 * m2 ** 2) + (tot2 - ss - n1 * m1 ** 2)
    df = n - 2
    se = np.sqrt(np.maximum(wss, 0.0) / df * (1.0 / n1 + 1.0 / n2))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (m2 - m1) / se
    if not np.all(np.isfinite(t)):
        raise InputError("constant row: two-sample t statistic undefined")
    return t_to_z(t, df)


@dataclass(frozen=True)
class GeneSetCollection:
    """Named sets of case ids."""

    sets: dict
    descriptions: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for name, members in self.sets.items():
            ids = tuple(str(m) for m in members)
            if len(ids) < 2:
                raise InputError(f"gene set {name!r} has fewer than 2 members")
            if len(set(ids)) != len(ids):
                raise InputError(f"gene set {name!r} lists a member twice")
            clean[str(name)] = ids
        object.__setattr__(self, "sets", clean)

    def __len__(self):
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets.items())

    @property
    def names(self):
        return tuple(self.sets)

    def check(self, ids):
        """Raise InputError naming the first member not among `ids`."""
        known = set(ids)
        for name, members in self.sets.items():
            for m in members:
                if m not in known:
                    raise InputError(f"gene set {name!r}: unknown id {m!r}")


def read_gmt(path):
    """Read a GMT catalogue: ``name <TAB> description <TAB> id <TAB> id ...``."""
    sets, desc = {}, {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split("\t")]
        members = [c for c in cells[2:] if c]
        if len(cells) < 3 or not members:
            raise ParseError("GMT line needs a name, a description and at least one id", lineno, path)
        if cells[0] in sets:
            raise ParseError(f"duplicate set name {cells[0]!r}", lineno, path)
        sets[cells[0]], desc[cells[0]] = members, cells[1]
    if not sets:
        raise InputError(f"{path}: no gene sets")
    return GeneSetCollection(sets, desc)


def read_matrix(path):
    """Read a TSV matrix: header of column ids, then ``row_id <TAB> values``.

    Returns ``(values, row_ids, column_ids)``.
    """
    lines = [(i, l) for i, l in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1)
             if l.strip() and not l.startswith("#")]
    if len(lines) < 2:
        raise InputError(f"{path}: matrix needs a header and at least one row")
    header = lines[0][1].rstrip("\n").split("\t")
    cols = [h.strip() for h in header[1:]]
    rows, vals = [], []
    for lineno, line in lines[1:]:
        cells = line.split("\t")
        if len(cells) != len(cols) + 1:
            raise ParseError(f"expected {len(cols) + 1} fields, got {len(cells)}", lineno, path)
        try:
            v = [float(c) for c in cells[1:]]
        except ValueError:
            raise ParseError("non-numeric matrix entry", lineno, path) from None
        if not all(math.isfinite(x) for x in v):
            raise ParseError("missing or non-finite matrix entry", lineno, path)
        rows.append(cells[0].strip())
        vals.append(v)
    return np.array(vals), tuple(rows), tuple(cols)


def read_design(path):
    """Read a two-column design file (column id, group); tab or comma separated."""
    design = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cells = [c.strip() for c in (line.split("\t") if "\t" in line else line.split(","))]
        if len(cells) != 2:
            raise ParseError("design line needs exactly two fields", lineno, path)
        if lineno == 1 and cells[0].lower() in ("column", "col", "sample", "id"):
            continue
        design[cells[0]] = cells[1]
    return design


def load_expression(matrix_path, design_path):
    """Assemble an :class:`ExpressionMatrix` from matrix and design files."""
    X, rows, cols = read_matrix(matrix_path)
    design = read_design(design_path)
    missing = [c for c in cols if c not in design]
    if missing:
        raise InputError(f"{design_path}: no group for column(s) {missing}")
    return ExpressionMatrix(X, rows, tuple(design[c] for c in cols), cols)


def set_stat(z, ids):
    """Mean z-value of the cases in `ids`."""
    sample = z if isinstance(z, ZSample) else ZSample(z)
    ids = list(ids)
    if not ids:
        raise InputError("gene set is empty")
    return float(sample.values[sample.index_of(ids)].mean())


@dataclass(frozen=True, eq=False)
class EnrichmentResult:
    name: str
    m: int
    observed: float
    method: str
    B: int
    null_draws: np.ndarray
    p_value: float
    alternative: str
    center: float
    exhaustive: bool = False
    replace: bool = False

    def to_dict(self):
        return {
            "set": self.name,
            "m": self.m,
            "observed": self.observed,
            "method": self.method,
            "B": self.B,
            "p_value": self.p_value,
            "alternative": self.alternative,
            "null_mean": float(np.mean(self.null_draws)),
            "null_sd": float(np.std(self.null_draws)),
            "exhaustive": self.exhaustive,
            "replace": self.replace,
        }


def _exceed(null, obs, center, alternative):
    tol = 1e-12 * max(1.0, abs(obs))
    if alternative == "two-sided":
        return int(np.sum(np.abs(null - center) >= abs(obs - center) - tol))
    if alternative == "greater":
        return int(np.sum(null >= obs - tol))
    return int(np.sum(null <= obs + tol))


def _rowrand_draws(z, m, B, rng):
    N = z.size
    out = np.empty(B)
    per = max(1, _CHUNK // N)
    for start in range(0, B, per):
        b = min(per, B - start)
        keys = rng.random((b, N))
        idx = np.argpartition(keys, m - 1, axis=1)[:, :m]
        out[start:start + b] = z[idx].mean(axis=1)
    return out


def _labellings(n, n2, B, rng, exhaustive):
    if exhaustive:
        cols = list(itertools.combinations(range(n), n2))
        G = np.zeros((n, len(cols)), dtype=bool)
        for j, c in enumerate(cols):
            G[list(c), j] = True
        return G
    G = np.zeros((n, B), dtype=bool)
    for j in range(B):
        G[rng.permutation(n)[:n2], j] = True
    return G


def enrich_test(method, ids, z=None, matrix=None, B=DEFAULT_B, seed=None,
                alternative="two-sided", exhaustive=False, name=None):
    """Enrichment p-value for the set `ids`.

    Parameters
    ----------
    method : {'rowrand', 'colperm', 'restand'}
    ids : sequence of str
        Member ids of the set.
    z : ZSample, optional
        Observed z-values; required for ``rowrand`` unless `matrix` is given.
    matrix : ExpressionMatrix, optional
        Required for ``colperm`` and ``restand``; also supplies z when `z` is None.
    B : int
        Number of random null draws (at least 99).
    alternative : {'two-sided', 'greater', 'less'}
        Two-sided compares distances from the null centre: the mean of all z
        for ``rowrand``/``colperm``, zero for ``restand``.
    exhaustive : bool
        Enumerate every subset (rowrand) or relabelling (colperm/restand)
        instead of sampling; p is then ``count / total``.

    Returns
    -------
    EnrichmentResult
    """
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
    if alternative not in ALTERNATIVES:
        raise ConfigError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")
    if not exhaustive and B < 99:
        raise ConfigError(f"B must be at least 99, got {B}")
    if method != "rowrand" and matrix is None:
        raise InputError(f"method {method!r} needs the expression matrix and group labels")
    if z is None:
        if matrix is None:
            raise InputError("need z-values or an expression matrix")
        z = matrix.row_z()
    sample = z if isinstance(z, ZSample) else ZSample(z)
    idx = sample.index_of(list(ids))
    m, N = idx.size, sample.N
    if m == 0:
        raise InputError("gene set is empty")
    if m > N:
        raise InputError(f"set size {m} exceeds the number of cases {N}")
    if len(set(idx.tolist())) != m:
        raise InputError("gene set lists a member twice")
    rng = np.random.default_rng(seed)
    x = sample.values
    obs = float(x[idx].mean())

    if method == "rowrand":
        total = math.comb(N, m)
        if exhaustive:
            if total > MAX_EXHAUSTIVE:
                raise ConfigError(f"{total} subsets is too many to enumerate")
            null = np.array([x[list(c)].mean() for c in itertools.combinations(range(N), m)])
        else:
            null = _rowrand_draws(x, m, B, rng)
        center = float(x.mean())
    else:
        n = matrix.shape[1]
        n2 = int(matrix.indicator().sum())
        total = math.comb(n, n2)
        if exhaustive and total > MAX_EXHAUSTIVE:
            raise ConfigError(f"{total} relabellings is too many to enumerate")
        G = _labellings(n, n2, B, rng, exhaustive)
        zperm = row_zvalues(matrix.values, G)
        null = zperm[idx].mean(axis=0)
        center = float(x.mean())
        if method == "restand":
            null = (null - zperm.mean(axis=0)) / zperm.std(axis=0)
            obs = (obs - x.mean()) / x.std()
            center = 0.0

    count = _exceed(null, obs, center, alternative)
    if exhaustive:
        p = count / null.size
    else:
        p = (1 + count) / (B + 1)
    return EnrichmentResult(name or "set", m, obs, method, null.size, null, p, alternative,
                            center, exhaustive, replace=(not exhaustive and total < B))


def enrich_collection(collection, method, z=None, matrix=None, B=DEFAULT_B, seed=None,
                      alternative="two-sided"):
    """Run :func:`enrich_test` for every set, each on its own random substream."""
    ids = (z if isinstance(z, ZSample) else matrix.row_z() if z is None else ZSample(z)).labels()
    collection.check(ids)
    seeds = np.random.SeedSequence(seed).spawn(len(collection))
    return [enrich_test(method, members, z=z, matrix=matrix, B=B, seed=s,
                        alternative=alternative, name=name)
            for (name, members), s in zip(collection, seeds)]
