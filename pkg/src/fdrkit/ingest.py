"""Normal/t kernels, statistic-to-z transforms and z-value file I/O.

The normal cdf and quantile are backed by ``scipy.special.ndtr``/``ndtri``
(Cephes, absolute error well below 1e-12 over the double range) and the
Student-t cdf by ``scipy.special.stdtr``, which evaluates the regularized
incomplete beta function.  Tail probabilities are always taken on the short
side so that |z| up to ~37 keeps full relative precision.
"""

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special

from .errors import DegenerateInputError, DomainError, InputError, ParseError

SQRT_2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Gaussian kernels
# ---------------------------------------------------------------------------

def norm_pdf(x, loc=0.0, scale=1.0):
    """Normal density ``phi_{loc,scale}(x)``."""
    u = (np.asarray(x, dtype=float) - loc) / scale
    out = np.exp(-0.5 * u * u) / (SQRT_2PI * scale)
    return out if out.ndim else float(out)


def norm_cdf(x, loc=0.0, scale=1.0):
    """Normal cdf ``Phi((x - loc)/scale)``."""
    out = special.ndtr((np.asarray(x, dtype=float) - loc) / scale)
    return out if np.ndim(out) else float(out)


def norm_sf(x, loc=0.0, scale=1.0):
    """Upper tail ``1 - Phi((x - loc)/scale)`` computed without cancellation."""
    out = special.ndtr(-(np.asarray(x, dtype=float) - loc) / scale)
    return out if np.ndim(out) else float(out)


def norm_ppf(p):
    """Standard normal quantile; raises :class:`DomainError` outside (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise DomainError("inverse normal cdf needs 0 < p < 1")
    out = special.ndtri(p)
    return out if out.ndim else float(out)


def gaussian_kernels(x):
    """Return ``(pdf, cdf)`` of the standard normal at `x`."""
    return norm_pdf(x), norm_cdf(x)


inverse_cdf = norm_ppf


# ---------------------------------------------------------------------------
# Statistic-to-z transforms
# ---------------------------------------------------------------------------

def t_to_z(t, df):
    """Map Student-t statistics with `df` degrees of freedom to the z scale.

    ``z = Phi^{-1}(F_df(t))``, evaluated through the lower tail of ``|t|`` and
    then re-signed, so the map is exactly antisymmetric and accurate far into
    the tails.
    """
    if df is None or not df > 0:
        raise InputError(f"degrees of freedom must be positive, got {df!r}")
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise InputError("t statistics must be finite")
    lower = special.stdtr(df, -np.abs(t))
    z = -np.sign(t) * special.ndtri(lower)
    # ndtri(0.5) is exactly 0, but guard -0.0 for t == 0
    z = np.where(t == 0.0, 0.0, z)
    return z if z.ndim else float(z)


def p_to_z(p, sign=None, two_sided=False):
    """Convert p-values to z-values.

    One-sided: ``z = Phi^{-1}(p)`` (small p gives large negative z).
    Two-sided: ``|z| = -Phi^{-1}(p/2)`` with direction taken from `sign`
    (default positive).
    """
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p <= 1.0))):
        raise DomainError("p-values must lie in (0, 1]")
    if two_sided:
        mag = -special.ndtri(p / 2.0)
        s = np.ones_like(p) if sign is None else np.sign(np.asarray(sign, dtype=float))
        z = s * mag
    else:
        if np.any(p >= 1.0):
            raise DomainError("one-sided p-values must be < 1")
        z = special.ndtri(p)
    return z if z.ndim else float(z)


def binom_to_z(p_ad, n_ad, p_dis, n_dis, delta=0.0):
    """Binomial difference-of-proportions z-value.

    ``z = (p_ad - p_dis - delta) / sqrt(p_ad(1-p_ad)/n_ad + p_dis(1-p_dis)/n_dis)``
    """
    p_ad, n_ad, p_dis, n_dis = (np.asarray(a, dtype=float) for a in (p_ad, n_ad, p_dis, n_dis))
    if np.any(n_ad < 1) or np.any(n_dis < 1):
        raise InputError("group sizes must be >= 1")
    for p in (p_ad, p_dis):
        if np.any((p < 0) | (p > 1)):
            raise InputError("proportions must lie in [0, 1]")
    var = p_ad * (1 - p_ad) / n_ad + p_dis * (1 - p_dis) / n_dis
    if np.any(var <= 0):
        raise DegenerateInputError("zero binomial variance (both proportions at 0 or 1)")
    z = (p_ad - p_dis - delta) / np.sqrt(var)
    return z if z.ndim else float(z)


# ---------------------------------------------------------------------------
# ZSample and file I/O
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ZSample:
    """N observed z-values with optional unique case labels."""

    values: np.ndarray
    ids: tuple | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size < 1:
            raise InputError("a z-sample needs at least one value")
        if not np.all(np.isfinite(v)):
            raise InputError("z-values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.ids is not None:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != v.size:
                raise InputError(f"{len(ids)} ids for {v.size} values")
            if len(set(ids)) != len(ids):
                raise InputError("case ids must be unique")
            object.__setattr__(self, "ids", ids)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    @property
    def N(self):
        return self.values.size

    def labels(self):
        """Case ids, or 1-based positions as strings when none were given."""
        if self.ids is not None:
            return self.ids
        return tuple(str(i + 1) for i in range(self.N))

    def index_of(self, ids):
        """Positions of `ids` in this sample; unknown ids raise InputError."""
        lookup = {k: i for i, k in enumerate(self.labels())}
        out = []
        for k in ids:
            try:
                out.append(lookup[str(k)])
            except KeyError:
                raise InputError(f"unknown case id {k!r}") from None
        return np.array(out, dtype=int)

    def __eq__(self, other):
        if not isinstance(other, ZSample):
            return NotImplemented
        return self.ids == other.ids and np.array_equal(self.values, other.values)

    __hash__ = None


def _content_lines(text):
    """Yield (lineno, line) for non-blank, non-comment lines."""
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, stripped


def _looks_like_header(line):
    cells = [c.strip() for c in line.split(",")]
    for c in cells:
        try:
            float(c)
        except ValueError:
            return True
    return False


def read_table(path):
    """Read a headed CSV (comment lines skipped) into ``(header, rows, linenos)``."""
    text = Path(path).read_text(encoding="utf-8")
    lines = list(_content_lines(text))
    if not lines:
        raise InputError(f"{path}: file is empty")
    header = [h.strip() for h in next(csv.reader([lines[0][1]]))]
    rows, linenos = [], []
    for lineno, line in lines[1:]:
        cells = [c.strip() for c in next(csv.reader([line]))]
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(cells)}", lineno, path)
        rows.append(cells)
        linenos.append(lineno)
    return header, rows, linenos


def load_columns(path, columns):
    """Load numeric `columns` of a headed CSV as float arrays (dict by name)."""
    header, rows, linenos = read_table(path)
    out = {}
    for name in columns:
        if name not in header:
            raise InputError(f"{path}: no column {name!r} (have {header})")
        j = header.index(name)
        vals = np.empty(len(rows))
        for i, (row, lineno) in enumerate(zip(rows, linenos)):
            try:
                vals[i] = float(row[j])
            except ValueError:
                raise ParseError(f"non-numeric value {row[j]!r} in column {name!r}", lineno, path) from None
            if not math.isfinite(vals[i]):
                raise ParseError(f"non-finite value in column {name!r}", lineno, path)
        out[name] = vals
    return out


def load_zvalues(path, column=None):
    """Read z-values from a text file.

    Two layouts are accepted: one number per line, or CSV with a header row.
    Lines starting with ``#`` are ignored.  In CSV mode an ``id`` column, if
    present, fills :attr:`ZSample.ids`; the value column is `column`, else
    ``z``, else the first non-id column.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = list(_content_lines(text))
    if not lines:
        raise InputError(f"{path}: no z-values found")

    if not _looks_like_header(lines[0][1]):
        vals = []
        for lineno, line in lines:
            try:
                v = float(line)
            except ValueError:
                raise ParseError(f"cannot parse {line!r} as a number", lineno, path) from None
            if not math.isfinite(v):
                raise ParseError("non-finite value", lineno, path)
            vals.append(v)
        return ZSample(np.array(vals))

    header, rows, linenos = read_table(path)
    if not rows:
        raise InputError(f"{path}: header but no data rows")
    if column is None:
        candidates = [h for h in header if h.lower() != "id"]
        if not candidates:
            raise InputError(f"{path}: no value column")
        column = "z" if "z" in header else candidates[0]
    z = load_columns(path, [column])[column]
    ids = None
    if "id" in header:
        j = header.index("id")
        ids = [row[j] for row in rows]
    return ZSample(z, ids)


def _fmt(value, digits):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        return f"{float(value):.{digits}g}"
    return str(value)


def format_table(rows, header=None, comments=(), digits=6):
    """Render rows as CSV text.  Floats use `digits` significant digits."""
    rows = list(rows)
    if header is None:
        if rows and isinstance(rows[0], dict):
            header = list(rows[0].keys())
        else:
            raise InputError("a header is required for sequence rows")
    buf = io.StringIO()
    for c in comments:
        for part in str(c).splitlines():
            buf.write(f"# {part}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if isinstance(row, dict):
            row = [row[h] for h in header]
        writer.writerow([_fmt(v, digits) for v in row])
    return buf.getvalue()


def save_table(path, rows, header=None, comments=(), digits=6):
    """Write rows (dicts or sequences) as a headed CSV file."""
    Path(path).write_text(format_table(rows, header, comments, digits), encoding="utf-8")


def save_zvalues(path, sample, digits=17):
    """Write a ZSample as ``id,z`` CSV; the default precision round-trips exactly."""
    if not isinstance(sample, ZSample):
        sample = ZSample(sample)
    if sample.ids is None:
        save_table(path, ([v] for v in sample.values), header=["z"], digits=digits)
    else:
        save_table(path, zip(sample.ids, sample.values), header=["id", "z"], digits=digits)
