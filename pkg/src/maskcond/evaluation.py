"""Evaluation of conditional samplers against the exact Gaussian oracle.

A "sampler" here is anything that can draw from an approximate conditional
law: sampler(mask, x_available, n, rng) -> (n, |r|) array. Trained generators
and the oracle itself are adapted through as_sampler, so every protocol can
run on either (swapping in the oracle measures the pipeline's noise floor).

Reports are flat row lists with the fixed header
a,r,metric,value,n_samples,seed,protocol and serialize to CSV and JSON.
"""

import csv
import itertools
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import rng as rng_mod
from .errors import BandwidthError, ShapeError
from .gaussian import Gaussian, conditional_moments, mse_lower_bound, sample_conditional
from .masks import MaskPair, enumerate_mask_pairs, mask_to_bits, pair_from_bits
from .model import ConditioningMode, NcGenerator, generate_batch
from .training import train

CSV_HEADER = ("a", "r", "metric", "value", "n_samples", "seed", "protocol")

METRICS = ("param_error", "mmd_u", "mmd_v", "energy", "mse",
           "joint_mean_err", "joint_cov_err")

# The 12 availability/request rows of the benchmark conditional table.
TABLE1_MASKS = (
    ("100", "001"), ("100", "010"), ("100", "011"),
    ("010", "001"), ("010", "100"), ("010", "101"),
    ("001", "010"), ("001", "100"), ("001", "110"),
    ("101", "010"), ("110", "001"), ("011", "100"),
)

# Path labels for evaluation streams, one per protocol.
_PROTO_TABLE1 = 1
_PROTO_GRID = 2
_PROTO_JOINT = 3
_PROTO_BOUND = 4
_PROTO_ABLATION = 5

AGGREGATE_SEED = -1


@dataclass(frozen=True)
class GridSpec:
    """Equispaced conditioning values per available coordinate, centered on the
    marginal mean and spanning +-half_width_sigmas marginal standard deviations."""

    points_per_dim: int = 20
    half_width_sigmas: float = 3.0


@dataclass
class EvalRow:
    a: str
    r: str
    metric: str
    value: float
    n_samples: int
    seed: int
    protocol: str


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)

    def add(self, **kw):
        self.rows.append(EvalRow(**kw))

    def extend(self, other):
        self.rows.extend(other.rows)

    def values(self, metric=None, protocol=None, a=None, r=None, seed=None):
        out = []
        for row in self.rows:
            if metric is not None and row.metric != metric:
                continue
            if protocol is not None and row.protocol != protocol:
                continue
            if a is not None and row.a != a:
                continue
            if r is not None and row.r != r:
                continue
            if seed is not None and row.seed != seed:
                continue
            out.append(row.value)
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_HEADER)
            for row in self.rows:
                w.writerow([row.a, row.r, row.metric, repr(row.value),
                            row.n_samples, row.seed, row.protocol])

    def to_json(self, path):
        with open(path, "w") as f:
            json.dump([asdict(row) for row in self.rows], f, indent=1)
            f.write("\n")

    @staticmethod
    def from_csv(path):
        report = EvalReport()
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = tuple(next(reader))
            if header != CSV_HEADER:
                raise ShapeError(f"unexpected report header {header}")
            for rec in reader:
                report.add(a=rec[0], r=rec[1], metric=rec[2], value=float(rec[3]),
                           n_samples=int(rec[4]), seed=int(rec[5]), protocol=rec[6])
        return report


@dataclass
class MomentEstimate:
    mu: np.ndarray
    sigma: np.ndarray
    n_samples: int
    degenerate: bool = False


def oracle_sampler(g):
    """Sampler drawing from the exact conditional law."""

    def sample(mask, x_available, n, rng):
        return sample_conditional(g, mask, x_available, n, rng)

    return sample


def generator_sampler(gen):
    """Sampler drawing from a trained generator's requested coordinates."""

    def sample(mask, x_available, n, rng):
        d = gen.data_dim
        idx_a = np.flatnonzero(np.asarray(mask.a) == 1.0)
        idx_r = np.flatnonzero(np.asarray(mask.r) == 1.0)
        x = np.zeros((n, d))
        x[:, idx_a] = np.asarray(x_available, dtype=np.float64)
        z = rng.standard_normal((n, gen.z_dim))
        xh = generate_batch(gen, x, mask.a, mask.r, z)
        return xh[:, idx_r]

    return sample


def conditional_mean_sampler(g):
    """Degenerate sampler that always outputs the exact conditional mean;
    its squared error attains the reconstruction lower bound exactly."""

    def sample(mask, x_available, n, rng):
        cm = conditional_moments(g, mask, x_available)
        return np.tile(cm.mu, (int(n), 1))

    return sample


def as_sampler(obj):
    if isinstance(obj, NcGenerator):
        return generator_sampler(obj)
    if isinstance(obj, Gaussian):
        return oracle_sampler(obj)
    if callable(obj):
        return obj
    raise ShapeError(f"cannot interpret {type(obj).__name__} as a conditional sampler")


def estimate_conditional_moments(model, mask, x_available, n, seed):
    """Sample moments of a conditional sampler. seed may be an int or Generator.

    A constant sampler yields a zero covariance and the degenerate flag rather
    than an error.
    """
    n = int(n)
    if n < 2:
        raise ShapeError("moment estimation needs n >= 2")
    gen = seed if isinstance(seed, np.random.Generator) else rng_mod.stream(seed, rng_mod.EVAL)
    samples = np.asarray(as_sampler(model)(mask, x_available, n, gen), dtype=np.float64)
    if samples.shape[0] != n:
        raise ShapeError(f"sampler returned {samples.shape[0]} rows, expected {n}")
    mu = samples.mean(axis=0)
    centered = samples - mu
    sigma = (centered.T @ centered) / (n - 1)
    spread = float(np.abs(centered).max(initial=0.0))
    return MomentEstimate(mu, sigma, n, degenerate=spread < 1e-12)


def param_error_norm(est, truth):
    """Euclidean norm of [mu gap, row-major covariance gap] between an estimate
    and the exact conditional moments."""
    dmu = np.asarray(est.mu, dtype=np.float64) - truth.mu
    dsig = np.asarray(est.sigma, dtype=np.float64) - truth.sigma
    if dmu.shape != truth.mu.shape or dsig.shape != truth.sigma.shape:
        raise ShapeError("estimate and truth have different shapes")
    return float(np.sqrt((dmu * dmu).sum() + (dsig * dsig).sum()))


def conditioning_grid(g, mask, grid=GridSpec()):
    """Cartesian product of per-coordinate linspaces over the available set.

    Rows are ordered with the first available coordinate varying slowest.
    An empty available set yields a single empty conditioning point.
    """
    idx_a = np.flatnonzero(np.asarray(mask.a) == 1.0)
    if idx_a.size == 0:
        return np.zeros((1, 0))
    axes = []
    for i in idx_a:
        sd = float(np.sqrt(g.sigma[i, i]))
        half = grid.half_width_sigmas * sd
        axes.append(np.linspace(g.mu[i] - half, g.mu[i] + half, grid.points_per_dim))
    return np.array(list(itertools.product(*axes)))


def _sq_dists(x, y):
    xx = (x * x).sum(axis=1)
    yy = (y * y).sum(axis=1)
    d2 = xx[:, None] + yy[None, :] - 2.0 * (x @ y.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _as_points(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ShapeError(f"{name} must be a sample batch, got shape {x.shape}")
    return x


def median_bandwidth(x, y):
    """Median pairwise Euclidean distance over the pooled points (i < j)."""
    pooled = np.vstack([_as_points(x, "x"), _as_points(y, "y")])
    d2 = _sq_dists(pooled, pooled)
    iu = np.triu_indices(pooled.shape[0], k=1)
    med = float(np.median(np.sqrt(d2[iu])))
    if med <= 0.0:
        raise BandwidthError("median pairwise distance is zero; bandwidth undefined")
    return med


@dataclass
class MmdResult:
    u_stat: float
    v_stat: float
    bandwidth: float


def mmd_statistic(x, y, bandwidth="auto"):
    """Gaussian-kernel MMD^2 between two sample sets, both estimator flavors.

    The U-statistic is unbiased and can dip below zero on close distributions;
    the V-statistic is biased and always >= 0. bandwidth 'auto' is the pooled
    median pairwise distance.
    """
    x = _as_points(x, "x")
    y = _as_points(y, "y")
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    m, n = x.shape[0], y.shape[0]
    if m < 2 or n < 2:
        raise ShapeError("the unbiased statistic needs at least 2 points per set")
    h = median_bandwidth(x, y) if bandwidth == "auto" else float(bandwidth)
    if h <= 0.0:
        raise BandwidthError(f"bandwidth must be positive, got {h}")
    denom = 2.0 * h * h
    kxx = np.exp(-_sq_dists(x, x) / denom)
    kyy = np.exp(-_sq_dists(y, y) / denom)
    kxy = np.exp(-_sq_dists(x, y) / denom)
    u = (
        (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
        + (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
        - 2.0 * kxy.mean()
    )
    v = kxx.mean() + kyy.mean() - 2.0 * kxy.mean()
    return MmdResult(float(u), float(v), h)


def mmd_u_null_se(x, y, n_permutations=200, seed=0, bandwidth="auto"):
    """Permutation-null standard error of the MMD^2 U-statistic.

    Pools both sets, recomputes the U-statistic under label permutations with
    the bandwidth held fixed, and returns (observed u, null standard error).
    """
    x = _as_points(x, "x")
    y = _as_points(y, "y")
    m, n = x.shape[0], y.shape[0]
    h = median_bandwidth(x, y) if bandwidth == "auto" else float(bandwidth)
    observed = mmd_statistic(x, y, bandwidth=h).u_stat
    pooled = np.vstack([x, y])
    k = np.exp(-_sq_dists(pooled, pooled) / (2.0 * h * h))
    gen = seed if isinstance(seed, np.random.Generator) else rng_mod.stream(seed, rng_mod.EVAL)
    vals = np.empty(int(n_permutations))
    for t in range(int(n_permutations)):
        perm = gen.permutation(m + n)
        ix, iy = perm[:m], perm[m:]
        kxx = k[np.ix_(ix, ix)]
        kyy = k[np.ix_(iy, iy)]
        kxy = k[np.ix_(ix, iy)]
        vals[t] = (
            (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
            + (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
            - 2.0 * kxy.mean()
        )
    return observed, float(vals.std())


def energy_statistic(x, y):
    """Energy distance (V-statistic form): 2 E|X-Y| - E|X-X'| - E|Y-Y'|."""
    x = _as_points(x, "x")
    y = _as_points(y, "y")
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[0] < 1 or y.shape[0] < 1:
        raise ShapeError("energy distance needs at least one point per set")
    dxy = float(np.sqrt(_sq_dists(x, y)).mean())
    dxx = float(np.sqrt(_sq_dists(x, x)).mean())
    dyy = float(np.sqrt(_sq_dists(y, y)).mean())
    return 2.0 * dxy - dxx - dyy


def _models_by_seed(models):
    if isinstance(models, dict):
        return {int(k): v for k, v in models.items()}
    return {0: models}


def table1_protocol(models, g, n_samples=10000, grid=GridSpec(), eval_seed=0):
    """Grid-averaged conditional parameter error for the 12 benchmark rows.

    models maps training seed -> sampler (or is a single sampler). Per row and
    seed, the value is the mean over the conditioning grid of the parameter
    error norm at n_samples draws per point. Per-row means over seeds are
    appended with seed = -1 under protocol 'table1-mean'.
    """
    models = _models_by_seed(models)
    report = EvalReport()
    for row_i, (a_bits, r_bits) in enumerate(TABLE1_MASKS):
        mask = pair_from_bits(a_bits, r_bits)
        points = conditioning_grid(g, mask, grid)
        per_seed = []
        for t_seed, model in models.items():
            sampler = as_sampler(model)
            errs = np.empty(points.shape[0])
            for p_i, x_avail in enumerate(points):
                stream = rng_mod.stream(
                    eval_seed, rng_mod.EVAL, _PROTO_TABLE1, row_i, p_i, t_seed
                )
                est = estimate_conditional_moments(sampler, mask, x_avail, n_samples, stream)
                errs[p_i] = param_error_norm(est, conditional_moments(g, mask, x_avail))
            value = float(errs.mean())
            per_seed.append(value)
            report.add(a=a_bits, r=r_bits, metric="param_error", value=value,
                       n_samples=n_samples, seed=t_seed, protocol="table1")
        report.add(a=a_bits, r=r_bits, metric="param_error",
                   value=float(np.mean(per_seed)), n_samples=n_samples,
                   seed=AGGREGATE_SEED, protocol="table1-mean")
    return report


def grid_protocol(model, g, n_samples=1000, grid=GridSpec(), eval_seed=0,
                  rows=TABLE1_MASKS, seed_label=0):
    """Two-sample statistics against the oracle at every conditioning point.

    Emits one row per grid point per metric (mmd_u, mmd_v, energy), so a
    (a, r) pair with one available coordinate contributes points_per_dim rows
    per metric and a pair with two contributes points_per_dim^2.
    """
    sampler = as_sampler(model)
    report = EvalReport()
    for row_i, (a_bits, r_bits) in enumerate(rows):
        mask = pair_from_bits(a_bits, r_bits)
        points = conditioning_grid(g, mask, grid)
        for p_i, x_avail in enumerate(points):
            s_model = rng_mod.stream(eval_seed, rng_mod.EVAL, _PROTO_GRID, row_i, p_i, 0)
            s_oracle = rng_mod.stream(eval_seed, rng_mod.EVAL, _PROTO_GRID, row_i, p_i, 1)
            xs = sampler(mask, x_avail, n_samples, s_model)
            ys = sample_conditional(g, mask, x_avail, n_samples, s_oracle)
            mmd = mmd_statistic(xs, ys)
            for metric, value in (("mmd_u", mmd.u_stat), ("mmd_v", mmd.v_stat),
                                  ("energy", energy_statistic(xs, ys))):
                report.add(a=a_bits, r=r_bits, metric=metric, value=value,
                           n_samples=n_samples, seed=seed_label, protocol="grid")
    return report


ABLATION_CELLS = (
    ConditioningMode(generator_masks=False, discriminator_masks=False),
    ConditioningMode(generator_masks=True, discriminator_masks=False),
    ConditioningMode(generator_masks=False, discriminator_masks=True),
    ConditioningMode(generator_masks=True, discriminator_masks=True),
)


def ablation_suite(config_base, dataset, seeds, g, n_samples=10000,
                   grid=GridSpec(), eval_seed=0):
    """Train and score the four mask-conditioning cells on one dataset.

    Per cell and training seed: train with only the conditioning flags and the
    seed changed, then average the table1 per-row values into one number.
    Per-cell means over seeds get seed = -1 under 'ablation-mean:<label>'.
    """
    report = EvalReport()
    for mode in ABLATION_CELLS:
        label = mode.label()
        per_seed = []
        for t_seed in seeds:
            cfg = replace(config_base, conditioning=mode, seed=int(t_seed))
            result = train(cfg, dataset)
            t1 = table1_protocol({int(t_seed): result.generator}, g,
                                 n_samples=n_samples, grid=grid, eval_seed=eval_seed)
            value = float(np.mean(t1.values(metric="param_error", protocol="table1")))
            per_seed.append(value)
            report.add(a="*", r="*", metric="param_error", value=value,
                       n_samples=n_samples, seed=int(t_seed),
                       protocol=f"ablation:{label}")
        report.add(a="*", r="*", metric="param_error", value=float(np.mean(per_seed)),
                   n_samples=n_samples, seed=AGGREGATE_SEED,
                   protocol=f"ablation-mean:{label}")
    return report


def joint_sampling_eval(model, g, n_samples=10000, eval_seed=0, seed_label=0):
    """Ask the sampler for full joint draws via (a=0, r=1...1) and compare
    moments to the true joint."""
    d = g.dim
    mask = MaskPair(np.zeros(d), np.ones(d))
    stream = rng_mod.stream(eval_seed, rng_mod.EVAL, _PROTO_JOINT, 0, 0, seed_label)
    est = estimate_conditional_moments(model, mask, np.zeros(0), n_samples, stream)
    mean_err = float(np.linalg.norm(est.mu - g.mu))
    cov_err = float(np.linalg.norm(est.sigma - g.sigma))
    report = EvalReport()
    bits = mask_to_bits(mask.a), mask_to_bits(mask.r)
    report.add(a=bits[0], r=bits[1], metric="joint_mean_err", value=mean_err,
               n_samples=n_samples, seed=seed_label, protocol="joint")
    report.add(a=bits[0], r=bits[1], metric="joint_cov_err", value=cov_err,
               n_samples=n_samples, seed=seed_label, protocol="joint")
    return report


def complementary_pairs(d):
    """All (a, r) with r nonzero and a the exact complement of r."""
    out = []
    for p in enumerate_mask_pairs(d):
        if np.array_equal(p.a, 1.0 - p.r):
            out.append(p)
    return out


def reconstruction_check(model, g, dataset, n_z=20, eval_seed=0, seed_label=0,
                         max_rows=None):
    """Mean squared reconstruction error per complementary pair vs its floor.

    For every complementary (a, r) split, measures E ||xhat_r - x_r||^2 over
    dataset rows and n_z noise draws each, and emits the exact lower bound
    trace(cov(X_r | X_a)) as a second row under protocol 'bound-floor'. No
    sampler can beat the floor beyond estimation noise.
    """
    dataset = np.asarray(dataset, dtype=np.float64)
    if max_rows is not None:
        dataset = dataset[: int(max_rows)]
    n_rows = dataset.shape[0]
    report = EvalReport()
    for pair_i, mask in enumerate(complementary_pairs(g.dim)):
        idx_a = np.flatnonzero(mask.a == 1.0)
        idx_r = np.flatnonzero(mask.r == 1.0)
        stream = rng_mod.stream(eval_seed, rng_mod.EVAL, _PROTO_BOUND, pair_i, 0, seed_label)
        if isinstance(model, NcGenerator):
            # Batched path: repeat every data row n_z times.
            reps = np.repeat(dataset, n_z, axis=0)
            z = stream.standard_normal((reps.shape[0], model.z_dim))
            xh = generate_batch(model, reps, mask.a, mask.r, z)
            diff = xh[:, idx_r] - reps[:, idx_r]
            mse = float((diff * diff).sum(axis=1).mean())
        else:
            sampler = as_sampler(model)
            total = 0.0
            for row in dataset:
                draws = sampler(mask, row[idx_a], n_z, stream)
                diff = draws - row[idx_r]
                total += float((diff * diff).sum(axis=1).mean())
            mse = total / n_rows
        bits_a, bits_r = mask_to_bits(mask.a), mask_to_bits(mask.r)
        report.add(a=bits_a, r=bits_r, metric="mse", value=mse,
                   n_samples=n_rows * n_z, seed=seed_label, protocol="bound")
        report.add(a=bits_a, r=bits_r, metric="mse", value=mse_lower_bound(g, mask),
                   n_samples=0, seed=seed_label, protocol="bound-floor")
    return report
