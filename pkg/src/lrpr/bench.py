"""Experiment harness: phase-transition grid, noise sweep, anchor accuracy.

Every trial is keyed by ``(base_seed, purpose, M, d, trial)`` so cells can
run in any order or in parallel and still reproduce bit for bit.
"""

import csv
import enum
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .anchor import anchor_oracle, anchor_quality, anchor_rank1
from .metrics import relative_phase_dist
from .model import make_noise, measure, noise_budget, sample_rank1_complex
from .rng import RngSpec, complex_normal, stream_id
from .solver import Mode, SolverConfig, Status, solve

__all__ = [
    "Pipeline",
    "PhaseGridSpec",
    "GridResult",
    "DATA_ANCHOR_LAMBDA",
    "ORACLE_ANCHOR_LAMBDA",
    "make_instance",
    "run_trial",
    "run_phase_transition",
    "fit_transition_curve",
    "classification_accuracy",
    "run_noise_sweep",
    "run_init_accuracy",
    "emit_heatmap_svg",
    "CSV_HEADER",
]

CSV_HEADER = ["M", "d", "trials", "successes", "success_rate", "median_relerr", "runtime_ms"]

# 0.9 - delta with delta at its pilot median for the data-driven anchor (~0.7)
DATA_ANCHOR_LAMBDA = 0.2
ORACLE_ANCHOR_LAMBDA = 0.7
BENCH_MAX_ITER = 5000


class Pipeline(str, enum.Enum):
    ORACLE_ANCHOR = "OracleAnchor"
    DATA_ANCHOR = "DataAnchor"

    @property
    def default_lambda(self):
        return ORACLE_ANCHOR_LAMBDA if self is Pipeline.ORACLE_ANCHOR else DATA_ANCHOR_LAMBDA


@dataclass(frozen=True)
class PhaseGridSpec:
    M_values: tuple
    d_values: tuple
    trials: int
    success_tol: float = 1e-4
    pipeline: Pipeline = Pipeline.ORACLE_ANCHOR
    base_seed: int = 0
    lam: float = None
    max_iter: int = BENCH_MAX_ITER

    def __post_init__(self):
        object.__setattr__(self, "M_values", tuple(int(m) for m in self.M_values))
        object.__setattr__(self, "d_values", tuple(int(d) for d in self.d_values))
        object.__setattr__(self, "pipeline", Pipeline(self.pipeline))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.M_values or not self.d_values:
            raise ValueError("grid must be nonempty")
        if min(self.M_values + self.d_values) < 1:
            raise ValueError("all M and d must be >= 1")

    @property
    def effective_lambda(self):
        return self.pipeline.default_lambda if self.lam is None else float(self.lam)

    def to_dict(self):
        d = asdict(self)
        d["pipeline"] = self.pipeline.value
        d["M_values"] = list(self.M_values)
        d["d_values"] = list(self.d_values)
        return d


@dataclass
class GridResult:
    """Per-cell outcomes, arrays indexed ``[i_d, i_M]``."""

    M_values: tuple
    d_values: tuple
    trials: int
    successes: np.ndarray
    median_error: np.ndarray
    runtime_ms: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def success_rate(self):
        return self.successes / self.trials

    def to_csv(self, include_timing=False):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i, d in enumerate(self.d_values):
            for j, M in enumerate(self.M_values):
                timing = ""
                if include_timing and self.runtime_ms is not None:
                    timing = f"{self.runtime_ms[i, j]:.1f}"
                writer.writerow([
                    M, d, self.trials, int(self.successes[i, j]),
                    repr(float(self.success_rate[i, j])),
                    repr(float(self.median_error[i, j])),
                    timing,
                ])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.DictReader(io.StringIO(text)))
        Ms = tuple(sorted({int(r["M"]) for r in rows}))
        ds = tuple(sorted({int(r["d"]) for r in rows}))
        trials = int(rows[0]["trials"])
        succ = np.zeros((len(ds), len(Ms)), dtype=int)
        med = np.zeros((len(ds), len(Ms)))
        for r in rows:
            i, j = ds.index(int(r["d"])), Ms.index(int(r["M"]))
            succ[i, j] = int(r["successes"])
            med[i, j] = float(r["median_relerr"])
        return cls(Ms, ds, trials, succ, med)


def make_instance(spec, d1, d2, M):
    """Fresh rank-one complex ensemble and unit-Frobenius target ``u v^*``."""
    ens = sample_rank1_complex(d1, d2, M, spec.derive("ensemble"))
    gen = spec.derive("signal").generator()
    u = complex_normal(gen, (d1,))
    v = complex_normal(gen, (d2,))
    Xs = np.outer(u / np.linalg.norm(u), np.conj(v / np.linalg.norm(v)))
    return ens, Xs


def trial_spec(base_seed, M, d, trial, purpose="trial"):
    return RngSpec(base_seed, stream_id(purpose, M, d, trial))


def run_trial(args):
    """One noiseless trial; returns ``(relative error, status, seconds)``."""
    base_seed, M, d, trial, pipeline, lam, max_iter = args
    t0 = time.perf_counter()
    spec = trial_spec(base_seed, M, d, trial)
    ens, Xs = make_instance(spec, d, d, M)
    obs = measure(ens, Xs)
    cfg = SolverConfig(lam=lam, max_iter=max_iter, seed=base_seed)
    try:
        if Pipeline(pipeline) is Pipeline.ORACLE_ANCHOR:
            anchor = anchor_oracle(Xs)
        else:
            anchor = anchor_rank1(ens, obs.y)
        report = solve(ens, obs, anchor, cfg)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError):
        return float("inf"), "Error", time.perf_counter() - t0
    err = relative_phase_dist(report.Xhat, Xs)
    if not np.isfinite(err):
        err = float("inf")
    return err, report.status.value, time.perf_counter() - t0


def _map(fn, jobs, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs, chunksize=1))
    return [fn(j) for j in jobs]


def run_phase_transition(spec, workers=1, progress=None):
    """Success rates of noiseless recovery over the (d, M) grid."""
    lam = spec.effective_lambda
    streams = set()
    shape = (len(spec.d_values), len(spec.M_values))
    successes = np.zeros(shape, dtype=int)
    median_error = np.zeros(shape)
    runtime_ms = np.zeros(shape)
    statuses = {}
    for i, d in enumerate(spec.d_values):
        for j, M in enumerate(spec.M_values):
            jobs = []
            for t in range(spec.trials):
                sid = trial_spec(spec.base_seed, M, d, t).stream_id
                if sid in streams:
                    raise RuntimeError(f"seed collision at M={M}, d={d}, trial={t}")
                streams.add(sid)
                jobs.append((spec.base_seed, M, d, t, spec.pipeline.value, lam, spec.max_iter))
            out = _map(run_trial, jobs, workers)
            errs = np.array([o[0] for o in out])
            successes[i, j] = int(np.sum(errs <= spec.success_tol))
            median_error[i, j] = float(np.median(errs))
            runtime_ms[i, j] = 1e3 * sum(o[2] for o in out)
            statuses[f"{M},{d}"] = [o[1] for o in out]
            if progress:
                progress(M, d, successes[i, j], spec.trials)
    meta = {"spec": spec.to_dict(), "lambda": lam, "statuses": statuses, "log": "natural"}
    return GridResult(spec.M_values, spec.d_values, spec.trials, successes, median_error,
                      runtime_ms, meta)


def _crossings(result, level=0.5):
    """Interpolated d where the success rate first drops below ``level``, per M."""
    rates = result.success_rate
    ds = np.asarray(result.d_values, dtype=float)
    order = np.argsort(ds)
    pts = []
    for j, M in enumerate(result.M_values):
        col = rates[order, j]
        dcol = ds[order]
        for k in range(1, len(col)):
            if col[k - 1] >= level > col[k]:
                frac = (col[k - 1] - level) / (col[k - 1] - col[k])
                pts.append((M, dcol[k - 1] + frac * (dcol[k] - dcol[k - 1])))
                break
    return pts


def fit_transition_curve(result, level=0.5):
    """Least-squares fit of the 50% boundary to ``d = c M / ln(M)^alpha``.

    Natural logarithms; a different base only rescales ``c``. Returns
    ``(c, alpha)``.
    """
    pts = [(M, d) for M, d in _crossings(result, level) if M > math.e]
    if len({M for M, _ in pts}) < 2:
        raise ValueError("grid does not straddle transition")
    Ms = np.array([p[0] for p in pts], dtype=float)
    ds = np.array([p[1] for p in pts], dtype=float)
    A = np.column_stack([np.ones_like(Ms), -np.log(np.log(Ms))])
    b = np.log(ds) - np.log(Ms)
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    return float(np.exp(coef[0])), float(coef[1])


def transition_d(M, c, alpha):
    return c * M / math.log(M) ** alpha


def classification_accuracy(result, c, alpha, level=0.5):
    """Fraction of cells on the side of the fitted curve their rate predicts."""
    correct = 0
    for i, d in enumerate(result.d_values):
        for j, M in enumerate(result.M_values):
            predicted = d <= transition_d(M, c, alpha)
            correct += predicted == (result.success_rate[i, j] >= level)
    return correct / result.successes.size


def run_noise_sweep(d, M, noise_levels, trials, base_seed, lam=ORACLE_ANCHOR_LAMBDA,
                    pipeline=Pipeline.ORACLE_ANCHOR, max_iter=20000):
    """Median recovery error against noise level on fixed instances.

    Each trial draws one instance and one standard Gaussian vector; level
    ``s`` uses ``xi = s * g`` so mean ``|xi|`` is exactly proportional to
    ``s``. The noisy program runs with ``eta = mean((-xi)_+)``.
    """
    pipeline = Pipeline(pipeline)
    rows = []
    errs = np.zeros((trials, len(noise_levels)))
    mean_abs = np.zeros((trials, len(noise_levels)))
    feasible = np.zeros((trials, len(noise_levels)), dtype=bool)
    for t in range(trials):
        spec = trial_spec(base_seed, M, d, t, purpose="noise-sweep")
        ens, Xs = make_instance(spec, d, d, M)
        g = make_noise("gaussian", M, spec, level=1.0)
        anchor = anchor_oracle(Xs) if pipeline is Pipeline.ORACLE_ANCHOR else None
        for k, level in enumerate(noise_levels):
            xi = level * g
            obs = measure(ens, Xs, xi)
            if anchor is None:
                anchor = anchor_rank1(ens, obs.y)
            cfg = SolverConfig(lam=lam, eta=noise_budget(xi), mode=Mode.HINGE_BALL,
                               max_iter=max_iter, seed=base_seed)
            rep = solve(ens, obs, anchor, cfg)
            errs[t, k] = relative_phase_dist(rep.Xhat, Xs)
            mean_abs[t, k] = float(np.mean(np.abs(xi)))
            feasible[t, k] = rep.hinge <= cfg.eta + cfg.tol_feas * (1 + float(np.mean(obs.y)))
            if pipeline is Pipeline.DATA_ANCHOR:
                anchor = None
    for k, level in enumerate(noise_levels):
        rows.append({
            "level": float(level),
            "mean_abs_xi": float(np.mean(mean_abs[:, k])),
            "median_relerr": float(np.median(errs[:, k])),
            "max_relerr": float(np.max(errs[:, k])),
            "feasible_fraction": float(np.mean(feasible[:, k])),
        })
    return rows


def run_init_accuracy(d, M_values, trials, base_seed):
    """Median rank-one anchor quality against the number of measurements."""
    rows = []
    for M in M_values:
        deltas = []
        for t in range(trials):
            spec = trial_spec(base_seed, M, d, t, purpose="init-sweep")
            ens, Xs = make_instance(spec, d, d, M)
            obs = measure(ens, Xs)
            deltas.append(anchor_quality(anchor_rank1(ens, obs.y), Xs))
        rows.append({"M": int(M), "median_delta": float(np.median(deltas)),
                     "max_delta": float(np.max(deltas))})
    return rows


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def emit_heatmap_svg(result, path, curve=None, cell=40):
    """Gray-scale success map (white = all success), optional fitted curve."""
    nd, nM = result.successes.shape
    if nd == 0 or nM == 0:
        raise ValueError("empty grid")
    left, top, bottom = 70, 20, 50
    width = left + nM * cell + 20
    height = top + nd * cell + bottom
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#8080ff" fill-opacity="0.08"/>',
    ]
    rates = result.success_rate
    # larger d at the top, like a matrix-size axis
    for i, d in enumerate(result.d_values):
        row = nd - 1 - i
        for j, M in enumerate(result.M_values):
            g = int(round(255 * float(rates[i, j])))
            out.append(
                f'<rect x="{left + j * cell}" y="{top + row * cell}" width="{cell}" '
                f'height="{cell}" fill="rgb({g},{g},{g})"><title>M={M} d={d} '
                f'rate={float(rates[i, j]):.3f}</title></rect>'
            )
        out.append(
            f'<text x="{left - 6}" y="{top + row * cell + cell / 2 + 4}" '
            f'font-size="11" text-anchor="end">{d}</text>'
        )
    for j, M in enumerate(result.M_values):
        out.append(
            f'<text x="{left + j * cell + cell / 2}" y="{top + nd * cell + 16}" '
            f'font-size="11" text-anchor="middle">{M}</text>'
        )
    out.append(f'<text x="{left + nM * cell / 2}" y="{height - 8}" font-size="12" '
               'text-anchor="middle">M (measurements)</text>')
    out.append(f'<text x="14" y="{top + nd * cell / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + nd * cell / 2})">d</text>')
    if curve is not None and nd > 1 and nM > 1:
        c, alpha = curve
        ds = list(result.d_values)
        pts = []
        for j, M in enumerate(result.M_values):
            dstar = transition_d(M, c, alpha)
            # linear position between row centres
            pos = float(np.interp(dstar, ds, np.arange(nd)))
            y = top + (nd - 1 - pos) * cell + cell / 2
            pts.append(f"{left + j * cell + cell / 2:.2f},{y:.2f}")
        out.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="#00a000" '
                   'stroke-width="2"/>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
    return path
