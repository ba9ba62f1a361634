"""Monte Carlo experiment presets, tail tables and exponent fits.

Each experiment maps (seed, config, replicate index) to one JSONL record via
a pure function, so results are reproducible byte-for-byte regardless of how
many worker processes execute the replicates (records are merged in replicate
order).  A results directory contains:

    cfg.json      effective configuration echo (canonical JSON)
    records.jsonl one record per replicate
    tails.csv     threshold,successes,trials,p,lo,hi   (Wilson 95%)
    fit.json      power-law fit of the tail, when the preset defines one
    plot.dat      gnuplot-ready columns (threshold, p)
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from . import _kernels
from .barrier import build_spec, run_coalescence_trial
from .core import DEFAULT_SURFACE_CELL_BUDGET, Path, geodesic, passage_time
from .errors import CapacityError, DomainError, InsufficientDataError, ParameterError
from .field import Rect, WeightField, field as make_field
from .geometry import (SemiInfiniteScheme, boundary_indicators,
                       coalescence_distance, coalescence_point, gamma_at,
                       icbrt23, leftmost_common_abscissa)

EXPERIMENT_NAMES = (
    "tw-scaling", "tf-exponent", "local-tf-tail", "finite-coalescence",
    "semi-infinite-tail", "boundary-density", "barrier-events", "coal-rM",
)

_WILSON_Z = 1.959963984540054  # 95%


@dataclass
class ExperimentConfig:
    """Free parameters of an experiment run; unused fields stay None."""

    name: str
    replicates: int = 100
    seed: int = 1
    threads: int = 1
    precision: str = "double"
    checkpoint_block: int = 1024
    n: int | None = None
    k: int | None = None
    r: int | None = None
    big_m: float | None = None
    big_l: float | None = None
    s: float | None = None
    big_s: float | None = None
    h_const: float | None = None
    z: int | None = None
    r_list: list | None = None
    scheme: dict | None = None

    def __post_init__(self):
        if self.name not in EXPERIMENT_NAMES:
            raise DomainError(f"unknown experiment {self.name!r}; "
                              f"choose from {', '.join(EXPERIMENT_NAMES)}")
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if self.precision not in ("double", "single"):
            raise DomainError("precision must be 'double' or 'single'")
        if self.threads < 1:
            raise DomainError("threads must be >= 1")
        for fname in ("n", "k", "r", "z"):
            v = getattr(self, fname)
            if v is not None and v < 1:
                raise DomainError(f"{fname} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)


def _canon_json(obj) -> str:
    return json.dumps(_sanitize(obj), sort_keys=True, separators=(",", ":"))


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# tail tables and exponent fits
# ---------------------------------------------------------------------------


@dataclass
class TailRow:
    threshold: float
    successes: int
    trials: int

    @property
    def p(self) -> float:
        return self.successes / self.trials

    @property
    def wilson(self) -> tuple[float, float]:
        n = self.trials
        p = self.p
        z2 = _WILSON_Z ** 2
        den = 1.0 + z2 / n
        center = (p + z2 / (2 * n)) / den
        half = _WILSON_Z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / den
        return max(0.0, center - half), min(1.0, center + half)


@dataclass
class TailTable:
    rows: list

    def to_csv(self) -> str:
        lines = ["threshold,successes,trials,p,lo,hi"]
        for r in self.rows:
            lo, hi = r.wilson
            lines.append(f"{r.threshold!r},{r.successes},{r.trials},{r.p!r},{lo!r},{hi!r}")
        return "\n".join(lines) + "\n"

    def to_plot(self) -> str:
        lines = ["# threshold  p  (survival probabilities; log-log ready)"]
        for r in self.rows:
            lines.append(f"{r.threshold!r} {r.p!r}")
        return "\n".join(lines) + "\n"


def tail_table(samples, thresholds) -> TailTable:
    """Survival counts P(sample > threshold) with Wilson 95% intervals.

    None samples count as +infinity (censored above every threshold).
    Thresholds must be sorted ascending.
    """
    if len(samples) == 0:
        raise DomainError("empty sample list")
    thr = list(thresholds)
    if any(b < a for a, b in zip(thr, thr[1:])):
        raise DomainError("thresholds must be sorted ascending")
    vals = np.array([math.inf if s is None else float(s) for s in samples])
    rows = [TailRow(float(t), int((vals > t).sum()), int(vals.size)) for t in thr]
    return TailTable(rows)


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    stderr: float
    weights: list

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "stderr": self.stderr, "weights": self.weights}


def fit_power_law(table: TailTable, min_successes: int = 5) -> ExponentFit:
    """Weighted least squares of ln p on ln threshold.

    Weights are the inverse delta-method variances of ln p, i.e.
    (p * trials) / (1 - p); rows with fewer than `min_successes` successes
    (or p = 1, where ln p carries no slope information weight) are dropped.
    """
    rows = [r for r in table.rows
            if r.successes >= min_successes and r.p < 1.0 and r.threshold > 0]
    if len(rows) < 3:
        raise InsufficientDataError(
            f"only {len(rows)} usable rows (need >= 3) for the power-law fit")
    x = np.log([r.threshold for r in rows])
    y = np.log([r.p for r in rows])
    w = np.array([(r.p * r.trials) / (1.0 - r.p) for r in rows])
    sw = w.sum()
    xb = (w * x).sum() / sw
    yb = (w * y).sum() / sw
    sxx = (w * (x - xb) ** 2).sum()
    slope = float((w * (x - xb) * (y - yb)).sum() / sxx)
    intercept = float(yb - slope * xb)
    resid = y - (intercept + slope * x)
    dof = max(len(rows) - 2, 1)
    s2 = float((w * resid ** 2).sum() / dof)
    stderr = float(math.sqrt(s2 / sxx))
    return ExponentFit(slope, intercept, stderr, [float(v) for v in w])


# ---------------------------------------------------------------------------
# per-replicate record functions (pure in (seed, cfg, replicate))
# ---------------------------------------------------------------------------


def _scheme_from_cfg(cfg: ExperimentConfig, horizon: int) -> SemiInfiniteScheme:
    over = dict(cfg.scheme or {})
    over.setdefault("horizon", horizon)
    return SemiInfiniteScheme(**over)


def _rep_tw_scaling(cfg: ExperimentConfig, rep: int) -> dict:
    f = make_field(cfg.seed, rep)
    n = cfg.n
    t = passage_time(f, (0, 0), (n, n))
    return {"replicate": rep, "seed": cfg.seed, "n": n, "T": t}


def _rep_tf_exponent(cfg: ExperimentConfig, rep: int) -> dict:
    f = make_field(cfg.seed, rep)
    n = cfg.n
    p = geodesic(f, (0, 0), (n, n), checkpoint_block=cfg.checkpoint_block or 1024,
                 max_dense_cells=_dense_budget(cfg))
    mid = n // 2
    dev = gamma_at(p, mid) - mid
    from .geometry import transversal_fluctuation
    return {"replicate": rep, "seed": cfg.seed, "n": n, "mid_dev": int(dev),
            "tf": int(transversal_fluctuation(p)), "T": p.weight}


_DYADIC_COLS = (128, 1024, 8192)


def _rep_local_tf(cfg: ExperimentConfig, rep: int) -> dict:
    f = make_field(cfg.seed, rep)
    n = cfg.n
    ell = cfg.k
    p = geodesic(f, (0, 0), (n, n), checkpoint_block=cfg.checkpoint_block or 1024,
                 max_dense_cells=_dense_budget(cfg))
    dev = gamma_at(p, ell) - ell
    gammas = {str(c): int(gamma_at(p, c)) for c in _DYADIC_COLS if c <= n}
    return {"replicate": rep, "seed": cfg.seed, "n": n, "ell": ell,
            "dev": int(dev), "gamma_cols": gammas}


def _rep_finite_coal(cfg: ExperimentConfig, rep: int) -> dict:
    f = make_field(cfg.seed, rep)
    n = cfg.n
    k23 = icbrt23(cfg.k)
    nx = ny = n + 1
    words = (nx + 63) >> 6
    bits = np.empty(ny * words, np.uint64)
    _kernels.bwd_sweep(f._h, 0, 0, nx, ny, np.empty((1, 1), np.float64), bits, False)
    steps = np.empty(2 * n, np.uint8)
    m1 = _kernels.trace_bits_bwd(bits, nx, ny, 0, 0, steps)
    xs1 = np.zeros(2 * n + 1, np.int64)
    x = y = 0
    xs1[0] = 0
    for i in range(m1):
        if steps[i]:
            x += 1
        else:
            y += 1
        xs1[x + y] = x
    m2 = _kernels.trace_bits_bwd(bits, nx, ny, 0, k23, steps)
    xs2 = np.full(2 * n + 1, -1, np.int64)
    x, y = 0, k23
    xs2[k23] = 0
    for i in range(m2):
        if steps[i]:
            x += 1
        else:
            y += 1
        xs2[x + y] = x
    meet_d = None
    for d in range(k23, 2 * n + 1):
        if xs2[d] >= 0 and xs1[d] == xs2[d]:
            meet_d = d
            break
    vstar1 = int(xs1[meet_d]) if meet_d is not None else None
    return {"replicate": rep, "seed": cfg.seed, "n": n, "k": cfg.k,
            "vstar1": vstar1, "vstar_sum": meet_d}


def _rep_semi_tail(cfg: ExperimentConfig, rep: int) -> dict:
    f = make_field(cfg.seed, rep)
    k = cfg.k
    k23 = icbrt23(k)
    rmax = max(cfg.r_list)
    scheme = _scheme_from_cfg(cfg, int(rmax * k) + 1)
    rec = coalescence_distance(f, (-k23, k23), (k23, -k23), scheme)
    return rec.to_record(replicate=rep, seed=cfg.seed, k=k)


def _rep_boundary(cfg: ExperimentConfig, rep: int) -> dict:
    f = make_field(cfg.seed, rep)
    k = cfg.k
    k23 = icbrt23(k)
    scheme = _scheme_from_cfg(cfg, k)
    bits, conv = boundary_indicators(f, k, (-k23, k23), scheme)
    return {"replicate": rep, "seed": cfg.seed, "k": k,
            "i_lo": -k23, "i_hi": k23,
            "x_bits": [int(b) for b in bits], "converged": bool(conv)}


def _rep_barrier(cfg: ExperimentConfig, rep: int) -> dict:
    f = make_field(cfg.seed, rep)
    spec = build_spec(cfg.z, cfg.big_m if cfg.big_m is not None else 2.0,
                      cfg.big_s if cfg.big_s is not None else 32.0,
                      cfg.h_const if cfg.h_const is not None else 12.0)
    tr = run_coalescence_trial(f, spec)
    return tr.to_record(replicate=rep, seed=cfg.seed, z=cfg.z,
                        M=spec.big_m, S=spec.big_s, H=spec.big_h)


def _rep_coal_rm(cfg: ExperimentConfig, rep: int) -> dict:
    f = make_field(cfg.seed, rep)
    r = cfg.r
    big_m = int(cfg.big_m if cfg.big_m is not None else 64)
    big_l = cfg.big_l if cfg.big_l is not None else 1.0
    mr = big_m * r
    off_r = int(math.floor(big_l * icbrt23(r)))
    off_mr = int(math.floor(big_l * icbrt23(mr)))
    a_r, a_mr = (r, r + off_r), (mr, mr + off_mr)
    b_r, b_mr = (r, r - off_r), (mr, mr - off_mr)
    g1 = geodesic(f, a_r, a_mr)
    g2 = geodesic(f, b_r, b_mr)
    meet = coalescence_point(g1, g2)
    return {"replicate": rep, "seed": cfg.seed, "r": r, "M": big_m, "L": big_l,
            "coal": meet is not None,
            "meet": None if meet is None else [meet.x, meet.y]}


_REP_FNS = {
    "tw-scaling": _rep_tw_scaling,
    "tf-exponent": _rep_tf_exponent,
    "local-tf-tail": _rep_local_tf,
    "finite-coalescence": _rep_finite_coal,
    "semi-infinite-tail": _rep_semi_tail,
    "boundary-density": _rep_boundary,
    "barrier-events": _rep_barrier,
    "coal-rM": _rep_coal_rm,
}

_REQUIRED = {
    "tw-scaling": ("n",),
    "tf-exponent": ("n",),
    "local-tf-tail": ("n", "k"),
    "finite-coalescence": ("n", "k", "r_list"),
    "semi-infinite-tail": ("k", "r_list"),
    "boundary-density": ("k",),
    "barrier-events": ("z",),
    "coal-rM": ("r",),
}


def _dense_budget(cfg: ExperimentConfig) -> int:
    # checkpoint_block == 0 disables checkpointing: force dense everywhere
    if cfg.checkpoint_block == 0:
        return 2 ** 62
    return DEFAULT_SURFACE_CELL_BUDGET


def _validate(cfg: ExperimentConfig) -> None:
    for fname in _REQUIRED[cfg.name]:
        if getattr(cfg, fname) is None:
            raise DomainError(f"experiment {cfg.name!r} requires --{fname.replace('_', '-')}")
    if cfg.name in ("tw-scaling", "tf-exponent", "local-tf-tail", "finite-coalescence"):
        n = cfg.n
        cells = (n + 1) * (n + 1)
        mem = cells * (9 if cfg.checkpoint_block == 0 else 1) // 8
        if cfg.checkpoint_block == 0 and cells > DEFAULT_SURFACE_CELL_BUDGET:
            raise CapacityError(
                f"n={n} needs a {cells}-cell dense surface with checkpointing "
                f"disabled; re-enable it (e.g. --checkpoint-block 1024)")
        if mem > 3 * 2 ** 30:
            raise CapacityError(
                f"n={n} would need about {mem >> 20} MiB; reduce n")


# ---------------------------------------------------------------------------
# aggregation per preset
# ---------------------------------------------------------------------------


def _aggregate(cfg: ExperimentConfig, records: list):
    """(tails, fit) per preset; either may be None."""
    name = cfg.name
    if name == "tw-scaling":
        n = cfg.n
        samples = [abs(r["T"] - 4.0 * n) / n ** (1 / 3) for r in records]
        return tail_table(samples, [0.5, 1.0, 2.0, 4.0]), None
    if name == "tf-exponent":
        n = cfg.n
        samples = [abs(r["mid_dev"]) / n ** (2 / 3) for r in records]
        return tail_table(samples, [0.25, 0.5, 1.0, 1.5]), None
    if name == "local-tf-tail":
        ell23 = icbrt23(cfg.k)
        samples = [abs(r["dev"]) for r in records]
        s_list = [0.5, 1.0, 2.0, 3.0]
        return tail_table(samples, [s * ell23 for s in s_list]), None
    if name == "finite-coalescence":
        samples = [r["vstar1"] for r in records]
        thr = [R * cfg.k for R in sorted(cfg.r_list)]
        t = tail_table(samples, thr)
        try:
            fit = fit_power_law(t)
        except InsufficientDataError:
            fit = None
        return t, fit
    if name == "semi-infinite-tail":
        samples = [r["d"] for r in records]
        thr = [R * cfg.k for R in sorted(cfg.r_list)]
        t = tail_table(samples, thr)
        try:
            fit = fit_power_law(t)
        except InsufficientDataError:
            fit = None
        return t, fit
    if name == "boundary-density":
        succ = sum(sum(r["x_bits"]) for r in records)
        trials = sum(len(r["x_bits"]) for r in records)
        return TailTable([TailRow(float(cfg.k), succ, trials)]), None
    if name == "barrier-events":
        flags = ("G", "typical", "A_gamma", "R", "F_meet", "favourable")
        rows = [TailRow(float(i), sum(1 for r in records if r[fl]), len(records))
                for i, fl in enumerate(flags)]
        return TailTable(rows), None
    if name == "coal-rM":
        rows = [TailRow(float(cfg.r), sum(1 for r in records if r["coal"]),
                        len(records))]
        return TailTable(rows), None
    return None, None


@dataclass
class ExperimentResult:
    cfg: ExperimentConfig
    records: list
    tails: TailTable | None
    fit: ExponentFit | None
    out_dir: str | None = None


def _run_one(args):
    cfg_dict, rep = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    return rep, _REP_FNS[cfg.name](cfg, rep)


def run_experiment(cfg: ExperimentConfig, out_dir=None, progress=None) -> ExperimentResult:
    """Run all replicates, aggregate, and (optionally) write the results dir.

    Output is a pure function of (seed, cfg): replicates are merged in index
    order whatever the thread count.
    """
    _validate(cfg)
    reps = range(cfg.replicates)
    records = [None] * cfg.replicates
    if cfg.threads > 1:
        import multiprocessing as mp
        ctx = mp.get_context("fork")
        args = [(cfg.to_dict(), r) for r in reps]
        with ProcessPoolExecutor(max_workers=cfg.threads, mp_context=ctx) as ex:
            for i, (rep, rec) in enumerate(ex.map(_run_one, args, chunksize=4)):
                records[rep] = rec
                if progress:
                    progress(i + 1, cfg.replicates)
    else:
        fn = _REP_FNS[cfg.name]
        for i, rep in enumerate(reps):
            records[rep] = fn(cfg, rep)
            if progress:
                progress(i + 1, cfg.replicates)
    tails, fit = _aggregate(cfg, records)
    result = ExperimentResult(cfg, records, tails, fit)
    if out_dir is not None:
        write_results(result, out_dir)
        result.out_dir = str(out_dir)
    return result


def write_results(result: ExperimentResult, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "cfg.json"), "w") as fh:
        fh.write(_canon_json(result.cfg.to_dict()) + "\n")
    with open(os.path.join(out_dir, "records.jsonl"), "w") as fh:
        for rec in result.records:
            fh.write(_canon_json(rec) + "\n")
    if result.tails is not None:
        with open(os.path.join(out_dir, "tails.csv"), "w") as fh:
            fh.write(result.tails.to_csv())
        with open(os.path.join(out_dir, "plot.dat"), "w") as fh:
            fh.write(result.tails.to_plot())
    if result.fit is not None:
        with open(os.path.join(out_dir, "fit.json"), "w") as fh:
            fh.write(_canon_json(result.fit.to_dict()) + "\n")


def fit_results_dir(out_dir) -> ExponentFit:
    """Re-fit the power law from an existing tails.csv (the `experiment fit`
    entry point)."""
    rows = []
    path = os.path.join(out_dir, "tails.csv")
    if not os.path.exists(path):
        raise DomainError(f"no tails.csv in {out_dir}")
    with open(path) as fh:
        header = fh.readline()
        for line in fh:
            t, succ, trials, *_ = line.strip().split(",")
            rows.append(TailRow(float(t), int(succ), int(trials)))
    fit = fit_power_law(TailTable(rows))
    with open(os.path.join(out_dir, "fit.json"), "w") as fh:
        fh.write(_canon_json(fit.to_dict()) + "\n")
    return fit
