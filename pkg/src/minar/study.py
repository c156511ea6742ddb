"""Monte Carlo harness: bias and SD of the EM estimates over a scenario grid."""
import csv
import io
import logging
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .em import FitConfig, fit
from .exceptions import MinarError
from .mixtures import check_family
from .process import ModelParams, simulate

logger = logging.getLogger(__name__)

ALPHA_SCENARIOS = {
    "A1": (0.1, 0.3, 0.5),
    "A2": (0.3, 0.3, 0.3),
    "A3": (0.5, 0.5, 0.5),
}
MU_SCENARIOS = {
    "B1": (0.5, 0.5, 0.5),
    "B2": (1.0, 1.0, 1.0),
}
SIGMA_SCENARIOS = {
    "C1": ((0.64, 0.5709447, 0.5344570),
           (0.5709447, 0.64, 0.5919781),
           (0.5344570, 0.5919781, 0.64)),
    "C2": ((0.64, 0.32, -0.192),
           (0.32, 0.64, 0.192),
           (-0.192, 0.192, 0.64)),
}
DEFAULT_SIZES = (50, 100, 300)
DEFAULT_REPS = 50
PAPER_REPS = 300
STUDY_QUAD_NODES = 10
THREADS_ENV = "MINAR_THREADS"

_SCENARIO_RE = re.compile(r"^\(?(A[1-3])\)?\(?(B[12])\)?\(?(C[12])\)?$")


def parse_scenario(label):
    """'A2B1C1' or '(A2)(B1)(C1)' -> ('A2', 'B1', 'C1')."""
    m = _SCENARIO_RE.match(str(label).strip().upper().replace(" ", ""))
    if not m:
        raise ValueError(f"unknown scenario {label!r}; expected e.g. A2B1C1")
    return m.groups()


def scenario_label(parts):
    return "({})({})({})".format(*parts)


def scenario_params(family, label):
    a, b, c = parse_scenario(label)
    return ModelParams.from_arrays(family, ALPHA_SCENARIOS[a], MU_SCENARIOS[b],
                                   np.array(SIGMA_SCENARIOS[c]))


def all_scenarios():
    return [a + b + c for a in ALPHA_SCENARIOS for b in MU_SCENARIOS for c in SIGMA_SCENARIOS]


def parameter_names(n):
    names = [f"alpha{i + 1}" for i in range(n)] + [f"mu{i + 1}" for i in range(n)]
    names += [f"sigma{i + 1}{j + 1}" for i in range(n) for j in range(i, n)]
    return names


def flatten(theta):
    iu = np.triu_indices(theta.dim)
    return np.concatenate([theta.alpha, theta.mu, theta.sigma[iu]])


@dataclass
class StudySpec:
    """A grid of (scenario, sample size) cells, each replicated ``reps`` times."""

    family: str = "pl"
    scenarios: list = field(default_factory=lambda: ["A2B1C1"])
    sizes: list = field(default_factory=lambda: list(DEFAULT_SIZES))
    reps: int = DEFAULT_REPS
    seed: int = 2024
    quad_nodes: int = STUDY_QUAD_NODES
    tol: float = 1e-8
    max_iter: int = 5000
    accelerate: bool = True
    burn_in: int = 500

    def __post_init__(self):
        self.family = check_family(self.family)
        self.scenarios = [a + b + c for a, b, c in map(parse_scenario, self.scenarios)]
        self.sizes = [int(s) for s in self.sizes]
        if not self.sizes or min(self.sizes) < 10:
            raise ValueError("sample sizes must be at least 10")
        if int(self.reps) < 1:
            raise ValueError("reps must be at least 1")
        self.reps = int(self.reps)

    def fit_config(self):
        return FitConfig(quad_nodes=self.quad_nodes, tol=self.tol, max_iter=self.max_iter,
                         accelerate=self.accelerate)


def replication_seed(master, cell_index, rep):
    """Seed of one replication: a pure function of (master, cell, replication)."""
    return np.random.SeedSequence(entropy=int(master), spawn_key=(int(cell_index), int(rep)))


def _run_one(job):
    family, label, T, seed_seq, config, burn_in = job
    params = scenario_params(family, label)
    try:
        x = simulate(params, T, burn_in=burn_in, seed=seed_seq)
        rep = fit(x, family, config)
    except (MinarError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return None, False, f"{type(exc).__name__}: {exc}"
    return flatten(rep.theta_hat), rep.converged, None


def resolve_threads(threads=None):
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            threads = os.cpu_count() or 1
    return max(1, int(threads))


@dataclass
class CellResult:
    scenario: str
    size: int
    truth: np.ndarray
    estimates: np.ndarray   # (n_ok, P)
    n_fail: int
    n_converged: int
    errors: list

    @property
    def n_ok(self):
        return self.estimates.shape[0]

    @property
    def failure_rate(self):
        return self.n_fail / (self.n_ok + self.n_fail)

    @property
    def bias(self):
        if self.n_ok == 0:
            return np.full(self.truth.shape, np.nan)
        return self.estimates.mean(axis=0) - self.truth

    @property
    def sd(self):
        if self.n_ok < 2:
            return np.full(self.truth.shape, np.nan)
        return self.estimates.std(axis=0, ddof=1)


@dataclass
class StudyResult:
    spec: StudySpec
    cells: list
    elapsed: float = 0.0

    def cell(self, scenario, size):
        key = "".join(parse_scenario(scenario))
        for c in self.cells:
            if c.scenario == key and c.size == int(size):
                return c
        raise KeyError((scenario, size))

    def metadata(self):
        s = self.spec
        return {"family": s.family, "reps": s.reps, "seed": s.seed, "quad_nodes": s.quad_nodes,
                "quadrature": "tensor Gauss-Hermite, rebuilt from (mu, Sigma) at every E-step",
                "tol": s.tol, "max_iter": s.max_iter, "accelerate": s.accelerate}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "family", "n_t", "param", "truth", "bias", "sd", "n_ok", "n_fail",
                    "failure_rate", "quad_nodes", "reps"])
        names = parameter_names(3)
        for c in self.cells:
            for name, t, b, s in zip(names, c.truth, c.bias, c.sd):
                w.writerow([scenario_label(parse_scenario(c.scenario)), self.spec.family, c.size,
                            name, _num(t), _num(b), _num(s), c.n_ok, c.n_fail,
                            f"{c.failure_rate:.4f}", self.spec.quad_nodes, self.spec.reps])
        return buf.getvalue()

    def format_table(self):
        """Parameters down the rows, one 'bias(SD)' column per (scenario, n_t)."""
        names = parameter_names(3)
        heads = [f"{scenario_label(parse_scenario(c.scenario))} n={c.size}" for c in self.cells]
        cols = [[_cell(b, s) for b, s in zip(c.bias, c.sd)] for c in self.cells]
        fail = [f"{c.failure_rate:.4f}" for c in self.cells]
        width = max([len(h) for h in heads] + [16])
        lines = ["param".ljust(10) + "".join(h.rjust(width + 2) for h in heads)]
        for i, name in enumerate(names):
            lines.append(name.ljust(10) + "".join(col[i].rjust(width + 2) for col in cols))
        lines.append("fail_rate".ljust(10) + "".join(f.rjust(width + 2) for f in fail))
        return "\n".join(lines)


def _num(v):
    return "NA" if not np.isfinite(v) else f"{v:.6f}"


def _cell(b, s):
    bs = "NA" if not np.isfinite(b) else f"{b:.4f}"
    ss = "NA" if not np.isfinite(s) else f"{s:.4f}"
    return f"{bs}({ss})"


def run_study(spec: StudySpec, threads=None, progress=None):
    """Simulate and fit every replication; the result depends only on ``spec``."""
    threads = resolve_threads(threads)
    config = spec.fit_config()
    jobs, keys = [], []
    cells = [(sc, T) for sc in spec.scenarios for T in spec.sizes]
    for ci, (sc, T) in enumerate(cells):
        for r in range(spec.reps):
            jobs.append((spec.family, sc, T, replication_seed(spec.seed, ci, r), config, spec.burn_in))
            keys.append((ci, r))
    t0 = time.perf_counter()
    if threads == 1 or len(jobs) == 1:
        outputs = []
        for k, job in enumerate(jobs):
            outputs.append(_run_one(job))
            if progress is not None:
                progress(k + 1, len(jobs))
    else:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            outputs = list(pool.map(_run_one, jobs, chunksize=1))
    results = []
    for ci, (sc, T) in enumerate(cells):
        mine = [outputs[k] for k, key in enumerate(keys) if key[0] == ci]
        ok = [o[0] for o in mine if o[0] is not None]
        errors = [o[2] for o in mine if o[0] is None]
        for e in errors:
            logger.warning("scenario %s n=%d: replication failed: %s", sc, T, e)
        P = len(parameter_names(3))
        est = np.array(ok) if ok else np.empty((0, P))
        results.append(CellResult(sc, T, flatten(scenario_params(spec.family, sc)), est,
                                  len(errors), sum(bool(o[1]) for o in mine), errors))
    return StudyResult(spec, results, time.perf_counter() - t0)
