"""Simulation-study harness: generate, fit every method, evaluate.

Every (sample size, replication) cell gets its own data stream and fit seed,
both derived from the study seed, so results do not depend on the number of
worker processes or on which other cells are run.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import (
    MAX_EXACT_SAMPLING_ITEMS,
    MissingnessSpec,
    apply_missingness,
    load_true_parameters,
    normalize_study_id,
    sample_ising_exact,
    sample_ising_gibbs,
    study_missingness,
)
from .errors import EmptyCompleteCaseError, ValidationError
from .fit import METHODS, ChainConfig, fit_methods
from .metrics import ReplicationSet, auc, jaccard, mse_bias, roc_curve
from .polyagamma import RngStream
from .vech import vech

THREADS_ENV = "ISING_IMPUTE_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else ``$ISING_IMPUTE_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ValidationError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            threads = 1
    if threads < 1:
        raise ValidationError("thread count must be at least 1")
    return threads


def data_stream(seed: int, n: int, rep: int) -> RngStream:
    return RngStream(seed, (0, n, rep))


def fit_seed(seed: int, n: int, rep: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(1, n, rep))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def simulate_dataset(S, n: int, missingness: MissingnessSpec | None, rng, sampler: str = "auto"):
    """Complete data from ``S`` and the observed dataset after masking."""
    J = np.asarray(S).shape[0]
    if sampler == "auto":
        sampler = "exact" if J <= MAX_EXACT_SAMPLING_ITEMS else "gibbs"
    if sampler == "exact":
        Y = sample_ising_exact(S, n, rng)
    elif sampler == "gibbs":
        Y = sample_ising_gibbs(S, n, rng=rng)
    else:
        raise ValidationError(f"unknown sampler {sampler!r}")
    spec = missingness or MissingnessSpec.mcar(0.0)
    return Y, apply_missingness(Y, spec, rng)


@dataclass
class StudyResult:
    """Estimates indexed by ``(n, method)``: arrays ``(reps, J, J)``, NaN where
    the method could not be fitted (empty complete-case set)."""

    study_id: str
    truth: np.ndarray
    n_values: tuple
    reps: int
    methods: tuple
    estimates: dict = field(default_factory=dict)
    info: list = field(default_factory=list)

    def replication_set(self, n: int, method: str) -> ReplicationSet | None:
        est = self.estimates[(n, method)]
        ok = ~np.isnan(est).any(axis=(1, 2))
        if not ok.any():
            return None
        return ReplicationSet(truth=self.truth, estimates=est[ok])

    def mse_bias_rows(self):
        J = self.truth.shape[0]
        for n in self.n_values:
            for method in self.methods:
                reps = self.replication_set(n, method)
                mse = bias = None
                if reps is not None:
                    mse, bias = mse_bias(reps)
                n_valid = 0 if reps is None else reps.n_reps
                for j in range(J):
                    for i in range(j, J):
                        yield (
                            self.study_id, n, method, f"s_{i + 1}_{j + 1}", self.truth[i, j],
                            None if mse is None else mse[i, j],
                            None if bias is None else bias[i, j],
                            n_valid,
                        )

    def has_recovery_metrics(self) -> bool:
        r, c = np.triu_indices(self.truth.shape[0], k=1)
        nz = self.truth[r, c] != 0
        return bool(nz.any() and not nz.all())

    def recovery_rows(self, tau: float = 0.3):
        for n in self.n_values:
            for method in self.methods:
                reps = self.replication_set(n, method)
                if reps is None:
                    yield (self.study_id, n, method, None, None, 0)
                    continue
                yield (self.study_id, n, method, auc(roc_curve(reps)), jaccard(reps, tau), reps.n_reps)

    def roc_rows(self):
        for n in self.n_values:
            for method in self.methods:
                reps = self.replication_set(n, method)
                if reps is None:
                    continue
                for tau, tpr, fpr in roc_curve(reps):
                    yield (self.study_id, n, method, tau, tpr, fpr)

    def long_rows(self):
        J = self.truth.shape[0]
        t = vech(self.truth)
        names = [(i, j) for j in range(J) for i in range(j, J)]
        for n in self.n_values:
            for method in self.methods:
                est = self.estimates[(n, method)]
                for r in range(self.reps):
                    v = vech(est[r])
                    for k, (i, j) in enumerate(names):
                        yield (self.study_id, n, r, method, f"s_{i + 1}_{j + 1}", t[k], v[k])


MSE_BIAS_HEADER = ["study", "n", "method", "parameter", "truth", "mse", "bias", "n_valid"]
RECOVERY_HEADER = ["study", "n", "method", "auc", "jaccard", "n_valid"]
ROC_HEADER = ["study", "n", "method", "tau", "tpr", "fpr"]
LONG_HEADER = ["study", "n", "rep", "method", "parameter", "truth", "estimate"]


def _replication_task(args):
    study_id, truth, missingness, n, rep, seed, config, methods, sampler = args
    rng = data_stream(seed, n, rep).generator()
    _, data = simulate_dataset(truth, n, missingness, rng, sampler)
    cfg = replace(config, seed=fit_seed(seed, n, rep))
    J = truth.shape[0]
    out, info = {}, {"n": n, "rep": rep, "n_rows": data.n_rows, "dropped_rows": data.dropped_rows,
                     "n_missing": data.n_missing, "n_complete_rows": int(data.complete_rows().sum())}
    imputing = tuple(m for m in methods if m != "complete_case")
    if imputing:
        for m, res in fit_methods(data, cfg, imputing).items():
            out[m] = res.estimate
    if "complete_case" in methods:
        try:
            out["complete_case"] = fit_methods(data, cfg, ("complete_case",))["complete_case"].estimate
        except EmptyCompleteCaseError:
            out["complete_case"] = np.full((J, J), np.nan)
    return n, rep, out, info


def run_study(
    study_id,
    n_values,
    reps: int,
    *,
    seed: int = 0,
    config: ChainConfig | None = None,
    methods=METHODS,
    threads: int | None = None,
    sampler: str = "auto",
    truth=None,
    missingness: MissingnessSpec | None = None,
) -> StudyResult:
    """Replicate generate -> fit -> collect for each ``n`` in ``n_values``.

    ``truth`` and ``missingness`` default to the study's own settings.
    """
    sid = normalize_study_id(study_id)
    truth = load_true_parameters(sid) if truth is None else np.asarray(truth, dtype=np.float64)
    missingness = study_missingness(sid) if missingness is None else missingness
    config = config or ChainConfig()
    methods = tuple(methods)
    n_values = tuple(int(n) for n in n_values)
    if reps < 1 or not n_values or min(n_values) < 1:
        raise ValidationError("need reps >= 1 and positive sample sizes")
    for m in methods:
        if m not in METHODS:
            raise ValidationError(f"unknown method {m!r}")
    tasks = [(sid, truth, missingness, n, r, seed, config, methods, sampler)
             for n in n_values for r in range(reps)]
    threads = resolve_threads(threads)
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
            results = list(pool.map(_replication_task, tasks))
    else:
        results = [_replication_task(t) for t in tasks]

    J = truth.shape[0]
    res = StudyResult(study_id=sid, truth=truth, n_values=n_values, reps=reps, methods=methods)
    for n in n_values:
        for m in methods:
            res.estimates[(n, m)] = np.full((reps, J, J), np.nan)
    for n, r, out, info in results:
        for m, est in out.items():
            res.estimates[(n, m)][r] = est
        res.info.append(info)
    return res
