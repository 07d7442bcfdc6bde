"""Iterative imputation with Pólya-Gamma sampling, plus the baseline fits.

One chain of the proposed method alternates, for every item ``j``, a draw of
the auxiliary logistic coefficients ``beta_j`` with a redraw of the missing
cells of column ``j``.  After burn-in, every ``thinning``-th sweep also draws
the Ising matrix from the pseudo-posterior given the current completed data.

Randomness is split into named substreams per chain and purpose, so the
imputation trajectory does not depend on whether ``S`` is being sampled.
Consequently the single-imputation fit sees exactly the completed data of
the proposed fit's last sweep, and on data without missing cells all three
estimators coincide.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dataset import ObservedDataset
from .errors import EmptyCompleteCaseError, ValidationError
from .gibbs import PriorSpec, alpha_step, beta_step
from .polyagamma import RngStream
from .vech import TransformSet, vech, vech_inverse, vech_length

METHODS = ("proposed", "single_imputation", "complete_case")

# substream ids below the chain id
_INIT_S, _INIT_Y, _ALPHA, _BETA, _IMPUTE = range(5)


@dataclass(frozen=True)
class ChainConfig:
    """MCMC schedule. ``S`` is drawn at sweeps ``t > burn_in`` with
    ``t % thinning == 0``."""

    total_iterations: int = 5000
    burn_in: int = 1000
    thinning: int = 10
    priors: PriorSpec = field(default_factory=PriorSpec)
    seed: int = 0
    n_chains: int = 1
    record_beta: bool = False

    def __post_init__(self):
        T, T0, t0 = self.total_iterations, self.burn_in, self.thinning
        if not (0 <= T0 < T):
            raise ValidationError(f"need 0 <= burn_in < total_iterations, got {T0}, {T}")
        if t0 < 1:
            raise ValidationError("thinning must be at least 1")
        if self.n_retained < 1:
            raise ValidationError("schedule retains no draws")
        if self.n_chains < 1:
            raise ValidationError("n_chains must be at least 1")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")

    @property
    def n_retained(self) -> int:
        return self.total_iterations // self.thinning - self.burn_in // self.thinning

    def is_retained(self, t: int) -> bool:
        return t > self.burn_in and t % self.thinning == 0

    def to_dict(self) -> dict:
        return {
            "total_iterations": self.total_iterations,
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "slope_variance": self.priors.slope_variance,
            "intercept_variance": self.priors.intercept_variance,
            "seed": self.seed,
            "n_chains": self.n_chains,
            "record_beta": self.record_beta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChainConfig":
        d = dict(d)
        priors = PriorSpec(
            slope_variance=float(d.pop("slope_variance", 1.0)),
            intercept_variance=float(d.pop("intercept_variance", 100.0)),
        )
        known = {"total_iterations", "burn_in", "thinning", "seed", "n_chains", "record_beta"}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown chain config fields: {sorted(unknown)}")
        ints = {k: int(v) for k, v in d.items() if k != "record_beta"}
        return cls(priors=priors, record_beta=bool(d.get("record_beta", False)), **ints)


@dataclass
class FitResult:
    """Output of one estimator.

    Attributes
    ----------
    estimate : (J, J) ndarray
        Mean of all retained draws over all chains.
    draws : (n_chains * n_retained, J, J) ndarray
        Retained draws, chain after chain.
    per_parameter_chains : (n_chains, n_retained, K) ndarray
        The same draws half-vectorized, for diagnostics.
    diagnostics : dict
        ``psrf`` (per parameter, when there are at least two chains),
        invariant checks and ``wall_clock_seconds``.
    method_tag : str
    completed_data : ndarray or None
        Chain 0's completed data after the final sweep (imputing methods).
    beta_draws : ndarray or None
        ``(n_chains, n_retained, J, J)``, row ``j`` is ``beta_j``; only with
        ``record_beta``.
    """

    estimate: np.ndarray
    draws: np.ndarray
    per_parameter_chains: np.ndarray
    diagnostics: dict
    method_tag: str
    completed_data: np.ndarray | None = None
    beta_draws: np.ndarray | None = None

    @property
    def max_psrf(self) -> float | None:
        psrf = self.diagnostics.get("psrf")
        return None if psrf is None else float(np.max(psrf))


def impute_column(j: int, Y_work: np.ndarray, beta_j, omega_j, rng) -> np.ndarray:
    """Redraw the cells ``Y_work[omega_j, j]`` from item ``j``'s logistic model.

    Success probability is ``expit(beta_jj / 2 + sum_{k != j} beta_jk y_ik)``.
    ``Y_work`` is modified in place; the updated column is returned.
    """
    omega_j = np.asarray(omega_j, dtype=np.intp)
    if omega_j.size:
        beta_j = np.asarray(beta_j, dtype=np.float64)
        rows = Y_work[omega_j]
        eta = rows @ beta_j + beta_j[j] * (0.5 - rows[:, j])
        Y_work[omega_j, j] = rng.random(omega_j.size) < expit(eta)
    return Y_work[:, j]


def listwise_delete(data: ObservedDataset) -> ObservedDataset:
    """Keep only the rows without missing cells."""
    keep = data.complete_rows()
    if not keep.any():
        raise EmptyCompleteCaseError("no complete rows remain after listwise deletion")
    return ObservedDataset(cells=data.cells[keep])


class _Streams:
    def __init__(self, seed: int, chain: int, J: int):
        root = RngStream(seed, (chain,))
        self.init_S = root.child(_INIT_S).generator()
        self.init_Y = root.child(_INIT_Y).generator()
        self.alpha = root.child(_ALPHA).generator()
        self.beta = [root.child(_BETA, j).generator() for j in range(J)]
        self.impute = [root.child(_IMPUTE, j).generator() for j in range(J)]


def _initial_state(data: ObservedDataset, streams: _Streams):
    J = data.n_items
    S = vech_inverse(streams.init_S.uniform(-0.1, 0.1, size=vech_length(J)))
    Y = data.cells.astype(np.float64)
    miss = data.missing_mask
    Y[miss] = streams.init_Y.integers(0, 2, size=int(miss.sum()))
    return S, Y


def _alpha_chain(Y: np.ndarray, S: np.ndarray, n: int, prior: PriorSpec, rng) -> np.ndarray:
    J = Y.shape[1]
    transforms = TransformSet.build(J)
    tau = prior.alpha_precision(J)
    out = np.empty((n, J, J))
    for m in range(n):
        S = alpha_step(Y, S, tau, transforms, rng)
        out[m] = S
    return out


def _run_chain(data: ObservedDataset, config: ChainConfig, chain: int, methods: tuple) -> dict:
    """Run one chain for every method in ``methods``; returns draws per method."""
    J = data.n_items
    streams = _Streams(config.seed, chain, J)
    S_init, Y = _initial_state(data, streams)
    n_ret = config.n_retained
    prior = config.priors
    out = {"Y": Y, "beta": None}

    def fresh_alpha_chain():
        # each estimator's S chain starts from the same state and substream
        alpha_rng = _Streams(config.seed, chain, 0).alpha
        return _alpha_chain(Y, S_init, n_ret, prior, alpha_rng)

    # beta_j only feeds the imputation of column j; with independent streams
    # per column, skipping complete columns leaves every output unchanged.
    active = [j for j in range(J) if data.missing_sets[j].size or config.record_beta]
    if "complete_case" in methods or not active:
        draws = fresh_alpha_chain()
        for m in methods:
            out[m] = draws
        return out

    transforms = TransformSet.build(J)
    tau_alpha = prior.alpha_precision(J)
    tau_beta = [prior.beta_precision(J, j) for j in range(J)]
    beta = S_init.copy()  # row j is beta_j
    buf = np.empty_like(Y)
    S = S_init
    draws = np.empty((n_ret, J, J))
    beta_draws = np.empty((n_ret, J, J)) if config.record_beta else None
    sample_s = "proposed" in methods
    m = 0
    for t in range(1, config.total_iterations + 1):
        for j in active:
            beta[j] = beta_step(Y, j, tau_beta[j], beta[j], streams.beta[j], buf)
            impute_column(j, Y, beta[j], data.missing_sets[j], streams.impute[j])
        if config.is_retained(t):
            if sample_s:
                S = alpha_step(Y, S, tau_alpha, transforms, streams.alpha)
                draws[m] = S
            if beta_draws is not None:
                beta_draws[m] = beta
            m += 1
    if sample_s:
        out["proposed"] = draws
    if "single_imputation" in methods:
        out["single_imputation"] = fresh_alpha_chain()
    out["beta"] = beta_draws
    return out


def _chain_task(args):
    return _run_chain(*args)


def gelman_rubin(per_parameter_chains) -> np.ndarray:
    """Potential scale reduction factor for every parameter.

    ``per_parameter_chains`` has shape ``(m, n)`` or ``(m, n, K)``: ``m >= 2``
    chains of ``n >= 10`` draws.  Chains are not split.  Parameters with
    zero within-chain variance get 1.
    """
    x = np.asarray(per_parameter_chains, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[:, :, None]
    if x.ndim != 3:
        raise ValidationError("chains must have shape (m, n) or (m, n, K)")
    m, n, _ = x.shape
    if m < 2:
        raise ValidationError("at least two chains are needed")
    if n < 10:
        raise ValidationError("each chain needs at least 10 draws")
    W = x.var(axis=1, ddof=1).mean(axis=0)
    B = n * x.mean(axis=1).var(axis=0, ddof=1)
    V = (n - 1) / n * W + B / n
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(W > 0, np.sqrt(V / np.where(W > 0, W, 1.0)), 1.0)
    return float(R[0]) if squeeze else R


def _collect(data: ObservedDataset, config: ChainConfig, chains: list, method: str, elapsed: float) -> FitResult:
    J = data.n_items
    per_chain = np.stack([c[method] for c in chains])
    draws = per_chain.reshape(-1, J, J)
    pp = np.stack([[vech(S) for S in c] for c in per_chain])
    observed = ~data.missing_mask
    diagnostics = {
        "n_rows": data.n_rows,
        "n_missing": data.n_missing,
        "draws_symmetric": bool(np.all(draws == draws.transpose(0, 2, 1))),
        "observed_cells_unchanged": bool(
            all(np.array_equal(c["Y"][observed], data.cells[observed]) for c in chains)
        ),
        "wall_clock_seconds": elapsed,
    }
    if config.n_chains >= 2 and config.n_retained >= 10:
        diagnostics["psrf"] = gelman_rubin(pp)
    beta = None
    if config.record_beta and method != "complete_case" and chains[0]["beta"] is not None:
        beta = np.stack([c["beta"] for c in chains])
    return FitResult(
        estimate=draws.mean(axis=0),
        draws=draws,
        per_parameter_chains=pp,
        diagnostics=diagnostics,
        method_tag=method,
        completed_data=None if method == "complete_case" else chains[0]["Y"].astype(np.uint8),
        beta_draws=beta,
    )


def _fit(data, config: ChainConfig, methods: tuple, workers: int) -> dict:
    if not isinstance(data, ObservedDataset):
        data = ObservedDataset(cells=np.asarray(data))
    for m in methods:
        if m not in METHODS:
            raise ValidationError(f"unknown method {m!r}; expected one of {METHODS}")
    if "complete_case" in methods and len(methods) > 1:
        raise ValidationError("complete_case must be fitted on its own")
    if "complete_case" in methods:
        data = listwise_delete(data)
    start = time.perf_counter()
    tasks = [(data, config, k, tuple(methods)) for k in range(config.n_chains)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            chains = list(pool.map(_chain_task, tasks))
    else:
        chains = [_chain_task(a) for a in tasks]
    elapsed = time.perf_counter() - start
    return {m: _collect(data, config, chains, m, elapsed) for m in methods}


def fit_methods(data, config: ChainConfig, methods=METHODS, *, workers: int = 1) -> dict:
    """Fit several estimators, sharing the imputation sweeps where possible.

    Results are identical to calling each estimator separately.
    """
    methods = tuple(methods)
    results = {}
    shared = tuple(m for m in methods if m != "complete_case")
    if shared:
        results.update(_fit(data, config, shared, workers))
    if "complete_case" in methods:
        results.update(_fit(data, config, ("complete_case",), workers))
    return {m: results[m] for m in methods}


def run_fit(data: ObservedDataset, config: ChainConfig, *, workers: int = 1) -> FitResult:
    """Proposed method: interleaved imputation and pseudo-posterior sampling."""
    return _fit(data, config, ("proposed",), workers)["proposed"]


def fit_single_imputation(data: ObservedDataset, config: ChainConfig, *, workers: int = 1) -> FitResult:
    """Sample ``S`` on the single dataset completed at the last sweep."""
    return _fit(data, config, ("single_imputation",), workers)["single_imputation"]


def fit_complete_case(data: ObservedDataset, config: ChainConfig, *, workers: int = 1) -> FitResult:
    """Sample ``S`` on the complete rows only.

    Raises
    ------
    EmptyCompleteCaseError
        If no row is complete.
    """
    return _fit(data, config, ("complete_case",), workers)["complete_case"]


def fit_method(data: ObservedDataset, config: ChainConfig, method: str, *, workers: int = 1) -> FitResult:
    dispatch = {
        "proposed": run_fit,
        "single_imputation": fit_single_imputation,
        "complete_case": fit_complete_case,
    }
    if method not in dispatch:
        raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")
    return dispatch[method](data, config, workers=workers)
