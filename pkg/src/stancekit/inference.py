"""Binary Gaussian Process classification with a probit likelihood.

The posterior over latent function values is approximated with
Expectation Propagation: each Bernoulli-probit likelihood factor is
replaced by an unnormalised Gaussian site ``t_i(f_i) ~ N(f_i | nu_i /
tau_i, 1 / tau_i)`` whose parameters are refined by moment matching
against the cavity distribution.  Sites are updated sequentially in
fixed index order; after every sweep the posterior is recomputed from a
Cholesky factorisation of ``B = I + S^(1/2) K S^(1/2)`` to keep the
rank-one updates from drifting.

The EP approximation of the log marginal likelihood ("evidence") is
used to select kernel hyperparameters, so no validation set is needed.
Its gradient is taken with the site parameters held fixed, which is
exact at an EP fixed point.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.special import log_ndtr, ndtr

from stancekit import backend
from stancekit.kernels import (
    IcmKernelParams,
    KernelParams,
    LinearKernelParams,
    cross_feature_gram,
    feature_gram,
    kernel_matrix_from_parts,
    pack_hyperparameters,
    signal_variance,
    task_ids,
    unpack_hyperparameters,
)

PROBABILITY_FLOOR = 1e-12


class NumericalFailure(RuntimeError):
    """Linear algebra failed (non-PSD Gram after jitter, singular solve)."""


def probit(z):
    """Standard normal CDF; probit(-z) == 1 - probit(z)."""
    out = ndtr(z)
    return float(out) if np.isscalar(z) else out


@dataclass
class BinaryDataset:
    inputs: list
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.float64)
        if len(self.inputs) == 0:
            raise ValueError("dataset must contain at least one instance")
        if labels.shape != (len(self.inputs),):
            raise ValueError("labels and inputs must have matching lengths")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")
        self.labels = labels

    def __len__(self):
        return len(self.inputs)


@dataclass(frozen=True)
class FitConfig:
    ep_tolerance: float = 1e-6
    ep_max_sweeps: int = 100
    damping: float = 0.8
    jitter: float = 1e-8

    def __post_init__(self):
        if not self.ep_tolerance > 0:
            raise ValueError("ep_tolerance must be > 0")
        if self.ep_max_sweeps < 1:
            raise ValueError("ep_max_sweeps must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must be in (0, 1]")
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")


@dataclass
class EpState:
    site_precision: np.ndarray
    site_location: np.ndarray
    posterior_cholesky: np.ndarray
    log_evidence: float
    converged: bool
    sweeps_used: int
    skipped_site_updates: int = 0
    negative_variance_clamps: int = 0
    _cache: dict = field(default_factory=dict, repr=False)


def _posterior_from_sites(K, tau, nu):
    """Recompute (Sigma, mu, L) from scratch; L = chol(I + S^.5 K S^.5)."""
    srt = np.sqrt(tau)
    b = srt[:, None] * K * srt[None, :]
    b[np.diag_indices_from(b)] += 1.0
    try:
        L = cholesky(b, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NumericalFailure("posterior factorisation failed; Gram not PSD after jitter") from exc
    V = solve_triangular(L, srt[:, None] * K, lower=True, check_finite=False)
    Sigma = K - V.T @ V
    mu = Sigma @ nu
    return Sigma, mu, L


def _cavity_parameters(Sigma, mu, tau, nu):
    var = np.diag(Sigma).copy()
    var[var <= 0] = np.nan
    tau_cav = 1.0 / var - tau
    nu_cav = mu / var - nu
    return tau_cav, nu_cav


def _log_evidence_from_posterior(y, tau, nu, Sigma, mu, L):
    """EP evidence in a parameterisation that stays finite for vacuous sites."""
    tau_cav, nu_cav = _cavity_parameters(Sigma, mu, tau, nu)
    bad = ~np.isfinite(tau_cav) | (tau_cav <= 0)
    if np.any(bad):
        # only reachable from badly non-converged states; saturate those sites
        tau_cav = np.where(bad, 1e-12, tau_cav)
        nu_cav = np.where(bad, 0.0, nu_cav)
    v_cav = 1.0 / tau_cav
    m_cav = nu_cav * v_cav
    z = y * m_cav / np.sqrt(1.0 + v_cav)
    half_log_det = np.log(np.diag(L)).sum()
    site_spread = 0.5 * np.log1p(tau * v_cav).sum()
    quad = (m_cav * m_cav * tau - 2.0 * m_cav * nu - nu * nu * v_cav) / (2.0 * (1.0 + tau * v_cav))
    return float(log_ndtr(z).sum() - half_log_det + site_spread + quad.sum() + 0.5 * nu @ mu)


def ep_log_evidence(K, y, tau, nu):
    """Evidence of fixed site parameters under the Gram matrix K."""
    Sigma, mu, L = _posterior_from_sites(K, tau, nu)
    return _log_evidence_from_posterior(y, tau, nu, Sigma, mu, L)


def _ep_fit_matrix(K, y, cfg: FitConfig, warm=None):
    n = y.shape[0]
    if warm is None:
        tau = np.zeros(n)
        nu = np.zeros(n)
        Sigma = K.copy()
        mu = np.zeros(n)
        L = None
    else:
        tau, nu = warm[0].copy(), warm[1].copy()
        Sigma, mu, L = _posterior_from_sites(K, tau, nu)
    hot = backend.hot()
    converged = False
    sweeps = 0
    skipped_total = 0
    for sweeps in range(1, cfg.ep_max_sweeps + 1):
        max_dtau, max_dnu, skipped = hot.ep_sweep(K, y, tau, nu, Sigma, mu, cfg.damping)
        skipped_total += skipped
        Sigma, mu, L = _posterior_from_sites(K, tau, nu)
        if max(max_dtau, max_dnu) < cfg.ep_tolerance:
            converged = True
            break
    if L is None:
        Sigma, mu, L = _posterior_from_sites(K, tau, nu)
    log_z = _log_evidence_from_posterior(y, tau, nu, Sigma, mu, L)
    state = EpState(
        site_precision=tau,
        site_location=nu,
        posterior_cholesky=L,
        log_evidence=log_z,
        converged=converged,
        sweeps_used=sweeps,
        skipped_site_updates=skipped_total,
    )
    state._cache["mu"] = mu
    return state


def _build_matrix(data: BinaryDataset, kernel: KernelParams, jitter: float):
    from stancekit.kernels import gram_matrix

    return gram_matrix(data.inputs, kernel, jitter)


def ep_fit(data: BinaryDataset, kernel: KernelParams, cfg: FitConfig = FitConfig()) -> EpState:
    """Fit EP site parameters for a binary probit GP classifier.

    Returns a state with ``converged=False`` (rather than raising) when
    the sweep budget runs out; callers decide how to proceed.
    """
    K = _build_matrix(data, kernel, cfg.jitter)
    return _ep_fit_matrix(K, data.labels, cfg)


def _prediction_context(state: EpState, data: BinaryDataset, kernel: KernelParams, jitter: float):
    ctx = state._cache.get("pred_ctx")
    if ctx is not None:
        return ctx
    tau = state.site_precision
    nu = state.site_location
    mu = state._cache.get("mu")
    if mu is None:
        K = _build_matrix(data, kernel, jitter)
        _, mu, _ = _posterior_from_sites(K, tau, nu)
    srt = np.sqrt(tau)
    weights = nu - tau * mu
    tasks = task_ids(data.inputs, kernel)
    ctx = (weights, srt, tasks)
    state._cache["pred_ctx"] = ctx
    return ctx


def predict_probabilities(
    state: EpState,
    data: BinaryDataset,
    kernel: KernelParams,
    tests,
    jitter: float = 1e-8,
) -> np.ndarray:
    """Predictive p(y=+1) for a batch of tasked test inputs."""
    weights, srt, train_tasks = _prediction_context(state, data, kernel, jitter)
    test_tasks = task_ids(tests, kernel)
    raw = cross_feature_gram(tests, data.inputs)
    k_star = kernel_matrix_from_parts(raw, test_tasks, train_tasks, kernel)
    mu_star = k_star @ weights
    V = solve_triangular(
        state.posterior_cholesky, srt[:, None] * k_star.T, lower=True, check_finite=False
    )
    self_dots = np.array([float(t.features.counts @ t.features.counts) for t in tests])
    k_ss = signal_variance(kernel) * self_dots + jitter
    if isinstance(kernel, IcmKernelParams):
        bmat = kernel.coregionalisation()
        k_ss = signal_variance(kernel) * self_dots * bmat[test_tasks, test_tasks] + jitter
    s2 = k_ss - np.sum(V * V, axis=0)
    neg = s2 < 0
    if np.any(neg):
        state.negative_variance_clamps += int(neg.sum())
        s2 = np.where(neg, jitter, s2)
    probs = ndtr(mu_star / np.sqrt(1.0 + s2))
    return np.clip(probs, PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)


def predict_probability(
    state: EpState,
    data: BinaryDataset,
    kernel: KernelParams,
    test,
    jitter: float = 1e-8,
    label: int = 1,
) -> float:
    """Predictive class probability for one test input.

    ``label=+1`` gives p(y=+1); ``label=-1`` gives exactly ``1 - p``.
    """
    p = float(predict_probabilities(state, data, kernel, [test], jitter)[0])
    if label == 1:
        return p
    if label == -1:
        return 1.0 - p
    raise ValueError("label must be +1 or -1")


# --- evidence gradient and hyperparameter selection -------------------------


class _BinaryProblem:
    """Cached per-dataset quantities shared across hyperparameter evaluations."""

    def __init__(self, data: BinaryDataset, kernel_like: KernelParams, jitter: float):
        self.y = data.labels
        self.tasks = task_ids(data.inputs, kernel_like)
        self.gram = feature_gram(data.inputs)
        self.jitter = jitter

    def kernel_matrix(self, params: KernelParams):
        K = kernel_matrix_from_parts(self.gram, self.tasks, self.tasks, params)
        K[np.diag_indices_from(K)] += self.jitter
        return K

    def evidence_gradient(self, params: KernelParams, tau, nu):
        """d log Z / d theta with sites fixed, theta the packed hyperparameters."""
        K = self.kernel_matrix(params)
        Sigma, mu, L = _posterior_from_sites(K, tau, nu)
        srt = np.sqrt(tau)
        W = solve_triangular(L, np.diag(srt), lower=True, check_finite=False)
        a_inv = W.T @ W
        b = nu - tau * mu
        R = np.outer(b, b) - a_inv
        K_nojit = K.copy()
        K_nojit[np.diag_indices_from(K_nojit)] -= self.jitter
        d_logsig = 0.5 * float(np.sum(R * K_nojit))
        if isinstance(params, LinearKernelParams):
            return np.array([d_logsig])
        sig2 = signal_variance(params)
        M = R * self.gram
        v_per_point = params.v[self.tasks]
        mv = M @ v_per_point
        d_logkappa = np.zeros(params.task_count)
        d_v = np.zeros(params.task_count)
        for t in range(params.task_count):
            mask = self.tasks == t
            if np.any(mask):
                d_logkappa[t] = 0.5 * params.kappa[t] * sig2 * float(M[np.ix_(mask, mask)].sum())
                d_v[t] = sig2 * float(mv[mask].sum())
        return np.concatenate(([d_logsig], d_logkappa, d_v))


def log_evidence_gradient(state: EpState, data: BinaryDataset, kernel: KernelParams,
                          jitter: float = 1e-8) -> np.ndarray:
    """Gradient of the EP evidence over the packed hyperparameter vector.

    Ordering matches ``kernels.pack_hyperparameters``: [log sigma^2] for
    the linear kernel, [log sigma^2, log kappa_0.., v_0..] for ICM.
    Site parameters are held fixed (the standard EP approximation, exact
    at convergence).
    """
    problem = _BinaryProblem(data, kernel, jitter)
    return problem.evidence_gradient(kernel, state.site_precision, state.site_location)


@dataclass
class OptimizationResult:
    params: KernelParams
    log_evidence: float
    trace: list
    initial_log_evidence: float
    n_evaluations: int
    failures: int
    best_state: Optional[EpState] = None


def _optimizer_starts(kernel_init: KernelParams, restarts: int, seed: int):
    starts = [pack_hyperparameters(kernel_init)]
    rng = np.random.default_rng(seed)
    if isinstance(kernel_init, IcmKernelParams):
        d = kernel_init.task_count
        for _ in range(restarts):
            fresh = np.concatenate(([0.0], np.zeros(d), rng.uniform(-0.5, 0.5, d)))
            starts.append(fresh)
    else:
        fresh = np.zeros(1)
        if restarts > 0 and not np.allclose(fresh, starts[0]):
            starts.append(fresh)
    return starts


def optimize_hyperparameters(
    data: BinaryDataset,
    kernel_init: KernelParams,
    cfg: FitConfig = FitConfig(),
    max_iters: int = 30,
    restarts: int = 3,
    seed: int = 0,
    full_output: bool = False,
):
    """Maximise the EP evidence over kernel hyperparameters.

    Quasi-Newton (L-BFGS-B) ascent in unconstrained space with seeded
    random restarts.  The returned hyperparameters are the best found
    across all evaluations, so their evidence never falls below the
    starting point's.  One-class datasets are returned unchanged with a
    warning: there is nothing for evidence to distinguish.
    """
    if np.unique(data.labels).size < 2:
        warnings.warn("single-class dataset: skipping hyperparameter optimization")
        if full_output:
            return kernel_init, OptimizationResult(kernel_init, np.nan, [], np.nan, 0, 0)
        return kernel_init
    if max_iters == 0:
        if full_output:
            return kernel_init, OptimizationResult(kernel_init, np.nan, [], np.nan, 0, 0)
        return kernel_init

    problem = _BinaryProblem(data, kernel_init, cfg.jitter)
    best = {"theta": None, "log_z": -np.inf, "state": None}
    trace: list = []
    counters = {"evals": 0, "failures": 0}
    init_log_z = None

    def make_objective(run_state):
        def objective(theta):
            counters["evals"] += 1
            params = unpack_hyperparameters(theta, kernel_init)
            K = problem.kernel_matrix(params)
            try:
                state = _ep_fit_matrix(K, problem.y, cfg, warm=run_state.get("sites"))
            except NumericalFailure:
                counters["failures"] += 1
                run_state.pop("sites", None)
                return 1e12, np.zeros_like(theta)
            run_state["sites"] = (state.site_precision, state.site_location)
            log_z = state.log_evidence
            if np.isfinite(log_z) and log_z > best["log_z"]:
                best["log_z"] = log_z
                best["theta"] = theta.copy()
                best["state"] = state
                trace.append((theta.copy(), log_z))
            grad = problem.evidence_gradient(params, state.site_precision, state.site_location)
            return -log_z, -grad

        return objective

    for start in _optimizer_starts(kernel_init, restarts, seed):
        run_state: dict = {}
        objective = make_objective(run_state)
        f0, _ = objective(start)
        if init_log_z is None:
            init_log_z = -f0 if f0 < 1e11 else -np.inf
        if f0 >= 1e11:
            continue
        bounds = [(-10.0, 10.0)] * start.size
        minimize(
            objective,
            start,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": max_iters, "maxfun": 2 * max_iters + 2},
        )

    if best["theta"] is None:
        raise NumericalFailure("hyperparameter optimization failed for every start")
    result_params = unpack_hyperparameters(best["theta"], kernel_init)
    if full_output:
        return result_params, OptimizationResult(
            result_params,
            best["log_z"],
            trace,
            init_log_z if init_log_z is not None else np.nan,
            counters["evals"],
            counters["failures"],
            best_state=best["state"],
        )
    return result_params
