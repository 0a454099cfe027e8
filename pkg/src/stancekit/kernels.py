"""Covariance functions: linear data kernel and the ICM multi-task kernel.

The multi-task kernel multiplies the linear data kernel by a task
covariance ``B = diag(kappa) + v v^T`` (rank-one plus diagonal), so the
Gram matrix over tasked inputs is PSD by construction.  Gram assembly
adds a small diagonal jitter because linear kernels on sparse text are
frequently rank-deficient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from stancekit import backend
from stancekit.sparse import SparseFeatureVector, sparse_dot, stack_csr

DEFAULT_JITTER = 1e-8


class TaskRangeError(ValueError):
    """A tasked input referenced a task id outside the kernel's task set."""


@dataclass(frozen=True)
class LinearKernelParams:
    signal_variance: float = 1.0

    def __post_init__(self):
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be > 0")

    @property
    def task_count(self) -> int:
        return 1


@dataclass(frozen=True)
class IcmKernelParams:
    data_kernel: LinearKernelParams
    task_count: int
    kappa: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        kappa = np.asarray(self.kappa, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if self.task_count < 1:
            raise ValueError("task_count must be >= 1")
        if kappa.shape != (self.task_count,) or v.shape != (self.task_count,):
            raise ValueError("kappa and v must have length task_count")
        if np.any(kappa < 0):
            raise ValueError("kappa entries must be >= 0")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "v", v)

    def coregionalisation(self) -> np.ndarray:
        """Task covariance B = diag(kappa) + v v^T."""
        return np.diag(self.kappa) + np.outer(self.v, self.v)


KernelParams = Union[LinearKernelParams, IcmKernelParams]


@dataclass(frozen=True)
class TaskedInput:
    features: SparseFeatureVector
    task_id: int = 0


def _check_task(task_id: int, params: KernelParams) -> None:
    if task_id < 0 or task_id >= params.task_count:
        raise TaskRangeError(
            f"task id {task_id} outside [0, {params.task_count}); check the task mapping"
        )


def linear_kernel(a: SparseFeatureVector, b: SparseFeatureVector, p: LinearKernelParams) -> float:
    return p.signal_variance * sparse_dot(a, b)


def icm_kernel(a: TaskedInput, b: TaskedInput, p: IcmKernelParams) -> float:
    _check_task(a.task_id, p)
    _check_task(b.task_id, p)
    bmat = p.coregionalisation()
    return linear_kernel(a.features, b.features, p.data_kernel) * bmat[a.task_id, b.task_id]


def kernel_value(a: TaskedInput, b: TaskedInput, params: KernelParams) -> float:
    if isinstance(params, LinearKernelParams):
        return linear_kernel(a.features, b.features, params)
    return icm_kernel(a, b, params)


def signal_variance(params: KernelParams) -> float:
    if isinstance(params, LinearKernelParams):
        return params.signal_variance
    return params.data_kernel.signal_variance


def feature_gram(inputs, width: int | None = None) -> np.ndarray:
    """Raw pairwise feature dot products (no signal variance, no tasks)."""
    mat = stack_csr([t.features for t in inputs], width=width)
    hot = backend.hot()
    return hot.pairwise_gram(
        mat.data.astype(np.float64),
        mat.indices.astype(np.int64),
        mat.indptr.astype(np.int64),
        mat.shape[1],
    )


def cross_feature_gram(inputs_a, inputs_b, width: int | None = None) -> np.ndarray:
    if width is None:
        width = (
            max(
                max((t.features.max_index() for t in inputs_a), default=-1),
                max((t.features.max_index() for t in inputs_b), default=-1),
            )
            + 1
        )
    a = stack_csr([t.features for t in inputs_a], width=max(width, 1))
    b = stack_csr([t.features for t in inputs_b], width=max(width, 1))
    hot = backend.hot()
    return hot.cross_gram(
        a.data.astype(np.float64),
        a.indices.astype(np.int64),
        a.indptr.astype(np.int64),
        b.data.astype(np.float64),
        b.indices.astype(np.int64),
        b.indptr.astype(np.int64),
        a.shape[1],
    )


def task_ids(inputs, params: KernelParams) -> np.ndarray:
    ids = np.array([t.task_id for t in inputs], dtype=np.int64)
    for t in ids:
        _check_task(int(t), params)
    return ids


def kernel_matrix_from_parts(gram: np.ndarray, tasks_a, tasks_b, params: KernelParams) -> np.ndarray:
    """Scale a raw feature Gram block by signal variance and task covariance."""
    out = signal_variance(params) * gram
    if isinstance(params, IcmKernelParams):
        bmat = params.coregionalisation()
        out = out * bmat[np.asarray(tasks_a)[:, None], np.asarray(tasks_b)[None, :]]
    return out


def gram_matrix(inputs, params: KernelParams, jitter: float = DEFAULT_JITTER) -> np.ndarray:
    """Kernel Gram matrix over tasked inputs with diagonal jitter."""
    if not inputs:
        raise ValueError("gram_matrix needs at least one input")
    if jitter < 0:
        raise ValueError("jitter must be >= 0")
    tasks = task_ids(inputs, params)
    gram = feature_gram(inputs)
    out = kernel_matrix_from_parts(gram, tasks, tasks, params)
    out[np.diag_indices_from(out)] += jitter
    return out


# --- hyperparameter vector packing -----------------------------------------
#
# Unconstrained optimisation space: [log sigma^2] for the linear kernel,
# [log sigma^2, log kappa_0..D-1, v_0..D-1] for ICM.

def pack_hyperparameters(params: KernelParams) -> np.ndarray:
    if isinstance(params, LinearKernelParams):
        return np.array([np.log(params.signal_variance)])
    return np.concatenate(
        (
            [np.log(params.data_kernel.signal_variance)],
            np.log(np.maximum(params.kappa, 1e-12)),
            params.v,
        )
    )


def unpack_hyperparameters(theta: np.ndarray, like: KernelParams) -> KernelParams:
    theta = np.asarray(theta, dtype=np.float64)
    if isinstance(like, LinearKernelParams):
        if theta.shape != (1,):
            raise ValueError("linear kernel expects a single hyperparameter")
        return LinearKernelParams(signal_variance=float(np.exp(theta[0])))
    d = like.task_count
    if theta.shape != (1 + 2 * d,):
        raise ValueError(f"ICM kernel with {d} tasks expects {1 + 2 * d} hyperparameters")
    return IcmKernelParams(
        data_kernel=LinearKernelParams(signal_variance=float(np.exp(theta[0]))),
        task_count=d,
        kappa=np.exp(theta[1 : 1 + d]),
        v=theta[1 + d :].copy(),
    )


def hyperparameter_names(params: KernelParams) -> list[str]:
    if isinstance(params, LinearKernelParams):
        return ["log_signal_variance"]
    d = params.task_count
    return (
        ["log_signal_variance"]
        + [f"log_kappa_{t}" for t in range(d)]
        + [f"v_{t}" for t in range(d)]
    )
