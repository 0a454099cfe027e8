"""Three-way stance classification from one-vs-all binary GP classifiers.

Three method variants differ in training data and kernel: GP uses only
target-rumour tweets with a linear kernel, GPPooled adds the reference
rumours, and GPICM keeps the pooled data but couples rumours through a
coregionalised multi-task kernel, reserving one task id for the target
rumour so unseen rumours at prediction time fall back to it.

One-vs-all probabilities are reported raw (not renormalised); the
predicted label is the argmax with ties broken by the fixed precedence
supporting > denying > questioning.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from stancekit.inference import (
    BinaryDataset,
    EpState,
    FitConfig,
    _ep_fit_matrix,
    _posterior_from_sites,
    optimize_hyperparameters,
    predict_probabilities,
)
from stancekit.kernels import (
    IcmKernelParams,
    KernelParams,
    LinearKernelParams,
    TaskedInput,
    gram_matrix,
)
from stancekit.sparse import SparseFeatureVector
from stancekit.stances import STANCE_ORDER, Stance
from stancekit.textpipe import (
    BrownClusterTable,
    LabeledInstance,
    PreprocessResources,
    BROWN_WIDTH,
    default_resources,
    encode_bow,
    encode_brown,
    preprocess,
    resource_digests,
)

StanceLabel = Stance

VARIANTS = ("GP", "GPPooled", "GPICM")

MODEL_FORMAT = "stancekit-model"
MODEL_VERSION = 1

_TARGET_TASK_KEY = "\x00target"


class DegenerateTrainingError(ValueError):
    """GP variant asked to train with no target-rumour data (use LPO/GPPooled)."""


@dataclass
class FeatureExtractor:
    mode: str
    resources: PreprocessResources = field(repr=False, default=None)
    vocab: Optional[dict] = None
    table: Optional[BrownClusterTable] = field(repr=False, default=None)

    def __post_init__(self):
        if self.mode not in ("bow", "brown"):
            raise ValueError("mode must be 'bow' or 'brown'")
        if self.resources is None:
            self.resources = default_resources()
        if self.mode == "bow" and self.vocab is None:
            self.vocab = {}
        if self.mode == "brown" and self.table is None:
            raise ValueError("brown mode needs a BrownClusterTable")

    @classmethod
    def bow(cls, resources=None) -> "FeatureExtractor":
        return cls("bow", resources=resources)

    @classmethod
    def brown(cls, table: BrownClusterTable, resources=None) -> "FeatureExtractor":
        return cls("brown", resources=resources, table=table)

    @property
    def width(self) -> int:
        if self.mode == "brown":
            return BROWN_WIDTH
        return max(len(self.vocab), 1)

    def fit(self, instances) -> "FeatureExtractor":
        if self.mode == "bow":
            for inst in instances:
                encode_bow(preprocess(inst.text, self.resources), self.vocab, grow=True)
        return self

    def transform(self, instance: LabeledInstance) -> SparseFeatureVector:
        tokens = preprocess(instance.text, self.resources)
        if self.mode == "bow":
            return encode_bow(tokens, self.vocab, grow=False)
        return encode_brown(tokens, self.table)

    def to_dict(self) -> dict:
        out = {"mode": self.mode, "remove_urls": self.resources.remove_urls}
        if self.mode == "bow":
            out["vocab"] = self.vocab
        else:
            out["brown_rows"] = self.table.rows
            out["brown_digest"] = self.table.source_digest
        return out

    @classmethod
    def from_dict(cls, payload: dict, resources=None) -> "FeatureExtractor":
        if resources is None:
            resources = default_resources()
        if payload.get("remove_urls", True) != resources.remove_urls:
            resources = PreprocessResources(
                resources.stopwords,
                resources.emoticons,
                resources.stemmer,
                remove_urls=payload.get("remove_urls", True),
            )
        if payload["mode"] == "bow":
            return cls("bow", resources=resources, vocab=dict(payload["vocab"]))
        table = BrownClusterTable(
            rows=[tuple(r) for r in payload["brown_rows"]],
            word_to_cluster={},
            cluster_of_bits={},
            source_digest=payload.get("brown_digest", ""),
        )
        rebuilt = BrownClusterTable.from_text(table.to_text(), digest=table.source_digest)
        return cls("brown", resources=resources, table=rebuilt)


@dataclass(frozen=True)
class OptimizerSettings:
    max_iters: int = 25
    restarts: int = 3


@dataclass
class BinaryStanceModel:
    stance: Stance
    kernel: KernelParams
    state: EpState
    dataset: BinaryDataset
    one_class: bool = False


@dataclass
class StanceModel:
    per_class_models: dict
    method_variant: str
    task_mapping: dict
    target_task_id: int
    extractor: FeatureExtractor
    unit: str = "rumour"
    target_unit_id: Optional[str] = None
    fit_config: FitConfig = field(default_factory=FitConfig)

    def task_of(self, instance: LabeledInstance) -> int:
        if self.method_variant != "GPICM":
            return 0
        unit_id = instance.rumour_id if self.unit == "rumour" else instance.event_id
        if self.target_unit_id is not None and unit_id == self.target_unit_id:
            return self.target_task_id
        return self.task_mapping.get(instance.rumour_id, self.target_task_id)


def _unit_id(instance: LabeledInstance, unit: str) -> str:
    return instance.rumour_id if unit == "rumour" else instance.event_id


def _task_assignment(train, variant, unit, target_unit_id):
    """Rumour->task table; the target unit gets one reserved task id."""
    if variant != "GPICM":
        return {}, 0, 1
    keys = []
    has_target = False
    for inst in train:
        if target_unit_id is not None and _unit_id(inst, unit) == target_unit_id:
            has_target = True
        else:
            keys.append(inst.rumour_id)
    ordered = sorted(set(keys))
    mapping = {}
    target_task = 0
    if has_target or target_unit_id is not None:
        ordered = [_TARGET_TASK_KEY] + ordered
    for i, key in enumerate(ordered):
        if key == _TARGET_TASK_KEY:
            target_task = i
        else:
            mapping[key] = i
    task_count = max(len(ordered), 1)
    return mapping, target_task, task_count


def _initial_kernel(variant: str, task_count: int) -> KernelParams:
    if variant == "GPICM":
        return IcmKernelParams(
            data_kernel=LinearKernelParams(1.0),
            task_count=task_count,
            kappa=np.ones(task_count),
            v=np.zeros(task_count),
        )
    return LinearKernelParams(1.0)


def train_stance_model(
    train,
    variant: str,
    cfg: FitConfig = FitConfig(),
    *,
    target_rumour_id: Optional[str] = None,
    extractor: Optional[FeatureExtractor] = None,
    optimizer: OptimizerSettings = OptimizerSettings(),
    seed: int = 0,
    unit: str = "rumour",
) -> StanceModel:
    """Fit three one-vs-all binary GP classifiers over labelled tweets.

    Hyperparameters of each binary problem are tuned separately by
    evidence maximisation; one-class binary splits keep the prior kernel
    (signal variance 1) without optimisation.
    """
    train = list(train)
    if not train:
        raise ValueError("training set is empty")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if any(inst.label is None for inst in train):
        raise ValueError("every training instance must be labelled")

    if variant == "GP":
        if target_rumour_id is None:
            raise ValueError("GP variant needs target_rumour_id")
        train = [t for t in train if _unit_id(t, unit) == target_rumour_id]
        if not train:
            raise DegenerateTrainingError(
                "GP variant has no target-rumour training data; this setting is "
                "uninformative without it (use the LPO protocol or GPPooled)"
            )

    if extractor is None:
        extractor = FeatureExtractor.bow().fit(train)

    mapping, target_task, task_count = _task_assignment(train, variant, unit, target_rumour_id)

    model = StanceModel(
        per_class_models={},
        method_variant=variant,
        task_mapping=mapping,
        target_task_id=target_task,
        extractor=extractor,
        unit=unit,
        target_unit_id=target_rumour_id,
        fit_config=cfg,
    )
    inputs = [TaskedInput(extractor.transform(t), model.task_of(t)) for t in train]

    for k, stance in enumerate(STANCE_ORDER):
        y = np.array([1.0 if t.label == stance else -1.0 for t in train])
        data = BinaryDataset(inputs, y)
        kernel = _initial_kernel(variant, task_count)
        one_class = np.unique(y).size < 2
        state = None
        if not one_class and optimizer.max_iters > 0:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                kernel, opt = optimize_hyperparameters(
                    data,
                    kernel,
                    cfg,
                    max_iters=optimizer.max_iters,
                    restarts=optimizer.restarts,
                    seed=seed * 7919 + k,
                    full_output=True,
                )
            state = opt.best_state  # already an EP fit at the chosen kernel
        if state is None:
            K = gram_matrix(data.inputs, kernel, cfg.jitter)
            state = _ep_fit_matrix(K, data.labels, cfg)
        model.per_class_models[stance] = BinaryStanceModel(
            stance=stance, kernel=kernel, state=state, dataset=data, one_class=one_class
        )
    return model


def predict_stance_batch(model: StanceModel, instances) -> list:
    """Predicted stance and the three raw one-vs-all probabilities."""
    instances = list(instances)
    if not instances:
        return []
    tests = [
        TaskedInput(model.extractor.transform(inst), model.task_of(inst))
        for inst in instances
    ]
    prob_columns = []
    for stance in STANCE_ORDER:
        binary = model.per_class_models[stance]
        prob_columns.append(
            predict_probabilities(
                binary.state, binary.dataset, binary.kernel, tests, model.fit_config.jitter
            )
        )
    probs = np.stack(prob_columns, axis=1)
    picks = np.argmax(probs, axis=1)  # first max = precedence order
    out = []
    for row, pick in zip(probs, picks):
        out.append(
            (STANCE_ORDER[int(pick)], {s: float(p) for s, p in zip(STANCE_ORDER, row)})
        )
    return out


def predict_stance(model: StanceModel, instance: LabeledInstance):
    return predict_stance_batch(model, [instance])[0]


# --- model serialisation -----------------------------------------------------


def _kernel_to_dict(params: KernelParams) -> dict:
    if isinstance(params, LinearKernelParams):
        return {"family": "linear", "signal_variance": params.signal_variance}
    return {
        "family": "icm",
        "signal_variance": params.data_kernel.signal_variance,
        "task_count": params.task_count,
        "kappa": params.kappa.tolist(),
        "v": params.v.tolist(),
    }


def _kernel_from_dict(payload: dict) -> KernelParams:
    if payload["family"] == "linear":
        return LinearKernelParams(payload["signal_variance"])
    return IcmKernelParams(
        data_kernel=LinearKernelParams(payload["signal_variance"]),
        task_count=payload["task_count"],
        kappa=np.array(payload["kappa"]),
        v=np.array(payload["v"]),
    )


def _inputs_to_dict(inputs) -> dict:
    return {
        "indices": [t.features.indices.tolist() for t in inputs],
        "counts": [t.features.counts.tolist() for t in inputs],
        "tasks": [t.task_id for t in inputs],
    }


def _inputs_from_dict(payload: dict):
    return [
        TaskedInput(
            SparseFeatureVector(np.array(idx, dtype=np.int64), np.array(cnt, dtype=np.int64)),
            int(task),
        )
        for idx, cnt, task in zip(payload["indices"], payload["counts"], payload["tasks"])
    ]


def model_to_dict(model: StanceModel) -> dict:
    classes = {}
    for stance, binary in model.per_class_models.items():
        classes[stance.value] = {
            "kernel": _kernel_to_dict(binary.kernel),
            "site_precision": binary.state.site_precision.tolist(),
            "site_location": binary.state.site_location.tolist(),
            "log_evidence": binary.state.log_evidence,
            "converged": binary.state.converged,
            "sweeps_used": binary.state.sweeps_used,
            "labels": binary.dataset.labels.tolist(),
            "inputs": _inputs_to_dict(binary.dataset.inputs),
            "one_class": binary.one_class,
        }
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "variant": model.method_variant,
        "unit": model.unit,
        "target_unit_id": model.target_unit_id,
        "task_mapping": model.task_mapping,
        "target_task_id": model.target_task_id,
        "fit_config": vars(model.fit_config),
        "extractor": model.extractor.to_dict(),
        "resource_digests": resource_digests(),
        "classes": classes,
    }


class ModelFormatError(ValueError):
    pass


def model_from_dict(payload: dict) -> StanceModel:
    if payload.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a stancekit model file")
    if payload.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"model version {payload.get('version')} unsupported (expected {MODEL_VERSION})"
        )
    stored = payload.get("resource_digests", {})
    if stored and stored != resource_digests():
        raise ModelFormatError(
            "model was trained against different preprocessing resource files"
        )
    cfg = FitConfig(**payload["fit_config"])
    model = StanceModel(
        per_class_models={},
        method_variant=payload["variant"],
        task_mapping=dict(payload["task_mapping"]),
        target_task_id=int(payload["target_task_id"]),
        extractor=FeatureExtractor.from_dict(payload["extractor"]),
        unit=payload.get("unit", "rumour"),
        target_unit_id=payload.get("target_unit_id"),
        fit_config=cfg,
    )
    for stance in STANCE_ORDER:
        entry = payload["classes"][stance.value]
        kernel = _kernel_from_dict(entry["kernel"])
        inputs = _inputs_from_dict(entry["inputs"])
        data = BinaryDataset(inputs, np.array(entry["labels"], dtype=np.float64))
        tau = np.array(entry["site_precision"], dtype=np.float64)
        nu = np.array(entry["site_location"], dtype=np.float64)
        K = gram_matrix(inputs, kernel, cfg.jitter)
        _, mu, L = _posterior_from_sites(K, tau, nu)
        state = EpState(
            site_precision=tau,
            site_location=nu,
            posterior_cholesky=L,
            log_evidence=float(entry["log_evidence"]),
            converged=bool(entry["converged"]),
            sweeps_used=int(entry["sweeps_used"]),
        )
        state._cache["mu"] = mu
        model.per_class_models[stance] = BinaryStanceModel(
            stance=stance,
            kernel=kernel,
            state=state,
            dataset=data,
            one_class=bool(entry["one_class"]),
        )
    return model


def save_model(model: StanceModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> StanceModel:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"unreadable model file: {exc}") from exc
    return model_from_dict(payload)
