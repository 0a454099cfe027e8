"""Fold construction and execution of the LOO/LPO evaluation protocols.

A fold holds out one unit (a single rumour, or a whole event for corpora
that group many rumours per news event).  Under LOO the held-out unit
contributes nothing to training;
under LPO its first k tweets in temporal order join the training set
while the test set stays fixed at everything from the test offset on,
so scores are comparable across k.  Retweets are dropped from training
splits only.

GP and GPICM are never run at k=0: with no target-rumour data the GP
variant has nothing to train on and the task-coupling of GPICM has
nothing to estimate, so those grid cells stay empty and GPPooled covers
the column.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from typing import Optional

from stancekit.baselines import (
    LogisticRegressionOvr,
    MajorityClassifier,
    MultinomialNaiveBayes,
)
from stancekit.evaluation import ConfusionMatrix, EvaluationReport, report_from_confusion
from stancekit.inference import FitConfig
from stancekit.multiclass import (
    DegenerateTrainingError,
    FeatureExtractor,
    OptimizerSettings,
    predict_stance_batch,
    train_stance_model,
)
from stancekit.sparse import stack_csr
from stancekit.stances import STANCE_ORDER
from stancekit.textpipe import BrownClusterTable, filter_retweets

ALL_METHODS = ("Majority", "NB", "MaxEnt", "GP", "GPPooled", "GPICM")
GP_METHODS = ("GP", "GPPooled", "GPICM")
_NEEDS_TARGET_DATA = ("GP", "GPICM")


@dataclass(frozen=True)
class ExperimentPlan:
    protocol: str = "LPO"
    target_train_sizes: tuple = (0, 10, 20, 30, 40, 50)
    test_offset: Optional[int] = None
    fold_unit: str = "rumour"
    seed: int = 0
    methods: tuple = ALL_METHODS

    def __post_init__(self):
        if self.protocol not in ("LOO", "LPO"):
            raise ValueError("protocol must be LOO or LPO")
        sizes = tuple(int(k) for k in self.target_train_sizes)
        if self.protocol == "LOO":
            if sizes == ExperimentPlan.__dataclass_fields__["target_train_sizes"].default:
                sizes = (0,)  # the untouched LPO default collapses to LOO's single size
            elif sizes != (0,):
                raise ValueError("LOO implies target_train_sizes == (0,)")
        else:
            if not sizes or any(k < 0 for k in sizes):
                raise ValueError("LPO needs non-negative target_train_sizes")
        object.__setattr__(self, "target_train_sizes", sizes)
        if self.test_offset is not None and self.test_offset < max(sizes):
            raise ValueError("test_offset must be >= every target train size")
        if not self.methods:
            raise ValueError("method list is empty")

    @property
    def resolved_test_offset(self) -> int:
        if self.test_offset is not None:
            return self.test_offset
        return max(self.target_train_sizes)


@dataclass
class Fold:
    fold_id: str
    reference: list
    target: list
    test: list


@dataclass
class FoldResult:
    fold_id: str
    method: str
    k: int
    confusion: ConfusionMatrix
    seconds: float
    warnings: list = field(default_factory=list)


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    fold_results: list
    aggregates: dict
    fold_test_ids: dict
    skipped_folds: list
    skipped_cells: list
    warnings: list


def _unit_of(instance, fold_unit: str) -> str:
    return instance.rumour_id if fold_unit == "rumour" else instance.event_id


def _ordered(instances):
    return sorted(instances, key=lambda t: (t.order_index, t.tweet_id))


def build_folds(corpus, plan: ExperimentPlan):
    """One (train-pool, fixed test) split per fold unit.

    Returns (folds, skipped) where each skipped entry is a
    (unit, reason) pair for units too short to leave a test set.
    """
    units: dict = {}
    for inst in corpus:
        units.setdefault(_unit_of(inst, plan.fold_unit), []).append(inst)
    if len(units) < 2:
        raise ValueError("need >= 2 fold units to cross-validate")
    offset = plan.resolved_test_offset
    folds = []
    skipped = []
    for unit in sorted(units):
        target = _ordered(units[unit])
        if len(target) <= offset:
            skipped.append(
                (unit, f"unit has {len(target)} tweets; test offset {offset} leaves no test set")
            )
            continue
        reference = [t for u in sorted(units) if u != unit for t in _ordered(units[u])]
        folds.append(Fold(fold_id=unit, reference=reference, target=target, test=target[offset:]))
    return folds, skipped


def training_split(fold: Fold, k: int):
    """Reference tweets plus the first k target tweets, retweet-filtered."""
    train = list(fold.reference) + list(fold.target[:k])
    return filter_retweets(train, training=True)


# --- baseline runners --------------------------------------------------------


def _featurize(extractor, instances):
    return [extractor.transform(t) for t in instances]


def _baseline_matrices(train, test, extractor):
    if extractor is None:
        extractor = FeatureExtractor.bow().fit(train)
    width = extractor.width
    X = stack_csr(_featurize(extractor, train), width=width)
    X_test = stack_csr(_featurize(extractor, test), width=width)
    return X, X_test


def run_baseline_majority(train, test):
    clf = MajorityClassifier()
    clf.fit(None, [t.label for t in train])
    return [clf.label_] * len(test)


def run_baseline_logreg(train, test, l2_strength: float = 1.0, extractor=None):
    labels = [t.label for t in train]
    if len(set(labels)) < 2:
        return run_baseline_majority(train, test)
    X, X_test = _baseline_matrices(train, test, extractor)
    clf = LogisticRegressionOvr(l2_strength=l2_strength).fit(X, labels)
    return clf.predict(X_test)


def run_baseline_nb(train, test, smoothing_alpha: float = 1.0, extractor=None):
    X, X_test = _baseline_matrices(train, test, extractor)
    clf = MultinomialNaiveBayes(alpha=smoothing_alpha).fit(X, [t.label for t in train])
    return clf.predict(X_test)


# --- harness ------------------------------------------------------------------


@dataclass
class HarnessConfig:
    fit: FitConfig = field(default_factory=FitConfig)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    features: str = "bow"
    brown_table: Optional[BrownClusterTable] = None
    resources: object = None
    l2_strength: float = 1.0
    nb_alpha: float = 1.0
    jobs: int = 1
    external_predictions: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.features not in ("bow", "brown"):
            raise ValueError("features must be 'bow' or 'brown'")
        if self.features == "brown" and self.brown_table is None:
            raise ValueError("brown features need a brown_table")


def _make_extractor(cfg: HarnessConfig, train):
    if cfg.features == "brown":
        return FeatureExtractor.brown(cfg.brown_table, resources=cfg.resources)
    return FeatureExtractor("bow", resources=cfg.resources).fit(train)


def _run_cell(fold: Fold, k: int, method: str, plan: ExperimentPlan,
              cfg: HarnessConfig, train, extractor):
    warnings_out = []
    test = fold.test
    truths = [t.label for t in test]
    started = time.perf_counter()
    if method == "Majority":
        preds = run_baseline_majority(train, test)
    elif method == "NB":
        preds = run_baseline_nb(train, test, cfg.nb_alpha, extractor)
    elif method == "MaxEnt":
        labels = {t.label for t in train}
        if len(labels) < 2:
            warnings_out.append("MaxEnt fell back to majority (single-class training fold)")
        preds = run_baseline_logreg(train, test, cfg.l2_strength, extractor)
    elif method in GP_METHODS:
        model = train_stance_model(
            train,
            method,
            cfg.fit,
            target_rumour_id=fold.fold_id,
            extractor=extractor,
            optimizer=cfg.optimizer,
            seed=plan.seed,
            unit=plan.fold_unit,
        )
        preds = [label for label, _ in predict_stance_batch(model, test)]
        for stance, binary in model.per_class_models.items():
            if not binary.state.converged:
                warnings_out.append(f"EP not converged for class {stance.value}")
    elif method in cfg.external_predictions:
        table = cfg.external_predictions[method]
        missing = [t.tweet_id for t in test if t.tweet_id not in table]
        if missing:
            raise KeyError(f"external predictions for {method} missing ids: {missing[:3]}...")
        preds = [table[t.tweet_id] for t in test]
    else:
        raise ValueError(f"method {method} not runnable")
    seconds = time.perf_counter() - started
    confusion = ConfusionMatrix.from_pairs(truths, preds)
    return FoldResult(fold.fold_id, method, k, confusion, seconds, warnings_out)


def _fold_cells(fold: Fold, plan: ExperimentPlan, cfg: HarnessConfig):
    """All (k, method) results for one fold; extractor shared within each k."""
    results = []
    skipped_cells = []
    test_ids = [t.tweet_id for t in fold.test]
    for k in plan.target_train_sizes:
        train = training_split(fold, k)
        assert not set(t.tweet_id for t in fold.test) & set(t.tweet_id for t in train)
        if not train:
            skipped_cells.append((fold.fold_id, k, "all", "empty training split"))
            continue
        extractor = _make_extractor(cfg, train)
        for method in plan.methods:
            if method in _NEEDS_TARGET_DATA and k == 0:
                continue  # empty grid cells by design
            try:
                results.append(_run_cell(fold, k, method, plan, cfg, train, extractor))
            except DegenerateTrainingError as exc:
                skipped_cells.append((fold.fold_id, k, method, str(exc)))
            except Exception as exc:  # a broken cell must not abort the grid
                skipped_cells.append((fold.fold_id, k, method, f"{type(exc).__name__}: {exc}"))
    return fold.fold_id, test_ids, results, skipped_cells


def run_experiment(corpus, plan: ExperimentPlan, cfg: HarnessConfig = None) -> ExperimentResult:
    """Execute the full fold x method x k grid and pool scores per (method, k)."""
    if cfg is None:
        cfg = HarnessConfig()
    unknown = [
        m for m in plan.methods if m not in ALL_METHODS and m not in cfg.external_predictions
    ]
    if unknown:
        raise ValueError(
            f"methods {unknown} are neither built in ({ALL_METHODS}) nor provided "
            "as external predictions"
        )
    folds, skipped_folds = build_folds(corpus, plan)
    fold_outputs = []
    if cfg.jobs and cfg.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_fold_cells, fold, plan, cfg) for fold in folds]
            fold_outputs = [f.result() for f in futures]
    else:
        fold_outputs = [_fold_cells(fold, plan, cfg) for fold in folds]

    fold_outputs.sort(key=lambda item: item[0])
    fold_results = []
    fold_test_ids = {}
    skipped_cells = []
    warnings_out = [f"fold {unit} skipped: {reason}" for unit, reason in skipped_folds]
    for fold_id, test_ids, results, cell_skips in fold_outputs:
        fold_test_ids[fold_id] = test_ids
        fold_results.extend(results)
        skipped_cells.extend(cell_skips)
        for skip in cell_skips:
            warnings_out.append(f"cell {skip[:3]} skipped: {skip[3]}")
    fold_results.sort(key=lambda r: (r.method, r.k, r.fold_id))

    aggregates = {}
    for res in fold_results:
        aggregates.setdefault((res.method, res.k), []).append(res.confusion)
    aggregates = {
        key: report_from_confusion(sum(mats[1:], mats[0]))
        for key, mats in sorted(aggregates.items())
    }
    return ExperimentResult(
        plan=plan,
        fold_results=fold_results,
        aggregates=aggregates,
        fold_test_ids=fold_test_ids,
        skipped_folds=skipped_folds,
        skipped_cells=skipped_cells,
        warnings=warnings_out,
    )


# --- result serialisation -----------------------------------------------------

_CSV_FIELDS = ["method", "k", "fold", "micro_f1", "macro_f1"] + [
    f"{measure}_{s.value}"
    for s in STANCE_ORDER
    for measure in ("precision", "recall", "f1")
]


def _score_row(method, k, fold, report: EvaluationReport) -> dict:
    row = {
        "method": method,
        "k": k,
        "fold": fold,
        "micro_f1": report.micro.f1,
        "macro_f1": report.macro.f1,
    }
    for s in STANCE_ORDER:
        row[f"precision_{s.value}"] = report.per_class[s].precision
        row[f"recall_{s.value}"] = report.per_class[s].recall
        row[f"f1_{s.value}"] = report.per_class[s].f1
    return row


def results_csv_rows(result: ExperimentResult) -> list:
    rows = [
        _score_row(r.method, r.k, r.fold_id, report_from_confusion(r.confusion))
        for r in result.fold_results
    ]
    rows.extend(
        _score_row(method, k, "all", report)
        for (method, k), report in result.aggregates.items()
    )
    return rows


def write_results_csv(result: ExperimentResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        writer.writeheader()
        writer.writerows(results_csv_rows(result))


def result_report_dict(result: ExperimentResult) -> dict:
    return {
        "protocol": result.plan.protocol,
        "target_train_sizes": list(result.plan.target_train_sizes),
        "test_offset": result.plan.resolved_test_offset,
        "fold_unit": result.plan.fold_unit,
        "seed": result.plan.seed,
        "methods": list(result.plan.methods),
        "fold_test_ids": result.fold_test_ids,
        "aggregates": {
            f"{method}@k={k}": report.to_dict()
            for (method, k), report in result.aggregates.items()
        },
        "skipped_folds": [list(s) for s in result.skipped_folds],
        "skipped_cells": [list(s) for s in result.skipped_cells],
        "warnings": result.warnings,
    }


def write_report_json(result: ExperimentResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result_report_dict(result), fh, indent=2, sort_keys=True)


def write_timings_csv(result: ExperimentResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "k", "fold", "seconds"])
        for r in result.fold_results:
            writer.writerow([r.method, r.k, r.fold_id, f"{r.seconds:.4f}"])
