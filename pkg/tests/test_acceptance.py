"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The heavyweight end-to-end runs execute the real CLI on the bundled
synthetic corpus generators and are shared between the structural and
timing criteria through a module-scoped fixture.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from oracles import central_differences, exact_predictive, min_eigenvalue
from stancekit import cli
from stancekit.corpus import write_jsonl
from stancekit.evaluation import score
from stancekit.experiments import ExperimentPlan, HarnessConfig, run_experiment
from stancekit.inference import (
    BinaryDataset,
    FitConfig,
    _BinaryProblem,
    _ep_fit_matrix,
    ep_fit,
    log_evidence_gradient,
    predict_probabilities,
)
from stancekit.kernels import (
    IcmKernelParams,
    LinearKernelParams,
    TaskedInput,
    cross_feature_gram,
    gram_matrix,
    kernel_matrix_from_parts,
    pack_hyperparameters,
    signal_variance,
    task_ids,
    unpack_hyperparameters,
)
from stancekit.multiclass import FeatureExtractor, OptimizerSettings, predict_stance_batch, train_stance_model
from stancekit.sparse import SparseFeatureVector
from stancekit.stances import STANCE_ORDER, Stance
from stancekit.synthetic import make_binary_dataset, make_grid_corpus, make_separable_corpus
from stancekit.textpipe import LabeledInstance, PreprocessResources, filter_retweets, preprocess
from stancekit import porter

S, D, Q = Stance.SUPPORTING, Stance.DENYING, Stance.QUESTIONING


@contextmanager
def criterion(num, desc):
    try:
        yield
    except BaseException:
        print(f"[acceptance] criterion {num}: FAIL - {desc}")
        raise
    print(f"[acceptance] criterion {num}: PASS - {desc}")


def _kernel_pieces(inputs, test, params, jitter=1e-8):
    K = gram_matrix(inputs, params, jitter)
    raw = cross_feature_gram([test], inputs)
    k_star = kernel_matrix_from_parts(raw, [test.task_id], task_ids(inputs, params), params)[0]
    self_dot = float(test.features.counts @ test.features.counts)
    k_ss = signal_variance(params) * self_dot + jitter
    if isinstance(params, IcmKernelParams):
        bmat = params.coregionalisation()
        k_ss = signal_variance(params) * self_dot * bmat[test.task_id, test.task_id] + jitter
    return K, k_star, k_ss


def test_criterion_1_ep_matches_exact_posterior():
    with criterion(1, "EP vs brute-force posterior integration, 20 datasets, |diff| < 2e-2"):
        started = time.monotonic()
        cfg = FitConfig(ep_tolerance=1e-10, ep_max_sweeps=400)
        rng = np.random.default_rng(2024)
        worst = 0.0
        checked = 0
        for seed in range(20):
            n = seed % 5 + 1
            tasks = 2 if seed % 3 == 0 else 1
            # kernel scales in the toolkit's operating range (prior variances of
            # a few units); EP's Gaussian approximation degrades for priors that
            # are orders of magnitude wider than the likelihood's scale
            inputs, labels = make_binary_dataset(
                seed=1000 + seed, n=n, dim=3, tasks=tasks, max_count=2
            )
            sig = float(rng.uniform(0.3, 1.2))
            if tasks == 2:
                params = IcmKernelParams(
                    LinearKernelParams(sig), 2,
                    kappa=rng.uniform(0.2, 1.2, 2), v=rng.uniform(-0.8, 0.8, 2),
                )
            else:
                params = LinearKernelParams(sig)
            data = BinaryDataset(inputs, labels)
            state = ep_fit(data, params, cfg)
            tests = [inputs[0], TaskedInput(inputs[-1].features, inputs[0].task_id)]
            probs = predict_probabilities(state, data, params, tests)
            for test, p_ep in zip(tests, probs):
                K, k_star, k_ss = _kernel_pieces(inputs, test, params)
                p_exact = exact_predictive(K, labels, k_star, k_ss, seed=seed)
                worst = max(worst, abs(p_ep - p_exact))
                checked += 1
                assert abs(p_ep - p_exact) < 2e-2
        elapsed = time.monotonic() - started
        assert checked >= 20
        assert elapsed < 60.0
        print(f"  worst |EP - exact| = {worst:.2e} over {checked} predictions in {elapsed:.1f}s")


def test_criterion_2_gradients_match_finite_differences():
    with criterion(2, "evidence gradients vs central differences, rel err < 1e-4"):
        cfg = FitConfig(ep_tolerance=1e-12, ep_max_sweeps=600, damping=0.9)
        worst = 0.0
        problems = 0
        for seed in range(10):
            n = 5 + seed % 3
            if seed % 2 == 0:
                tasks = 2
                inputs, labels = make_binary_dataset(seed=2000 + seed, n=n, dim=3, tasks=2)
                rng = np.random.default_rng(seed)
                params = IcmKernelParams(
                    LinearKernelParams(float(rng.uniform(0.5, 2.0))), 2,
                    kappa=rng.uniform(0.4, 1.6, 2), v=rng.uniform(0.2, 0.9, 2),
                )
            else:
                inputs, labels = make_binary_dataset(seed=2000 + seed, n=n, dim=4, tasks=1)
                params = LinearKernelParams(0.5 + 0.3 * seed)
            if np.unique(labels).size < 2:
                labels = labels.copy()
                labels[0] = -labels[0]
            data = BinaryDataset(inputs, labels)
            state = ep_fit(data, params, cfg)
            assert state.converged
            grad = log_evidence_gradient(state, data, params, jitter=cfg.jitter)

            problem = _BinaryProblem(data, params, cfg.jitter)

            def refit_log_z(theta):
                K = problem.kernel_matrix(unpack_hyperparameters(theta, params))
                return _ep_fit_matrix(K, labels, cfg).log_evidence

            fd = central_differences(refit_log_z, pack_hyperparameters(params), h=1e-5)
            rel = np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-7)
            worst = max(worst, float(np.max(rel)))
            problems += 1
            assert np.max(rel) < 1e-4
        assert problems >= 10
        print(f"  worst relative gradient error = {worst:.2e} over {problems} problems")


def test_criterion_3_gram_psd_thousand_randoms():
    with criterion(3, "1000 random ICM Gram matrices have min eigenvalue >= -1e-8"):
        rng = np.random.default_rng(31415)
        worst = np.inf
        for _ in range(1000):
            n = int(rng.integers(2, 10))
            tasks = int(rng.integers(1, 4))
            dim = int(rng.integers(2, 8))
            inputs = []
            for _ in range(n):
                k = int(rng.integers(1, min(dim, 4) + 1))
                idx = np.sort(rng.choice(dim, size=k, replace=False)).astype(np.int64)
                cnt = rng.integers(1, 5, size=k).astype(np.int64)
                inputs.append(
                    TaskedInput(SparseFeatureVector(idx, cnt), int(rng.integers(0, tasks)))
                )
            params = IcmKernelParams(
                LinearKernelParams(float(rng.uniform(0.05, 5.0))),
                tasks,
                kappa=rng.uniform(0.0, 3.0, tasks),
                v=rng.uniform(-2.0, 2.0, tasks),
            )
            K = gram_matrix(inputs, params, jitter=0.0)
            low = min_eigenvalue(K)
            worst = min(worst, low)
            assert low >= -1e-8
        print(f"  lowest eigenvalue seen = {worst:.2e}")


def test_criterion_4_task_block_independence():
    with criterion(4, "GPICM with kappa=1, v=0 equals single-task GP within 1e-6"):
        cfg = FitConfig(ep_tolerance=1e-10, ep_max_sweeps=300)
        corpus = make_separable_corpus(seed=404, n_rumours=2, per_rumour=15)
        target = [t for t in corpus if t.rumour_id == "sep0"]
        extractor = FeatureExtractor.bow().fit(corpus)
        no_opt = OptimizerSettings(max_iters=0, restarts=0)

        icm = train_stance_model(
            corpus, "GPICM", cfg, target_rumour_id="sep0", extractor=extractor, optimizer=no_opt
        )
        solo = train_stance_model(
            target, "GP", cfg, target_rumour_id="sep0", extractor=extractor, optimizer=no_opt
        )
        tests = [
            LabeledInstance(tweet_id=f"t{i}", text=text, rumour_id="sep0", order_index=90 + i)
            for i, text in enumerate(
                ["confirmed breaking praying", "false hoax", "proof anyone legit", "calm verify"]
            )
        ]
        worst = 0.0
        for (_, pa), (_, pb) in zip(
            predict_stance_batch(icm, tests), predict_stance_batch(solo, tests)
        ):
            for s in STANCE_ORDER:
                worst = max(worst, abs(pa[s] - pb[s]))
                assert abs(pa[s] - pb[s]) < 1e-6
        print(f"  worst probability difference = {worst:.2e}")


def test_criterion_5_evaluation_exactness():
    with criterion(5, "score() reproduces hand-derived values, micro == accuracy, 0/0 -> 0"):
        rep = score([S, S, D, Q], [S, D, D, S])
        assert rep.micro.f1 == pytest.approx(0.5)
        assert rep.macro.precision == pytest.approx(1 / 3)
        assert rep.macro.recall == pytest.approx(1 / 2)
        assert rep.macro.f1 == pytest.approx(0.4)

        rng = np.random.default_rng(55)
        stances = list(STANCE_ORDER)
        for _ in range(100):
            n = int(rng.integers(1, 60))
            truths = [stances[i] for i in rng.integers(0, 3, n)]
            preds = [stances[i] for i in rng.integers(0, 3, n)]
            r = score(truths, preds)
            accuracy = sum(t == p for t, p in zip(truths, preds)) / n
            assert r.micro.f1 == pytest.approx(accuracy)

        # zero-denying fixture shaped like a rumour with supporting/questioning only
        truths = [S] * 177 + [Q] * 13
        preds = [S] * 190
        r = score(truths, preds)
        assert r.per_class[D].precision == 0.0
        assert r.per_class[D].recall == 0.0
        assert r.per_class[D].f1 == 0.0
        assert r.zero_division_flags
        print("  hand-derived macro-F1 = 0.4 case, 100 micro==accuracy draws, 0/0 fixture")


GRID_ARGS = [
    "--train-sizes", "0,10,20,30,40,50",
    "--methods", "Majority,NB,MaxEnt,GP,GPPooled,GPICM",
    "--seed", "42", "--jobs", "1",
    "--opt-iters", "1", "--opt-restarts", "0",
    "--ep-tolerance", "1e-5", "--ep-max-sweeps", "50", "--damping", "1.0",
]


@pytest.fixture(scope="module")
def grid_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("grid")
    corpus_path = base / "grid.jsonl"
    write_jsonl(make_grid_corpus(), corpus_path)
    runs = {}
    for tag in ("first", "rerun"):
        out = base / tag
        started = time.monotonic()
        rc = cli.main(
            ["run", "--corpus", str(corpus_path), "--out", str(out)] + GRID_ARGS
        )
        runs[tag] = {"rc": rc, "seconds": time.monotonic() - started, "out": out}
    return runs


def test_criterion_6_harness_structure(grid_run):
    with criterion(6, "full method-by-k grid, fixed test sets, GP absent at k=0, "
                      "byte-identical rerun, separable corpus quality"):
        first = grid_run["first"]
        assert first["rc"] == 0
        rows = (first["out"] / "results.csv").read_text().strip().splitlines()[1:]
        cells = [r.split(",")[:3] for r in rows]
        folds = {f"rumour{i}" for i in range(7)}
        for method, expected_ks in {
            "Majority": [0, 10, 20, 30, 40, 50],
            "NB": [0, 10, 20, 30, 40, 50],
            "MaxEnt": [0, 10, 20, 30, 40, 50],
            "GPPooled": [0, 10, 20, 30, 40, 50],
            "GP": [10, 20, 30, 40, 50],
            "GPICM": [10, 20, 30, 40, 50],
        }.items():
            ks = sorted({int(k) for m, k, f in cells if m == method and f == "all"})
            assert ks == expected_ks, f"{method} aggregate ks {ks}"
            for k in expected_ks:
                per_fold = {f for m, kk, f in cells if m == method and int(kk) == k and f != "all"}
                assert per_fold == folds, f"{method} k={k} folds {per_fold}"
        assert not [c for c in cells if c[0] in ("GP", "GPICM") and c[1] == "0"]

        report = json.loads((first["out"] / "report.json").read_text())
        assert set(report["fold_test_ids"]) == folds
        for fold, ids in report["fold_test_ids"].items():
            assert len(ids) == 5  # 55 tweets per rumour, offset 50, fixed across k
            assert all(i.startswith(fold) for i in ids)

        rerun = grid_run["rerun"]
        assert rerun["rc"] == 0
        for name in ("results.csv", "report.json"):
            assert (first["out"] / name).read_bytes() == (rerun["out"] / name).read_bytes()

        # fixed test sets across k, checked against the fold API directly
        plan = ExperimentPlan(protocol="LPO", target_train_sizes=(0, 10, 20, 30, 40, 50), seed=42)
        from stancekit.experiments import build_folds, training_split

        folds_api, _ = build_folds(make_grid_corpus(), plan)
        for fold in folds_api:
            ids = [t.tweet_id for t in fold.test]
            assert ids == report["fold_test_ids"][fold.fold_id]
            for k in plan.target_train_sizes:
                assert not {t.tweet_id for t in training_split(fold, k)} & set(ids)

        # separable corpus: learned methods beat the majority baseline
        sep_plan = ExperimentPlan(
            protocol="LPO", target_train_sizes=(10,), test_offset=10,
            methods=("Majority", "MaxEnt", "GPICM"), seed=6,
        )
        sep_cfg = HarnessConfig(
            fit=FitConfig(ep_tolerance=1e-6, ep_max_sweeps=80),
            optimizer=OptimizerSettings(max_iters=8, restarts=1),
            jobs=1,
        )
        sep = run_experiment(make_separable_corpus(), sep_plan, sep_cfg)
        macro = {m: rep.macro.f1 for (m, _), rep in sep.aggregates.items()}
        assert macro["GPICM"] >= 0.95
        assert macro["MaxEnt"] >= 0.95
        assert macro["GPICM"] > macro["Majority"]
        assert macro["MaxEnt"] > macro["Majority"]
        print(
            f"  grid rerun byte-identical; separable macro-F1: GPICM={macro['GPICM']:.3f} "
            f"MaxEnt={macro['MaxEnt']:.3f} Majority={macro['Majority']:.3f}"
        )


def test_criterion_7_pipeline_fixtures():
    with criterion(7, "preprocess golden fixtures and training-only retweet filter"):
        assert preprocess("Loooool @user123 this is FAKE!") == ["lool", "fake", "!"]
        res = PreprocessResources(frozenset(), {":)": "smile"}, porter.stem)
        assert preprocess(":) :)", res) == ["smile", "smile"]
        assert preprocess("") == []
        assert preprocess("sooooo scared right now ?!") == ["soo", "scare", "right", "?", "!"]
        insts = [
            LabeledInstance(tweet_id="a", text="RT @x: confirmed", rumour_id="r", order_index=0),
            LabeledInstance(tweet_id="b", text="confirmed", rumour_id="r", order_index=1),
            LabeledInstance(tweet_id="c", text="quoted", rumour_id="r", order_index=2,
                            is_retweet=True),
        ]
        assert [t.tweet_id for t in filter_retweets(insts, training=True)] == ["b"]
        assert filter_retweets(insts, training=False) == insts
        print("  emoticons, usernames, squashing, kept punctuation, retweets")


def test_criterion_8_end_to_end_desk_run(grid_run):
    with criterion(8, "cmd_run on the 7-rumour synthetic corpus: exit 0 in under 5 minutes"):
        first = grid_run["first"]
        assert first["rc"] == 0
        assert first["seconds"] < 300.0
        print(f"  wall clock {first['seconds']:.1f}s")
