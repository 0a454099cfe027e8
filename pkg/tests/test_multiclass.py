import numpy as np
import pytest

from stancekit.inference import FitConfig
from stancekit.multiclass import (
    DegenerateTrainingError,
    FeatureExtractor,
    OptimizerSettings,
    load_model,
    model_from_dict,
    model_to_dict,
    ModelFormatError,
    predict_stance,
    predict_stance_batch,
    save_model,
    train_stance_model,
)
from stancekit.stances import STANCE_ORDER, Stance
from stancekit.synthetic import make_separable_corpus
from stancekit.textpipe import LabeledInstance

S, D, Q = Stance.SUPPORTING, Stance.DENYING, Stance.QUESTIONING

FAST = FitConfig(ep_tolerance=1e-8, ep_max_sweeps=200)
NO_OPT = OptimizerSettings(max_iters=0, restarts=0)
SMALL_OPT = OptimizerSettings(max_iters=8, restarts=1)


def inst(text, rumour, i, label):
    return LabeledInstance(
        tweet_id=f"{rumour}-{i}", text=text, rumour_id=rumour, order_index=i, label=label
    )


def tiny_corpus():
    rows = [
        ("confirmed breaking terrible", S),
        ("confirmed praying everyone", S),
        ("false hoax debunked", D),
        ("hoax untrue fabricated", D),
        ("source proof anyone", Q),
        ("doubt legit verify", Q),
    ]
    out = []
    for r in ("ra", "rb"):
        for i, (text, label) in enumerate(rows):
            out.append(inst(text, r, i, label))
    return out


def test_one_class_training_degenerates_to_prior():
    train = [inst("confirmed breaking", "r", i, S) for i in range(4)]
    model = train_stance_model(train, "GPPooled", FAST, optimizer=SMALL_OPT)
    label, probs = predict_stance(model, inst("confirmed breaking", "r", 99, None))
    assert label == S
    assert probs[S] > 0.5
    assert probs[D] < 0.5 and probs[Q] < 0.5
    assert all(m.one_class for m in model.per_class_models.values())


def test_gp_variant_requires_target_instances():
    train = tiny_corpus()
    with pytest.raises(DegenerateTrainingError):
        train_stance_model(train, "GP", FAST, target_rumour_id="unknown-rumour")
    with pytest.raises(ValueError):
        train_stance_model(train, "GP", FAST)  # no target id at all


def test_gpicm_block_diagonal_matches_single_task_gp():
    # kappa=1, v=0 fixed (no optimisation): target-task predictions must be
    # unaffected by the reference rumour's data
    train = tiny_corpus()
    target = [t for t in train if t.rumour_id == "ra"]
    extractor = FeatureExtractor.bow().fit(train)

    icm = train_stance_model(
        train, "GPICM", FAST, target_rumour_id="ra", extractor=extractor, optimizer=NO_OPT
    )
    solo = train_stance_model(
        target, "GP", FAST, target_rumour_id="ra", extractor=extractor, optimizer=NO_OPT
    )
    tests = [
        inst("confirmed hoax proof", "ra", 50, None),
        inst("breaking doubt", "ra", 51, None),
        inst("fabricated", "ra", 52, None),
    ]
    p_icm = [probs for _, probs in predict_stance_batch(icm, tests)]
    p_solo = [probs for _, probs in predict_stance_batch(solo, tests)]
    for a, b in zip(p_icm, p_solo):
        for s in STANCE_ORDER:
            assert a[s] == pytest.approx(b[s], abs=1e-6)


def test_separable_corpus_perfect_training_accuracy():
    corpus = make_separable_corpus(seed=5, n_rumours=2, per_rumour=18)
    model = train_stance_model(corpus, "GPPooled", FAST, optimizer=SMALL_OPT)
    preds = [label for label, _ in predict_stance_batch(model, corpus)]
    truth = [t.label for t in corpus]
    assert preds == truth

    # logistic-regression oracle also separates this corpus perfectly
    from stancekit.experiments import run_baseline_logreg

    assert run_baseline_logreg(corpus, corpus) == truth


def test_argmax_and_tie_precedence():
    model = train_stance_model(tiny_corpus(), "GPPooled", FAST, optimizer=NO_OPT)
    label, probs = predict_stance(model, inst("confirmed breaking terrible", "ra", 60, None))
    assert label == max(STANCE_ORDER, key=lambda s: probs[s])

    # zero-feature instance: all three binary classifiers fall back to 0.5,
    # so the tie must break supporting > denying > questioning
    label, probs = predict_stance(model, inst("", "ra", 61, None))
    assert probs == {S: 0.5, D: 0.5, Q: 0.5}
    assert label == S


def test_probabilities_in_open_interval_and_raw():
    model = train_stance_model(tiny_corpus(), "GPPooled", FAST, optimizer=NO_OPT)
    _, probs = predict_stance(model, inst("confirmed hoax proof doubt", "ra", 70, None))
    total = sum(probs.values())
    for s in STANCE_ORDER:
        assert 0.0 < probs[s] < 1.0
    # raw one-vs-all outputs: no renormalisation to 1
    assert total != pytest.approx(1.0)


def test_argmax_invariant_under_monotone_transform():
    model = train_stance_model(tiny_corpus(), "GPPooled", FAST, optimizer=NO_OPT)
    tests = [
        inst("confirmed breaking", "ra", 80, None),
        inst("hoax untrue", "ra", 81, None),
        inst("verify source", "ra", 82, None),
    ]
    for label, probs in predict_stance_batch(model, tests):
        values = np.array([probs[s] for s in STANCE_ORDER])
        for transform in (np.sqrt, lambda p: p**3, lambda p: np.log(p + 1e-9)):
            assert STANCE_ORDER[int(np.argmax(transform(values)))] == label


def test_determinism_same_seed_same_predictions():
    corpus = make_separable_corpus(seed=9, n_rumours=2, per_rumour=12)
    tests = [inst("confirmed hoax verify", "sep0", 90, None)]
    runs = []
    for _ in range(2):
        model = train_stance_model(
            corpus, "GPICM", FAST, target_rumour_id="sep0", optimizer=SMALL_OPT, seed=4
        )
        runs.append(predict_stance_batch(model, tests)[0])
    assert runs[0][0] == runs[1][0]
    assert runs[0][1] == runs[1][1]


def test_unseen_rumour_maps_to_target_task():
    corpus = tiny_corpus()
    model = train_stance_model(
        corpus, "GPICM", FAST, target_rumour_id="ra", optimizer=NO_OPT
    )
    seen = inst("confirmed", "rb", 95, None)
    unseen = inst("confirmed", "never-seen", 96, None)
    target = inst("confirmed", "ra", 97, None)
    assert model.task_of(seen) == model.task_mapping["rb"]
    assert model.task_of(unseen) == model.target_task_id
    assert model.task_of(target) == model.target_task_id


def test_variant_validation():
    with pytest.raises(ValueError):
        train_stance_model(tiny_corpus(), "GPMagic", FAST)
    with pytest.raises(ValueError):
        train_stance_model([], "GPPooled", FAST)
    unlabeled = [inst("x", "r", 0, None)]
    with pytest.raises(ValueError):
        train_stance_model(unlabeled, "GPPooled", FAST)


# --- serialisation round trip --------------------------------------------------------


def test_model_round_trip_bit_identical(tmp_path):
    corpus = tiny_corpus()
    model = train_stance_model(
        corpus, "GPICM", FAST, target_rumour_id="ra", optimizer=SMALL_OPT, seed=2
    )
    tests = [
        inst("confirmed hoax proof", "ra", 101, None),
        inst("breaking doubt verify", "zz", 102, None),
    ]
    before = predict_stance_batch(model, tests)

    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    after = predict_stance_batch(loaded, tests)

    assert [lab for lab, _ in before] == [lab for lab, _ in after]
    for (_, pa), (_, pb) in zip(before, after):
        for s in STANCE_ORDER:
            assert pa[s] == pb[s]  # bit-identical probabilities


def test_model_format_guards(tmp_path):
    with pytest.raises(ModelFormatError):
        model_from_dict({"format": "something-else"})
    model = train_stance_model(tiny_corpus(), "GPPooled", FAST, optimizer=NO_OPT)
    payload = model_to_dict(model)
    payload["version"] = 99
    with pytest.raises(ModelFormatError):
        model_from_dict(payload)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ModelFormatError):
        load_model(bad)
