import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stancekit import porter
from stancekit.textpipe import (
    BrownClusterTable,
    LabeledInstance,
    PreprocessResources,
    default_resources,
    encode_bow,
    encode_brown,
    filter_retweets,
    preprocess,
    resource_digests,
)

PINNED_DIGESTS = {
    "stopwords": "019f104ba2ed07436d05f9cdd3383034ad66014edc27fc651f837e1a038b6451",
    "emoticons": "fb9fab030bd36c2c7aa692ec4c83b2d1bbc44ce3b2ea0c6fe4c51c5ae591c107",
}


def test_resource_digests_pinned():
    assert resource_digests() == PINNED_DIGESTS


# --- preprocess golden fixtures -------------------------------------------------


def test_preprocess_golden_fake():
    assert preprocess("Loooool @user123 this is FAKE!") == ["lool", "fake", "!"]


def test_preprocess_golden_emoticons():
    res = PreprocessResources(frozenset(), {":)": "smile"}, porter.stem)
    assert preprocess(":) :)", res) == ["smile", "smile"]


def test_preprocess_empty():
    assert preprocess("") == []


def test_preprocess_urls_dropped_and_toggleable():
    assert preprocess("look http://bit.ly/x www.example.com closely") == ["look", "close"]
    res = default_resources()
    keep = PreprocessResources(res.stopwords, res.emoticons, res.stemmer, remove_urls=False)
    tokens = preprocess("look www.example.com", keep)
    assert "look" in tokens
    assert any(t.startswith("ww") for t in tokens)  # squashed but kept


def test_preprocess_kept_punctuation_standalone():
    assert preprocess("really??") == ["realli", "?", "?"]
    assert preprocess("done.") == ["done", "."]


def test_preprocess_usernames_removed():
    assert preprocess("@abc @def hello") == ["hello"]


def test_squash_and_stem_idempotent_on_output():
    import re

    squash = lambda t: re.sub(r"(.)\1{2,}", r"\1\1", t)
    texts = [
        "Loooool @user123 this is FAKE!",
        "sooooo worried about the hooospital :(",
        "BREAKING: zoo animals escaped!!! really???",
        "cant believe this happened... praying for everyone",
    ]
    for text in texts:
        for tok in preprocess(text):
            assert squash(tok) == tok
            assert porter.stem(squash(tok)) == tok


# --- encoders -------------------------------------------------------------------


def test_encode_bow_counts_and_sorting():
    vocab = {"a": 0, "b": 1}
    out = encode_bow(["a", "b", "a"], vocab, grow=False)
    assert out.pairs() == [(0, 2), (1, 1)]


def test_encode_bow_frozen_drops_unseen():
    vocab = {"a": 0}
    out = encode_bow(["zz", "qq"], vocab, grow=False)
    assert out.nnz == 0
    assert vocab == {"a": 0}


def test_encode_bow_empty():
    assert encode_bow([], {}, grow=True).nnz == 0


def test_encode_bow_grow_assigns_in_order():
    vocab = {}
    encode_bow(["x", "y", "x", "z"], vocab, grow=True)
    assert vocab == {"x": 0, "y": 1, "z": 2}


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from("abcdef"), max_size=30), st.randoms(use_true_random=False))
def test_encoding_order_insensitive_and_valid(tokens, rnd):
    vocab = {c: i for i, c in enumerate("abcdef")}
    base = encode_bow(tokens, vocab, grow=False)
    shuffled = list(tokens)
    rnd.shuffle(shuffled)
    assert encode_bow(shuffled, vocab, grow=False).pairs() == base.pairs()
    if base.nnz:
        assert np.all(np.diff(base.indices) > 0)
        assert np.all(base.counts >= 1)


BROWN_TEXT = "0110\tw1\t12\n0110\tw2\t5\n0011\tw3\t9\n111\tw4\t2\n"


def test_brown_table_ids_by_first_appearance(tmp_path):
    table = BrownClusterTable.from_text(BROWN_TEXT)
    assert table.lookup("w1") == 0
    assert table.lookup("w2") == 0
    assert table.lookup("w3") == 1
    assert table.lookup("w4") == 2
    assert table.lookup("nope") is None


def test_encode_brown_counts_clusters():
    table = BrownClusterTable.from_text(BROWN_TEXT)
    out = encode_brown(["w1", "w2"], table)
    assert out.pairs() == [(0, 2)]


def test_encode_brown_oov_dropped():
    table = BrownClusterTable.from_text(BROWN_TEXT)
    assert encode_brown(["nope", "never"], table).nnz == 0
    mixed = encode_brown(["nope", "w3"], table)
    assert mixed.pairs() == [(1, 1)]


def test_brown_round_trip(tmp_path):
    path = tmp_path / "paths.tsv"
    path.write_text(BROWN_TEXT, encoding="utf-8")
    table = BrownClusterTable.from_file(path)
    out = tmp_path / "again.tsv"
    table.to_file(out)
    again = BrownClusterTable.from_file(out)
    assert again.pairs() == table.pairs()
    assert out.read_text(encoding="utf-8") == BROWN_TEXT


def test_brown_cluster_budget_enforced():
    lines = "".join(f"{i:011b}\tword{i}\t1\n" for i in range(1001))
    with pytest.raises(ValueError):
        BrownClusterTable.from_text(lines)


def test_brown_bad_line_rejected():
    with pytest.raises(ValueError):
        BrownClusterTable.from_text("0101 w1 3\n")


# --- retweet filter --------------------------------------------------------------


def _inst(text, i=0, retweet=False):
    return LabeledInstance(
        tweet_id=f"t{i}", text=text, rumour_id="r", order_index=i, is_retweet=retweet
    )


def test_filter_retweets_training_only():
    insts = [_inst("hello", 0), _inst("RT @x: hello", 1)]
    assert [t.tweet_id for t in filter_retweets(insts, training=True)] == ["t0"]
    assert filter_retweets(insts, training=False) == insts


def test_filter_retweets_flag_or_prefix():
    insts = [_inst("quoted text", 0, retweet=True), _inst("fresh", 1)]
    assert [t.tweet_id for t in filter_retweets(insts, training=True)] == ["t1"]


def test_filter_retweets_can_empty_a_split():
    insts = [_inst("RT @x: a", 0), _inst("RT @y: b", 1)]
    assert filter_retweets(insts, training=True) == []


# --- porter anchors ---------------------------------------------------------------


@pytest.mark.parametrize(
    "word,expected",
    [
        ("caresses", "caress"),
        ("ponies", "poni"),
        ("cats", "cat"),
        ("feed", "feed"),
        ("agreed", "agre"),
        ("plastered", "plaster"),
        ("motoring", "motor"),
        ("sing", "sing"),
        ("conflated", "conflat"),
        ("hopping", "hop"),
        ("falling", "fall"),
        ("filing", "file"),
        ("happy", "happi"),
        ("sky", "sky"),
        ("relational", "relat"),
        ("hesitanci", "hesit"),
        ("vietnamization", "vietnam"),
        ("predication", "predic"),
        ("operator", "oper"),
        ("feudalism", "feudal"),
        ("decisiveness", "decis"),
        ("hopefulness", "hope"),
        ("formaliti", "formal"),
        ("formative", "form"),
        ("formalize", "formal"),
        ("electriciti", "electr"),
        ("electrical", "electr"),
        ("hopeful", "hope"),
        ("goodness", "good"),
        ("revival", "reviv"),
        ("allowance", "allow"),
        ("inference", "infer"),
        ("adjustable", "adjust"),
        ("defensible", "defens"),
        ("replacement", "replac"),
        ("adoption", "adopt"),
        ("communism", "commun"),
        ("activate", "activ"),
        ("effective", "effect"),
        ("rate", "rate"),
        ("controll", "control"),
        ("roll", "roll"),
    ],
)
def test_porter_anchor_pairs(word, expected):
    assert porter.stem(word) == expected


def test_labeled_instance_defaults():
    inst = LabeledInstance(tweet_id="1", text="x", rumour_id="r7")
    assert inst.event_id == "r7"
    with pytest.raises(ValueError):
        LabeledInstance(tweet_id="1", text="x", rumour_id="r", order_index=-1)
