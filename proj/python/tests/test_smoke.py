import math

import pytest

import blindspot


def test_zipf_model_and_exclusion():
    model = blindspot.make_zipf_model(3, 1.0, 0)
    assert model.probs == pytest.approx([6 / 11, 3 / 11, 2 / 11])
    human = blindspot.HumanDist([1 / 3, 1 / 3, 1 / 3])
    policy = blindspot.TruncationPolicy.top_k(1)
    assert blindspot.analytic_exclusion(model, human, policy) == pytest.approx(2 / 3)

    corpus = blindspot.generate_synthetic_corpus(model, human, 20000, 4)
    rate = blindspot.exclusion_rate(corpus, policy)
    assert abs(rate.point - 2 / 3) < 4 * math.sqrt(2 / 9 / 20000)


def test_event_log_round_trip(tmp_path):
    model = blindspot.make_zipf_model(50, 1.1, 0)
    human = blindspot.HumanDist(list(model.probs))
    corpus = blindspot.generate_synthetic_corpus(model, human, 40, 9, docs=3, topn_depth=5)
    text = blindspot.write_event_log(corpus)
    back = blindspot.parse_event_log(text)
    assert blindspot.write_event_log(back) == text
    path = tmp_path / "c.bsl.jsonl"
    blindspot.write_event_log_file(corpus, str(path))
    assert blindspot.write_event_log(blindspot.read_event_log(str(path))) == text
    assert blindspot.validate_corpus(back).ok()


def test_parse_error_is_structured():
    with pytest.raises(blindspot.BlindspotError) as info:
        blindspot.parse_event_log("{not json\n")
    assert "line 1" in str(info.value)
    with pytest.raises(ValueError):
        blindspot.TruncationPolicy.parse("beam:3")


def test_metrics_and_stats():
    assert blindspot.diversity(blindspot.split_words("a b a b a b")) == pytest.approx(40 / 3)
    assert blindspot.auc_roc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    r, p = blindspot.pearson([1, 2, 3, 4, 5], [2, 1, 4, 3, 5])
    assert r == pytest.approx(0.8)
    assert 0.1 < p < 0.11
    fit = blindspot.ols_fit([0, 2, 4, 6, 8], [("x", [0, 1, 2, 3, 4])])
    assert fit.coef("x") == pytest.approx(2.0)


def test_detection_round():
    rows = []
    for i in range(80):
        row = blindspot.FeatureRow()
        machine = i % 2 == 1
        row.doc_id = f"d{i}"
        row.label = blindspot.Origin.machine if machine else blindspot.Origin.human
        row.strategy = "topk" if machine else "human"
        row.diversity = (80.0 if machine else 90.0) + (i % 5)
        row.predictability = (-2.0 if machine else -3.0) + 0.01 * (i % 7)
        rows.append(row)
    train, test = blindspot.stratified_split(rows, 0.25, 3)
    for model in (blindspot.fit_logistic(train), blindspot.fit_gnb(train),
                  blindspot.fit_forest(train, 5, n_trees=25)):
        report = blindspot.evaluate(model, test)
        assert report.accuracy == 1.0


def test_cli_entry():
    code, out, _ = blindspot.run_cli(["--version"])
    assert code == 0
    assert blindspot.__version__ in out
