#include <doctest.h>

#include <cmath>
#include <set>

#include "blindspot/detect.hpp"
#include "blindspot/error.hpp"
#include "test_helpers.hpp"

using namespace blindspot;
using namespace blindspot::detect;
using blindspot::testing::kHumanClass;
using blindspot::testing::kMachineClass;
using blindspot::testing::two_gaussian_rows;

namespace {

FeatureRow row(Origin label, double div, double pred, std::string strategy = "") {
  FeatureRow r;
  r.label = label;
  r.diversity = div;
  r.predictability = pred;
  r.strategy = strategy.empty() ? (label == Origin::kHuman ? "human" : "topk") : strategy;
  return r;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("stratified split sizes and determinism") {
  const auto rows = two_gaussian_rows(50, kHumanClass, kMachineClass, 1);
  const auto a = stratified_split(rows, 0.2, 9);
  const auto b = stratified_split(rows, 0.2, 9);
  CHECK(a.test.size() == 20);
  CHECK(a.train.size() == 80);
  int human_test = 0;
  for (const auto& r : a.test) human_test += r.label == Origin::kHuman;
  CHECK(human_test == 10);
  REQUIRE(a.test.size() == b.test.size());
  for (std::size_t i = 0; i < a.test.size(); ++i) CHECK(a.test[i].doc_id == b.test[i].doc_id);
  std::set<std::string> ids;
  for (const auto& r : a.train) ids.insert(r.doc_id);
  for (const auto& r : a.test) CHECK(ids.insert(r.doc_id).second);

  std::vector<FeatureRow> tiny{row(Origin::kHuman, 90, -3), row(Origin::kHuman, 91, -3),
                               row(Origin::kMachine, 80, -2)};
  CHECK(kind_of([&] { stratified_split(tiny, 0.2, 1); }) == ErrorKind::kClassTooSmall);
  std::vector<FeatureRow> single{row(Origin::kHuman, 90, -3), row(Origin::kHuman, 91, -3)};
  CHECK(kind_of([&] { stratified_split(single, 0.5, 1); }) == ErrorKind::kSingleClass);
}

TEST_CASE("irls reaches the closed-form solution") {
  // P(y=1 | x=0) = 1/2 and P(y=1 | x=1) = 2/3: w = (0, ln 2).
  const std::vector<std::vector<double>> x{{1, 0}, {1, 0}, {1, 1}, {1, 1}, {1, 1}};
  const std::vector<int> y{0, 1, 0, 1, 1};
  const auto fit = fit_logistic_irls(x, y);
  CHECK(fit.converged);
  CHECK_FALSE(fit.separated);
  CHECK(std::abs(fit.weights[0]) < 1e-8);
  CHECK(fit.weights[1] == doctest::Approx(std::log(2.0)).epsilon(1e-8));
}

TEST_CASE("separable data is flagged") {
  std::vector<FeatureRow> rows;
  for (int i = 0; i < 10; ++i) {
    rows.push_back(row(Origin::kHuman, 90 + i, -3.0 - 0.01 * i));
    rows.push_back(row(Origin::kMachine, 70 + i, -2.0 + 0.01 * i));
  }
  const auto m = fit_logistic(rows);
  CHECK(m.separation_warning);
  CHECK_FALSE(m.converged);
  CHECK(predict_proba(m, {95, -3.05}) < 0.01);
  CHECK(predict_proba(m, {75, -1.95}) > 0.99);
}

TEST_CASE("logistic signs and scaling invariance") {
  const auto rows = two_gaussian_rows(500, kHumanClass, kMachineClass, 21);
  const auto m = fit_logistic(rows);
  CHECK(m.converged);
  CHECK(m.w_div > 0.0);
  CHECK(m.w_pred < 0.0);
  LogisticOptions raw;
  raw.div_scaling = {1.0, 0.0};
  const auto m2 = fit_logistic(rows, raw);
  CHECK(m2.w_div == doctest::Approx(m.w_div * 0.01).epsilon(1e-6));
  for (const auto& r : rows) {
    CHECK(predict_proba(m2, features_of(r)) == doctest::Approx(predict_proba(m, features_of(r))).epsilon(1e-7));
  }
}

TEST_CASE("gaussian naive bayes by hand") {
  std::vector<FeatureRow> rows{row(Origin::kHuman, 90, -3), row(Origin::kHuman, 94, -2.6),
                               row(Origin::kMachine, 80, -2), row(Origin::kMachine, 84, -2.4)};
  const auto m = fit_gnb(rows);
  CHECK(m.params[0][0].mean == 92.0);
  CHECK(m.params[0][0].variance == doctest::Approx(4.0));
  CHECK(m.params[1][1].mean == doctest::Approx(-2.2));
  CHECK(m.params[1][1].variance == doctest::Approx(0.04));
  CHECK(m.priors[0] == 0.5);
  // Equal variances per feature: the midpoint is exactly 1/2.
  CHECK(predict_proba(m, {87.0, -2.5}) == doctest::Approx(0.5));
  const auto norm = [](double x, double mu, double var) {
    return std::exp(-(x - mu) * (x - mu) / (2 * var)) / std::sqrt(2 * M_PI * var);
  };
  const double lh = norm(88, 92, 4) * norm(-2.5, -2.8, 0.04);
  const double lm = norm(88, 82, 4) * norm(-2.5, -2.2, 0.04);
  CHECK(predict_proba(m, {88.0, -2.5}) == doctest::Approx(lm / (lh + lm)).epsilon(1e-10));
}

TEST_CASE("naive bayes floors zero variance") {
  std::vector<FeatureRow> rows{row(Origin::kHuman, 90, -3), row(Origin::kHuman, 90, -3),
                               row(Origin::kMachine, 80, -2), row(Origin::kMachine, 80, -2)};
  const auto m = fit_gnb(rows);
  CHECK(m.variance_floor > 0.0);
  const double p = predict_proba(m, {89.0, -2.9});
  CHECK(std::isfinite(p));
  CHECK(p < 0.5);
}

TEST_CASE("forest probabilities lie on the vote lattice") {
  const auto rows = two_gaussian_rows(100, kHumanClass, kMachineClass, 5);
  ForestOptions opts;
  opts.n_trees = 25;
  const auto m = fit_forest(rows, 3, opts);
  CHECK(m.trees.size() == 25);
  const auto test = two_gaussian_rows(100, kHumanClass, kMachineClass, 6);
  for (const auto& r : test) {
    const double p = predict_proba(m, features_of(r));
    const double scaled = p * 25.0;
    CHECK(std::abs(scaled - std::round(scaled)) < 1e-9);
  }
}

TEST_CASE("forest is reproducible across thread counts") {
  const auto rows = two_gaussian_rows(60, kHumanClass, kMachineClass, 2);
  ForestOptions one{40, 1};
  ForestOptions many{40, 4};
  const auto a = fit_forest(rows, 77, one);
  const auto b = fit_forest(rows, 77, many);
  CHECK(model_to_json(a).dump() == model_to_json(b).dump());
}

TEST_CASE("tree grows to purity on separable data") {
  const std::vector<Features> x{{1, 0}, {2, 0}, {3, 0}, {4, 0}};
  const std::vector<int> y{0, 0, 1, 1};
  const std::vector<std::uint32_t> sample{0, 1, 2, 3};
  const auto t = grow_tree(x, y, sample, 1);
  CHECK(t.nodes.size() == 3);
  CHECK(t.nodes[0].feature == 0);
  CHECK(t.nodes[0].threshold == doctest::Approx(2.5));
  CHECK(t.vote({1.5, 0}) == 0);
  CHECK(t.vote({3.5, 0}) == 1);
}

TEST_CASE("unfitted models refuse to predict") {
  CHECK(kind_of([] { predict_proba(LRModel{}, {1, 1}); }) == ErrorKind::kUnfittedModel);
  CHECK(kind_of([] { predict_proba(GNBModel{}, {1, 1}); }) == ErrorKind::kUnfittedModel);
  CHECK(kind_of([] { predict_proba(RFModel{}, {1, 1}); }) == ErrorKind::kUnfittedModel);
}

TEST_CASE("confusion metrics") {
  // TP=3 FP=1 FN=1 TN=5
  const std::vector<double> s{0.9, 0.8, 0.7, 0.6, 0.4, 0.3, 0.2, 0.1, 0.05, 0.01};
  const std::vector<int> y{1, 1, 1, 0, 1, 0, 0, 0, 0, 0};
  const auto r = evaluate_scores(s, y);
  CHECK(r.tp == 3);
  CHECK(r.fp == 1);
  CHECK(r.fn == 1);
  CHECK(r.tn == 5);
  CHECK(r.precision == doctest::Approx(0.75));
  CHECK(r.recall == doctest::Approx(0.75));
  CHECK(r.f1 == doctest::Approx(0.75));
  CHECK(r.specificity == doctest::Approx(5.0 / 6.0));
  CHECK(r.accuracy == doctest::Approx(0.8));

  EvalReport none;
  none.tn = 4;
  none.fn = 2;
  fill_confusion_metrics(none);
  CHECK(none.precision == 0.0);
  CHECK(none.f1 == 0.0);
}

TEST_CASE("human-positive evaluation flips roles") {
  const auto rows = two_gaussian_rows(200, kHumanClass, kMachineClass, 31);
  const Model m = fit_gnb(rows);
  const auto machine = evaluate(m, rows);
  const auto human = evaluate(m, rows, true);
  CHECK(human.positive_class == "human");
  CHECK(human.tp == machine.tn);
  CHECK(human.fp == machine.fn);
  CHECK(human.auc_roc == doctest::Approx(machine.auc_roc));
  CHECK(human.accuracy == doctest::Approx(machine.accuracy));
}

TEST_CASE("models survive json") {
  const auto rows = two_gaussian_rows(80, kHumanClass, kMachineClass, 12);
  ForestOptions opts{15, 1};
  const std::vector<Model> models{fit_logistic(rows), fit_gnb(rows), fit_forest(rows, 4, opts)};
  for (const auto& m : models) {
    const Model back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
    CHECK(model_name(back) == model_name(m));
    for (const auto& r : rows) CHECK(predict_proba(back, r) == predict_proba(m, r));
  }
  CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(R"({"schema_version":1,"type":"svm"})")), Error);
}

TEST_CASE("eval csv row") {
  EvalReport r;
  r.tp = 1;
  CHECK(eval_csv_header().rfind("model,subset,n_train,n_test,accuracy", 0) == 0);
  const auto line = eval_csv_row("rf", "all", 80, 20, r);
  CHECK(line.rfind("rf,all,80,20,", 0) == 0);
}

TEST_CASE("split examples") {
  std::vector<FeatureRow> rows;
  for (int i = 0; i < 20; ++i) {
    rows.push_back(row(i < 10 ? Origin::kHuman : Origin::kMachine, 80 + i, -2.5));
    rows.back().doc_id = "r" + std::to_string(i);
  }
  const auto s = stratified_split(rows, 0.2, 4);
  int human_test = 0;
  for (const auto& r : s.test) human_test += r.label == Origin::kHuman;
  CHECK(s.test.size() == 4);
  CHECK(human_test == 2);

  std::vector<FeatureRow> ten(rows.begin() + 5, rows.begin() + 15);
  const auto t = stratified_split(ten, 0.2, 4);
  CHECK(t.test.size() == 2);
  CHECK(t.train.size() == 8);
  CHECK(t.test[0].label != t.test[1].label);
}

TEST_CASE("logistic examples") {
  // Classes mirrored through the origin (diversity pre-centred, no scaling).
  std::vector<FeatureRow> rows;
  testing::Normal normal(3);
  for (int i = 0; i < 200; ++i) {
    const double d = normal(1.0, 1.5);
    const double p = normal(-0.5, 1.0);
    rows.push_back(row(Origin::kHuman, d, p));
    rows.push_back(row(Origin::kMachine, -d, -p));
  }
  LogisticOptions centred;
  centred.div_scaling = {1.0, 0.0};
  const auto m = fit_logistic(rows, centred);
  CHECK(std::abs(m.w0) < 1e-6);

  // One-dimensional separable pair: separation warning, boundary in (0, 1).
  const std::vector<std::vector<double>> x{{1, 0}, {1, 1}};
  const std::vector<int> y{0, 1};
  const auto fit = fit_logistic_irls(x, y);
  CHECK(fit.separated);
  CHECK_FALSE(fit.converged);
  const double boundary = -fit.weights[0] / fit.weights[1];
  CHECK(boundary > 0.0);
  CHECK(boundary < 1.0);

  LRModel zero;
  zero.fitted = true;
  CHECK(predict_proba(zero, {93.0, -2.4}) == 0.5);
}

TEST_CASE("naive bayes examples") {
  std::vector<FeatureRow> same{row(Origin::kHuman, 90, -3), row(Origin::kHuman, 85, -2.5),
                               row(Origin::kMachine, 90, -3), row(Origin::kMachine, 85, -2.5)};
  const auto m = fit_gnb(same);
  for (double d : {70.0, 87.5, 100.0}) CHECK(predict_proba(m, {d, -2.7}) == doctest::Approx(0.5));

  std::vector<FeatureRow> far{row(Origin::kHuman, 0.0, 0.0), row(Origin::kHuman, 0.001, 0.001),
                              row(Origin::kMachine, 10.0, 10.0), row(Origin::kMachine, 10.001, 10.001)};
  const auto f = fit_gnb(far);
  CHECK(predict_proba(f, {1.0, 1.0}) < 1e-6);
  CHECK(predict_proba(f, {9.0, 9.0}) > 1 - 1e-6);

  std::vector<FeatureRow> single{row(Origin::kHuman, 90, -3), row(Origin::kMachine, 80, -2),
                                 row(Origin::kMachine, 82, -2.2)};
  const auto s = fit_gnb(single);
  CHECK(s.params[0][0].variance == s.variance_floor);
  CHECK(std::isfinite(predict_proba(s, {85.0, -2.5})));

  GNBModel prior_only;
  prior_only.fitted = true;
  prior_only.priors = {0.25, 0.75};
  CHECK(predict_proba(prior_only, {1.0, 1.0}) == doctest::Approx(0.75));
}

TEST_CASE("forest examples") {
  std::vector<FeatureRow> rows;
  for (int i = 0; i < 30; ++i) {
    rows.push_back(row(Origin::kHuman, 90 + 0.1 * i, -3.0 - 0.01 * i));
    rows.push_back(row(Origin::kMachine, 70 + 0.1 * i, -2.0 + 0.01 * i));
  }
  const auto m = fit_forest(rows, 8, {50, 1});
  const auto train_eval = evaluate(m, rows);
  CHECK(train_eval.accuracy == 1.0);
  const auto again = fit_forest(rows, 8, {50, 1});
  for (double d : {60.0, 80.0, 95.0}) {
    CHECK(predict_proba(m, {d, -2.5}) == predict_proba(again, {d, -2.5}));
  }
  CHECK(predict_proba(m, {65.0, -1.5}) == 1.0);
  CHECK(predict_proba(m, {99.0, -3.9}) == 0.0);
}

TEST_CASE("evaluation examples") {
  const std::vector<int> y{1, 1, 0, 0};
  const auto perfect = evaluate_scores(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.specificity == 1.0);
  CHECK(perfect.auc_roc == 1.0);
  CHECK(perfect.auc_pr == 1.0);
  const auto flat = evaluate_scores(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y);
  CHECK(flat.accuracy == 0.5);
  CHECK(flat.auc_roc == 0.5);
}
