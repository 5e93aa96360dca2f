#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "blindspot/metrics.hpp"

namespace blindspot::detect {

inline constexpr double kDefaultTestFraction = 0.2;
inline constexpr double kDecisionThreshold = 0.5;
inline constexpr int kDefaultTrees = 500;
inline constexpr int kModelSchemaVersion = 1;

// Feature vector in a fixed order: diversity, then predictability.
using Features = std::array<double, 2>;
inline Features features_of(const FeatureRow& row) { return {row.diversity, row.predictability}; }

struct Split {
  std::vector<FeatureRow> train;
  std::vector<FeatureRow> test;
};

// Per-class seeded shuffle; round(class_size * test_frac) rows of each class
// go to test. Rows keep their input order within each side.
Split stratified_split(std::span<const FeatureRow> rows, double test_frac, std::uint64_t seed);

// Affine map applied to a raw feature before it reaches the model.
struct FeatureScaling {
  double scale = 1.0;
  double offset = 0.0;
  double apply(double x) const { return x * scale + offset; }
};

// Logistic regression for log(P(human)/P(machine)) = w0 + w_div*div' + w_pred*pred'
// where div' and pred' are the scaled features.
struct LRModel {
  double w0 = 0.0;
  double w_div = 0.0;
  double w_pred = 0.0;
  FeatureScaling div_scaling{0.01, 0.0};
  FeatureScaling pred_scaling{1.0, 0.0};
  bool converged = false;
  bool separation_warning = false;
  int iterations = 0;
  bool fitted = false;
};

struct LogisticOptions {
  double tolerance = 1e-8;  // on mean log-loss change
  int max_iterations = 100;
  FeatureScaling div_scaling{0.01, 0.0};
  FeatureScaling pred_scaling{1.0, 0.0};
};

// Generic IRLS solve on a design matrix (row-major, each row includes the
// intercept column if wanted). y holds 0/1 targets.
struct IrlsResult {
  std::vector<double> weights;
  bool converged = false;
  bool separated = false;
  int iterations = 0;
  double log_loss = 0.0;
};
IrlsResult fit_logistic_irls(const std::vector<std::vector<double>>& design, std::span<const int> y,
                             double tolerance = 1e-8, int max_iterations = 100);

LRModel fit_logistic(std::span<const FeatureRow> train, const LogisticOptions& options = {});

struct GaussianParams {
  double mean = 0.0;
  double variance = 1.0;
};

// Index 0 = human, 1 = machine.
struct GNBModel {
  std::array<std::array<GaussianParams, 2>, 2> params{};  // [class][feature]
  std::array<double, 2> priors{0.5, 0.5};
  double variance_floor = 0.0;
  bool fitted = false;
};

GNBModel fit_gnb(std::span<const FeatureRow> train);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  std::uint32_t n_human = 0;
  std::uint32_t n_machine = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> bootstrap_indices;

  // 1 when the leaf reached by x holds more machine than human rows.
  int vote(const Features& x) const;
};

struct RFModel {
  std::vector<DecisionTree> trees;
  int n_trees = 0;
  std::uint64_t seed = 0;
  bool fitted = false;
};

struct ForestOptions {
  int n_trees = kDefaultTrees;
  unsigned threads = 0;
};

// Bagged Gini trees, one random candidate feature per split (falling back to
// the other feature when the drawn one cannot split), grown to purity.
RFModel fit_forest(std::span<const FeatureRow> train, std::uint64_t seed, const ForestOptions& options = {});

// Single tree on an explicit sample, exposed for testing.
DecisionTree grow_tree(std::span<const Features> x, std::span<const int> y,
                       std::span<const std::uint32_t> sample, std::uint64_t seed);

using Model = std::variant<LRModel, GNBModel, RFModel>;

// Probability that the row is machine-written. Throws UnfittedModel.
double predict_proba(const LRModel& model, const Features& x);
double predict_proba(const GNBModel& model, const Features& x);
double predict_proba(const RFModel& model, const Features& x);
double predict_proba(const Model& model, const FeatureRow& row);

struct EvalReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double specificity = 0.0;
  double auc_roc = 0.0;
  double auc_pr = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
  double threshold = kDecisionThreshold;
  std::string positive_class = "machine";
};

// Confusion-derived metrics; undefined ratios (0/0) are reported as 0.
void fill_confusion_metrics(EvalReport& report);

// labels: 1 = positive class. scores: probability of the positive class.
EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                           double threshold = kDecisionThreshold);

// Machine is the positive class unless `human_positive` is set, in which case
// scores are 1 - P(machine) and labels flip.
EvalReport evaluate(const Model& model, std::span<const FeatureRow> test, bool human_positive = false);

std::string model_name(const Model& model);
nlohmann::ordered_json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& doc);

std::string eval_csv_header();
std::string eval_csv_row(const std::string& model, const std::string& subset, std::int64_t n_train,
                         std::int64_t n_test, const EvalReport& report);

}  // namespace blindspot::detect
