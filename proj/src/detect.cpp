#include "blindspot/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "blindspot/error.hpp"
#include "blindspot/format.hpp"
#include "blindspot/parallel.hpp"
#include "blindspot/random.hpp"
#include "blindspot/stats.hpp"

namespace blindspot::detect {
namespace {

int machine_label(const FeatureRow& row) { return row.label == Origin::kMachine ? 1 : 0; }

void require_both_classes(std::span<const FeatureRow> rows) {
  bool human = false;
  bool machine = false;
  for (const auto& r : rows) (r.label == Origin::kHuman ? human : machine) = true;
  if (!human || !machine) throw Error(ErrorKind::kSingleClass, "training data needs both classes");
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double gaussian_log_density(double x, const GaussianParams& g) {
  const double d = x - g.mean;
  return -0.5 * (std::log(2.0 * M_PI * g.variance) + d * d / g.variance);
}

double gini(double a, double b) {
  const double n = a + b;
  if (n <= 0.0) return 0.0;
  const double pa = a / n;
  const double pb = b / n;
  return 1.0 - pa * pa - pb * pb;
}

struct SplitChoice {
  bool valid = false;
  double impurity = 0.0;
  double threshold = 0.0;
};

// Best Gini split of `idx` on one feature. Sorts idx by that feature.
SplitChoice best_split(std::span<const Features> x, std::span<const int> y, std::vector<std::uint32_t>& idx,
                       int feature) {
  std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
    const double xa = x[a][feature];
    const double xb = x[b][feature];
    return xa < xb || (xa == xb && a < b);
  });
  double total_m = 0.0;
  for (auto i : idx) total_m += y[i];
  const double n = static_cast<double>(idx.size());
  const double total_h = n - total_m;
  double left_m = 0.0;
  SplitChoice best;
  for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
    left_m += y[idx[i]];
    const double lo = x[idx[i]][feature];
    const double hi = x[idx[i + 1]][feature];
    if (!(lo < hi)) continue;
    const double nl = static_cast<double>(i + 1);
    const double nr = n - nl;
    const double left_h = nl - left_m;
    const double impurity =
        (nl * gini(left_h, left_m) + nr * gini(total_h - left_h, total_m - left_m)) / n;
    if (!best.valid || impurity < best.impurity) {
      double mid = lo + (hi - lo) / 2.0;
      if (!(mid < hi)) mid = lo;
      best = {true, impurity, mid};
    }
  }
  return best;
}

template <typename T>
nlohmann::ordered_json scaling_json(const T& s) {
  return {{"scale", s.scale}, {"offset", s.offset}};
}

FeatureScaling scaling_from(const nlohmann::json& j) {
  return {j.at("scale").get<double>(), j.at("offset").get<double>()};
}

}  // namespace

Split stratified_split(std::span<const FeatureRow> rows, double test_frac, std::uint64_t seed) {
  if (!(test_frac > 0.0 && test_frac < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "test fraction must be in (0, 1)");
  }
  require_both_classes(rows);
  std::vector<bool> in_test(rows.size(), false);
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (machine_label(rows[i]) == cls) members.push_back(i);
    }
    SplitMix64 rng(stream_seed(seed, static_cast<std::uint64_t>(cls)));
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[uniform_index(rng, i)]);
    }
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(members.size()) * test_frac));
    if (n_test == 0 || n_test == members.size()) {
      throw Error(ErrorKind::kClassTooSmall, std::string(to_string(cls ? Origin::kMachine : Origin::kHuman)) +
                                                 " class of " + std::to_string(members.size()) +
                                                 " rows cannot be split");
    }
    for (std::size_t i = 0; i < n_test; ++i) in_test[members[i]] = true;
  }
  Split split;
  for (std::size_t i = 0; i < rows.size(); ++i) (in_test[i] ? split.test : split.train).push_back(rows[i]);
  return split;
}

IrlsResult fit_logistic_irls(const std::vector<std::vector<double>>& design, std::span<const int> y,
                             double tolerance, int max_iterations) {
  const auto n = static_cast<Eigen::Index>(design.size());
  if (n == 0 || static_cast<std::size_t>(n) != y.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "design and targets differ in length");
  }
  const auto p = static_cast<Eigen::Index>(design.front().size());
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(design[i].size()) != p) throw Error(ErrorKind::kDimensionMismatch, "ragged design");
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = design[i][j];
    target(i) = y[i];
  }

  auto mean_loss = [&](const Eigen::VectorXd& eta) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += softplus(eta(i)) - target(i) * eta(i);
    return s / static_cast<double>(n);
  };
  auto separates = [&](const Eigen::VectorXd& eta) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (target(i) > 0.5 ? !(eta(i) > 0) : !(eta(i) < 0)) return false;
    }
    return true;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = X * beta;
  double loss = mean_loss(eta);
  IrlsResult res;
  for (int iter = 1; iter <= max_iterations; ++iter) {
    Eigen::VectorXd prob(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = sigmoid(eta(i));
      w(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd grad = X.transpose() * (target - prob);
    const Eigen::MatrixXd hess = X.transpose() * w.asDiagonal() * X;
    const Eigen::VectorXd step = hess.completeOrthogonalDecomposition().solve(grad);
    if (!step.allFinite()) break;
    beta += step;
    eta = X * beta;
    const double next = mean_loss(eta);
    res.iterations = iter;
    res.separated = res.separated || separates(eta);
    const bool small_change = std::fabs(loss - next) < tolerance;
    loss = next;
    // Under complete separation the likelihood has no maximum; keep
    // iterating to the cap instead of declaring convergence.
    if (small_change && !res.separated) {
      res.converged = true;
      break;
    }
  }
  res.weights.assign(beta.data(), beta.data() + p);
  res.log_loss = loss;
  return res;
}

LRModel fit_logistic(std::span<const FeatureRow> train, const LogisticOptions& options) {
  require_both_classes(train);
  std::vector<std::vector<double>> design;
  std::vector<int> y;
  design.reserve(train.size());
  for (const auto& r : train) {
    if (!std::isfinite(r.diversity) || !std::isfinite(r.predictability)) {
      throw Error(ErrorKind::kInvalidArgument, "non-finite feature in row " + r.doc_id);
    }
    design.push_back({1.0, options.div_scaling.apply(r.diversity), options.pred_scaling.apply(r.predictability)});
    y.push_back(r.label == Origin::kHuman ? 1 : 0);
  }
  const IrlsResult fit = fit_logistic_irls(design, y, options.tolerance, options.max_iterations);
  LRModel m;
  m.w0 = fit.weights[0];
  m.w_div = fit.weights[1];
  m.w_pred = fit.weights[2];
  m.div_scaling = options.div_scaling;
  m.pred_scaling = options.pred_scaling;
  m.converged = fit.converged;
  m.separation_warning = fit.separated;
  m.iterations = fit.iterations;
  m.fitted = true;
  return m;
}

GNBModel fit_gnb(std::span<const FeatureRow> train) {
  require_both_classes(train);
  GNBModel m;
  std::array<double, 2> count{0.0, 0.0};
  std::array<std::array<double, 2>, 2> sum{};
  std::array<double, 2> pooled_sum{0.0, 0.0};
  for (const auto& r : train) {
    const int c = machine_label(r);
    const Features x = features_of(r);
    count[c] += 1.0;
    for (int f = 0; f < 2; ++f) {
      sum[c][f] += x[f];
      pooled_sum[f] += x[f];
    }
  }
  const double n = count[0] + count[1];
  std::array<std::array<double, 2>, 2> ss{};
  std::array<double, 2> pooled_ss{0.0, 0.0};
  for (const auto& r : train) {
    const int c = machine_label(r);
    const Features x = features_of(r);
    for (int f = 0; f < 2; ++f) {
      const double d = x[f] - sum[c][f] / count[c];
      ss[c][f] += d * d;
      const double dp = x[f] - pooled_sum[f] / n;
      pooled_ss[f] += dp * dp;
    }
  }
  const double max_pooled = std::max(pooled_ss[0], pooled_ss[1]) / n;
  m.variance_floor = max_pooled > 0.0 ? 1e-9 * max_pooled : 1e-9;
  for (int c = 0; c < 2; ++c) {
    m.priors[c] = count[c] / n;
    for (int f = 0; f < 2; ++f) {
      m.params[c][f].mean = sum[c][f] / count[c];
      m.params[c][f].variance = std::max(ss[c][f] / count[c], m.variance_floor);
    }
  }
  m.fitted = true;
  return m;
}

int DecisionTree::vote(const Features& x) const {
  int i = 0;
  while (nodes[i].feature >= 0) {
    const auto& node = nodes[i];
    i = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  // A tied leaf (duplicate points with both labels) votes machine.
  return nodes[i].n_machine >= nodes[i].n_human ? 1 : 0;
}

DecisionTree grow_tree(std::span<const Features> x, std::span<const int> y,
                       std::span<const std::uint32_t> sample, std::uint64_t seed) {
  DecisionTree tree;
  tree.seed = seed;
  SplitMix64 rng(seed);
  struct Pending {
    int node;
    std::vector<std::uint32_t> idx;
  };
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, std::vector<std::uint32_t>(sample.begin(), sample.end())});
  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    std::uint32_t n_machine = 0;
    for (auto i : cur.idx) n_machine += static_cast<std::uint32_t>(y[i]);
    const auto n_human = static_cast<std::uint32_t>(cur.idx.size()) - n_machine;
    tree.nodes[cur.node].n_human = n_human;
    tree.nodes[cur.node].n_machine = n_machine;
    if (n_human == 0 || n_machine == 0) continue;

    const int first = static_cast<int>(uniform_index(rng, 2));
    SplitChoice choice;
    int feature = first;
    for (int attempt = 0; attempt < 2 && !choice.valid; ++attempt) {
      feature = attempt == 0 ? first : 1 - first;
      choice = best_split(x, y, cur.idx, feature);
    }
    if (!choice.valid) continue;

    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> right;
    for (auto i : cur.idx) (x[i][feature] <= choice.threshold ? left : right).push_back(i);
    const int l = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    tree.nodes[cur.node].feature = feature;
    tree.nodes[cur.node].threshold = choice.threshold;
    tree.nodes[cur.node].left = l;
    tree.nodes[cur.node].right = l + 1;
    stack.push_back({l + 1, std::move(right)});
    stack.push_back({l, std::move(left)});
  }
  return tree;
}

RFModel fit_forest(std::span<const FeatureRow> train, std::uint64_t seed, const ForestOptions& options) {
  require_both_classes(train);
  if (options.n_trees < 1) throw Error(ErrorKind::kInvalidArgument, "forest needs at least one tree");
  std::vector<Features> x;
  std::vector<int> y;
  for (const auto& r : train) {
    x.push_back(features_of(r));
    y.push_back(machine_label(r));
  }
  RFModel m;
  m.n_trees = options.n_trees;
  m.seed = seed;
  m.trees.resize(static_cast<std::size_t>(options.n_trees));
  const auto n = static_cast<std::uint64_t>(x.size());
  parallel_for(m.trees.size(), options.threads, [&](std::size_t t) {
    const std::uint64_t tree_seed = stream_seed(seed, t);
    SplitMix64 rng(tree_seed);
    std::vector<std::uint32_t> sample(n);
    for (auto& s : sample) s = static_cast<std::uint32_t>(uniform_index(rng, n));
    DecisionTree tree = grow_tree(x, y, sample, stream_seed(tree_seed, 1));
    tree.seed = tree_seed;
    tree.bootstrap_indices = std::move(sample);
    m.trees[t] = std::move(tree);
  });
  m.fitted = true;
  return m;
}

double predict_proba(const LRModel& model, const Features& x) {
  if (!model.fitted) throw Error(ErrorKind::kUnfittedModel, "logistic model is not fitted");
  const double score = model.w0 + model.w_div * model.div_scaling.apply(x[0]) +
                       model.w_pred * model.pred_scaling.apply(x[1]);
  return sigmoid(-score);
}

double predict_proba(const GNBModel& model, const Features& x) {
  if (!model.fitted) throw Error(ErrorKind::kUnfittedModel, "naive Bayes model is not fitted");
  std::array<double, 2> log_post{};
  for (int c = 0; c < 2; ++c) {
    log_post[c] = std::log(model.priors[c]);
    for (int f = 0; f < 2; ++f) log_post[c] += gaussian_log_density(x[f], model.params[c][f]);
  }
  return sigmoid(log_post[1] - log_post[0]);
}

double predict_proba(const RFModel& model, const Features& x) {
  if (!model.fitted || model.trees.empty()) throw Error(ErrorKind::kUnfittedModel, "forest is not fitted");
  int votes = 0;
  for (const auto& t : model.trees) votes += t.vote(x);
  return static_cast<double>(votes) / static_cast<double>(model.trees.size());
}

double predict_proba(const Model& model, const FeatureRow& row) {
  return std::visit([&](const auto& m) { return predict_proba(m, features_of(row)); }, model);
}

void fill_confusion_metrics(EvalReport& r) {
  const double tp = static_cast<double>(r.tp);
  const double fp = static_cast<double>(r.fp);
  const double fn = static_cast<double>(r.fn);
  const double tn = static_cast<double>(r.tn);
  r.accuracy = safe_ratio(tp + tn, tp + fp + fn + tn);
  r.precision = safe_ratio(tp, tp + fp);
  r.recall = safe_ratio(tp, tp + fn);
  r.f1 = safe_ratio(2.0 * tp, 2.0 * tp + fp + fn);
  r.specificity = safe_ratio(tn, tn + fp);
}

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels, double threshold) {
  EvalReport r;
  r.threshold = threshold;
  r.auc_roc = stats::auc_roc(scores, labels);
  r.auc_pr = stats::average_precision(scores, labels);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i]) {
      (predicted ? r.tp : r.fn)++;
    } else {
      (predicted ? r.fp : r.tn)++;
    }
  }
  fill_confusion_metrics(r);
  return r;
}

EvalReport evaluate(const Model& model, std::span<const FeatureRow> test, bool human_positive) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& row : test) {
    const double p_machine = predict_proba(model, row);
    scores.push_back(human_positive ? 1.0 - p_machine : p_machine);
    labels.push_back(human_positive ? 1 - machine_label(row) : machine_label(row));
  }
  EvalReport r = evaluate_scores(scores, labels);
  r.positive_class = human_positive ? "human" : "machine";
  return r;
}

std::string model_name(const Model& model) {
  switch (model.index()) {
    case 0: return "lr";
    case 1: return "nb";
    default: return "rf";
  }
}

nlohmann::ordered_json model_to_json(const Model& model) {
  nlohmann::ordered_json j;
  j["schema_version"] = kModelSchemaVersion;
  j["type"] = model_name(model);
  if (const auto* lr = std::get_if<LRModel>(&model)) {
    j["orientation"] = "log(P(human)/P(machine))";
    j["w0"] = lr->w0;
    j["w_div"] = lr->w_div;
    j["w_pred"] = lr->w_pred;
    j["div_scaling"] = scaling_json(lr->div_scaling);
    j["pred_scaling"] = scaling_json(lr->pred_scaling);
    j["converged"] = lr->converged;
    j["separation_warning"] = lr->separation_warning;
    j["iterations"] = lr->iterations;
  } else if (const auto* nb = std::get_if<GNBModel>(&model)) {
    j["variance_floor"] = nb->variance_floor;
    for (int c = 0; c < 2; ++c) {
      const char* cls = c ? "machine" : "human";
      j["classes"][cls]["prior"] = nb->priors[c];
      for (int f = 0; f < 2; ++f) {
        const char* feat = f ? "predictability" : "diversity";
        j["classes"][cls][feat] = {{"mean", nb->params[c][f].mean}, {"variance", nb->params[c][f].variance}};
      }
    }
  } else {
    const auto& rf = std::get<RFModel>(model);
    j["n_trees"] = rf.n_trees;
    j["seed"] = rf.seed;
    j["settings"] = {{"criterion", "gini"}, {"max_features", 1}, {"max_depth", nullptr},
                     {"min_leaf", 1},       {"bootstrap_size", "n_train"}};
    j["node_layout"] = {"feature", "threshold", "left", "right", "n_human", "n_machine"};
    j["features"] = {"diversity", "predictability"};
    auto& trees = j["trees"] = nlohmann::ordered_json::array();
    for (const auto& t : rf.trees) {
      nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
      for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.n_human, n.n_machine});
      trees.push_back({{"seed", t.seed}, {"nodes", std::move(nodes)}});
    }
  }
  return j;
}

Model model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kModelSchemaVersion) {
      throw Error(ErrorKind::kInvalidArgument, "unsupported model schema version");
    }
    const std::string type = j.at("type").get<std::string>();
    if (type == "lr") {
      LRModel m;
      m.w0 = j.at("w0").get<double>();
      m.w_div = j.at("w_div").get<double>();
      m.w_pred = j.at("w_pred").get<double>();
      m.div_scaling = scaling_from(j.at("div_scaling"));
      m.pred_scaling = scaling_from(j.at("pred_scaling"));
      m.converged = j.at("converged").get<bool>();
      m.separation_warning = j.at("separation_warning").get<bool>();
      m.iterations = j.at("iterations").get<int>();
      m.fitted = true;
      return m;
    }
    if (type == "nb") {
      GNBModel m;
      m.variance_floor = j.at("variance_floor").get<double>();
      for (int c = 0; c < 2; ++c) {
        const auto& cls = j.at("classes").at(c ? "machine" : "human");
        m.priors[c] = cls.at("prior").get<double>();
        for (int f = 0; f < 2; ++f) {
          const auto& g = cls.at(f ? "predictability" : "diversity");
          m.params[c][f] = {g.at("mean").get<double>(), g.at("variance").get<double>()};
        }
      }
      m.fitted = true;
      return m;
    }
    if (type == "rf") {
      RFModel m;
      m.n_trees = j.at("n_trees").get<int>();
      m.seed = j.at("seed").get<std::uint64_t>();
      for (const auto& t : j.at("trees")) {
        DecisionTree tree;
        tree.seed = t.at("seed").get<std::uint64_t>();
        for (const auto& n : t.at("nodes")) {
          tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                n.at(3).get<int>(), n.at(4).get<std::uint32_t>(), n.at(5).get<std::uint32_t>()});
        }
        m.trees.push_back(std::move(tree));
      }
      m.fitted = !m.trees.empty();
      return m;
    }
    throw Error(ErrorKind::kInvalidArgument, "unknown model type " + type);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kMalformedLine, std::string("model file: ") + e.what());
  }
}

std::string eval_csv_header() {
  return csv_row({"model", "subset", "n_train", "n_test", "accuracy", "precision", "recall", "f1", "specificity",
                  "auc_roc", "auc_pr", "tp", "fp", "fn", "tn", "threshold", "positive_class"});
}

std::string eval_csv_row(const std::string& model, const std::string& subset, std::int64_t n_train,
                         std::int64_t n_test, const EvalReport& r) {
  return csv_row({model, subset, std::to_string(n_train), std::to_string(n_test), format_double(r.accuracy),
                  format_double(r.precision), format_double(r.recall), format_double(r.f1),
                  format_double(r.specificity), format_double(r.auc_roc), format_double(r.auc_pr),
                  std::to_string(r.tp), std::to_string(r.fp), std::to_string(r.fn), std::to_string(r.tn),
                  format_double(r.threshold), r.positive_class});
}

}  // namespace blindspot::detect
