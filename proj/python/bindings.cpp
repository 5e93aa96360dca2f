#include <sstream>

#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "blindspot/cli.hpp"
#include "blindspot/detect.hpp"
#include "blindspot/error.hpp"
#include "blindspot/events.hpp"
#include "blindspot/metrics.hpp"
#include "blindspot/posanal.hpp"
#include "blindspot/stats.hpp"
#include "blindspot/synth.hpp"
#include "blindspot/truncation.hpp"

namespace py = pybind11;
using namespace blindspot;

namespace {

void bind_events(py::module_& m) {
  py::enum_<Origin>(m, "Origin").value("human", Origin::kHuman).value("machine", Origin::kMachine);
  py::enum_<Strategy>(m, "Strategy")
      .value("beam", Strategy::kBeam)
      .value("contrastive", Strategy::kContrastive)
      .value("topk", Strategy::kTopK)
      .value("topp", Strategy::kTopP)
      .value("temperature", Strategy::kTemperature)
      .value("human", Strategy::kHuman);

  py::class_<TokenEvent>(m, "TokenEvent")
      .def(py::init<>())
      .def_readwrite("position", &TokenEvent::position)
      .def_readwrite("token_id", &TokenEvent::token_id)
      .def_readwrite("surface", &TokenEvent::surface)
      .def_readwrite("logprob", &TokenEvent::logprob)
      .def_readwrite("rank", &TokenEvent::rank)
      .def_readwrite("cum_mass_before", &TokenEvent::cum_mass_before)
      .def_readwrite("pos_tag", &TokenEvent::pos_tag)
      .def_readwrite("topn_ids", &TokenEvent::topn_ids)
      .def_readwrite("topn_logprobs", &TokenEvent::topn_logprobs)
      .def(py::self == py::self);

  py::class_<DocRecord>(m, "DocRecord")
      .def(py::init<>())
      .def_readwrite("doc_id", &DocRecord::doc_id)
      .def_readwrite("origin", &DocRecord::origin)
      .def_readwrite("generator", &DocRecord::generator)
      .def_readwrite("strategy", &DocRecord::strategy)
      .def_readwrite("config", &DocRecord::config)
      .def_readwrite("dataset", &DocRecord::dataset)
      .def_readwrite("scoring_model", &DocRecord::scoring_model)
      .def_readwrite("tokenizer_id", &DocRecord::tokenizer_id)
      .def_readwrite("prompt_in_window", &DocRecord::prompt_in_window)
      .def_readwrite("events", &DocRecord::events)
      .def_readwrite("raw_text", &DocRecord::raw_text);

  py::class_<Corpus>(m, "Corpus")
      .def(py::init<>())
      .def_readwrite("docs", &Corpus::docs)
      .def_readwrite("schema_version", &Corpus::schema_version)
      .def_readwrite("meta", &Corpus::meta)
      .def("n_tokens", &Corpus::n_tokens)
      .def(py::self == py::self);

  py::class_<Violation>(m, "Violation")
      .def_readonly("doc_id", &Violation::doc_id)
      .def_readonly("position", &Violation::position)
      .def_readonly("rule", &Violation::rule);
  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("violations", &ValidationReport::violations)
      .def("ok", &ValidationReport::ok);

  m.def("parse_event_log", py::overload_cast<std::string_view>(&parse_event_log), py::arg("text"));
  m.def("read_event_log", &read_event_log, py::arg("path"));
  m.def("write_event_log", py::overload_cast<const Corpus&>(&write_event_log), py::arg("corpus"));
  m.def("write_event_log_file", &write_event_log_file, py::arg("corpus"), py::arg("path"));
  m.def("validate_corpus", &validate_corpus, py::arg("corpus"));
}

void bind_synth(py::module_& m) {
  py::class_<synth::SynthModel>(m, "SynthModel")
      .def(py::init<std::vector<double>, std::uint64_t>(), py::arg("probs"), py::arg("seed") = 0)
      .def_property_readonly("probs", &synth::SynthModel::probs)
      .def_property_readonly("vocab_size", &synth::SynthModel::vocab_size)
      .def_property_readonly("seed", &synth::SynthModel::seed);
  py::class_<synth::HumanDist>(m, "HumanDist")
      .def(py::init<std::vector<double>>(), py::arg("probs"))
      .def_property_readonly("probs", &synth::HumanDist::probs);
  m.def("make_zipf_model", &synth::make_zipf_model, py::arg("vocab_size"), py::arg("exponent"), py::arg("seed") = 0);
  m.def(
      "generate_synthetic_corpus",
      [](const synth::SynthModel& model, const synth::HumanDist& human, std::int64_t tokens, std::uint64_t seed,
         std::int64_t docs, std::size_t topn_depth) {
        synth::SynthOptions opts;
        opts.topn_depth = topn_depth;
        return synth::generate_synthetic_corpus(model, human, tokens, docs, seed, opts);
      },
      py::arg("model"), py::arg("human"), py::arg("tokens"), py::arg("seed"), py::arg("docs") = 1,
      py::arg("topn_depth") = 0);
  m.def("analytic_exclusion", &synth::analytic_exclusion, py::arg("model"), py::arg("human"), py::arg("policy"));
}

void bind_truncation(py::module_& m) {
  py::class_<TruncationPolicy>(m, "TruncationPolicy")
      .def_static("top_k", &TruncationPolicy::top_k, py::arg("k"))
      .def_static("top_p", &TruncationPolicy::top_p, py::arg("p"))
      .def_static("contrastive", &TruncationPolicy::contrastive, py::arg("k"))
      .def_static("parse", &TruncationPolicy::parse, py::arg("spec"))
      .def_property_readonly("k", &TruncationPolicy::k)
      .def_property_readonly("p", &TruncationPolicy::p)
      .def("__str__", &TruncationPolicy::to_string)
      .def("__repr__", [](const TruncationPolicy& p) { return "TruncationPolicy(" + p.to_string() + ")"; });

  py::class_<RateEstimate>(m, "RateEstimate")
      .def_readonly("point", &RateEstimate::point)
      .def_readonly("ci_low", &RateEstimate::ci_low)
      .def_readonly("ci_high", &RateEstimate::ci_high)
      .def_readonly("n_tokens", &RateEstimate::n_tokens)
      .def_readonly("n_docs", &RateEstimate::n_docs)
      .def_readonly("method", &RateEstimate::method);

  py::class_<RankHistogram>(m, "RankHistogram")
      .def_readonly("bin_shares", &RankHistogram::bin_shares)
      .def_readonly("bin_counts", &RankHistogram::bin_counts)
      .def_readonly("rank_one_share", &RankHistogram::rank_one_share)
      .def_readonly("median_rank", &RankHistogram::median_rank)
      .def_readonly("mean_rank", &RankHistogram::mean_rank)
      .def_readonly("n_tokens", &RankHistogram::n_tokens)
      .def_readonly("median_exceeds_mean", &RankHistogram::median_exceeds_mean);

  py::class_<OverlapStat>(m, "OverlapStat")
      .def_readonly("mean_jaccard", &OverlapStat::mean_jaccard)
      .def_readonly("std_jaccard", &OverlapStat::std_jaccard)
      .def_readonly("n_positions", &OverlapStat::n_positions)
      .def_readonly("n_skipped", &OverlapStat::n_skipped);

  m.def("membership", &membership, py::arg("event"), py::arg("policy"));
  m.def("exclusion_rate", &exclusion_rate, py::arg("corpus"), py::arg("policy"), py::arg("filter") = DocFilter{});
  m.def("exclusion_rate_ci", &exclusion_rate_ci, py::arg("corpus"), py::arg("policy"),
        py::arg("replicates") = kDefaultBootstrapReplicates, py::arg("seed") = 0, py::arg("filter") = DocFilter{},
        py::arg("threads") = 1u);
  m.def("rank_distribution", &rank_distribution, py::arg("corpus"), py::arg("filter") = DocFilter{});
  m.def("truncation_overlap", &truncation_overlap, py::arg("a"), py::arg("b"), py::arg("policy"));
}

void bind_metrics(py::module_& m) {
  py::class_<FeatureRow>(m, "FeatureRow")
      .def(py::init<>())
      .def_readwrite("doc_id", &FeatureRow::doc_id)
      .def_readwrite("label", &FeatureRow::label)
      .def_readwrite("strategy", &FeatureRow::strategy)
      .def_readwrite("config", &FeatureRow::config)
      .def_readwrite("dataset", &FeatureRow::dataset)
      .def_readwrite("generator", &FeatureRow::generator)
      .def_readwrite("predictability", &FeatureRow::predictability)
      .def_readwrite("diversity", &FeatureRow::diversity);
  m.def("predictability", &predictability, py::arg("doc"));
  m.def(
      "diversity", [](const std::vector<std::string>& words) { return diversity(words); }, py::arg("words"));
  m.def("split_words", &split_words, py::arg("text"));
  m.def("feature_table", &feature_table, py::arg("corpus"));
  m.def(
      "features_to_csv", [](const std::vector<FeatureRow>& rows) { return features_to_csv(rows); }, py::arg("rows"));
}

void bind_stats(py::module_& m) {
  m.def(
      "auc_roc", [](const std::vector<double>& s, const std::vector<int>& l) { return stats::auc_roc(s, l); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "average_precision",
      [](const std::vector<double>& s, const std::vector<int>& l) { return stats::average_precision(s, l); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "bootstrap_ci",
      [](const std::vector<std::vector<double>>& groups, int replicates, std::uint64_t seed) {
        const auto ci = stats::bootstrap_ci(groups, replicates, seed);
        return std::make_pair(ci.low, ci.high);
      },
      py::arg("groups"), py::arg("replicates"), py::arg("seed"));
  m.def(
      "pearson",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto c = stats::pearson(x, y);
        return std::make_pair(c.r, c.p);
      },
      py::arg("x"), py::arg("y"));

  py::class_<stats::OlsTerm>(m, "OlsTerm")
      .def_readonly("name", &stats::OlsTerm::name)
      .def_readonly("beta", &stats::OlsTerm::beta)
      .def_readonly("se", &stats::OlsTerm::se)
      .def_readonly("t", &stats::OlsTerm::t)
      .def_readonly("p", &stats::OlsTerm::p)
      .def_readonly("p_normal", &stats::OlsTerm::p_normal);
  py::class_<stats::OlsResult>(m, "OlsResult")
      .def_readonly("terms", &stats::OlsResult::terms)
      .def_readonly("r_squared", &stats::OlsResult::r_squared)
      .def_readonly("n", &stats::OlsResult::n)
      .def("coef", &stats::OlsResult::coef, py::arg("name"));
  m.def(
      "ols_fit",
      [](const std::vector<double>& response,
         const std::vector<std::pair<std::string, std::vector<double>>>& covariates,
         const std::vector<std::pair<std::string, std::vector<std::string>>>& factors, bool intercept) {
        stats::OlsDesign design{covariates, factors, intercept};
        return stats::ols_fit(design, response);
      },
      py::arg("response"), py::arg("covariates") = std::vector<std::pair<std::string, std::vector<double>>>{},
      py::arg("factors") = std::vector<std::pair<std::string, std::vector<std::string>>>{},
      py::arg("intercept") = true);
}

void bind_detect(py::module_& m) {
  py::class_<detect::LRModel>(m, "LRModel")
      .def(py::init<>())
      .def_readwrite("w0", &detect::LRModel::w0)
      .def_readwrite("w_div", &detect::LRModel::w_div)
      .def_readwrite("w_pred", &detect::LRModel::w_pred)
      .def_readonly("converged", &detect::LRModel::converged)
      .def_readonly("separation_warning", &detect::LRModel::separation_warning)
      .def_readonly("iterations", &detect::LRModel::iterations)
      .def_readwrite("fitted", &detect::LRModel::fitted);
  py::class_<detect::GNBModel>(m, "GNBModel").def(py::init<>()).def_readonly("priors", &detect::GNBModel::priors);
  py::class_<detect::RFModel>(m, "RFModel").def_readonly("n_trees", &detect::RFModel::n_trees);

  py::class_<detect::EvalReport>(m, "EvalReport")
      .def_readonly("accuracy", &detect::EvalReport::accuracy)
      .def_readonly("precision", &detect::EvalReport::precision)
      .def_readonly("recall", &detect::EvalReport::recall)
      .def_readonly("f1", &detect::EvalReport::f1)
      .def_readonly("specificity", &detect::EvalReport::specificity)
      .def_readonly("auc_roc", &detect::EvalReport::auc_roc)
      .def_readonly("auc_pr", &detect::EvalReport::auc_pr)
      .def_readonly("tp", &detect::EvalReport::tp)
      .def_readonly("fp", &detect::EvalReport::fp)
      .def_readonly("fn", &detect::EvalReport::fn)
      .def_readonly("tn", &detect::EvalReport::tn);

  m.def(
      "stratified_split",
      [](const std::vector<FeatureRow>& rows, double test_frac, std::uint64_t seed) {
        auto s = detect::stratified_split(rows, test_frac, seed);
        return std::make_pair(std::move(s.train), std::move(s.test));
      },
      py::arg("rows"), py::arg("test_frac") = detect::kDefaultTestFraction, py::arg("seed"));
  m.def(
      "fit_logistic", [](const std::vector<FeatureRow>& rows) { return detect::fit_logistic(rows); },
      py::arg("train"));
  m.def(
      "fit_gnb", [](const std::vector<FeatureRow>& rows) { return detect::fit_gnb(rows); }, py::arg("train"));
  m.def(
      "fit_forest",
      [](const std::vector<FeatureRow>& rows, std::uint64_t seed, int n_trees) {
        return detect::fit_forest(rows, seed, {n_trees, 0});
      },
      py::arg("train"), py::arg("seed"), py::arg("n_trees") = detect::kDefaultTrees);
  m.def(
      "predict_proba", [](const detect::Model& model, const FeatureRow& row) { return detect::predict_proba(model, row); },
      py::arg("model"), py::arg("row"));
  m.def(
      "evaluate",
      [](const detect::Model& model, const std::vector<FeatureRow>& test, bool human_positive) {
        return detect::evaluate(model, test, human_positive);
      },
      py::arg("model"), py::arg("test"), py::arg("human_positive") = false);
}

void bind_posanal(py::module_& m) {
  py::class_<PosEntry>(m, "PosEntry")
      .def_readonly("tag", &PosEntry::tag)
      .def_property_readonly("cls", [](const PosEntry& e) { return std::string(to_string(e.cls)); })
      .def_readonly("token_count", &PosEntry::token_count)
      .def_readonly("frequency", &PosEntry::frequency)
      .def_readonly("exclusion_rate", &PosEntry::exclusion_rate);
  py::class_<PosProfile>(m, "PosProfile")
      .def_readonly("entries", &PosProfile::entries)
      .def_readonly("content_mean", &PosProfile::content_mean)
      .def_readonly("function_mean", &PosProfile::function_mean)
      .def_readonly("asymmetry_ratio", &PosProfile::asymmetry_ratio)
      .def_readonly("degenerate", &PosProfile::degenerate)
      .def("token_weighted_rate", &PosProfile::token_weighted_rate);
  m.def("pos_exclusion_profile", &pos_exclusion_profile, py::arg("corpus"), py::arg("policy"),
        py::arg("filter") = DocFilter{});
  m.def(
      "frequency_exclusion_correlation",
      [](const PosProfile& p) {
        const auto c = frequency_exclusion_correlation(p);
        return std::make_pair(c.r, c.p);
      },
      py::arg("profile"));
}

}  // namespace

PYBIND11_MODULE(_blindspot, m) {
  m.doc() = "Truncation blind-spot analysis: exclusion rates, detection features and classifiers";
  py::register_exception<Error>(m, "BlindspotError", PyExc_ValueError);

  bind_events(m);
  bind_synth(m);
  bind_truncation(m);
  bind_metrics(m);
  bind_stats(m);
  bind_detect(m);
  bind_posanal(m);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the blindspot command line; returns (exit_code, stdout, stderr).");
  m.attr("__version__") = cli::version();
}
