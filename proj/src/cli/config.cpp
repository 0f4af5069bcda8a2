#include "heavycomb/cli/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "heavycomb/errors.hpp"

#ifndef HEAVYCOMB_PRESET_DIR
#define HEAVYCOMB_PRESET_DIR "presets"
#endif

namespace heavycomb::cli {

namespace {

using json = nlohmann::json;

const std::set<std::string, std::less<>> kKeys = {
    "command", "description", "family", "n", "rho", "nu", "sided", "signal", "mu", "mean",
    "methods", "alpha", "replications", "seed", "workers", "dist", "weights"};

[[noreturn]] void config_error(const std::string& what) { fail(ErrorCode::config, what); }

std::vector<double> number_list(const json& v, const char* key) {
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array() && !v.empty()) {
    for (const auto& e : v) {
      if (!e.is_number()) config_error(std::string(key) + ": expected numbers");
      out.push_back(e.get<double>());
    }
  } else {
    config_error(std::string(key) + ": expected a number or a nonempty array of numbers");
  }
  return out;
}

const json& require(const json& doc, const char* key) {
  if (!doc.contains(key)) config_error(std::string("missing required key '") + key + "'");
  return doc.at(key);
}

HeavyTailDistribution dist_from(const json& v, const char* key) {
  if (!v.is_string()) config_error(std::string(key) + ": expected a distribution string");
  return parse_distribution(v.get<std::string>());
}

Eigen::VectorXd vector_from(const json& v, const char* key) {
  const auto values = number_list(v, key);
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

CombinationMethod method_from(const json& v) {
  if (v.is_string()) {
    const auto name = v.get<std::string>();
    if (name == "bonferroni") return CombinationMethod::bonferroni();
    if (name == "fisher") return CombinationMethod::fisher();
    config_error("method '" + name + "' needs an object with its parameters");
  }
  if (!v.is_object()) config_error("methods: expected strings or objects");
  for (const auto& [key, _] : v.items()) {
    if (key != "method" && key != "dist" && key != "weights" && key != "cutoff") {
      config_error("methods: unknown key '" + key + "'");
    }
  }
  const auto& kind = require(v, "method");
  if (!kind.is_string()) config_error("methods: 'method' must be a string");
  const auto name = kind.get<std::string>();
  Eigen::VectorXd weights;
  if (v.contains("weights")) weights = vector_from(v.at("weights"), "weights");
  if (name == "standard") return CombinationMethod::standard(dist_from(require(v, "dist"), "dist"));
  if (name == "average") return CombinationMethod::average(dist_from(require(v, "dist"), "dist"));
  if (name == "weighted") {
    return CombinationMethod::weighted(dist_from(require(v, "dist"), "dist"), weights);
  }
  if (name == "bonferroni") return CombinationMethod::bonferroni(weights);
  if (name == "fisher") return CombinationMethod::fisher();
  if (name == "minp") {
    const auto& c = require(v, "cutoff");
    if (!c.is_number()) config_error("minp: cutoff must be a number");
    return CombinationMethod::minp(c.get<double>());
  }
  config_error("unknown method '" + name + "'");
}

ExperimentSpec parse_unchecked(const json& doc, std::string_view command) {
  if (!doc.is_object()) config_error("config must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!kKeys.contains(key)) config_error("unknown config key '" + key + "'");
  }
  if (doc.contains("command") && doc.at("command").get<std::string>() != command) {
    config_error("config is for '" + doc.at("command").get<std::string>() + "', not '" +
                 std::string(command) + "'");
  }

  ExperimentSpec spec;
  if (doc.contains("nu")) spec.nus = number_list(doc.at("nu"), "nu");
  if (command == "tail-dep") {
    if (spec.nus.empty()) config_error("missing required key 'nu'");
    spec.rhos = number_list(require(doc, "rho"), "rho");
    return spec;
  }

  const auto family = require(doc, "family").get<std::string>();
  if (family == "normal") spec.family = StatisticFamily::normal;
  else if (family == "t" || family == "student_t") spec.family = StatisticFamily::student_t;
  else config_error("family must be 'normal' or 't', got '" + family + "'");
  if (spec.family == StatisticFamily::student_t && spec.nus.size() != 1) {
    config_error("t family requires a single 'nu'");
  }

  const auto& n = require(doc, "n");
  if (!n.is_number_integer() || n.get<std::int64_t>() < 1) config_error("n must be a positive integer");
  spec.n = n.get<int>();
  spec.rhos = number_list(require(doc, "rho"), "rho");

  if (doc.contains("sided")) {
    const auto sided = doc.at("sided").get<std::string>();
    if (sided == "one" || sided == "one_sided") spec.sided = Sidedness::one_sided;
    else if (sided == "two" || sided == "two_sided") spec.sided = Sidedness::two_sided;
    else config_error("sided must be 'one' or 'two'");
  }

  if (doc.contains("mean")) {
    if (doc.contains("signal") || doc.contains("mu")) config_error("'mean' excludes 'signal'/'mu'");
    spec.signal = Signal::explicit_mean;
    spec.mean = vector_from(doc.at("mean"), "mean");
    if (spec.mean.size() != spec.n) config_error("mean must have n entries");
  } else if (doc.contains("signal")) {
    const auto signal = doc.at("signal").get<std::string>();
    if (signal == "dense") spec.signal = Signal::dense;
    else if (signal == "sparse") spec.signal = Signal::sparse;
    else if (signal == "none") spec.signal = Signal::none;
    else config_error("signal must be 'none', 'dense' or 'sparse'");
    if (spec.signal != Signal::none) spec.mus = number_list(require(doc, "mu"), "mu");
  } else if (doc.contains("mu")) {
    config_error("'mu' requires 'signal'");
  }

  spec.alphas = number_list(require(doc, "alpha"), "alpha");
  for (double a : spec.alphas) {
    if (!(a > 0 && a < 1)) config_error("alpha must lie in (0, 1)");
  }
  const auto& reps = require(doc, "replications");
  if (!reps.is_number() || reps.get<double>() < 1 || reps.get<double>() != std::floor(reps.get<double>())) {
    config_error("replications must be a positive integer");
  }
  spec.replications = static_cast<std::int64_t>(reps.get<double>());
  if (doc.contains("seed")) {
    const auto& s = doc.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      config_error("seed must be a nonnegative integer");
    }
    spec.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("workers")) {
    const int w = doc.at("workers").get<int>();
    if (w < 1) config_error("workers must be >= 1");
    spec.workers = w;
  }

  if (command == "simulate") {
    const auto& methods = require(doc, "methods");
    if (!methods.is_array() || methods.empty()) config_error("methods must be a nonempty array");
    for (const auto& m : methods) spec.methods.push_back(method_from(m));
    for (const auto& m : spec.methods) m.validate(spec.n);
  } else if (doc.contains("methods")) {
    config_error("'methods' is only valid for simulate");
  }
  if (command == "equiv-ratio") {
    spec.distribution = dist_from(require(doc, "dist"), "dist");
    if (doc.contains("weights")) spec.weights = vector_from(doc.at("weights"), "weights");
    if (spec.weights.size() != 0 && spec.weights.size() != spec.n) config_error("weights must have n entries");
  } else if (doc.contains("dist") || doc.contains("weights")) {
    config_error("'dist'/'weights' are only valid for equiv-ratio");
  }

  for (double rho : spec.rhos) {
    for (double mu : spec.mus) spec.model(rho, mu).validate();
  }
  return spec;
}

}  // namespace

ExchangeableModel ExperimentSpec::model(double rho, double mu) const {
  ExchangeableModel m;
  m.family = family;
  m.n = n;
  m.rho = rho;
  m.nu = nu();
  m.sided = sided;
  switch (signal) {
    case Signal::none: break;
    case Signal::dense: m.mean = Eigen::VectorXd::Constant(n, mu); break;
    case Signal::sparse:
      m.mean = Eigen::VectorXd::Zero(n);
      m.mean[n - 1] = mu;
      break;
    case Signal::explicit_mean: m.mean = mean; break;
  }
  return m;
}

ExperimentSpec parse_experiment(const json& doc, std::string_view command) {
  try {
    return parse_unchecked(doc, command);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    config_error(e.what());
  } catch (const json::exception& e) {
    config_error(std::string("invalid config value: ") + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file '" + path + "'");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    config_error("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

std::string preset_directory() {
  if (const char* env = std::getenv("HEAVYCOMB_PRESET_DIR"); env != nullptr && *env != '\0') return env;
  return HEAVYCOMB_PRESET_DIR;
}

std::string preset_path(const std::string& name) {
  if (name.empty() || name.find_first_of("/\\.") != std::string::npos) {
    config_error("invalid preset name '" + name + "'");
  }
  return preset_directory() + "/" + name + ".json";
}

std::string_view family_label(StatisticFamily family) noexcept {
  return family == StatisticFamily::normal ? "normal" : "t";
}

std::string_view sided_label(Sidedness sided) noexcept {
  return sided == Sidedness::one_sided ? "one" : "two";
}

std::string_view signal_label(Signal signal) noexcept {
  switch (signal) {
    case Signal::none: return "none";
    case Signal::dense: return "dense";
    case Signal::sparse: return "sparse";
    case Signal::explicit_mean: return "mean";
  }
  return "?";
}

}  // namespace heavycomb::cli
