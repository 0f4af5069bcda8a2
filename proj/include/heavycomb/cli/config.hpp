#pragma once

// Experiment configuration documents (flat JSON) and the shipped presets.

#include <Eigen/Core>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "heavycomb/combine.hpp"
#include "heavycomb/simulate.hpp"

namespace heavycomb::cli {

enum class Signal { none, dense, sparse, explicit_mean };

struct ExperimentSpec {
  StatisticFamily family = StatisticFamily::normal;
  int n = 0;
  std::vector<double> rhos;
  std::vector<double> nus;
  Sidedness sided = Sidedness::one_sided;
  Signal signal = Signal::none;
  std::vector<double> mus{0.0};
  Eigen::VectorXd mean;
  std::vector<CombinationMethod> methods;
  std::vector<double> alphas;
  std::int64_t replications = 0;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<HeavyTailDistribution> distribution;
  Eigen::VectorXd weights;

  double nu() const { return nus.empty() ? 1.0 : nus.front(); }
  /// The model at one grid point; signal templates expand mu into a mean vector.
  ExchangeableModel model(double rho, double mu) const;
};

/// Parses a config document for `command` (simulate, calibrate-minp,
/// equiv-ratio, tail-dep). Anything invalid throws ErrorCode::config.
ExperimentSpec parse_experiment(const nlohmann::json& doc, std::string_view command);

nlohmann::json read_json_file(const std::string& path);
std::string preset_directory();
/// Path of a shipped preset, e.g. "table2a" -> <presets>/table2a.json.
std::string preset_path(const std::string& name);

std::string_view family_label(StatisticFamily family) noexcept;
std::string_view sided_label(Sidedness sided) noexcept;
std::string_view signal_label(Signal signal) noexcept;

}  // namespace heavycomb::cli
