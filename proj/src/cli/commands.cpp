#include "heavycomb/cli/commands.hpp"

#include <CLI11.hpp>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "heavycomb/cli/config.hpp"
#include "heavycomb/cli/csv_io.hpp"
#include "heavycomb/closed_testing.hpp"
#include "heavycomb/combine.hpp"
#include "heavycomb/simulate.hpp"

#ifndef HEAVYCOMB_VERSION
#define HEAVYCOMB_VERSION "0.0.0"
#endif

namespace heavycomb::cli {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kDefaultSeed = 1;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string output = "-";
  std::string manifest;
  std::string format = "csv";
};

struct GroupOptions {
  std::string input = "-";
  std::string method = "standard";
  std::string dist = "cauchy";
  std::string weights;
  std::optional<double> alpha;
  std::vector<double> fdr_levels{0.05};
};

struct ExperimentOptions {
  std::string config;
  std::string preset;
  std::optional<std::int64_t> replications;
  std::vector<double> nus;
  std::vector<double> rhos;
};

// Everything a command reports back for the manifest.
struct RunInfo {
  json config = json::object();
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

Format format_of(const Globals& g) { return g.format == "json" ? Format::json : Format::csv; }

std::string short_number(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

// Opens the p-value input, "-" meaning stdin.
class Input {
 public:
  explicit Input(const std::string& path) {
    if (path != "-") {
      file_.open(path);
      if (!file_) fail(ErrorCode::usage, "cannot open input file '" + path + "'");
    }
    stream_ = path == "-" ? &std::cin : &file_;
  }
  std::istream& stream() { return *stream_; }

 private:
  std::ifstream file_;
  std::istream* stream_;
};

Eigen::VectorXd parse_weight_list(const std::string& text) {
  std::vector<double> values;
  for (auto field : split_fields(text)) {
    double v = 0.0;
    if (!parse_double(field, v)) fail(ErrorCode::usage, "invalid weight '" + std::string(field) + "'");
    values.push_back(v);
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

CombinationMethod method_from_options(const GroupOptions& o) {
  const Eigen::VectorXd weights = o.weights.empty() ? Eigen::VectorXd() : parse_weight_list(o.weights);
  if (o.method == "standard") return CombinationMethod::standard(parse_distribution(o.dist));
  if (o.method == "average") return CombinationMethod::average(parse_distribution(o.dist));
  if (o.method == "weighted") {
    if (weights.size() == 0) fail(ErrorCode::usage, "--method weighted requires --weights");
    return CombinationMethod::weighted(parse_distribution(o.dist), weights);
  }
  if (o.method == "bonferroni") return CombinationMethod::bonferroni(weights);
  if (o.method == "fisher") return CombinationMethod::fisher();
  fail(ErrorCode::usage, "unknown method '" + o.method + "'");
}

// Re-raises a library error with the offending input line prepended.
template <typename Fn>
auto at_line(std::int64_t line, Fn fn) {
  try {
    return fn();
  } catch (const InsufficientEventsError&) {
    throw;
  } catch (const Error& e) {
    const ErrorCode code = e.code() == ErrorCode::domain || e.code() == ErrorCode::shape
                               ? ErrorCode::validation
                               : e.code();
    fail(code, "line " + std::to_string(line) + ": " + e.what());
  }
}

RunInfo cmd_combine(const GroupOptions& o, const Globals& g, std::ostream& out) {
  const CombinationMethod method = method_from_options(o);
  if (method.kind != MethodKind::standard && method.kind != MethodKind::weighted &&
      method.kind != MethodKind::average) {
    // Distribution ignored; still reject malformed specs.
    parse_distribution(o.dist);
  }
  if (o.alpha && !(*o.alpha > 0 && *o.alpha < 1)) fail(ErrorCode::usage, "--alpha must lie in (0, 1)");
  if (method.kind == MethodKind::average) method.validate(1);

  Input input(o.input);
  GroupReader reader(input.stream());
  std::vector<std::string> columns{"group_id", "n", "statistic", "combined_p"};
  if (o.alpha) columns.emplace_back("reject");
  TableWriter table(out, format_of(g), columns);
  PValueRecord rec;
  while (reader.next(rec)) {
    const int n = static_cast<int>(rec.p_values.size());
    at_line(rec.line, [&] {
      const CombinedResult r = method.apply(rec.p_values);
      std::vector<Cell> row{rec.group_id, std::int64_t{n}, r.statistic, r.combined_p};
      if (o.alpha) row.emplace_back(DecisionRule(method, n, *o.alpha).rejects(rec.p_values));
      table.row(row);
      return 0;
    });
  }
  table.finish();

  RunInfo info;
  info.config = {{"input", o.input}, {"method", method.label()}};
  if (!o.weights.empty()) info.config["weights"] = o.weights;
  if (o.alpha) info.config["alpha"] = *o.alpha;
  return info;
}

RunInfo cmd_closed_test(const GroupOptions& o, const Globals& g, std::ostream& out) {
  const HeavyTailDistribution d = parse_distribution(o.dist);
  const double alpha = o.alpha.value_or(0.05);
  if (!(alpha > 0 && alpha < 1)) fail(ErrorCode::usage, "--alpha must lie in (0, 1)");
  Input input(o.input);
  GroupReader reader(input.stream());
  TableWriter table(out, format_of(g), {"group_id", "index", "p", "adjusted_p", "rejected"});
  PValueRecord rec;
  while (reader.next(rec)) {
    const ClosedTestingResult r = at_line(rec.line, [&] { return closed_test_shortcut(rec.p_values, d, alpha); });
    for (Eigen::Index i = 0; i < rec.p_values.size(); ++i) {
      table.row({rec.group_id, std::int64_t{i + 1}, rec.p_values[i], r.adjusted_p[i], bool{r.rejected[i]}});
    }
  }
  table.finish();
  RunInfo info;
  info.config = {{"input", o.input}, {"dist", d.spec()}, {"alpha", alpha}};
  return info;
}

RunInfo cmd_adjust_bh(const GroupOptions& o, const Globals& g, std::ostream& out) {
  for (double q : o.fdr_levels) {
    if (!(q > 0 && q < 1)) fail(ErrorCode::usage, "--q must lie in (0, 1)");
  }
  Input input(o.input);
  std::vector<std::string> groups;
  std::vector<double> values;
  std::string line;
  std::int64_t line_no = 0;
  std::optional<std::size_t> p_column;
  bool first = true;
  while (std::getline(input.stream(), line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    const std::string where = "line " + std::to_string(line_no);
    double v = 0.0;
    if (first) {
      first = false;
      if (fields.size() >= 2 && !parse_double(fields[1], v)) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
          if (fields[i] == "combined_p" || fields[i] == "p") p_column = i;
        }
        if (!p_column) fail(ErrorCode::validation, where + ": header has no 'combined_p' or 'p' column");
        continue;
      }
    }
    const std::size_t col = p_column.value_or(1);
    if (!p_column && fields.size() != 2) {
      fail(ErrorCode::validation, where + ": expected 'group_id,p'");
    }
    if (fields.size() <= col || fields[0].empty()) fail(ErrorCode::validation, where + ": missing fields");
    if (!parse_double(fields[col], v)) {
      fail(ErrorCode::validation, where + ": malformed p-value '" + std::string(fields[col]) + "'");
    }
    if (std::isnan(v) || !(v > 0 && v <= 1)) {
      fail(ErrorCode::validation, where + ": p-value " + std::string(fields[col]) + " outside (0, 1]");
    }
    groups.emplace_back(fields[0]);
    values.push_back(v);
  }
  if (values.empty()) fail(ErrorCode::validation, "no p-values in input");
  const Eigen::Map<const Eigen::VectorXd> p(values.data(), static_cast<Eigen::Index>(values.size()));
  const Eigen::VectorXd adjusted = bh_adjust(p);

  std::vector<std::string> columns{"group_id", "p", "adjusted_p"};
  for (double q : o.fdr_levels) columns.push_back("discovered_q" + short_number(q));
  TableWriter table(out, format_of(g), columns);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    std::vector<Cell> row{groups[i], values[i], adjusted[idx]};
    for (double q : o.fdr_levels) row.emplace_back(adjusted[idx] <= q);
    table.row(row);
  }
  table.finish();
  RunInfo info;
  info.config = {{"input", o.input}, {"q", o.fdr_levels}};
  return info;
}

nlohmann::json load_document(const ExperimentOptions& o, bool optional = false) {
  if (!o.config.empty() && !o.preset.empty()) fail(ErrorCode::usage, "use either --config or --preset");
  if (!o.config.empty()) return read_json_file(o.config);
  if (!o.preset.empty()) return read_json_file(preset_path(o.preset));
  if (optional) return nlohmann::json::object();
  fail(ErrorCode::usage, "--config or --preset is required");
}

struct Resolved {
  ExperimentSpec spec;
  std::uint64_t seed;
  int workers;
  json echo;
};

Resolved resolve(const ExperimentOptions& o, const Globals& g, std::string_view command) {
  nlohmann::json doc = load_document(o);
  if (o.replications) doc["replications"] = *o.replications;
  Resolved r{parse_experiment(doc, command), kDefaultSeed, 1, json::parse(doc.dump())};
  r.seed = g.seed.value_or(r.spec.seed.value_or(kDefaultSeed));
  r.workers = g.workers.value_or(r.spec.workers.value_or(default_worker_count()));
  if (r.workers < 1) fail(ErrorCode::usage, "--workers must be >= 1");
  r.echo["seed"] = r.seed;
  r.echo.erase("workers");
  return r;
}

RunInfo cmd_simulate(const ExperimentOptions& o, const Globals& g, std::ostream& out) {
  const Resolved r = resolve(o, g, "simulate");
  const auto& spec = r.spec;
  TableWriter table(out, format_of(g),
                    {"family", "n", "rho", "nu", "sided", "signal", "mu", "method", "alpha",
                     "rejections", "replications", "estimate", "std_error"});
  for (double rho : spec.rhos) {
    for (double mu : spec.mus) {
      ExperimentConfig config;
      config.model = spec.model(rho, mu);
      config.methods = spec.methods;
      config.alphas = spec.alphas;
      config.replications = spec.replications;
      config.seed = r.seed;
      config.workers = r.workers;
      const ExperimentReport report = estimate_rejection_rate(config);
      for (const auto& row : report.rows) {
        table.row({std::string(family_label(spec.family)), std::int64_t{spec.n}, rho, spec.nu(),
                   std::string(sided_label(spec.sided)), std::string(signal_label(spec.signal)), mu,
                   row.method, row.alpha, row.rejections, row.replications, row.estimate,
                   row.std_error});
      }
    }
  }
  table.finish();
  return {r.echo, r.seed, r.workers};
}

RunInfo cmd_calibrate_minp(const ExperimentOptions& o, const Globals& g, std::ostream& out,
                           std::ostream& err) {
  const Resolved r = resolve(o, g, "calibrate-minp");
  const auto& spec = r.spec;
  TableWriter table(out, format_of(g),
                    {"family", "n", "rho", "nu", "sided", "alpha", "replications", "cutoff",
                     "cutoff_ratio", "unstable"});
  for (double rho : spec.rhos) {
    for (double alpha : spec.alphas) {
      const auto c = calibrate_minp(spec.model(rho, 0.0), alpha, spec.replications, r.seed, r.workers);
      if (c.unstable) err << "warning: rho=" << short_number(rho) << ": " << c.warning << '\n';
      table.row({std::string(family_label(spec.family)), std::int64_t{spec.n}, rho, spec.nu(),
                 std::string(sided_label(spec.sided)), alpha, c.replications, c.cutoff,
                 c.cutoff_ratio, c.unstable});
    }
  }
  table.finish();
  return {r.echo, r.seed, r.workers};
}

RunInfo cmd_equiv_ratio(const ExperimentOptions& o, const Globals& g, std::ostream& out) {
  const Resolved r = resolve(o, g, "equiv-ratio");
  const auto& spec = r.spec;
  TableWriter table(out, format_of(g),
                    {"family", "n", "rho", "mu", "dist", "alpha", "combination_rejections",
                     "bonferroni_rejections", "disagreements", "replications", "ratio", "std_error"});
  for (double rho : spec.rhos) {
    for (double mu : spec.mus) {
      ExperimentConfig config;
      config.model = spec.model(rho, mu);
      config.alphas = spec.alphas;
      config.replications = spec.replications;
      config.seed = r.seed;
      config.workers = r.workers;
      const auto report = estimate_equivalence_ratio(config, *spec.distribution, spec.weights);
      for (const auto& row : report.rows) {
        table.row({std::string(family_label(spec.family)), std::int64_t{spec.n}, rho, mu,
                   spec.distribution->spec(), row.alpha, row.combination_rejections,
                   row.bonferroni_rejections, row.disagreements, row.replications, row.ratio,
                   row.std_error});
      }
    }
  }
  table.finish();
  return {r.echo, r.seed, r.workers};
}

RunInfo cmd_tail_dep(const ExperimentOptions& o, const Globals& g, std::ostream& out) {
  nlohmann::json doc = load_document(o, true);
  if (!o.nus.empty()) doc["nu"] = o.nus;
  if (!o.rhos.empty()) doc["rho"] = o.rhos;
  const ExperimentSpec spec = parse_experiment(doc, "tail-dep");
  TableWriter table(out, format_of(g), {"nu", "rho", "lambda"});
  for (double nu : spec.nus) {
    for (double rho : spec.rhos) table.row({nu, rho, tail_dependence_t(nu, rho)});
  }
  table.finish();
  RunInfo info;
  info.config = json::parse(doc.dump());
  return info;
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::vector<std::string>& args, const RunInfo& info, const Globals& g,
                    double runtime) {
  json m;
  m["command"] = command;
  m["arguments"] = args;
  m["version"] = HEAVYCOMB_VERSION;
  m["config"] = info.config;
  if (info.seed) m["seed"] = *info.seed;
  if (info.workers) m["workers"] = *info.workers;
  m["format"] = g.format;
  m["output"] = g.output;
  m["runtime_seconds"] = runtime;
  std::ofstream file(path);
  if (!file) fail(ErrorCode::usage, "cannot write manifest '" + path + "'");
  file << m.dump(2) << '\n';
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::validation:
    case ErrorCode::domain:
    case ErrorCode::shape: return 1;
    case ErrorCode::config:
    case ErrorCode::usage:
    case ErrorCode::method_misuse:
    case ErrorCode::capacity: return 2;
    case ErrorCode::infinite_quantile:
    case ErrorCode::bracket:
    case ErrorCode::convergence:
    case ErrorCode::insufficient_events: return 3;
  }
  return 3;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heavy-tailed p-value combination tests, closed testing and Monte Carlo experiments",
               "heavycomb"};
  app.set_version_flag("--version", HEAVYCOMB_VERSION);
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "RNG seed for simulation commands (overrides the config)");
  app.add_option("--workers", g.workers, "Worker threads for simulation commands")
      ->envname("HEAVYCOMB_WORKERS")
      ->check(CLI::PositiveNumber);
  app.add_option("--output", g.output, "Output file ('-' for stdout)");
  app.add_option("--manifest", g.manifest,
                 "Manifest path (default <output>.manifest.json when --output is a file)");
  app.add_option("--format", g.format, "Table format")->check(CLI::IsMember({"csv", "json"}));

  GroupOptions go;
  ExperimentOptions eo;

  auto* combine = app.add_subcommand("combine", "Combine the p-values of each input group");
  combine->add_option("-i,--input", go.input, "CSV of group_id,p1,p2,... ('-' for stdin)");
  combine->add_option("--method", go.method, "standard | average | weighted | bonferroni | fisher");
  combine->add_option("--dist", go.dist, "Transform distribution, e.g. cauchy, pareto:1, trunc_t:1:0.9");
  combine->add_option("--weights", go.weights, "Comma-separated weights, one per p-value");
  combine->add_option("--alpha", go.alpha, "Level for the reject column");

  auto* closed = app.add_subcommand("closed-test", "Closed testing of the standard test per group");
  closed->add_option("-i,--input", go.input, "CSV of group_id,p1,p2,... ('-' for stdin)");
  closed->add_option("--dist", go.dist, "Transform distribution");
  closed->add_option("--alpha", go.alpha, "FWER level (default 0.05)");

  auto* bh = app.add_subcommand("adjust-bh", "Benjamini-Hochberg adjustment across groups");
  bh->add_option("-i,--input", go.input, "group_id,p lines or a combine output table");
  bh->add_option("--q", go.fdr_levels, "FDR level(s) for the discovery columns")->delimiter(',');

  auto add_experiment = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", eo.config, "Experiment config (JSON)");
    sub->add_option("--preset", eo.preset, "Shipped preset name (" + preset_directory() + ")");
    return sub;
  };
  auto* simulate = add_experiment("simulate", "Monte Carlo rejection rates (type-I error / power)");
  simulate->add_option("--replications", eo.replications, "Override the config replication count");
  auto* minp = add_experiment("calibrate-minp", "Monte Carlo cutoff for min p under the null");
  minp->add_option("--replications", eo.replications, "Override the config replication count");
  auto* equiv = add_experiment("equiv-ratio", "Disagreement ratio between the weighted and Bonferroni tests");
  equiv->add_option("--replications", eo.replications, "Override the config replication count");
  auto* tail = add_experiment("tail-dep", "Tail dependence coefficient of the bivariate t");
  tail->add_option("--nu", eo.nus, "Degrees of freedom")->delimiter(',');
  tail->add_option("--rho", eo.rhos, "Correlation(s)")->delimiter(',');

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << HEAVYCOMB_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "heavycomb: " << e.what() << '\n';
    return exit_code_for(ErrorCode::usage);
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    std::ofstream file;
    std::ostream* target = &out;
    if (g.output != "-") {
      file.open(g.output);
      if (!file) fail(ErrorCode::usage, "cannot write output '" + g.output + "'");
      target = &file;
    }
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    RunInfo info;
    if (sub == combine) info = cmd_combine(go, g, *target);
    else if (sub == closed) info = cmd_closed_test(go, g, *target);
    else if (sub == bh) info = cmd_adjust_bh(go, g, *target);
    else if (sub == simulate) info = cmd_simulate(eo, g, *target);
    else if (sub == minp) info = cmd_calibrate_minp(eo, g, *target, err);
    else if (sub == equiv) info = cmd_equiv_ratio(eo, g, *target);
    else info = cmd_tail_dep(eo, g, *target);
    target->flush();
    const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string manifest = g.manifest;
    if (manifest.empty() && g.output != "-") manifest = g.output + ".manifest.json";
    if (!manifest.empty()) write_manifest(manifest, name, args, info, g, runtime);
    return 0;
  } catch (const InsufficientEventsError& e) {
    err << "heavycomb: error (insufficient_events): " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const Error& e) {
    err << "heavycomb: error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "heavycomb: error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace heavycomb::cli
