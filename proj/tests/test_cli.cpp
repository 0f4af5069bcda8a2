#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "heavycomb/cli/commands.hpp"
#include "heavycomb/cli/csv_io.hpp"
#include "heavycomb/closed_testing.hpp"
#include "heavycomb/combine.hpp"

using namespace heavycomb;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("heavycomb_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::ofstream(p) << text;
    return p.string();
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    for (auto f : cli::split_fields(line)) row.emplace_back(f);
    rows.push_back(row);
  }
  return rows;
}

double num(const std::string& s) {
  double v = 0;
  REQUIRE(cli::parse_double(s, v));
  return v;
}

}  // namespace

TEST_CASE("combine examples") {
  TempDir dir;
  const auto in = dir.write("a.csv", "g1,0.5,0.5\n");
  const auto r = run({"combine", "-i", in, "--method", "standard", "--dist", "cauchy"});
  REQUIRE(r.code == 0);
  const auto rows = parse_csv(r.out);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"group_id", "n", "statistic", "combined_p"});
  CHECK(rows[1][0] == "g1");
  CHECK(num(rows[1][3]) == 1.0);

  const auto single = dir.write("b.csv", "g1,0.05\n");
  for (std::string method : {"standard", "average", "bonferroni", "fisher"}) {
    const auto s = run({"combine", "-i", single, "--method", method});
    REQUIRE(s.code == 0);
    CHECK(num(parse_csv(s.out)[1][3]) == doctest::Approx(0.05).epsilon(1e-12));
  }
  const auto w = run({"combine", "-i", single, "--method", "weighted", "--weights", "1"});
  REQUIRE(w.code == 0);
  CHECK(num(parse_csv(w.out)[1][3]) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("combine golden groups match library calls bit for bit") {
  TempDir dir;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::ostringstream text;
  std::vector<Eigen::VectorXd> groups;
  text << "gene,p1\n";
  for (int g = 0; g < 20; ++g) {
    const int n = 1 + g % 7;
    Eigen::VectorXd p(n);
    text << "gene" << g;
    for (auto& v : p) {
      v = std::max(1e-15, std::pow(u(rng), 3.0));
      text << ',' << cli::format_double(v);
    }
    text << '\n';
    groups.push_back(p);
  }
  const auto in = dir.write("golden.csv", text.str());
  for (std::string dist : {"cauchy", "levy", "pareto:1.5", "trunc_t:1:0.9"}) {
    const auto r = run({"combine", "-i", in, "--dist", dist, "--alpha", "0.05"});
    REQUIRE(r.code == 0);
    const auto rows = parse_csv(r.out);
    REQUIRE(rows.size() == 21);
    const auto method = CombinationMethod::standard(parse_distribution(dist));
    for (int g = 0; g < 20; ++g) {
      const auto expect = method.apply(groups[static_cast<std::size_t>(g)]);
      const auto& row = rows[static_cast<std::size_t>(g) + 1];
      CHECK(row[0] == "gene" + std::to_string(g));
      CHECK(num(row[1]) == groups[static_cast<std::size_t>(g)].size());
      CHECK(num(row[2]) == expect.statistic);
      CHECK(num(row[3]) == expect.combined_p);
      const bool rej = DecisionRule(method, static_cast<int>(groups[static_cast<std::size_t>(g)].size()), 0.05)
                           .rejects(groups[static_cast<std::size_t>(g)]);
      CHECK(row[4] == (rej ? "true" : "false"));
    }
  }
}

TEST_CASE("closed-test") {
  TempDir dir;
  const auto one = dir.write("one.csv", "g,0.03\n");
  const auto r = run({"closed-test", "-i", one, "--alpha", "0.05"});
  REQUIRE(r.code == 0);
  auto rows = parse_csv(r.out);
  CHECK(rows[0] == std::vector<std::string>{"group_id", "index", "p", "adjusted_p", "rejected"});
  CHECK(rows[1][4] == "true");

  const Eigen::VectorXd p = (Eigen::VectorXd(5) << 0.004, 0.2, 0.011, 0.03, 0.6).finished();
  std::string line = "g5";
  for (double v : p) line += "," + cli::format_double(v);
  const auto five = dir.write("five.csv", line + "\n");
  const auto c = run({"closed-test", "-i", five, "--dist", "cauchy", "--alpha", "0.05"});
  REQUIRE(c.code == 0);
  rows = parse_csv(c.out);
  REQUIRE(rows.size() == 6);
  const auto oracle = closed_test_bruteforce(p, HeavyTailDistribution::cauchy(), 0.05);
  for (int i = 0; i < 5; ++i) {
    CHECK(num(rows[i + 1][3]) == doctest::Approx(oracle.adjusted_p[i]).epsilon(1e-12));
    CHECK(rows[i + 1][4] == (oracle.rejected[i] ? "true" : "false"));
  }

  const auto empty = dir.write("empty.csv", "g1,0.1\ng2\n");
  const auto e = run({"closed-test", "-i", empty});
  CHECK(e.code == 1);
  CHECK(e.err.find("line 2") != std::string::npos);
}

TEST_CASE("adjust-bh") {
  TempDir dir;
  const auto in = dir.write("bh.csv", "a,0.01\nb,0.02\nc,0.03\nd,0.04\n");
  const auto r = run({"adjust-bh", "-i", in, "--q", "0.05,0.2"});
  REQUIRE(r.code == 0);
  const auto rows = parse_csv(r.out);
  CHECK(rows[0] == std::vector<std::string>{"group_id", "p", "adjusted_p", "discovered_q0.05", "discovered_q0.2"});
  for (int i = 1; i <= 4; ++i) {
    CHECK(num(rows[i][2]) == doctest::Approx(0.04).epsilon(1e-15));
    CHECK(rows[i][3] == "true");
  }
  const auto single = run({"adjust-bh", "-i", dir.write("s.csv", "a,0.3\n")});
  CHECK(num(parse_csv(single.out)[1][2]) == 0.3);
  const auto ones = run({"adjust-bh", "-i", dir.write("o.csv", "a,1\nb,1\n")});
  const auto one_rows = parse_csv(ones.out);
  REQUIRE(one_rows.size() == 3);
  CHECK(one_rows[1][3] == "false");
  CHECK(one_rows[2][3] == "false");

  // Chains from a combine table through its combined_p column.
  const auto groups = dir.write("g.csv", "g1,0.001,0.2\ng2,0.5,0.6\ng3,0.02,0.03\n");
  const auto combined = dir.file("combined.csv");
  REQUIRE(run({"--output", combined, "combine", "-i", groups}).code == 0);
  const auto chained = run({"adjust-bh", "-i", combined});
  REQUIRE(chained.code == 0);
  CHECK(parse_csv(chained.out).size() == 4);
}

TEST_CASE("validation errors name the line and exit 1") {
  TempDir dir;
  const auto bad = dir.write("bad.csv", "g1,0.1,0.2\ng2,0.1,abc\n");
  const auto r = run({"combine", "-i", bad});
  CHECK(r.code == 1);
  CHECK(r.err.find("line 2") != std::string::npos);
  const auto range = dir.write("range.csv", "g1,0.1\n\ng2,1.5\n");
  const auto q = run({"combine", "-i", range});
  CHECK(q.code == 1);
  CHECK(q.err.find("line 3") != std::string::npos);
  const auto zero = run({"combine", "-i", dir.write("z.csv", "g1,0\n")});
  CHECK(zero.code == 1);
  const auto shape = run({"combine", "-i", dir.write("w.csv", "g1,0.1,0.2\n"), "--method", "weighted", "--weights", "1"});
  CHECK(shape.code == 1);
}

TEST_CASE("usage and config errors exit 2") {
  TempDir dir;
  const auto in = dir.write("a.csv", "g1,0.5\n");
  CHECK(run({"combine", "-i", in, "--dist", "nonsense"}).code == 2);
  CHECK(run({"combine", "-i", in, "--method", "unknown"}).code == 2);
  CHECK(run({"combine", "-i", in, "--method", "average", "--dist", "levy"}).code == 2);
  CHECK(run({"--bogus"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"combine", "-i", dir.file("missing.csv")}).code == 2);
  CHECK(run({"--format", "xml", "combine", "-i", in}).code == 2);

  const auto zero = dir.write("zero.json", R"({"family": "normal", "n": 2, "rho": 0, "methods": ["bonferroni"],
    "alpha": [0.05], "replications": 0})");
  CHECK(run({"simulate", "--config", zero}).code == 2);
  const auto rho = dir.write("rho.json", R"({"family": "normal", "n": 5, "rho": -0.3, "methods": ["bonferroni"],
    "alpha": [0.05], "replications": 10})");
  const auto r = run({"simulate", "--config", rho});
  CHECK(r.code == 2);
  CHECK(r.err.find("-1/(n-1)") != std::string::npos);
  const auto unknown = dir.write("k.json", R"({"family": "normal", "n": 2, "rho": 0, "methods": ["bonferroni"],
    "alpha": [0.05], "replications": 10, "colour": 1})");
  CHECK(run({"simulate", "--config", unknown}).code == 2);
  CHECK(run({"simulate", "--preset", "no_such_preset"}).code == 2);
}

TEST_CASE("numerical failures exit 3") {
  TempDir dir;
  const auto cfg = dir.write("e.json", R"({"family": "normal", "n": 2, "rho": 0, "dist": "cauchy",
    "alpha": [1e-9], "replications": 10})");
  const auto r = run({"equiv-ratio", "--config", cfg});
  CHECK(r.code == 3);
  CHECK(r.err.find("insufficient_events") != std::string::npos);
}

TEST_CASE("help and version") {
  const auto h = run({"--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("HEAVYCOMB_WORKERS") != std::string::npos);
  CHECK(run({"--version"}).code == 0);
}

TEST_CASE("simulate writes CSV, JSON and a manifest") {
  TempDir dir;
  const auto cfg = dir.write("s.json", R"({"command": "simulate", "family": "t", "nu": 2, "n": 3,
    "rho": [0, 0.5], "methods": [{"method": "standard", "dist": "cauchy"}, "bonferroni"],
    "alpha": [0.05, 0.01], "replications": 3000, "seed": 5})");
  const auto csv = dir.file("out.csv");
  const auto r = run({"--output", csv, "--workers", "2", "simulate", "--config", cfg});
  REQUIRE(r.code == 0);
  const auto rows = parse_csv(slurp(csv));
  REQUIRE(rows.size() == 1 + 2 * 2 * 2);
  CHECK(rows[0].back() == "std_error");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(num(rows[i][11]) == num(rows[i][9]) / num(rows[i][10]));
  }
  const auto manifest = nlohmann::json::parse(slurp(csv + ".manifest.json"));
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["workers"] == 2);
  CHECK(manifest["config"]["replications"] == 3000);
  CHECK(manifest.contains("version"));
  CHECK(manifest["runtime_seconds"].get<double>() >= 0.0);

  // Seed on the command line overrides the config; results are reproducible.
  const auto a = run({"--seed", "9", "simulate", "--config", cfg});
  const auto b = run({"--seed", "9", "--workers", "3", "simulate", "--config", cfg});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out != slurp(csv));

  const auto js = run({"--format", "json", "simulate", "--config", cfg, "--replications", "500"});
  REQUIRE(js.code == 0);
  const auto doc = nlohmann::json::parse(js.out);
  REQUIRE(doc.is_array());
  CHECK(doc.size() == 8);
  CHECK(doc[0]["replications"] == 500);
  CHECK(doc[0]["family"] == "t");
}

TEST_CASE("tail-dep, calibrate-minp and presets") {
  const auto t = run({"tail-dep", "--nu", "2", "--rho", "0.9"});
  REQUIRE(t.code == 0);
  CHECK(num(parse_csv(t.out)[1][2]) == doctest::Approx(0.72).epsilon(0.01));
  const auto p = run({"tail-dep", "--preset", "table2_lambda"});
  REQUIRE(p.code == 0);
  CHECK(parse_csv(p.out).size() == 5);

  const auto m = run({"calibrate-minp", "--preset", "tableS3", "--replications", "2000"});
  REQUIRE(m.code == 0);
  CHECK(parse_csv(m.out)[0][8] == "cutoff_ratio");
  for (std::string preset : {"table2a", "tableS1", "tableS2", "fig3", "power_gap"}) {
    CAPTURE(preset);
    const auto command = preset == "fig3" ? "equiv-ratio" : "simulate";
    const auto r = run({"--workers", "2", command, "--preset", preset, "--replications", "200"});
    if (preset == "fig3") {
      CHECK((r.code == 0 || r.code == 3));
    } else {
      CHECK(r.code == 0);
    }
  }
}
