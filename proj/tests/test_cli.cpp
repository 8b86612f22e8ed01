#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "qparity/cli.hpp"

using namespace qparity;
using namespace qparity::cli;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "qparity");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Value after "# key: " in a report.
double report_value(const std::string& text, const std::string& key) {
  const auto pos = text.find("# " + key + ": ");
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size() + 4));
}

std::string report_text(const std::string& text, const std::string& key) {
  const auto pos = text.find("# " + key + ": ");
  REQUIRE(pos != std::string::npos);
  const auto start = pos + key.size() + 4;
  return text.substr(start, text.find('\n', start) - start);
}

// Data rows (non-comment lines after the CSV header) split on commas.
std::vector<std::vector<std::string>> rows(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    out.push_back(fields);
  }
  return out;
}

std::filesystem::path temp_file(const std::string& name) { return std::filesystem::temp_directory_path() / ("qparity_test_" + name); }

}  // namespace

TEST_CASE("state spec parsing") {
  auto spec = parse_state_spec("ebs k=2 eta=0.5 M=3");
  REQUIRE(std::holds_alternative<PhotonAddedSpec>(spec));
  const auto& added = std::get<PhotonAddedSpec>(spec);
  CHECK(added.k == 2);
  CHECK(std::get<BinomialSpec>(added.base).eta == 0.5);
  CHECK(std::get<BinomialSpec>(added.base).M == 3);

  CHECK(std::get<PhotonAddedSpec>(parse_state_spec("ets nbar=1")).k == 1);
  CHECK(std::get<FockSpec>(parse_state_spec("  fock   l=3 ")).l == 3);
  CHECK(std::get<CoherentSpec>(parse_state_spec("coherent alpha=0.5-0.25i")).alpha == Complex(0.5, -0.25));
  CHECK(std::get<CoherentSpec>(parse_state_spec("coherent alpha=-0.3i")).alpha == Complex(0.0, -0.3));
  CHECK(std::get<CoherentSpec>(parse_state_spec("coherent alpha=1e-3+2i")).alpha == Complex(1e-3, 2.0));
  CHECK(std::get<PhotonAddedSpec>(parse_state_spec("thermal nbar=0.5 k=3")).k == 3);
}

TEST_CASE("state spec errors carry positions") {
  auto position = [](const std::string& text) -> std::size_t {
    try {
      parse_state_spec(text);
    } catch (const ParseError& e) {
      return e.position();
    }
    return std::string::npos;
  };
  CHECK(position("") == 0);
  CHECK(position("squeezed r=1") == 0);
  CHECK(position("ebs eta=0.5 N=2") == 12);
  CHECK(position("ebs eta=0.5 M=two") == 14);
  CHECK(position("ebs eta=1.5 M=2") == 8);
  CHECK(position("fock l=1 l=2") == 9);
  CHECK(position("fock") == 4);
  CHECK(position("fock l=1 k=0") == 11);
  CHECK(position("fock l") == 5);
  CHECK_THROWS_AS(parse_state_spec("ebs eta=0.5"), ConfigError);
}

TEST_CASE("canonical text round-trips through the parser") {
  for (const char* text : {"fock l=3", "ebs k=1 eta=0.5 M=2", "ets k=1 nbar=1", "coherent alpha=0.5", "binomial eta=0.25 M=4"}) {
    const auto spec = parse_state_spec(text);
    CHECK(to_string(parse_state_spec(to_string(spec))) == to_string(spec));
  }
}

TEST_CASE("state command reports") {
  auto r = invoke({"state", "--state", "ebs k=1 eta=0.5 M=2"});
  CHECK(r.code == 0);
  CHECK(std::abs(report_value(r.out, "mean_parity")) < 1e-12);
  CHECK(std::abs(report_value(r.out, "w00")) < 1e-12);
  CHECK(report_value(r.out, "dim") == 4);
  CHECK(rows(r.out).size() == 4);

  r = invoke({"state", "--state", "fock l=3"});
  CHECK(report_value(r.out, "mean_parity") == doctest::Approx(-1.0));
  r = invoke({"state", "--state", "ets nbar=1"});
  CHECK(report_value(r.out, "w00") == doctest::Approx(-2.0 / (9.0 * std::numbers::pi)).epsilon(1e-9));
}

TEST_CASE("every output carries the header block") {
  const auto r = invoke({"state", "--state", "fock l=1"});
  CHECK(r.out.rfind("# qparity ", 0) == 0);
  CHECK(r.out.find("# convention: alpha=q+ip") != std::string::npos);
  CHECK(r.out.find("# state = fock l=1") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(invoke({"state", "--state", "ebs eta=2 M=2"}).code == 2);
  CHECK(invoke({"state"}).code == 2);
  CHECK(invoke({"bogus"}).code == 2);
  CHECK(invoke({"state", "--state", "thermal nbar=50", "--dim-cap", "32"}).code == 4);
  CHECK(invoke({"parity-evolve", "--state", "fock l=1", "--backend", "nope"}).code == 2);
  CHECK(invoke({"thresholds", "--state", "fock l=1", "--gt-max", "-1"}).code == 2);
  const auto r = invoke({"parity-evolve", "--state", "ecs alpha=1", "--backend", "lindblad", "--check-backend", "analytic",
                         "--tolerance", "1e-15"});
  CHECK(r.code == 3);
  CHECK(r.out.find("# cross_check: fail") != std::string::npos);
}

TEST_CASE("parity-evolve examples") {
  auto r = invoke({"parity-evolve", "--state", "ecs alpha=0.5", "--n", "0.5", "--gt-max", "0.40546510810816438", "--gt-steps", "40"});
  REQUIRE(r.code == 0);
  auto data = rows(r.out);
  CHECK(std::abs(std::stod(data.back()[1])) < 1e-12);
  CHECK(data.back()[2] == "analytic");

  r = invoke({"parity-evolve", "--state", "ets nbar=1", "--n", "0.5"});
  data = rows(r.out);
  for (std::size_t i = 1; i < data.size(); ++i) CHECK(std::stod(data[i][1]) > std::stod(data[i - 1][1]));

  r = invoke({"parity-evolve", "--state", "ebs k=1 eta=0.9 M=3", "--n", "0.5"});
  CHECK(report_text(r.out, "regime") == "positive-then-negative");
}

TEST_CASE("cross-check mode reports the deviation") {
  const auto r = invoke({"parity-evolve", "--state", "ets nbar=1", "--n", "0.5", "--backend", "lindblad", "--check-backend",
                         "analytic"});
  CHECK(r.code == 0);
  CHECK(report_value(r.out, "max_deviation") < 1e-6);
  CHECK(rows(r.out).front().size() == 5);
}

TEST_CASE("identical config gives byte-identical output") {
  const std::vector<std::string> args = {"surface", "--figure", "2", "--eta-steps", "8", "--gt-steps", "12"};
  CHECK(invoke(args).out == invoke(args).out);
  const std::vector<std::string> evolve = {"parity-evolve", "--state", "ebs eta=0.3 M=4", "--backend", "lindblad", "--gt-steps", "10"};
  CHECK(invoke(evolve).out == invoke(evolve).out);
}

TEST_CASE("config file supplies keys and flags win") {
  const auto path = temp_file("config.ini");
  {
    std::ofstream f(path);
    f << "state = \"ets nbar=1\"\nn = 0.5\ngt-steps = 5\n";
  }
  auto r = invoke({"parity-evolve", "--config", path.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("# state = ets nbar=1") != std::string::npos);
  CHECK(rows(r.out).size() == 6);
  CHECK(report_value(r.out, "gamma_tc") == doctest::Approx(std::log(1.5)));
  r = invoke({"parity-evolve", "--config", path.string(), "--n", "0"});
  CHECK(report_value(r.out, "gamma_tc") == doctest::Approx(std::log(2.0)));
  std::filesystem::remove(path);
}

TEST_CASE("--out writes the same bytes as stdout") {
  const auto path = temp_file("out.csv");
  const auto to_stdout = invoke({"thresholds", "--state", "ecs alpha=2"});
  CHECK(invoke({"thresholds", "--state", "ecs alpha=2", "--out", path.string()}).out.empty());
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str() == to_stdout.out);
  std::filesystem::remove(path);
}

TEST_CASE("surface rows are sorted eta-major") {
  const auto r = invoke({"surface", "--figure", "4", "--eta-steps", "10", "--gt-steps", "5"});
  REQUIRE(r.code == 0);
  const auto data = rows(r.out);
  REQUIRE(data.size() == 11 * 6);
  for (std::size_t i = 1; i < data.size(); ++i) {
    const double e0 = std::stod(data[i - 1][0]), e1 = std::stod(data[i][0]);
    CHECK((e1 > e0 || (e1 == e0 && std::stod(data[i][1]) > std::stod(data[i - 1][1]))));
  }
  // Small eta: initial parity positive.
  CHECK(std::stod(data[6][2]) > 0.0);
  CHECK(std::stod(data[6][0]) == doctest::Approx(0.1));
}

TEST_CASE("thresholds report") {
  auto r = invoke({"thresholds", "--state", "ecs alpha=1.4142135623730951"});
  CHECK(r.out.find("gamma_tc1,") != std::string::npos);
  auto data = rows(r.out);
  CHECK(std::abs(std::stod(data[0][1]) - std::log(2.0)) < 1e-15);
  CHECK(std::abs(std::stod(data[1][1]) - std::log(4.0 / 3.0)) < 1e-12);

  r = invoke({"thresholds", "--state", "ebs k=1 eta=0.5 M=4"});
  int roots = 0;
  for (const auto& row : rows(r.out))
    if (row[0] == "eta_root") {
      const double eta = std::stod(row[1]);
      CHECK((std::abs(eta - 1 / std::sqrt(6.0)) < 1e-10 || std::abs(eta - std::sqrt(0.5)) < 1e-10));
      ++roots;
    }
  CHECK(roots == 2);

  for (const char* nbar : {"0.5", "1", "3"}) {
    r = invoke({"thresholds", "--state", std::string("ets nbar=") + nbar, "--n", "0.5"});
    int crossings = 0;
    for (const auto& row : rows(r.out))
      if (row[0] == "crossing") {
        CHECK(std::abs(std::stod(row[1]) - std::log(1.5)) < 1e-9);
        ++crossings;
      }
    CHECK(crossings == 1);
  }
}

TEST_CASE("wigner-slice presets") {
  auto r = invoke({"wigner-slice", "--preset", "1,0,2", "--gt-list", "0", "--q-min", "-1", "--q-max", "1", "--q-points", "5"});
  REQUIRE(r.code == 0);
  auto data = rows(r.out);
  CHECK(std::stod(data[2][2]) == doctest::Approx(-2.0 / std::numbers::pi));

  r = invoke({"wigner-slice", "--preset", "1,1,2", "--gt-list", "0", "--q-min", "0", "--q-max", "3", "--q-points", "301"});
  data = rows(r.out);
  int changes = 0;
  for (std::size_t i = 1; i < data.size(); ++i) changes += (std::stod(data[i][2]) < 0) != (std::stod(data[i - 1][2]) < 0);
  CHECK(changes == 3);

  r = invoke({"wigner-slice", "--preset", "1,0.5,2", "--n", "0.5", "--gt-list", "0.40546510810816438,0.6,1.0", "--q-points", "41"});
  for (const auto& row : rows(r.out)) CHECK(std::stod(row[2]) >= -1e-6);
  CHECK(invoke({"wigner-slice", "--preset", "9,9,9"}).code == 2);
}

TEST_CASE("rabi command and trace round trip") {
  const auto path = temp_file("trace.csv");
  auto r = invoke({"rabi", "--state", "fock l=0", "--trace-out", path.string()});
  REQUIRE(r.code == 0);
  CHECK(report_value(r.out, "error") <= 0.01);
  const double direct_run = report_value(r.out, "reconstructed_parity");
  auto back = invoke({"rabi", "--trace-in", path.string()});
  REQUIRE(back.code == 0);
  CHECK(report_text(back.out, "reconstructed_parity") == report_text(r.out, "reconstructed_parity"));
  CHECK(report_value(back.out, "reconstructed_parity") == direct_run);
  std::filesystem::remove(path);

  r = invoke({"rabi", "--state", "ecs alpha=0.5"});
  CHECK(report_value(r.out, "reconstructed_parity") < 0.0);
  CHECK(report_value(r.out, "reconstructed_w00") ==
        doctest::Approx(ecs_origin_value(0.5, {0.0, 0.0})).epsilon(0.05));
  CHECK(invoke({"rabi"}).code == 2);
  CHECK(invoke({"rabi", "--trace-in", "/nonexistent/trace.csv"}).code == 2);
}
