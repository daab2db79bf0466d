#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "finelab/error.hpp"
#include "finelab/report_io.hpp"
#include "finelab/scenario.hpp"

using namespace finelab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("finelab_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path());
  return dir;
}

json wiener_config(const fs::path& out) {
  return {{"problem",
           {{"operation", "wiener"}, {"set", "cusp"}, {"x0", {0.0, 0.0}}, {"scales", 3}, {"resolution", 16}}},
          {"output", {{"directory", out.string()}}}};
}

std::string config_error_message(const json& raw) {
  try {
    parse_scenario(raw);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    return e.what();
  }
  return "";
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + FINELAB_CLI_PATH + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> directory_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_file(e.path());
  return out;
}

}  // namespace

TEST_CASE("config validation names the key path") {
  auto raw = wiener_config(scratch("unused"));
  raw["problem"]["p"] = 0.5;
  CHECK(config_error_message(raw).find("problem.p") != std::string::npos);

  auto unknown = wiener_config(scratch("unused"));
  unknown["problem"]["colour"] = "red";
  CHECK(config_error_message(unknown).find("problem.colour") != std::string::npos);

  auto no_op = wiener_config(scratch("unused"));
  no_op["problem"].erase("operation");
  CHECK(config_error_message(no_op).find("problem.operation") != std::string::npos);

  auto bad_space = json{{"space", {{"builder", "cube"}, {"h", 0.1}}},
                        {"problem", {{"operation", "space"}}}};
  CHECK(config_error_message(bad_space).find("space.half_width") != std::string::npos);

  auto top = wiener_config(scratch("unused"));
  top["extra"] = 1;
  CHECK(config_error_message(top).find("extra") != std::string::npos);
}

TEST_CASE("resolved config carries every default") {
  auto cfg = parse_scenario(wiener_config(scratch("unused")));
  const auto& p = cfg.resolved.at("problem");
  CHECK(p.at("sigma") == 2.0);
  CHECK(p.at("p") == 2.0);
  CHECK(p.at("tol") == 1e-8);
  CHECK(p.at("mode") == "rescaled");
  CHECK(p.contains("policy"));
  CHECK(cfg.seed == 1);
  auto table = defaults_table();
  CHECK(table.contains("wiener"));
  CHECK(table.contains("classification"));
  CHECK(table.at("cartan_weak").at("sigma") == 50.0);
}

TEST_CASE("wiener scenario writes its artifacts") {
  const auto out = scratch("wiener");
  auto m = run_scenario(parse_scenario(wiener_config(out)));
  for (const char* f : {"wiener.json", "terms.csv", "manifest.json", "timings.json"}) CHECK(fs::exists(out / f));
  std::ifstream terms(out / "terms.csv");
  std::string header;
  std::getline(terms, header);
  CHECK(header == "j,r_j,cap_num,cap_den,t_j,partial_sum");
  int rows = 0;
  for (std::string line; std::getline(terms, line);) rows += !line.empty();
  CHECK(rows == 3);

  const auto manifest = json::parse(read_file(out / "manifest.json"));
  CHECK(manifest.at("version") == std::string(kToolVersion));
  CHECK(manifest.contains("defaults"));
  CHECK(manifest.contains("config"));
  CHECK(!manifest.contains("stages"));
  for (const auto& rec : m.files) {
    CHECK(rec.name != "manifest.json");
    CHECK(rec.name != "timings.json");
    const auto bytes = read_file(out / rec.name);
    CHECK(rec.sha256 == sha256_hex(bytes));
    CHECK(rec.bytes == bytes.size());
  }
  CHECK(json::parse(read_file(out / "timings.json")).contains("stages"));
}

TEST_CASE("reruns are byte-identical") {
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  json raw{{"space", {{"builder", "cube"}, {"dim", 2}, {"half_width", 1.0}, {"h", 0.125}}},
           {"problem", {{"operation", "potential"}, {"set", "ball:r=0.25"}, {"domain", "ball:r=0.9"}, {"p", 3.0}}}};
  raw["output"] = {{"directory", a.string()}};
  run_scenario(parse_scenario(raw));
  run_scenario(parse_scenario(raw), b);
  auto x = directory_bytes(a);
  auto y = directory_bytes(b);
  x.erase("timings.json");
  y.erase("timings.json");
  CHECK(x == y);
  CHECK(x.count("potential.csv") == 1);
}

TEST_CASE("CSV export") {
  SUBCASE("field round trip is exact") {
    auto s = build_cube_grid(2, 1.0, 0.25);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-1e3, 1e3);
    ScalarField f(s->size());
    for (auto& v : f) v = U(rng) * std::pow(10.0, static_cast<int>(rng() % 30) - 15);
    f[0] = 0.1;
    f[1] = -0.0;
    std::stringstream ss;
    write_field_csv(ss, *s, f);
    CHECK(ss.str().rfind("node_id,value\n", 0) == 0);
    auto g = read_field_csv(ss, *s);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(g[i] == f[i]);
  }
  SUBCASE("empty reports give header-only files") {
    std::stringstream terms;
    write_terms_csv(terms, WienerReport{});
    CHECK(terms.str() == "j,r_j,cap_num,cap_den,t_j,partial_sum\n");
    std::stringstream shrink;
    write_shrink_csv(shrink, ShrinkProfile{});
    CHECK(shrink.str() == "rho,capacity,kkt_residual,iterations\n");
  }
  SUBCASE("doubles survive text") {
    std::mt19937_64 rng(6);
    for (int k = 0; k < 1000; ++k) {
      const double x = std::bit_cast<double>(rng());
      if (!std::isfinite(x)) continue;
      CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
    }
    CHECK(format_double(INFINITY) == "inf");
    CHECK(number_from_json(json_number(-INFINITY)) == -INFINITY);
  }
}

TEST_CASE("command line") {
  const auto out = scratch("cli_wiener");
  CHECK(run_cli("wiener --set cusp --scales 3 --resolution 16 --quiet --out " + out.string()) == 0);
  CHECK(fs::exists(out / "wiener.json"));
  CHECK(fs::exists(out / "terms.csv"));

  CHECK(run_cli("cap --set ball:r=0.2 --domain ball:r=0.8 --spacing 0.125 --p 0.5 --out " + scratch("bad").string()) ==
        exit_code(ErrorCode::ConfigError));
  CHECK(run_cli("cap --set ball:r=0.9 --domain ball:r=0.2 --spacing 0.125 --out " + scratch("eina").string()) ==
        exit_code(ErrorCode::EnotInA));
  CHECK(run_cli("wiener --bogus") == 2);
  CHECK(run_cli("run --config " + (scratch("missing") / "none.json").string()) == exit_code(ErrorCode::IoError));

  const auto cfg_path = scratch("cfg").string() + ".json";
  write_file(cfg_path, wiener_config(scratch("from_config")).dump());
  const auto via_run = scratch("via_run");
  CHECK(run_cli("run --quiet --config " + cfg_path + " --out " + via_run.string()) == 0);
  auto x = directory_bytes(out);
  auto y = directory_bytes(via_run);
  CHECK(x.at("terms.csv") == y.at("terms.csv"));
}

TEST_CASE("thread count does not change outputs") {
  const auto dir = scratch("threads");
  const std::string args = "wiener --set sector --scales 4 --resolution 16 --quiet --out " + dir.string();
  REQUIRE(run_cli(args, "FINELAB_THREADS=1") == 0);
  auto x = directory_bytes(dir);
  fs::remove_all(dir);
  REQUIRE(run_cli(args, "FINELAB_THREADS=4") == 0);
  auto y = directory_bytes(dir);
  x.erase("timings.json");
  y.erase("timings.json");
  CHECK(x == y);
}
