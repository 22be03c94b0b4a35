#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wk/error.hpp"
#include "wk/experiment.hpp"

using namespace wk;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json bundled_json(const char* name) { return json::parse(find_bundled(name)->json); }

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// a fast sector run: few rungs, coarse PDE grid
json quick_sector() {
  json doc = bundled_json("sector");
  doc["ladder"]["r_min"] = 0.05;
  doc["ladder"]["rungs"] = 5;
  doc["pde"]["cells_per_radius"] = 40;
  return doc;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wk_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("bundled examples parse and round-trip") {
  const auto& list = bundled_examples();
  REQUIRE(list.size() == 4);
  for (const auto& ex : list) {
    CAPTURE(ex.name);
    const auto cfg = load_config(ex.name);
    CHECK(cfg.name == ex.name);
    const auto again = parse_config(cfg.to_json());
    CHECK(again.to_json() == cfg.to_json());
  }
  CHECK(find_bundled("example-2.2") != nullptr);
  CHECK(find_bundled("nope") == nullptr);
}

TEST_CASE("config errors name the offending field") {
  json doc = bundled_json("example-2.2");
  doc["ladder"]["step"] = 3;
  CHECK(config_error(doc).find("step") != std::string::npos);

  doc = bundled_json("example-2.2");
  doc["schema_version"] = 2;
  CHECK(config_error(doc).find("schema_version") != std::string::npos);

  doc = bundled_json("example-2.2");
  doc["ladder"]["rungs"] = 2;
  CHECK(config_error(doc).find("rungs") != std::string::npos);

  doc = bundled_json("example-2.2");
  doc["ladder"]["R"] = 5.0;
  CHECK_FALSE(config_error(doc).empty());

  doc = bundled_json("example-2.2");
  doc.erase("exponents");
  CHECK(config_error(doc).find("exponents") != std::string::npos);

  doc = bundled_json("example-2.2");
  doc["domain"]["params"]["s"] = 0.5;
  CHECK_FALSE(config_error(doc).empty());
}

TEST_CASE("config cross-checks") {
  // exponential-family estimates need alpha = p - 1
  json doc = bundled_json("example-2.2");
  doc["estimates"] = {"min-exponential"};
  CHECK_FALSE(config_error(doc).empty());
  doc["estimates"] = {"no-such-estimate"};
  CHECK_FALSE(config_error(doc).empty());

  doc = bundled_json("example-2.2");
  doc["catalog"] = "cone-complement";
  CHECK(config_error(doc).find("catalog") != std::string::npos);

  doc = bundled_json("example-2.1");
  doc["domain"]["n"] = 3;
  CHECK(config_error(doc).find("pde") != std::string::npos);

  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("{ not json"), ConfigError);
}

TEST_CASE("a sector run writes a complete bundle") {
  const auto out = scratch("run");
  const auto res = run_experiment(parse_config(quick_sector()), out);
  for (const auto& s : res.stages) {
    CAPTURE(s.name);
    CAPTURE(s.error);
    CHECK(s.status != "failed");
  }
  CHECK(res.ok());
  for (const char* f : {"config.json", "geometry.json", "eigen_log.json", "capacity_log.json", "profiles.csv",
                        "estimates.json", "measurement.csv", "summary.json", "summary.txt", "manifest.json",
                        "bound_min-rational.csv", "bound_linear-rational-capacity.csv"})
    CHECK(fs::exists(out / f));
  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["missing_stages"].empty());
  const json summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary["pde"]["measurement"]["slope"].get<double>() == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("identical configs give byte-identical bundles") {
  const auto cfg = parse_config(quick_sector());
  const auto a = scratch("det_a"), b = scratch("det_b");
  run_experiment(cfg, a);
  run_experiment(cfg, b);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    CAPTURE(e.path().filename().string());
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(files >= 10);
}

TEST_CASE("compare bundles") {
  const auto a = scratch("cmp_a"), b = scratch("cmp_b");
  run_experiment(parse_config(quick_sector()), a);
  run_experiment(parse_config(quick_sector()), b);
  const auto same = compare_bundles(a, b);
  CHECK_FALSE(same.columns.empty());
  for (const auto& col : same.ratios)
    for (double r : col)
      if (std::isfinite(r)) CHECK(r == doctest::Approx(1.0));
  CHECK(same.table.rfind("r,", 0) == 0);

  json other = quick_sector();
  other["ladder"]["rungs"] = 4;
  const auto c = scratch("cmp_c");
  run_experiment(parse_config(other), c);
  CHECK_THROWS_AS(compare_bundles(a, c), PreconditionError);
  CHECK_THROWS_AS(compare_bundles(a, scratch("cmp_missing")), PreconditionError);
}
