// Command-line front end over the C API.
#include <cstdio>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "wk/wk.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

int config_failure(const char* what) {
  std::fprintf(stderr, "config error: %s\n", what);
  return kExitConfig;
}

int cmd_run(const std::string& config_path, const std::string& out, int rungs, long long seed) {
  wk_config* cfg = nullptr;
  if (wk_config_load(config_path.c_str(), &cfg) != WK_OK) return config_failure(wk_last_error());
  if (rungs > 0 && wk_config_set_rungs(cfg, rungs) != WK_OK) {
    wk_config_free(cfg);
    return config_failure(wk_last_error());
  }
  if (seed >= 0) wk_config_set_seed(cfg, static_cast<uint64_t>(seed));

  wk_bundle* bundle = nullptr;
  const wk_status st = wk_run(cfg, out.c_str(), &bundle);
  wk_config_free(cfg);
  if (!bundle) {
    std::fprintf(stderr, "run failed: %s\n", wk_last_error());
    return kExitStage;
  }
  for (size_t i = 0; i < wk_bundle_stage_count(bundle); ++i) {
    const std::string err = wk_bundle_stage_error(bundle, i);
    std::printf("%-16s %s%s%s\n", wk_bundle_stage_name(bundle, i), wk_bundle_stage_status(bundle, i),
                err.empty() ? "" : ": ", err.c_str());
  }
  std::printf("bundle written to %s\n", out.c_str());
  wk_bundle_free(bundle);
  return st == WK_OK ? kExitOk : kExitStage;
}

int cmd_validate(const std::string& config_path) {
  wk_config* cfg = nullptr;
  if (wk_config_load(config_path.c_str(), &cfg) != WK_OK) return config_failure(wk_last_error());
  std::printf("%s\n", wk_config_json(cfg));
  wk_config_free(cfg);
  return kExitOk;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& out) {
  char* table = nullptr;
  if (wk_compare(a.c_str(), b.c_str(), &table) != WK_OK) {
    std::fprintf(stderr, "compare refused: %s\n", wk_last_error());
    return kExitStage;
  }
  if (out.empty()) {
    std::fputs(table, stdout);
  } else {
    std::ofstream os(out);
    os << table;
    if (!os) {
      wk_string_free(table);
      std::fprintf(stderr, "cannot write %s\n", out.c_str());
      return kExitStage;
    }
  }
  wk_string_free(table);
  return kExitOk;
}

int cmd_list() {
  for (size_t i = 0; i < wk_bundled_count(); ++i)
    std::printf("%-14s %s\n", wk_bundled_name(i), wk_bundled_description(i));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decay estimates near boundary points: profiles, bound curves and PDE checks"};
  app.require_subcommand(1);

  std::string config, out = "bundle", cmp_out, bundle_a, bundle_b;
  int rungs = 0;
  long long seed = -1;

  auto* run = app.add_subcommand("run", "run an experiment and write its bundle");
  run->add_option("--config", config, "config file or bundled example name")->required();
  run->add_option("--out", out, "bundle directory");
  run->add_option("--rungs", rungs, "override the ladder rung count")->check(CLI::Range(3, 100000));
  run->add_option("--seed", seed, "seed of the randomized capacity-law checks")->check(CLI::NonNegativeNumber);

  auto* cmp = app.add_subcommand("compare", "rung-wise ratios of two bundles (B / A)");
  cmp->add_option("bundle_a", bundle_a)->required();
  cmp->add_option("bundle_b", bundle_b)->required();
  cmp->add_option("--out", cmp_out, "write the table here instead of stdout");

  auto* val = app.add_subcommand("validate-config", "parse and check a config");
  val->add_option("--config", config, "config file or bundled example name")->required();

  auto* list = app.add_subcommand("list-bundled-examples", "names of the built-in configs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (*run) return cmd_run(config, out, rungs, seed);
  if (*cmp) return cmd_compare(bundle_a, bundle_b, cmp_out);
  if (*val) return cmd_validate(config);
  if (*list) return cmd_list();
  return kExitConfig;
}
