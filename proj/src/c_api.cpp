#include "wk/wk.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include "wk/capacity.hpp"
#include "wk/error.hpp"
#include "wk/estimates.hpp"
#include "wk/experiment.hpp"
#include "wk/profiles.hpp"

struct wk_config {
  wk::ExperimentConfig config;
  std::string json;
};

struct wk_bundle {
  wk::RunResult result;
  std::string summary;
};

namespace {

thread_local std::string last_error;

wk_status fail(wk_status s, const std::string& what) {
  last_error = what;
  return s;
}

// Maps the active exception onto a status code.
wk_status translate() {
  try {
    throw;
  } catch (const wk::ConfigError& e) {
    return fail(WK_ERR_CONFIG, e.what());
  } catch (const wk::RegimeError& e) {
    return fail(WK_ERR_REGIME, e.what());
  } catch (const wk::ConvergenceError& e) {
    return fail(WK_ERR_CONVERGENCE, e.what());
  } catch (const wk::PreconditionError& e) {
    return fail(WK_ERR_PRECONDITION, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(WK_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(WK_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(WK_ERR_INTERNAL, "unknown error");
  }
}

template <class F>
wk_status guarded(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (...) {
    return translate();
  }
}

}  // namespace

extern "C" {

const char* wk_last_error(void) { return last_error.c_str(); }
const char* wk_version(void) { return "1.0.0"; }

wk_status wk_config_load(const char* path, wk_config** out) {
  if (!path || !out) return fail(WK_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    auto* c = new wk_config{wk::load_config(path), {}};
    c->json = c->config.to_json().dump(2);
    *out = c;
    return WK_OK;
  });
}

wk_status wk_config_parse(const char* text, wk_config** out) {
  if (!text || !out) return fail(WK_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    auto* c = new wk_config{wk::parse_config_text(text), {}};
    c->json = c->config.to_json().dump(2);
    *out = c;
    return WK_OK;
  });
}

wk_status wk_config_set_rungs(wk_config* c, int rungs) {
  if (!c) return fail(WK_ERR_ARGUMENT, "null config");
  if (rungs < 3) return fail(WK_ERR_CONFIG, "ladder: at least 3 rungs are needed");
  c->config.ladder.rungs = rungs;
  c->json = c->config.to_json().dump(2);
  return WK_OK;
}

wk_status wk_config_set_seed(wk_config* c, uint64_t seed) {
  if (!c) return fail(WK_ERR_ARGUMENT, "null config");
  c->config.seed = seed;
  c->json = c->config.to_json().dump(2);
  return WK_OK;
}

const char* wk_config_json(const wk_config* c) { return c ? c->json.c_str() : ""; }
void wk_config_free(wk_config* c) { delete c; }

size_t wk_bundled_count(void) { return wk::bundled_examples().size(); }

const char* wk_bundled_name(size_t i) {
  const auto& list = wk::bundled_examples();
  return i < list.size() ? list[i].name : nullptr;
}

const char* wk_bundled_description(size_t i) {
  const auto& list = wk::bundled_examples();
  return i < list.size() ? list[i].description : nullptr;
}

wk_status wk_run(const wk_config* c, const char* out_dir, wk_bundle** out) {
  if (!c || !out_dir || !out) return fail(WK_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    auto* b = new wk_bundle{wk::run_experiment(c->config, out_dir), {}};
    b->summary = b->result.summary.dump(2);
    *out = b;
    if (!b->result.ok()) {
      std::string msg = "stage failure:";
      for (const auto& s : b->result.stages)
        if (s.status == "failed") msg += " " + s.name + " (" + s.error + ")";
      return fail(WK_ERR_STAGE, msg);
    }
    return WK_OK;
  });
}

size_t wk_bundle_stage_count(const wk_bundle* b) { return b ? b->result.stages.size() : 0; }

const char* wk_bundle_stage_name(const wk_bundle* b, size_t i) {
  return b && i < b->result.stages.size() ? b->result.stages[i].name.c_str() : nullptr;
}

const char* wk_bundle_stage_status(const wk_bundle* b, size_t i) {
  return b && i < b->result.stages.size() ? b->result.stages[i].status.c_str() : nullptr;
}

const char* wk_bundle_stage_error(const wk_bundle* b, size_t i) {
  return b && i < b->result.stages.size() ? b->result.stages[i].error.c_str() : nullptr;
}

const char* wk_bundle_summary_json(const wk_bundle* b) { return b ? b->summary.c_str() : ""; }
void wk_bundle_free(wk_bundle* b) { delete b; }

wk_status wk_compare(const char* a, const char* b, char** table_out) {
  if (!a || !b || !table_out) return fail(WK_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    const auto res = wk::compare_bundles(a, b);
    char* s = static_cast<char*>(std::malloc(res.table.size() + 1));
    if (!s) return fail(WK_ERR_INTERNAL, "out of memory");
    std::memcpy(s, res.table.c_str(), res.table.size() + 1);
    *table_out = s;
    return WK_OK;
  });
}

void wk_string_free(char* s) { std::free(s); }

wk_status wk_ball_capacity(double a, double b, int dim, double p, double* out) {
  if (!out) return fail(WK_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *out = wk::ball_capacity(a, b, dim, p);
    return WK_OK;
  });
}

wk_status wk_select_nu(double p, double alpha, int dim, double margin, double* out) {
  if (!out) return fail(WK_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *out = wk::select_nu(p, alpha, dim, margin);
    return WK_OK;
  });
}

wk_status wk_literature_threshold(int example, double p, double alpha, int dim, double s, double* literature,
                                  double* here) {
  if (!literature || !here) return fail(WK_ERR_ARGUMENT, "null argument");
  if (example < 0 || example > 2) return fail(WK_ERR_ARGUMENT, "example must be 0, 1 or 2");
  return guarded([&] {
    wk::ExampleParams x;
    x.p = p;
    x.alpha = alpha;
    x.n = dim;
    x.s = s;
    const auto t = wk::literature_threshold(static_cast<wk::Example>(example), x);
    *literature = t.literature;
    *here = t.here;
    return WK_OK;
  });
}

}  // extern "C"
