/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "wk/wk.h"

static int failed = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: failed: %s\n", __FILE__, __LINE__, #cond); \
      failed = 1;                                                     \
    }                                                                 \
  } while (0)

int main(int argc, char** argv) {
  const char* out = argc > 1 ? argv[1] : "capi_bundle";
  wk_config* cfg = NULL;
  wk_bundle* bundle = NULL;
  double v = 0.0, lit = 0.0, here = 0.0;
  size_t i;
  char* table = NULL;

  EXPECT(strcmp(wk_version(), "1.0.0") == 0);
  EXPECT(wk_bundled_count() == 4);
  EXPECT(wk_bundled_name(99) == NULL);
  for (i = 0; i < wk_bundled_count(); ++i) EXPECT(strlen(wk_bundled_description(i)) > 0);

  EXPECT(wk_config_parse("{ broken", &cfg) == WK_ERR_CONFIG);
  EXPECT(strlen(wk_last_error()) > 0);
  EXPECT(wk_config_parse(NULL, &cfg) == WK_ERR_ARGUMENT);
  EXPECT(wk_config_load("no-such-example", &cfg) == WK_ERR_CONFIG);

  EXPECT(wk_config_load("example-2.2", &cfg) == WK_OK);
  EXPECT(strstr(wk_config_json(cfg), "\"example-2.2\"") != NULL);
  EXPECT(wk_config_set_rungs(cfg, 2) == WK_ERR_CONFIG);
  EXPECT(wk_config_set_rungs(cfg, 5) == WK_OK);
  EXPECT(strstr(wk_config_json(cfg), "\"rungs\": 5") != NULL);
  EXPECT(wk_config_set_seed(cfg, 42) == WK_OK);

  EXPECT(wk_run(cfg, out, &bundle) == WK_OK);
  EXPECT(bundle != NULL);
  if (bundle) {
    EXPECT(wk_bundle_stage_count(bundle) == 10);
    EXPECT(strcmp(wk_bundle_stage_name(bundle, 0), "geometry") == 0);
    for (i = 0; i < wk_bundle_stage_count(bundle); ++i)
      EXPECT(strcmp(wk_bundle_stage_status(bundle, i), "failed") != 0);
    EXPECT(wk_bundle_stage_name(bundle, 100) == NULL);
    EXPECT(strstr(wk_bundle_summary_json(bundle), "estimates") != NULL);
    wk_bundle_free(bundle);
  }
  wk_config_free(cfg);

  EXPECT(wk_compare(out, out, &table) == WK_OK);
  if (table) {
    EXPECT(strncmp(table, "r,", 2) == 0);
    wk_string_free(table);
  }
  EXPECT(wk_compare(out, "/nonexistent", &table) == WK_ERR_PRECONDITION);

  EXPECT(wk_ball_capacity(1.0, 2.0, 3, 2.0, &v) == WK_OK);
  EXPECT(fabs(v - 8.0 * 3.14159265358979) < 1e-9);
  EXPECT(wk_ball_capacity(2.0, 1.0, 3, 2.0, &v) == WK_ERR_PRECONDITION);
  EXPECT(wk_ball_capacity(1.0, 2.0, 3, 2.0, NULL) == WK_ERR_ARGUMENT);
  EXPECT(wk_select_nu(2.0, 1.5, 2, 1.0, &v) == WK_OK && fabs(v - 5.0) < 1e-12);
  EXPECT(wk_select_nu(2.0, 0.5, 2, 1.0, &v) == WK_ERR_PRECONDITION);
  EXPECT(wk_literature_threshold(1, 2.0, 1.5, 3, 2.0, &lit, &here) == WK_OK);
  EXPECT(here < lit);
  EXPECT(wk_literature_threshold(5, 2.0, 1.5, 3, 2.0, &lit, &here) == WK_ERR_ARGUMENT);

  if (!failed) printf("c api: all checks passed\n");
  return failed;
}
