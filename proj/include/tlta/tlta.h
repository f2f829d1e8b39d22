/* C interface to the TLTA simulator and zone compiler. */
#ifndef TLTA_TLTA_H
#define TLTA_TLTA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define TLTA_API __declspec(dllexport)
#else
#  define TLTA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct tlta_scenario tlta_scenario;
typedef struct tlta_result tlta_result;

typedef enum tlta_status {
  TLTA_OK = 0,
  TLTA_ERR_CONFIG = 2,
  TLTA_ERR_INVARIANT = 3,
  TLTA_ERR_IO = 4,
  TLTA_ERR_GEOMETRY = 5,
  TLTA_ERR_INVALID_ARGUMENT = 6,
  TLTA_ERR_TRUNCATED = 7,
  TLTA_ERR_INTERNAL = 8
} tlta_status;

/* Message for the last failing call on this thread; "" if none. */
TLTA_API const char* tlta_last_error(void);
TLTA_API const char* tlta_version(void);

/* Parses and validates a scenario. Every cross reference is resolved here,
   so a scenario handle is always runnable. */
TLTA_API tlta_status tlta_scenario_load(const char* path, tlta_scenario** out);
TLTA_API tlta_status tlta_scenario_from_string(const char* yaml, tlta_scenario** out);
TLTA_API void tlta_scenario_free(tlta_scenario* scenario);
TLTA_API uint64_t tlta_scenario_default_seed(const tlta_scenario* scenario);
TLTA_API const char* tlta_scenario_name(const tlta_scenario* scenario);
/* Number of warnings raised while resolving (e.g. clipped waypoints). */
TLTA_API size_t tlta_scenario_warning_count(const tlta_scenario* scenario);
TLTA_API const char* tlta_scenario_warning(const tlta_scenario* scenario, size_t index);

TLTA_API tlta_status tlta_run(const tlta_scenario* scenario, uint64_t seed, tlta_result** out);
/* Strings stay valid until tlta_result_free. */
TLTA_API const char* tlta_result_log(const tlta_result* result);
TLTA_API const char* tlta_result_metrics_json(const tlta_result* result);
TLTA_API const char* tlta_result_summary(const tlta_result* result);
TLTA_API void tlta_result_free(tlta_result* result);

/* Zone documents are JSON; release them with tlta_string_free. */
TLTA_API tlta_status tlta_compile_zone_scenario(const tlta_scenario* scenario, char** zone_json);
/* xy holds n_vertices (x, y) pairs. */
TLTA_API tlta_status tlta_compile_zone_polygon(const double* xy, size_t n_vertices, double cell_radius, int extent,
                                               double op_scale, int outer_layers, char** zone_json);
TLTA_API void tlta_string_free(char* s);

/* TLTA_OK when every check holds; TLTA_ERR_TRUNCATED for an incomplete log;
   TLTA_ERR_INVARIANT with the first violation in *message otherwise.
   *message may be NULL on success; free it with tlta_string_free. */
TLTA_API tlta_status tlta_verify_log(const char* path, char** message);

#ifdef __cplusplus
}
#endif

#endif
