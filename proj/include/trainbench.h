#ifndef TRAINBENCH_H
#define TRAINBENCH_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Shared-library interface around the benchmark core. Handles are opaque
 * and freed with their matching *_free call; every function returns a
 * status code, with details available through tb_last_error(). Strings
 * handed out through char** parameters belong to the caller and are
 * released with tb_string_free().
 */

typedef enum tb_status {
    TB_OK = 0,
    TB_ERROR_ARGUMENT = 1, /* null handle or output pointer, index out of range */
    TB_ERROR_CONFIG = 2,   /* rejected configuration or input data */
    TB_ERROR_RUN = 3,      /* training left the finite range */
    TB_ERROR_IO = 4,       /* unreadable or unwritable file */
    TB_ERROR_INTERNAL = 5  /* unexpected failure inside the library */
} tb_status;

typedef struct tb_config tb_config;     /* loaded experiment description */
typedef struct tb_records tb_records;   /* ordered batch of run records */
typedef struct tb_profiles tb_profiles; /* success-rate curves */

const char* tb_version(void);

/* Message from the most recent failing call on this thread. Never NULL;
 * empty until something fails. */
const char* tb_last_error(void);

void tb_string_free(char* s);

/* Loads a JSON experiment document and applies dotted-path overrides such
 * as "optimizer.eta=0.01" in order. Syntax is checked here; field
 * validation happens in the command that consumes the config, so one
 * document can carry a "grid" or "multistart" section for the matching
 * call below. */
tb_status tb_config_load(const char* path, const char* const* overrides,
                         size_t override_count, tb_config** out);
tb_status tb_config_parse(const char* json_text, const char* const* overrides,
                          size_t override_count, tb_config** out);

/* The fully resolved single-run form: canonical JSON with sorted keys, and
 * the 16-hex-digit hash that names its record file. Rejects documents
 * carrying grid or multistart sections. */
tb_status tb_config_canonical(const tb_config* cfg, char** out_json);
tb_status tb_config_hash(const tb_config* cfg, char** out_hash);

void tb_config_free(tb_config* cfg);

/* Experiments. Records come back in deterministic enumeration order;
 * workers > 1 parallelizes across runs without changing any result. A
 * diverged training run is not an error at this level: it arrives as a
 * record marked failed. */
tb_status tb_train(const tb_config* cfg, tb_records** out);
tb_status tb_multistart(const tb_config* cfg, int workers, tb_records** out);
tb_status tb_grid_search(const tb_config* cfg, int workers, size_t* best_index,
                         tb_records** out);

tb_status tb_records_count(const tb_records* recs, size_t* out);
tb_status tb_records_failed(const tb_records* recs, size_t* out);
tb_status tb_records_json(const tb_records* recs, size_t index, char** out_json);

/* One readable line per record, aligned into a table. */
tb_status tb_records_summary(const tb_records* recs, char** out_text);

/* Persistence under a directory: one run-<hash>.json per record, a row
 * appended to index.csv, and manifest.json rewritten. tb_records_open
 * reads every run-*.json back in sorted order. */
tb_status tb_records_save(const tb_records* recs, const char* out_dir);
tb_status tb_records_open(const char* dir, tb_records** out);

void tb_records_free(tb_records* recs);

/* Success-rate curves over one record set on the stock grid of 50
 * relaxation levels. Requires a record for every (problem, solver) pair
 * and identical starting losses per problem. */
tb_status tb_profiles_compute(const tb_records* recs, tb_profiles** out);
tb_status tb_profiles_csv(const tb_profiles* prof, char** out_csv);
tb_status tb_profiles_save(const tb_profiles* prof, const char* out_dir);

void tb_profiles_free(tb_profiles* prof);

/* Solver-ordering report over one problem's records: the tuned group must
 * finish below the stragglers. *pass is 1 when every executed assertion
 * held. */
tb_status tb_findings(const tb_records* recs, int* pass, char** out_text);

/* The built-in self checks (update rules against their scalar references,
 * network gradients against finite differences, profile properties, the
 * quadratic solver). *failures counts the checks that did not pass. */
tb_status tb_verify(int* failures, char** out_report);

#ifdef __cplusplus
}
#endif

#endif /* TRAINBENCH_H */
