#include "trainbench.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "core/bench.hpp"
#include "core/config.hpp"
#include "core/error.hpp"
#include "core/verify.hpp"

// Everything C++ stays behind this translation unit: exceptions become
// status codes here, and nothing past the boundary sees a tb:: type.

struct tb_config {
    std::string document;  // JSON text with overrides already folded in
};

struct tb_records {
    std::vector<tb::ExperimentRecord> records;
};

struct tb_profiles {
    std::vector<tb::ProfileCurve> curves;
};

namespace {

thread_local std::string t_last_error;

tb_status status_from(const tb::Error& e) {
    t_last_error = e.what();
    switch (e.code()) {
        case tb::errc::non_finite:
            return TB_ERROR_RUN;
        case tb::errc::io_error:
            return TB_ERROR_IO;
        default:
            return TB_ERROR_CONFIG;
    }
}

template <typename Fn>
tb_status guarded(Fn&& fn) {
    try {
        fn();
        return TB_OK;
    } catch (const tb::Error& e) {
        return status_from(e);
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return TB_ERROR_INTERNAL;
    }
}

tb_status reject_argument(const char* what) {
    t_last_error = what;
    return TB_ERROR_ARGUMENT;
}

char* copy_out(const std::string& s) {
    char* buf = static_cast<char*>(std::malloc(s.size() + 1));
    if (!buf) throw std::bad_alloc();
    std::memcpy(buf, s.c_str(), s.size() + 1);
    return buf;
}

std::vector<std::string> collect(const char* const* items, size_t count) {
    std::vector<std::string> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        if (!items[i]) tb::fail(tb::errc::invalid_value, "null override string");
        out.emplace_back(items[i]);
    }
    return out;
}

tb_status make_config(std::string text, const char* const* overrides, size_t count,
                      tb_config** out) {
    return guarded([&] {
        std::string merged = tb::merge_config_document(text, collect(overrides, count));
        *out = new tb_config{std::move(merged)};
    });
}

} // namespace

extern "C" {

const char* tb_version(void) { return "1.0.0"; }

const char* tb_last_error(void) { return t_last_error.c_str(); }

void tb_string_free(char* s) { std::free(s); }

tb_status tb_config_load(const char* path, const char* const* overrides, size_t override_count,
                         tb_config** out) {
    if (!path || !out || (override_count > 0 && !overrides))
        return reject_argument("tb_config_load: null argument");
    return guarded([&] {
        std::ifstream in(path);
        tb::require(in.good(), tb::errc::io_error, std::string("cannot open config file ") + path);
        std::ostringstream text;
        text << in.rdbuf();
        std::string merged = tb::merge_config_document(text.str(), collect(overrides, override_count));
        *out = new tb_config{std::move(merged)};
    });
}

tb_status tb_config_parse(const char* json_text, const char* const* overrides,
                          size_t override_count, tb_config** out) {
    if (!json_text || !out || (override_count > 0 && !overrides))
        return reject_argument("tb_config_parse: null argument");
    return make_config(json_text, overrides, override_count, out);
}

tb_status tb_config_canonical(const tb_config* cfg, char** out_json) {
    if (!cfg || !out_json) return reject_argument("tb_config_canonical: null argument");
    return guarded([&] {
        tb::RunConfig run = tb::parse_run_config(cfg->document);
        run.validate();
        *out_json = copy_out(tb::canonical_config_json(run));
    });
}

tb_status tb_config_hash(const tb_config* cfg, char** out_hash) {
    if (!cfg || !out_hash) return reject_argument("tb_config_hash: null argument");
    return guarded([&] {
        tb::RunConfig run = tb::parse_run_config(cfg->document);
        run.validate();
        *out_hash = copy_out(tb::config_hash(run));
    });
}

void tb_config_free(tb_config* cfg) { delete cfg; }

tb_status tb_train(const tb_config* cfg, tb_records** out) {
    if (!cfg || !out) return reject_argument("tb_train: null argument");
    return guarded([&] {
        tb::RunConfig run = tb::parse_run_config(cfg->document);
        auto recs = new tb_records{};
        try {
            recs->records.push_back(tb::run_training(run));
        } catch (...) {
            delete recs;
            throw;
        }
        *out = recs;
    });
}

tb_status tb_multistart(const tb_config* cfg, int workers, tb_records** out) {
    if (!cfg || !out) return reject_argument("tb_multistart: null argument");
    if (workers < 1) return reject_argument("tb_multistart: workers must be at least 1");
    return guarded([&] {
        tb::MultistartConfig mc = tb::parse_multistart_config(cfg->document, {});
        *out = new tb_records{tb::multistart(mc.run, mc.spec, static_cast<size_t>(workers))};
    });
}

tb_status tb_grid_search(const tb_config* cfg, int workers, size_t* best_index,
                         tb_records** out) {
    if (!cfg || !out) return reject_argument("tb_grid_search: null argument");
    if (workers < 1) return reject_argument("tb_grid_search: workers must be at least 1");
    return guarded([&] {
        tb::GridConfig gc = tb::parse_grid_config(cfg->document, {});
        tb::GridOutcome outcome = tb::grid_search(gc.run, gc.spec, static_cast<size_t>(workers));
        if (best_index) *best_index = outcome.best_index;
        *out = new tb_records{std::move(outcome.records)};
    });
}

tb_status tb_records_count(const tb_records* recs, size_t* out) {
    if (!recs || !out) return reject_argument("tb_records_count: null argument");
    *out = recs->records.size();
    return TB_OK;
}

tb_status tb_records_failed(const tb_records* recs, size_t* out) {
    if (!recs || !out) return reject_argument("tb_records_failed: null argument");
    size_t n = 0;
    for (const auto& r : recs->records) n += r.failed ? 1 : 0;
    *out = n;
    return TB_OK;
}

tb_status tb_records_json(const tb_records* recs, size_t index, char** out_json) {
    if (!recs || !out_json) return reject_argument("tb_records_json: null argument");
    if (index >= recs->records.size()) return reject_argument("tb_records_json: index out of range");
    return guarded([&] { *out_json = copy_out(tb::record_to_json(recs->records[index])); });
}

tb_status tb_records_summary(const tb_records* recs, char** out_text) {
    if (!recs || !out_text) return reject_argument("tb_records_summary: null argument");
    return guarded([&] {
        std::ostringstream table;
        char line[256];
        std::snprintf(line, sizeof line, "%-26s %-9s %-8s %-15s %-9s %-12s %-9s %s\n",
                      "problem", "solver", "preset", "initializer", "seed", "final_loss",
                      "accuracy", "status");
        table << line;
        for (const auto& r : recs->records) {
            char acc[16];
            if (r.final_accuracy < 0.0)
                std::snprintf(acc, sizeof acc, "-");
            else
                std::snprintf(acc, sizeof acc, "%.4f", r.final_accuracy);
            std::snprintf(line, sizeof line, "%-26s %-9s %-8s %-15s %-9llu %-12.6g %-9s %s\n",
                          r.problem_id.c_str(), r.solver.c_str(), r.preset.c_str(),
                          r.initializer.c_str(), static_cast<unsigned long long>(r.seed),
                          r.final_loss, acc, r.failed ? "failed" : "ok");
            table << line;
        }
        *out_text = copy_out(table.str());
    });
}

tb_status tb_records_save(const tb_records* recs, const char* out_dir) {
    if (!recs || !out_dir) return reject_argument("tb_records_save: null argument");
    return guarded([&] {
        for (const auto& r : recs->records) tb::save_record(r, out_dir);
    });
}

tb_status tb_records_open(const char* dir, tb_records** out) {
    if (!dir || !out) return reject_argument("tb_records_open: null argument");
    return guarded([&] { *out = new tb_records{tb::load_records(dir)}; });
}

void tb_records_free(tb_records* recs) { delete recs; }

tb_status tb_profiles_compute(const tb_records* recs, tb_profiles** out) {
    if (!recs || !out) return reject_argument("tb_profiles_compute: null argument");
    return guarded([&] {
        *out = new tb_profiles{tb::success_rate_profiles(recs->records, tb::default_tau_grid())};
    });
}

tb_status tb_profiles_csv(const tb_profiles* prof, char** out_csv) {
    if (!prof || !out_csv) return reject_argument("tb_profiles_csv: null argument");
    return guarded([&] { *out_csv = copy_out(tb::profiles_csv(prof->curves)); });
}

tb_status tb_profiles_save(const tb_profiles* prof, const char* out_dir) {
    if (!prof || !out_dir) return reject_argument("tb_profiles_save: null argument");
    return guarded([&] { tb::save_profiles(prof->curves, out_dir); });
}

void tb_profiles_free(tb_profiles* prof) { delete prof; }

tb_status tb_findings(const tb_records* recs, int* pass, char** out_text) {
    if (!recs || !pass || !out_text) return reject_argument("tb_findings: null argument");
    return guarded([&] {
        tb::FindingsReport report = tb::qualitative_findings_check(recs->records);
        std::ostringstream text;
        for (const auto& l : report.lines) text << l << "\n";
        if (!report.complete) text << "(some solvers missing; unexecuted assertions skipped)\n";
        *pass = report.pass ? 1 : 0;
        *out_text = copy_out(text.str());
    });
}

tb_status tb_verify(int* failures, char** out_report) {
    if (!failures || !out_report) return reject_argument("tb_verify: null argument");
    return guarded([&] {
        std::vector<tb::CheckResult> results = tb::verify_all();
        std::ostringstream text;
        int bad = 0;
        for (const auto& r : results) {
            text << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
            bad += r.pass ? 0 : 1;
        }
        *failures = bad;
        *out_report = copy_out(text.str());
    });
}

} // extern "C"
