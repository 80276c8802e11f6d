#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/nn.hpp"

namespace tb {

// Everything a finished run leaves behind. Wall seconds are operational
// metadata: they go to the CSV index only, never into the record document,
// so replaying a config reproduces the document byte for byte.
struct ExperimentRecord {
    std::string config_hash;
    std::string canonical_config;  // resolved config, canonical JSON
    std::string problem_id;
    std::string solver;
    std::string preset;
    std::string initializer;
    uint64_t seed = 0;
    double initial_loss = 0.0;         // before the first update
    std::vector<double> loss_trace;    // one entry per completed epoch
    std::vector<double> accuracy_trace;
    double final_loss = 0.0;           // last trace entry, or the initial loss
    double final_accuracy = -1.0;      // -1 = not measured
    bool failed = false;               // loss or weights left the finite range
    std::string failure;
    double seconds = 0.0;
};

// A problem ready to train on: materialized data plus the architecture
// sized to it (smooth variant applied when the config asks for it).
struct Problem {
    Dataset train;
    Dataset test;
    ArchitectureSpec arch;
    std::string id;
};

Problem prepare_problem(const RunConfig& cfg);

// One full training run. Divergence is not an exception here: the record
// comes back marked failed with the completed epochs kept.
ExperimentRecord run_training(const RunConfig& cfg);
ExperimentRecord run_training(const RunConfig& cfg, const Problem& prob);

// One run per (seed, initializer), seeds outermost, sharing one problem
// instance. Worker count parallelizes across runs; records always come
// back in enumeration order.
std::vector<ExperimentRecord> multistart(const RunConfig& tmpl, const MultistartSpec& spec,
                                         size_t workers = 1);

struct GridOutcome {
    size_t best_index = 0;
    HyperParams best;
    std::vector<ExperimentRecord> records;  // enumeration order, last axis fastest
};

// Exhaustive sweep over the grid. The winner has the highest final test
// accuracy; ties fall to lower final train loss, then to enumeration order.
GridOutcome grid_search(const RunConfig& tmpl, const GridSpec& grid, size_t workers = 1);

// Success-rate curves: for each solver s and relaxation tau, the fraction
// of problems p with f_ps <= fL_p + tau (f0_p - fL_p), where fL_p is the
// best final loss any solver reached on p and f0_p the shared start.
// Failed runs count with their starting loss, never better.
struct ProfileCurve {
    std::string solver;
    std::vector<double> tau;
    std::vector<double> sigma;
};

std::vector<double> default_tau_grid();  // 50 log-spaced points in [1e-4, 1]

std::vector<ProfileCurve> success_rate_profiles(const std::vector<ExperimentRecord>& records,
                                                const std::vector<double>& tau_grid);

// Checks the qualitative orderings the study reports: the five tuned
// solvers all end below adadelta/adagrad/ftrl, and ftrl moves least
// relative to its start. Missing solvers mark the check incomplete rather
// than failing it.
struct FindingsReport {
    std::vector<std::string> lines;  // one verdict per assertion
    bool pass = true;                // every executed assertion held
    bool complete = true;            // all eight solvers were present
};

FindingsReport qualitative_findings_check(const std::vector<ExperimentRecord>& records);

// Persistence: one run-<hash>.json per record, an append-only index.csv
// (the only place wall seconds appear), and a manifest.json tying hashes
// to files.
std::string record_to_json(const ExperimentRecord& rec);
ExperimentRecord record_from_json(const std::string& text);

void save_record(const ExperimentRecord& rec, const std::string& out_dir);
std::vector<ExperimentRecord> load_records(const std::string& dir);

std::string profiles_csv(const std::vector<ProfileCurve>& curves);
void save_profiles(const std::vector<ProfileCurve>& curves, const std::string& out_dir);

} // namespace tb
