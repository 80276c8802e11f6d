#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/nn.hpp"
#include "core/optim.hpp"

namespace tb {

// What to train on: a dataset source paired with an architecture preset.
// The pair is the unit the benchmark calls a problem.
struct ProblemSpec {
    std::string dataset = "synthetic";  // synthetic | cifar10 | cifar100 | ppm
    std::string architecture = "baseline-mini";
    std::vector<std::string> train_paths;  // cifar record files, or the ppm root dir
    std::vector<std::string> test_paths;   // optional held-out cifar files
    SyntheticSpec synthetic;
    double train_fraction = 0.8;  // used when no explicit test files exist

    std::string id() const { return dataset + "/" + architecture; }
};

// One fully resolved training run. Built from a JSON document; every field
// has a default, so {} is a valid config.
struct RunConfig {
    ProblemSpec problem;
    std::string optimizer = "adam";
    std::string preset = "default";  // default | tuned
    HyperParams hyper;               // preset values with any literal overrides applied
    size_t epochs = 100;
    BatchPlan batch;                 // seed always mirrors the run seed
    AugmentationSpec augment;
    Init initializer = Init::lecun_normal;
    BiasInit bias_init = BiasInit::zero;
    uint64_t seed = 1699806;
    bool smooth_mode = false;  // silu + mean pooling + no dropout
    bool eval_each_epoch = true;

    Algo algo() const;
    void validate() const;
};

struct MultistartSpec {
    std::vector<uint64_t> seeds;
    std::vector<Init> initializers;

    void validate() const;  // DuplicateSeed and friends
};

// The study's stock seed list.
const std::vector<uint64_t>& paper_seed_list();

// One grid-search dimension over a hyperparameter. Boolean switches carry
// 0/1 values with the flag set.
struct GridAxis {
    std::string key;
    std::vector<double> values;
    bool boolean = false;
};

struct GridSpec {
    std::vector<GridAxis> axes;  // enumerated odometer-style, last axis fastest

    size_t cardinality() const;
    // Hyperparameters at a given odometer position, applied over a base.
    HyperParams point(const HyperParams& base, size_t index) const;
    void validate() const;  // EmptyGrid on a zero-length axis
};

// The stock search ranges for the five tuned algorithms; requesting a grid
// for one of the others is an EmptyGrid error.
GridSpec preset_grid(Algo algo);

// Assigns one hyperparameter by field name; boolean fields treat nonzero
// as true. Unknown names raise UnknownKey.
void set_hyper_value(HyperParams& hp, const std::string& key, double value);
bool hyper_key_is_boolean(const std::string& key);

// Strict JSON loading: unknown keys, malformed values, and out-of-range
// numbers are hard errors. Overrides are dotted paths applied onto the
// document before validation, e.g. "optimizer.eta=0.01". The load_*
// variants read the document from a file, the parse_* variants take it
// as text; both resolve identically.
RunConfig parse_run_config(const std::string& json_text);
RunConfig parse_run_config(const std::string& json_text, const std::vector<std::string>& overrides);
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

// Same as above plus the command-specific section. A missing "multistart"
// section defaults to the stock seeds with both initializers; a missing
// "grid" section defaults to the optimizer's preset ranges.
struct MultistartConfig {
    RunConfig run;
    MultistartSpec spec;
};
MultistartConfig parse_multistart_config(const std::string& json_text,
                                         const std::vector<std::string>& overrides);
MultistartConfig load_multistart_config(const std::string& path,
                                        const std::vector<std::string>& overrides);

struct GridConfig {
    RunConfig run;
    GridSpec spec;
};
GridConfig parse_grid_config(const std::string& json_text,
                             const std::vector<std::string>& overrides);
GridConfig load_grid_config(const std::string& path, const std::vector<std::string>& overrides);

// The syntax-and-override half of loading on its own: parses a document,
// applies overrides, and returns it re-serialized compactly, deferring
// field validation to whichever command consumes it.
std::string merge_config_document(const std::string& json_text,
                                  const std::vector<std::string>& overrides);

// Every resolved field serialized with sorted keys and no whitespace; two
// configs hash equal exactly when this string is equal.
std::string canonical_config_json(const RunConfig& cfg);

uint64_t fnv1a64(const std::string& bytes);
std::string config_hash(const RunConfig& cfg);  // 16 hex digits of the canonical hash

} // namespace tb
