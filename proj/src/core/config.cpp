#include "core/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "core/error.hpp"

namespace tb {

using json = nlohmann::json;

namespace {

[[noreturn]] void parse_fail_at(const std::string& text, size_t byte, const std::string& what) {
    size_t line = 1, column = 1;
    for (size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    fail(errc::parse_error,
         "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what);
}

json parse_json_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        parse_fail_at(text, e.byte > 0 ? e.byte - 1 : 0, e.what());
    }
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    require(obj.is_object(), errc::invalid_value, where + " must be a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        require(known, errc::unknown_key, "unexpected key '" + it.key() + "' in " + where);
    }
}

double as_number(const json& v, const std::string& ctx) {
    require(v.is_number(), errc::invalid_value, ctx + " must be a number");
    return v.get<double>();
}

uint64_t as_count(const json& v, const std::string& ctx) {
    require(v.is_number_integer(), errc::invalid_value, ctx + " must be a nonnegative integer");
    if (v.is_number_unsigned()) return v.get<uint64_t>();
    const auto signed_value = v.get<int64_t>();
    require(signed_value >= 0, errc::invalid_value, ctx + " must be a nonnegative integer");
    return static_cast<uint64_t>(signed_value);
}

bool as_bool(const json& v, const std::string& ctx) {
    require(v.is_boolean(), errc::invalid_value, ctx + " must be true or false");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& ctx) {
    require(v.is_string(), errc::invalid_value, ctx + " must be a string");
    return v.get<std::string>();
}

constexpr const char* HYPER_KEYS[] = {
    "eta",      "beta",    "beta1",    "beta2",          "epsilon",
    "rho",      "lambda",  "nesterov", "amsgrad",        "centered",
    "adam_standard_correction", "adadelta_strict",
    "history",  "wolfe_c1", "wolfe_c2", "max_line_evals", "curvature_floor"};

bool is_hyper_key(const std::string& key) {
    for (const char* k : HYPER_KEYS)
        if (key == k) return true;
    return false;
}

void apply_hyper_json(HyperParams& hp, const std::string& key, const json& v) {
    const std::string ctx = "optimizer." + key;
    if (hyper_key_is_boolean(key)) {
        set_hyper_value(hp, key, as_bool(v, ctx) ? 1.0 : 0.0);
    } else if (key == "history" || key == "max_line_evals") {
        set_hyper_value(hp, key, static_cast<double>(as_count(v, ctx)));
    } else {
        set_hyper_value(hp, key, as_number(v, ctx));
    }
}

SyntheticSpec synthetic_from_json(const json& s) {
    check_keys(s, "problem.synthetic",
               {"classes", "per_class", "channels", "height", "width", "noise_sigma", "seed"});
    SyntheticSpec spec;
    if (auto* v = find(s, "classes")) spec.classes = as_count(*v, "problem.synthetic.classes");
    if (auto* v = find(s, "per_class")) spec.per_class = as_count(*v, "problem.synthetic.per_class");
    if (auto* v = find(s, "channels")) spec.channels = as_count(*v, "problem.synthetic.channels");
    if (auto* v = find(s, "height")) spec.height = as_count(*v, "problem.synthetic.height");
    if (auto* v = find(s, "width")) spec.width = as_count(*v, "problem.synthetic.width");
    if (auto* v = find(s, "noise_sigma"))
        spec.noise_sigma = as_number(*v, "problem.synthetic.noise_sigma");
    if (auto* v = find(s, "seed")) spec.seed = as_count(*v, "problem.synthetic.seed");
    return spec;
}

std::vector<std::string> paths_from_json(const json& v, const std::string& ctx) {
    require(v.is_array(), errc::invalid_value, ctx + " must be an array of paths");
    std::vector<std::string> out;
    for (const auto& item : v) out.push_back(as_string(item, ctx + " entry"));
    return out;
}

RunConfig config_from_json(const json& root) {
    require(root.is_object(), errc::invalid_value, "config root must be a JSON object");
    check_keys(root, "config",
               {"problem", "optimizer", "epochs", "batch", "augment", "initializer", "bias_init",
                "seed", "smooth_mode", "eval_each_epoch"});

    RunConfig cfg;
    if (auto* v = find(root, "seed")) cfg.seed = as_count(*v, "seed");

    if (auto* p = find(root, "problem")) {
        check_keys(*p, "problem",
                   {"dataset", "architecture", "train_paths", "test_paths", "synthetic",
                    "train_fraction"});
        if (auto* v = find(*p, "dataset")) cfg.problem.dataset = as_string(*v, "problem.dataset");
        if (auto* v = find(*p, "architecture"))
            cfg.problem.architecture = as_string(*v, "problem.architecture");
        if (auto* v = find(*p, "train_paths"))
            cfg.problem.train_paths = paths_from_json(*v, "problem.train_paths");
        if (auto* v = find(*p, "test_paths"))
            cfg.problem.test_paths = paths_from_json(*v, "problem.test_paths");
        if (auto* v = find(*p, "synthetic")) cfg.problem.synthetic = synthetic_from_json(*v);
        if (auto* v = find(*p, "train_fraction"))
            cfg.problem.train_fraction = as_number(*v, "problem.train_fraction");
    }

    if (auto* o = find(root, "optimizer")) {
        std::vector<const char*> allowed = {"name", "preset"};
        allowed.insert(allowed.end(), std::begin(HYPER_KEYS), std::end(HYPER_KEYS));
        require(o->is_object(), errc::invalid_value, "optimizer must be a JSON object");
        for (auto it = o->begin(); it != o->end(); ++it) {
            bool known = false;
            for (const char* k : allowed)
                if (it.key() == k) {
                    known = true;
                    break;
                }
            require(known, errc::unknown_key, "unexpected key '" + it.key() + "' in optimizer");
        }
        if (auto* v = find(*o, "name")) cfg.optimizer = as_string(*v, "optimizer.name");
        if (auto* v = find(*o, "preset")) cfg.preset = as_string(*v, "optimizer.preset");
    }
    cfg.hyper = preset_hyper_params(algo_from_name(cfg.optimizer), cfg.preset);
    if (auto* o = find(root, "optimizer"))
        for (auto it = o->begin(); it != o->end(); ++it)
            if (is_hyper_key(it.key())) apply_hyper_json(cfg.hyper, it.key(), it.value());

    if (auto* e = find(root, "epochs")) {
        if (e->is_string()) {
            const std::string label = e->get<std::string>();
            if (label == "default")
                cfg.epochs = 100;
            else if (label == "tuned")
                cfg.epochs = 50;
            else if (label == "large")
                cfg.epochs = 30;
            else
                fail(errc::invalid_value,
                     "epochs must be a count or one of default/tuned/large, got '" + label + "'");
        } else {
            cfg.epochs = as_count(*e, "epochs");
        }
    } else {
        cfg.epochs = cfg.preset == "tuned" ? 50 : 100;
    }

    if (auto* b = find(root, "batch")) {
        check_keys(*b, "batch", {"size", "drop_last"});
        if (auto* v = find(*b, "size")) cfg.batch.batch_size = as_count(*v, "batch.size");
        if (auto* v = find(*b, "drop_last")) cfg.batch.drop_last = as_bool(*v, "batch.drop_last");
    }
    cfg.batch.seed = cfg.seed;

    if (auto* a = find(root, "augment")) {
        check_keys(*a, "augment",
                   {"hflip", "vflip", "rotate", "brightness", "contrast_lo", "contrast_hi",
                    "noise_sigma"});
        if (auto* v = find(*a, "hflip")) cfg.augment.hflip = as_bool(*v, "augment.hflip");
        if (auto* v = find(*a, "vflip")) cfg.augment.vflip = as_bool(*v, "augment.vflip");
        if (auto* v = find(*a, "rotate")) cfg.augment.rotate = as_bool(*v, "augment.rotate");
        if (auto* v = find(*a, "brightness"))
            cfg.augment.brightness = as_number(*v, "augment.brightness");
        if (auto* v = find(*a, "contrast_lo"))
            cfg.augment.contrast_lo = as_number(*v, "augment.contrast_lo");
        if (auto* v = find(*a, "contrast_hi"))
            cfg.augment.contrast_hi = as_number(*v, "augment.contrast_hi");
        if (auto* v = find(*a, "noise_sigma"))
            cfg.augment.noise_sigma = as_number(*v, "augment.noise_sigma");
    }

    if (auto* v = find(root, "initializer"))
        cfg.initializer = init_from_name(as_string(*v, "initializer"));
    if (auto* v = find(root, "bias_init")) {
        const std::string label = as_string(*v, "bias_init");
        if (label == "zero")
            cfg.bias_init = BiasInit::zero;
        else if (label == "sampled")
            cfg.bias_init = BiasInit::sampled;
        else
            fail(errc::invalid_value, "bias_init must be zero or sampled, got '" + label + "'");
    }
    if (auto* v = find(root, "smooth_mode")) cfg.smooth_mode = as_bool(*v, "smooth_mode");
    if (auto* v = find(root, "eval_each_epoch"))
        cfg.eval_each_epoch = as_bool(*v, "eval_each_epoch");

    cfg.validate();
    return cfg;
}

json parse_override_value(const std::string& text) {
    // Values that read as JSON keep their type; anything else is a string.
    if (json::accept(text)) return json::parse(text);
    return json(text);
}

void apply_override(json& root, const std::string& pair) {
    const auto eq = pair.find('=');
    require(eq != std::string::npos && eq > 0, errc::invalid_value,
            "override must look like key=value, got '" + pair + "'");
    const std::string dotted = pair.substr(0, eq);
    const std::string value = pair.substr(eq + 1);

    json* node = &root;
    size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const std::string part = dotted.substr(start, dot - start);
        require(!part.empty(), errc::invalid_value, "override key has an empty segment: '" + dotted + "'");
        if (dot == std::string::npos) {
            (*node)[part] = parse_override_value(value);
            return;
        }
        json& next = (*node)[part];
        if (next.is_null()) next = json::object();
        require(next.is_object(), errc::invalid_value,
                "override path '" + dotted + "' descends into a non-object");
        node = &next;
        start = dot + 1;
    }
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), errc::io_error, "cannot open config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_json_text(buffer.str());
}

json with_overrides(json doc, const std::vector<std::string>& overrides) {
    for (const auto& pair : overrides) apply_override(doc, pair);
    return doc;
}

json load_with_overrides(const std::string& path, const std::vector<std::string>& overrides) {
    return with_overrides(load_json_file(path), overrides);
}

MultistartSpec multistart_from_json(const json* section) {
    MultistartSpec spec;
    spec.initializers = {Init::glorot_uniform, Init::lecun_normal};
    spec.seeds = paper_seed_list();
    if (section) {
        check_keys(*section, "multistart", {"seeds", "initializers"});
        if (auto* v = find(*section, "seeds")) {
            if (v->is_string()) {
                require(v->get<std::string>() == "paper", errc::invalid_value,
                        "multistart.seeds accepts an array or the string 'paper'");
            } else {
                require(v->is_array(), errc::invalid_value, "multistart.seeds must be an array");
                spec.seeds.clear();
                for (const auto& s : *v) spec.seeds.push_back(as_count(s, "multistart.seeds entry"));
            }
        }
        if (auto* v = find(*section, "initializers")) {
            require(v->is_array(), errc::invalid_value, "multistart.initializers must be an array");
            spec.initializers.clear();
            for (const auto& s : *v)
                spec.initializers.push_back(
                    init_from_name(as_string(s, "multistart.initializers entry")));
        }
    }
    spec.validate();
    return spec;
}

GridSpec grid_from_json(const json* section, Algo algo) {
    if (!section || (section->is_string() && section->get<std::string>() == "preset"))
        return preset_grid(algo);
    require(section->is_object(), errc::invalid_value,
            "grid must be an object of value lists or the string 'preset'");
    GridSpec spec;
    for (auto it = section->begin(); it != section->end(); ++it) {
        require(is_hyper_key(it.key()), errc::unknown_key,
                "unexpected key '" + it.key() + "' in grid");
        GridAxis axis;
        axis.key = it.key();
        axis.boolean = hyper_key_is_boolean(it.key());
        require(it.value().is_array(), errc::invalid_value,
                "grid." + it.key() + " must be an array of values");
        for (const auto& v : it.value()) {
            if (axis.boolean)
                axis.values.push_back(as_bool(v, "grid." + it.key() + " entry") ? 1.0 : 0.0);
            else
                axis.values.push_back(as_number(v, "grid." + it.key() + " entry"));
        }
        spec.axes.push_back(std::move(axis));
    }
    spec.validate();
    return spec;
}

} // namespace

Algo RunConfig::algo() const { return algo_from_name(optimizer); }

void RunConfig::validate() const {
    const Algo a = algo();
    hyper.validate(a);
    require(preset == "default" || preset == "tuned", errc::invalid_value,
            "optimizer.preset must be default or tuned, got '" + preset + "'");

    const std::string& ds = problem.dataset;
    require(ds == "synthetic" || ds == "cifar10" || ds == "cifar100" || ds == "ppm",
            errc::invalid_value, "unknown dataset '" + ds + "'");
    if (ds == "synthetic")
        require(problem.train_paths.empty() && problem.test_paths.empty(), errc::invalid_value,
                "the synthetic dataset takes no paths");
    if (ds == "cifar10" || ds == "cifar100")
        require(!problem.train_paths.empty(), errc::invalid_value,
                ds + " needs problem.train_paths");
    if (ds == "ppm") {
        require(problem.train_paths.size() == 1, errc::invalid_value,
                "ppm needs exactly one train_paths entry, the image root");
        require(problem.test_paths.empty(), errc::invalid_value,
                "ppm datasets are split by train_fraction, not test_paths");
    }
    require(problem.train_fraction > 0.0 && problem.train_fraction < 1.0, errc::invalid_value,
            "train_fraction must lie strictly between 0 and 1");
    require(problem.synthetic.classes >= 2 && problem.synthetic.per_class >= 1,
            errc::invalid_value, "synthetic needs classes >= 2 and per_class >= 1");
    require(problem.synthetic.noise_sigma >= 0.0, errc::invalid_value,
            "synthetic.noise_sigma must be >= 0");

    // Resolves the preset name; throws for names the builder does not know.
    // The spatial extent is a placeholder, the real one comes from the data.
    (void)make_architecture(problem.architecture, {3, 512, 512}, 2);

    require(batch.batch_size >= 1, errc::bad_batch_size, "batch.size must be >= 1");
    require(augment.brightness >= 0.0, errc::invalid_value, "augment.brightness must be >= 0");
    require(augment.contrast_lo > 0.0 && augment.contrast_hi >= augment.contrast_lo,
            errc::invalid_value, "augment contrast range must satisfy 0 < lo <= hi");
    require(augment.noise_sigma >= 0.0, errc::invalid_value, "augment.noise_sigma must be >= 0");

    if (a == Algo::lbfgs)
        require(smooth_mode, errc::invalid_value,
                "the quasi-newton solver requires smooth_mode (and runs full batch)");
}

void MultistartSpec::validate() const {
    require(!seeds.empty(), errc::invalid_value, "multistart needs at least one seed");
    std::set<uint64_t> seen;
    for (uint64_t s : seeds)
        require(seen.insert(s).second, errc::duplicate_seed,
                "seed " + std::to_string(s) + " appears twice");
    require(!initializers.empty(), errc::invalid_value,
            "multistart needs at least one initializer");
    std::set<int> inits;
    for (Init k : initializers)
        require(inits.insert(static_cast<int>(k)).second, errc::invalid_value,
                "initializer listed twice");
}

const std::vector<uint64_t>& paper_seed_list() {
    static const std::vector<uint64_t> seeds = {0,      100,    500,     1000,    1500,    10000,
                                                15000,  100000, 150000,  1000000, 1500000, 1699806};
    return seeds;
}

size_t GridSpec::cardinality() const {
    size_t n = 1;
    for (const auto& axis : axes) n *= axis.values.size();
    return n;
}

HyperParams GridSpec::point(const HyperParams& base, size_t index) const {
    require(index < cardinality(), errc::invalid_value, "grid index out of range");
    HyperParams hp = base;
    size_t rest = index;
    for (size_t i = axes.size(); i-- > 0;) {
        const auto& axis = axes[i];
        const size_t pick = rest % axis.values.size();
        rest /= axis.values.size();
        set_hyper_value(hp, axis.key, axis.values[pick]);
    }
    return hp;
}

void GridSpec::validate() const {
    std::set<std::string> seen;
    for (const auto& axis : axes) {
        require(!axis.values.empty(), errc::empty_grid,
                "grid axis '" + axis.key + "' has no values");
        require(is_hyper_key(axis.key), errc::unknown_key,
                "unexpected key '" + axis.key + "' in grid");
        require(seen.insert(axis.key).second, errc::invalid_value,
                "grid axis '" + axis.key + "' listed twice");
    }
}

GridSpec preset_grid(Algo algo) {
    const std::vector<double> etas3 = {1e-2, 1e-3, 1e-4};
    GridSpec g;
    switch (algo) {
        case Algo::adam:
            g.axes = {{"eta", etas3},
                      {"beta1", {0.6, 0.9, 0.99}},
                      {"beta2", {0.99, 0.999, 0.9999}},
                      {"epsilon", {1e-6, 1e-7, 1e-8}},
                      {"amsgrad", {0.0, 1.0}, true}};
            break;
        case Algo::adamax:
        case Algo::nadam:
            g.axes = {{"eta", etas3},
                      {"beta1", {0.6, 0.9, 0.99}},
                      {"beta2", {0.99, 0.999, 0.9999}},
                      {"epsilon", {1e-6, 1e-7, 1e-8}}};
            break;
        case Algo::rmsprop:
            g.axes = {{"eta", etas3},
                      {"beta", {0.0, 0.5, 0.9}},
                      {"epsilon", {1e-6, 1e-7, 1e-8}},
                      {"rho", {0.6, 0.9, 0.99}},
                      {"centered", {0.0, 1.0}, true}};
            break;
        case Algo::sgd:
            g.axes = {{"eta", {1e-1, 1e-2, 1e-3, 1e-4}},
                      {"beta", {0.0, 0.5, 0.9}},
                      {"nesterov", {0.0, 1.0}, true}};
            break;
        default:
            fail(errc::empty_grid,
                 std::string("no search ranges exist for ") + algo_name(algo) +
                     "; the study never tuned it");
    }
    return g;
}

bool hyper_key_is_boolean(const std::string& key) {
    return key == "nesterov" || key == "amsgrad" || key == "centered" ||
           key == "adam_standard_correction" || key == "adadelta_strict";
}

void set_hyper_value(HyperParams& hp, const std::string& key, double value) {
    if (key == "eta") hp.eta = value;
    else if (key == "beta") hp.beta = value;
    else if (key == "beta1") hp.beta1 = value;
    else if (key == "beta2") hp.beta2 = value;
    else if (key == "epsilon") hp.epsilon = value;
    else if (key == "rho") hp.rho = value;
    else if (key == "lambda") hp.lambda = value;
    else if (key == "wolfe_c1") hp.wolfe_c1 = value;
    else if (key == "wolfe_c2") hp.wolfe_c2 = value;
    else if (key == "curvature_floor") hp.curvature_floor = value;
    else if (key == "history") {
        require(value >= 0.0 && value == std::floor(value), errc::invalid_value,
                "history must be a nonnegative integer");
        hp.history = static_cast<size_t>(value);
    } else if (key == "max_line_evals") {
        require(value == std::floor(value), errc::invalid_value,
                "max_line_evals must be an integer");
        hp.max_line_evals = static_cast<int>(value);
    } else if (key == "nesterov") hp.nesterov = value != 0.0;
    else if (key == "amsgrad") hp.amsgrad = value != 0.0;
    else if (key == "centered") hp.centered = value != 0.0;
    else if (key == "adam_standard_correction") hp.adam_standard_correction = value != 0.0;
    else if (key == "adadelta_strict") hp.adadelta_strict = value != 0.0;
    else fail(errc::unknown_key, "unknown hyperparameter '" + key + "'");
}

namespace {

MultistartConfig multistart_config_from_doc(json doc) {
    const json* section = nullptr;
    json held;
    if (doc.is_object() && doc.contains("multistart")) {
        held = doc.at("multistart");
        section = &held;
        doc.erase("multistart");
    }
    return MultistartConfig{config_from_json(doc), multistart_from_json(section)};
}

GridConfig grid_config_from_doc(json doc) {
    const json* section = nullptr;
    json held;
    if (doc.is_object() && doc.contains("grid")) {
        held = doc.at("grid");
        section = &held;
        doc.erase("grid");
    }
    RunConfig run = config_from_json(doc);
    return GridConfig{run, grid_from_json(section, run.algo())};
}

} // namespace

RunConfig parse_run_config(const std::string& json_text) {
    return config_from_json(parse_json_text(json_text));
}

RunConfig parse_run_config(const std::string& json_text,
                           const std::vector<std::string>& overrides) {
    return config_from_json(with_overrides(parse_json_text(json_text), overrides));
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    return config_from_json(load_with_overrides(path, overrides));
}

MultistartConfig parse_multistart_config(const std::string& json_text,
                                         const std::vector<std::string>& overrides) {
    return multistart_config_from_doc(with_overrides(parse_json_text(json_text), overrides));
}

MultistartConfig load_multistart_config(const std::string& path,
                                        const std::vector<std::string>& overrides) {
    return multistart_config_from_doc(load_with_overrides(path, overrides));
}

GridConfig parse_grid_config(const std::string& json_text,
                             const std::vector<std::string>& overrides) {
    return grid_config_from_doc(with_overrides(parse_json_text(json_text), overrides));
}

GridConfig load_grid_config(const std::string& path, const std::vector<std::string>& overrides) {
    return grid_config_from_doc(load_with_overrides(path, overrides));
}

std::string merge_config_document(const std::string& json_text,
                                  const std::vector<std::string>& overrides) {
    return with_overrides(parse_json_text(json_text), overrides).dump();
}

std::string canonical_config_json(const RunConfig& cfg) {
    json j;
    j["problem"] = {{"dataset", cfg.problem.dataset},
                    {"architecture", cfg.problem.architecture},
                    {"train_paths", cfg.problem.train_paths},
                    {"test_paths", cfg.problem.test_paths},
                    {"train_fraction", cfg.problem.train_fraction},
                    {"synthetic",
                     {{"classes", cfg.problem.synthetic.classes},
                      {"per_class", cfg.problem.synthetic.per_class},
                      {"channels", cfg.problem.synthetic.channels},
                      {"height", cfg.problem.synthetic.height},
                      {"width", cfg.problem.synthetic.width},
                      {"noise_sigma", cfg.problem.synthetic.noise_sigma},
                      {"seed", cfg.problem.synthetic.seed}}}};
    j["optimizer"] = {{"name", cfg.optimizer},
                      {"preset", cfg.preset},
                      {"eta", cfg.hyper.eta},
                      {"beta", cfg.hyper.beta},
                      {"beta1", cfg.hyper.beta1},
                      {"beta2", cfg.hyper.beta2},
                      {"epsilon", cfg.hyper.epsilon},
                      {"rho", cfg.hyper.rho},
                      {"lambda", cfg.hyper.lambda},
                      {"nesterov", cfg.hyper.nesterov},
                      {"amsgrad", cfg.hyper.amsgrad},
                      {"centered", cfg.hyper.centered},
                      {"adam_standard_correction", cfg.hyper.adam_standard_correction},
                      {"adadelta_strict", cfg.hyper.adadelta_strict},
                      {"history", cfg.hyper.history},
                      {"wolfe_c1", cfg.hyper.wolfe_c1},
                      {"wolfe_c2", cfg.hyper.wolfe_c2},
                      {"max_line_evals", cfg.hyper.max_line_evals},
                      {"curvature_floor", cfg.hyper.curvature_floor}};
    j["epochs"] = cfg.epochs;
    j["batch"] = {{"size", cfg.batch.batch_size}, {"drop_last", cfg.batch.drop_last}};
    j["augment"] = {{"hflip", cfg.augment.hflip},
                    {"vflip", cfg.augment.vflip},
                    {"rotate", cfg.augment.rotate},
                    {"brightness", cfg.augment.brightness},
                    {"contrast_lo", cfg.augment.contrast_lo},
                    {"contrast_hi", cfg.augment.contrast_hi},
                    {"noise_sigma", cfg.augment.noise_sigma}};
    j["initializer"] = init_name(cfg.initializer);
    j["bias_init"] = cfg.bias_init == BiasInit::zero ? "zero" : "sampled";
    j["seed"] = cfg.seed;
    j["smooth_mode"] = cfg.smooth_mode;
    j["eval_each_epoch"] = cfg.eval_each_epoch;
    return j.dump();  // std::map keys, so the emitted order is sorted and stable
}

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string config_hash(const RunConfig& cfg) {
    const uint64_t h = fnv1a64(canonical_config_json(cfg));
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i) out[15 - i] = digits[(h >> (4 * i)) & 0xf];
    return out;
}

} // namespace tb
