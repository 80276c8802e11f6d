#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trainbench.h"

// Thin shell over the shared library: parse flags, hand JSON documents to
// the C API, print what comes back. Exit codes are part of the contract:
// 0 success, 1 a training run left the finite range, 2 usage or config
// trouble.

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitUsage = 2;

struct ConfigDeleter {
    void operator()(tb_config* p) const { tb_config_free(p); }
};
struct RecordsDeleter {
    void operator()(tb_records* p) const { tb_records_free(p); }
};
struct ProfilesDeleter {
    void operator()(tb_profiles* p) const { tb_profiles_free(p); }
};
using ConfigPtr = std::unique_ptr<tb_config, ConfigDeleter>;
using RecordsPtr = std::unique_ptr<tb_records, RecordsDeleter>;
using ProfilesPtr = std::unique_ptr<tb_profiles, ProfilesDeleter>;

// Owns a string the library allocated for us.
struct OwnedString {
    char* s = nullptr;
    ~OwnedString() { tb_string_free(s); }
    const char* get() const { return s ? s : ""; }
};

struct Options {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    int workers = 1;
    unsigned long long seed = 0;
    bool seed_given = false;
    bool verbose = false;
};

int report_status(tb_status st) {
    std::fprintf(stderr, "error: %s\n", tb_last_error());
    return st == TB_ERROR_RUN ? kExitRunFailure : kExitUsage;
}

// --out falls back to the TRAINBENCH_OUT environment variable; empty means
// "do not persist" for commands where output is optional.
std::string resolve_out(const Options& opt) {
    if (!opt.out_dir.empty()) return opt.out_dir;
    const char* env = std::getenv("TRAINBENCH_OUT");
    return env ? env : "";
}

int load_config(const Options& opt, ConfigPtr& out) {
    std::vector<std::string> overrides = opt.overrides;
    if (opt.seed_given) overrides.push_back("seed=" + std::to_string(opt.seed));
    std::vector<const char*> raw;
    raw.reserve(overrides.size());
    for (const auto& s : overrides) raw.push_back(s.c_str());
    tb_config* cfg = nullptr;
    tb_status st = tb_config_load(opt.config_path.c_str(), raw.data(), raw.size(), &cfg);
    if (st != TB_OK) return report_status(st);
    out.reset(cfg);
    return kExitOk;
}

int print_records(const tb_records* recs, bool verbose) {
    OwnedString table;
    tb_status st = tb_records_summary(recs, &table.s);
    if (st != TB_OK) return report_status(st);
    std::fputs(table.get(), stdout);
    if (verbose) {
        size_t n = 0;
        tb_records_count(recs, &n);
        for (size_t i = 0; i < n; ++i) {
            OwnedString body;
            st = tb_records_json(recs, i, &body.s);
            if (st != TB_OK) return report_status(st);
            std::fputs(body.get(), stdout);
        }
    }
    return kExitOk;
}

int save_if_requested(const tb_records* recs, const Options& opt) {
    std::string dir = resolve_out(opt);
    if (dir.empty()) return kExitOk;
    tb_status st = tb_records_save(recs, dir.c_str());
    if (st != TB_OK) return report_status(st);
    size_t n = 0;
    tb_records_count(recs, &n);
    std::printf("wrote %zu record%s under %s\n", n, n == 1 ? "" : "s", dir.c_str());
    return kExitOk;
}

int cmd_train(const Options& opt) {
    ConfigPtr cfg;
    if (int rc = load_config(opt, cfg)) return rc;
    tb_records* raw = nullptr;
    tb_status st = tb_train(cfg.get(), &raw);
    if (st != TB_OK) return report_status(st);
    RecordsPtr recs(raw);
    if (int rc = print_records(recs.get(), opt.verbose)) return rc;
    if (int rc = save_if_requested(recs.get(), opt)) return rc;
    size_t failed = 0;
    tb_records_failed(recs.get(), &failed);
    if (failed > 0) {
        std::fprintf(stderr, "training left the finite range; the record holds the partial trace\n");
        return kExitRunFailure;
    }
    return kExitOk;
}

// Sweeps treat a diverged point as data, not as a command failure: some
// corners of a grid are expected to blow up.
int cmd_grid_search(const Options& opt) {
    ConfigPtr cfg;
    if (int rc = load_config(opt, cfg)) return rc;
    tb_records* raw = nullptr;
    size_t best = 0;
    tb_status st = tb_grid_search(cfg.get(), opt.workers, &best, &raw);
    if (st != TB_OK) return report_status(st);
    RecordsPtr recs(raw);
    if (int rc = print_records(recs.get(), opt.verbose)) return rc;
    size_t n = 0, failed = 0;
    tb_records_count(recs.get(), &n);
    tb_records_failed(recs.get(), &failed);
    std::printf("best grid point: run %zu of %zu", best + 1, n);
    if (failed > 0) std::printf(" (%zu diverged)", failed);
    std::printf("\n");
    return save_if_requested(recs.get(), opt);
}

int cmd_multistart(const Options& opt) {
    ConfigPtr cfg;
    if (int rc = load_config(opt, cfg)) return rc;
    tb_records* raw = nullptr;
    tb_status st = tb_multistart(cfg.get(), opt.workers, &raw);
    if (st != TB_OK) return report_status(st);
    RecordsPtr recs(raw);
    if (int rc = print_records(recs.get(), opt.verbose)) return rc;
    size_t failed = 0;
    tb_records_failed(recs.get(), &failed);
    if (failed > 0) std::printf("%zu start%s diverged\n", failed, failed == 1 ? "" : "s");
    return save_if_requested(recs.get(), opt);
}

int open_records(const Options& opt, RecordsPtr& out, std::string& dir) {
    dir = resolve_out(opt);
    if (dir.empty()) {
        std::fprintf(stderr, "error: no record directory; pass --out or set TRAINBENCH_OUT\n");
        return kExitUsage;
    }
    tb_records* raw = nullptr;
    tb_status st = tb_records_open(dir.c_str(), &raw);
    if (st != TB_OK) return report_status(st);
    out.reset(raw);
    return kExitOk;
}

int cmd_profiles(const Options& opt) {
    RecordsPtr recs;
    std::string dir;
    if (int rc = open_records(opt, recs, dir)) return rc;
    tb_profiles* raw = nullptr;
    tb_status st = tb_profiles_compute(recs.get(), &raw);
    if (st != TB_OK) return report_status(st);
    ProfilesPtr prof(raw);
    if (opt.verbose) {
        OwnedString csv;
        st = tb_profiles_csv(prof.get(), &csv.s);
        if (st != TB_OK) return report_status(st);
        std::fputs(csv.get(), stdout);
    }
    st = tb_profiles_save(prof.get(), dir.c_str());
    if (st != TB_OK) return report_status(st);
    std::printf("wrote %s/profiles.csv\n", dir.c_str());
    return kExitOk;
}

int cmd_report(const Options& opt) {
    RecordsPtr recs;
    std::string dir;
    if (int rc = open_records(opt, recs, dir)) return rc;
    if (int rc = print_records(recs.get(), opt.verbose)) return rc;
    int pass = 0;
    OwnedString findings;
    tb_status st = tb_findings(recs.get(), &pass, &findings.s);
    if (st == TB_OK) {
        std::printf("\nsolver ordering:\n%s", findings.get());
    } else {
        std::printf("\nsolver ordering unavailable: %s\n", tb_last_error());
    }
    return kExitOk;
}

int cmd_verify(const Options&) {
    int failures = 0;
    OwnedString report;
    tb_status st = tb_verify(&failures, &report.s);
    if (st != TB_OK) return report_status(st);
    std::fputs(report.get(), stdout);
    return failures == 0 ? kExitOk : kExitRunFailure;
}

} // namespace

int main(int argc, char** argv) {
    Options opt;
    CLI::App app{std::string("training-optimization benchmark (library ") + tb_version() +
                 "). --out defaults to $TRAINBENCH_OUT where it applies."};
    app.require_subcommand(1);

    std::vector<CLI::Option*> seed_opts;
    auto add_config_flags = [&](CLI::App* cmd, bool with_workers) {
        cmd->add_option("--config", opt.config_path, "JSON experiment description")->required();
        cmd->add_option("--out", opt.out_dir, "directory for records and reports");
        cmd->add_option("--set", opt.overrides,
                        "dotted-path override, key=value (repeatable)");
        seed_opts.push_back(cmd->add_option("--seed", opt.seed, "replace the run seed"));
        if (with_workers)
            cmd->add_option("--workers", opt.workers, "parallel runs (default 1)")
                ->check(CLI::PositiveNumber);
        cmd->add_flag("--verbose", opt.verbose, "also print full record JSON");
    };

    CLI::App* train = app.add_subcommand("train", "run one training configuration");
    add_config_flags(train, false);
    CLI::App* grid = app.add_subcommand("grid-search", "sweep the hyperparameter grid");
    add_config_flags(grid, true);
    CLI::App* multi = app.add_subcommand("multistart", "repeat a run across seeds and initializers");
    add_config_flags(multi, true);

    CLI::App* profiles = app.add_subcommand("profiles", "success-rate curves over saved records");
    profiles->add_option("--out", opt.out_dir, "record directory (also receives profiles.csv)");
    profiles->add_flag("--verbose", opt.verbose, "also print the CSV");
    CLI::App* report = app.add_subcommand("report", "summarize saved records");
    report->add_option("--out", opt.out_dir, "record directory");
    report->add_flag("--verbose", opt.verbose, "also print full record JSON");
    CLI::App* verify = app.add_subcommand("verify", "run the built-in self checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    for (const CLI::Option* o : seed_opts) opt.seed_given = opt.seed_given || o->count() > 0;

    if (train->parsed()) return cmd_train(opt);
    if (grid->parsed()) return cmd_grid_search(opt);
    if (multi->parsed()) return cmd_multistart(opt);
    if (profiles->parsed()) return cmd_profiles(opt);
    if (report->parsed()) return cmd_report(opt);
    if (verify->parsed()) return cmd_verify(opt);
    return kExitUsage;
}
