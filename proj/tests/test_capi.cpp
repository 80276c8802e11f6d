#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "trainbench.h"

// Exercises the shared-library boundary the way an embedding application
// would: everything below goes through the C header, never the C++ core.

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct ConfigDeleter {
    void operator()(tb_config* c) const { tb_config_free(c); }
};
struct RecordsDeleter {
    void operator()(tb_records* r) const { tb_records_free(r); }
};
struct ProfilesDeleter {
    void operator()(tb_profiles* p) const { tb_profiles_free(p); }
};
using ConfigPtr = std::unique_ptr<tb_config, ConfigDeleter>;
using RecordsPtr = std::unique_ptr<tb_records, RecordsDeleter>;
using ProfilesPtr = std::unique_ptr<tb_profiles, ProfilesDeleter>;

// Takes ownership of a string the library handed out.
std::string take(char* s) {
    std::string out = s ? s : "";
    tb_string_free(s);
    return out;
}

fs::path scratch_dir(const char* leaf) {
    fs::path dir = fs::temp_directory_path() / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string desk_doc(const std::string& solver, int epochs, int seed = 11) {
    return std::string(R"({
        "problem": {"synthetic": {"classes": 2, "per_class": 6, "noise_sigma": 0.05, "seed": 7}},
        "optimizer": {"name": ")") + solver + R"("},
        "epochs": )" + std::to_string(epochs) + R"(,
        "batch": {"size": 5},
        "eval_each_epoch": false,
        "seed": )" + std::to_string(seed) + R"(
    })";
}

ConfigPtr parse_ok(const std::string& text, const std::vector<const char*>& overrides = {}) {
    tb_config* raw = nullptr;
    REQUIRE_EQ(tb_config_parse(text.c_str(), overrides.data(), overrides.size(), &raw), TB_OK);
    REQUIRE(raw != nullptr);
    return ConfigPtr(raw);
}

RecordsPtr train_ok(const tb_config* cfg) {
    tb_records* raw = nullptr;
    REQUIRE_EQ(tb_train(cfg, &raw), TB_OK);
    REQUIRE(raw != nullptr);
    return RecordsPtr(raw);
}

std::string record_json(const tb_records* recs, size_t index) {
    char* out = nullptr;
    REQUIRE_EQ(tb_records_json(recs, index, &out), TB_OK);
    return take(out);
}

} // namespace

TEST_CASE("the library names itself and starts with a clean error slate") {
    CHECK_EQ(std::string(tb_version()), "1.0.0");
    REQUIRE(tb_last_error() != nullptr);
    CHECK_EQ(std::string(tb_last_error()), "");

    tb_config* cfg = nullptr;
    CHECK_EQ(tb_config_parse("{broken", nullptr, 0, &cfg), TB_ERROR_CONFIG);
    CHECK(cfg == nullptr);
    CHECK(std::string(tb_last_error()).size() > 0);
}

TEST_CASE("freeing nothing is a no-op") {
    tb_config_free(nullptr);
    tb_records_free(nullptr);
    tb_profiles_free(nullptr);
    tb_string_free(nullptr);
}

TEST_CASE("configs parse, canonicalize, and hash through the boundary") {
    const ConfigPtr cfg = parse_ok("{\"seed\": 5, \"epochs\": 2}");

    char* text = nullptr;
    REQUIRE_EQ(tb_config_canonical(cfg.get(), &text), TB_OK);
    const std::string canonical = take(text);
    CHECK_EQ(canonical.front(), '{');
    CHECK(canonical.find("\"seed\":5") != std::string::npos);
    CHECK(canonical.find("\"epochs\":2") != std::string::npos);

    char* hash = nullptr;
    REQUIRE_EQ(tb_config_hash(cfg.get(), &hash), TB_OK);
    const std::string digest = take(hash);
    CHECK_EQ(digest.size(), 16);
    CHECK_EQ(digest.find_first_not_of("0123456789abcdef"), std::string::npos);

    // Key order in the document must not matter to the identity.
    const ConfigPtr flipped = parse_ok("{\"epochs\": 2, \"seed\": 5}");
    REQUIRE_EQ(tb_config_hash(flipped.get(), &hash), TB_OK);
    CHECK_EQ(take(hash), digest);

    // The canonical form is itself a valid document with the same hash.
    const ConfigPtr reparsed = parse_ok(canonical);
    REQUIRE_EQ(tb_config_hash(reparsed.get(), &hash), TB_OK);
    CHECK_EQ(take(hash), digest);
}

TEST_CASE("overrides fold into the document in order") {
    const ConfigPtr cfg =
        parse_ok("{}", {"optimizer.name=sgd", "optimizer.eta=0.5", "epochs=5", "epochs=7"});

    char* text = nullptr;
    REQUIRE_EQ(tb_config_canonical(cfg.get(), &text), TB_OK);
    const std::string canonical = take(text);
    CHECK(canonical.find("\"name\":\"sgd\"") != std::string::npos);
    CHECK(canonical.find("\"eta\":0.5") != std::string::npos);
    CHECK(canonical.find("\"epochs\":7") != std::string::npos);

    tb_config* raw = nullptr;
    const char* broken[] = {"no_equals_here"};
    CHECK_EQ(tb_config_parse("{}", broken, 1, &raw), TB_ERROR_CONFIG);
    const char* null_item[] = {nullptr};
    CHECK_EQ(tb_config_parse("{}", null_item, 1, &raw), TB_ERROR_CONFIG);

    // Syntax is folded eagerly, field validation waits for the consumer.
    const ConfigPtr deferred = parse_ok("{}", {"epochs=potato"});
    CHECK_EQ(tb_config_canonical(deferred.get(), &text), TB_ERROR_CONFIG);
    CHECK(std::string(tb_last_error()).find("epochs") != std::string::npos);
}

TEST_CASE("configs load from disk with the same identity") {
    const fs::path dir = scratch_dir("tb_capi_cfg");
    const std::string doc = desk_doc("sgd", 2);
    std::ofstream(dir / "run.json") << doc;

    tb_config* raw = nullptr;
    REQUIRE_EQ(tb_config_load((dir / "run.json").string().c_str(), nullptr, 0, &raw), TB_OK);
    const ConfigPtr from_file(raw);
    const ConfigPtr from_text = parse_ok(doc);

    char* a = nullptr;
    char* b = nullptr;
    REQUIRE_EQ(tb_config_hash(from_file.get(), &a), TB_OK);
    REQUIRE_EQ(tb_config_hash(from_text.get(), &b), TB_OK);
    CHECK_EQ(take(a), take(b));

    CHECK_EQ(tb_config_load("/no/such/config.json", nullptr, 0, &raw), TB_ERROR_IO);
    CHECK_EQ(tb_config_load(nullptr, nullptr, 0, &raw), TB_ERROR_ARGUMENT);
    CHECK_EQ(tb_config_load((dir / "run.json").string().c_str(), nullptr, 0, nullptr),
             TB_ERROR_ARGUMENT);
}

TEST_CASE("a single run trains and reports through record queries") {
    const ConfigPtr cfg = parse_ok(desk_doc("sgd", 1));
    const RecordsPtr recs = train_ok(cfg.get());

    size_t count = 0;
    REQUIRE_EQ(tb_records_count(recs.get(), &count), TB_OK);
    CHECK_EQ(count, 1);
    size_t failed = 7;
    REQUIRE_EQ(tb_records_failed(recs.get(), &failed), TB_OK);
    CHECK_EQ(failed, 0);

    const json doc = json::parse(record_json(recs.get(), 0));
    CHECK_EQ(doc.at("solver"), "sgd");
    CHECK_EQ(doc.at("problem"), "synthetic/baseline-mini");
    CHECK_EQ(doc.at("loss_trace").size(), 1);
    CHECK_EQ(doc.at("failed"), false);

    char* out = nullptr;
    CHECK_EQ(tb_records_json(recs.get(), 1, &out), TB_ERROR_ARGUMENT);
    CHECK_EQ(tb_records_json(nullptr, 0, &out), TB_ERROR_ARGUMENT);

    char* table = nullptr;
    REQUIRE_EQ(tb_records_summary(recs.get(), &table), TB_OK);
    const std::string summary = take(table);
    CHECK_EQ(summary.rfind("problem", 0), 0);
    CHECK(summary.find("sgd") != std::string::npos);
    CHECK(summary.find(" ok") != std::string::npos);
    CHECK_EQ(std::count(summary.begin(), summary.end(), '\n'), 2);
}

TEST_CASE("a diverged run is a failed record, not an error code") {
    const ConfigPtr cfg = parse_ok(desk_doc("sgd", 3), {"optimizer.eta=5e307"});
    const RecordsPtr recs = train_ok(cfg.get());

    size_t failed = 0;
    REQUIRE_EQ(tb_records_failed(recs.get(), &failed), TB_OK);
    CHECK_EQ(failed, 1);

    const json doc = json::parse(record_json(recs.get(), 0));
    CHECK_EQ(doc.at("failed"), true);
    CHECK(doc.at("failure").get<std::string>().find("finite") != std::string::npos);

    char* table = nullptr;
    REQUIRE_EQ(tb_records_summary(recs.get(), &table), TB_OK);
    CHECK(take(table).find("failed") != std::string::npos);
}

TEST_CASE("rejected configs never produce a records handle") {
    const ConfigPtr cfg = parse_ok("{\"optimizer\": {\"name\": \"lion\"}}");
    tb_records* raw = nullptr;
    CHECK_EQ(tb_train(cfg.get(), &raw), TB_ERROR_CONFIG);
    CHECK(raw == nullptr);
    CHECK(std::string(tb_last_error()).find("lion") != std::string::npos);

    CHECK_EQ(tb_train(nullptr, &raw), TB_ERROR_ARGUMENT);
    CHECK_EQ(tb_train(cfg.get(), nullptr), TB_ERROR_ARGUMENT);
}

TEST_CASE("multistart fans out deterministically across workers") {
    std::string doc = desk_doc("sgd", 1);
    doc.insert(doc.rfind('}'), R"(, "multistart": {"seeds": [3, 4], "initializers": ["glorot_uniform"]})");
    const ConfigPtr cfg = parse_ok(doc);

    tb_records* raw = nullptr;
    REQUIRE_EQ(tb_multistart(cfg.get(), 1, &raw), TB_OK);
    const RecordsPtr serial(raw);
    size_t count = 0;
    REQUIRE_EQ(tb_records_count(serial.get(), &count), TB_OK);
    REQUIRE_EQ(count, 2);
    CHECK_EQ(json::parse(record_json(serial.get(), 0)).at("seed"), 3);
    CHECK_EQ(json::parse(record_json(serial.get(), 1)).at("seed"), 4);

    REQUIRE_EQ(tb_multistart(cfg.get(), 3, &raw), TB_OK);
    const RecordsPtr pooled(raw);
    for (size_t i = 0; i < 2; ++i)
        CHECK_EQ(record_json(serial.get(), i), record_json(pooled.get(), i));

    CHECK_EQ(tb_multistart(cfg.get(), 0, &raw), TB_ERROR_ARGUMENT);

    std::string dup = desk_doc("sgd", 1);
    dup.insert(dup.rfind('}'), R"(, "multistart": {"seeds": [3, 3]})");
    const ConfigPtr bad = parse_ok(dup);
    CHECK_EQ(tb_multistart(bad.get(), 1, &raw), TB_ERROR_CONFIG);
}

TEST_CASE("grid search sweeps and reports its winner across workers") {
    std::string doc = desk_doc("sgd", 1);
    doc.insert(doc.rfind('}'), R"(, "grid": {"eta": [0.01, 0.001]})");
    const ConfigPtr cfg = parse_ok(doc);

    // A single-run command must refuse the extra section.
    char* text = nullptr;
    CHECK_EQ(tb_config_canonical(cfg.get(), &text), TB_ERROR_CONFIG);
    tb_records* raw = nullptr;
    CHECK_EQ(tb_train(cfg.get(), &raw), TB_ERROR_CONFIG);

    size_t best = 99;
    REQUIRE_EQ(tb_grid_search(cfg.get(), 2, &best, &raw), TB_OK);
    const RecordsPtr swept(raw);
    CHECK(best < 2);
    size_t count = 0;
    REQUIRE_EQ(tb_records_count(swept.get(), &count), TB_OK);
    CHECK_EQ(count, 2);

    // The winner index is optional; the sweep result is not.
    REQUIRE_EQ(tb_grid_search(cfg.get(), 1, nullptr, &raw), TB_OK);
    const RecordsPtr serial(raw);
    for (size_t i = 0; i < 2; ++i)
        CHECK_EQ(record_json(swept.get(), i), record_json(serial.get(), i));

    CHECK_EQ(tb_grid_search(cfg.get(), 0, &best, &raw), TB_ERROR_ARGUMENT);

    // No stock search ranges exist for the solvers the study never tuned.
    const ConfigPtr untuned = parse_ok(desk_doc("adadelta", 1));
    CHECK_EQ(tb_grid_search(untuned.get(), 1, &best, &raw), TB_ERROR_CONFIG);
}

TEST_CASE("records persist through a directory and come back equal") {
    const fs::path dir = scratch_dir("tb_capi_records");
    const ConfigPtr a = parse_ok(desk_doc("sgd", 1));
    const ConfigPtr b = parse_ok(desk_doc("adagrad", 1));
    const RecordsPtr ra = train_ok(a.get());
    const RecordsPtr rb = train_ok(b.get());

    REQUIRE_EQ(tb_records_save(ra.get(), dir.string().c_str()), TB_OK);
    REQUIRE_EQ(tb_records_save(rb.get(), dir.string().c_str()), TB_OK);

    tb_records* raw = nullptr;
    REQUIRE_EQ(tb_records_open(dir.string().c_str(), &raw), TB_OK);
    const RecordsPtr loaded(raw);
    size_t count = 0;
    REQUIRE_EQ(tb_records_count(loaded.get(), &count), TB_OK);
    REQUIRE_EQ(count, 2);

    // Sorted filenames decide the order, so match by content.
    const std::string first = record_json(loaded.get(), 0);
    const std::string second = record_json(loaded.get(), 1);
    const std::string orig_a = record_json(ra.get(), 0);
    const std::string orig_b = record_json(rb.get(), 0);
    CHECK(((first == orig_a && second == orig_b) || (first == orig_b && second == orig_a)));

    CHECK_EQ(tb_records_open("/no/such/records", &raw), TB_ERROR_IO);
    const fs::path bare = scratch_dir("tb_capi_bare");
    CHECK_EQ(tb_records_open(bare.string().c_str(), &raw), TB_ERROR_CONFIG);
}

TEST_CASE("profiles come off one record set on the stock relaxation grid") {
    const fs::path dir = scratch_dir("tb_capi_profiles");
    const ConfigPtr a = parse_ok(desk_doc("sgd", 1));
    const ConfigPtr b = parse_ok(desk_doc("adagrad", 1));
    const RecordsPtr ra = train_ok(a.get());
    const RecordsPtr rb = train_ok(b.get());
    REQUIRE_EQ(tb_records_save(ra.get(), dir.string().c_str()), TB_OK);
    REQUIRE_EQ(tb_records_save(rb.get(), dir.string().c_str()), TB_OK);

    tb_records* raw = nullptr;
    REQUIRE_EQ(tb_records_open(dir.string().c_str(), &raw), TB_OK);
    const RecordsPtr both(raw);

    tb_profiles* praw = nullptr;
    REQUIRE_EQ(tb_profiles_compute(both.get(), &praw), TB_OK);
    const ProfilesPtr prof(praw);

    char* text = nullptr;
    REQUIRE_EQ(tb_profiles_csv(prof.get(), &text), TB_OK);
    const std::string csv = take(text);
    CHECK_EQ(csv.rfind("solver,tau,sigma\n", 0), 0);
    // Two solvers, fifty relaxation levels each, one header.
    CHECK_EQ(std::count(csv.begin(), csv.end(), '\n'), 101);
    CHECK(csv.find("\nadagrad,") != std::string::npos);
    CHECK(csv.find("\nsgd,") != std::string::npos);

    REQUIRE_EQ(tb_profiles_save(prof.get(), dir.string().c_str()), TB_OK);
    std::ifstream in(dir / "profiles.csv", std::ios::binary);
    const std::string on_disk((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    CHECK_EQ(on_disk, csv);

    // Two runs of the same solver on one problem cannot be profiled.
    const ConfigPtr a2 = parse_ok(desk_doc("sgd", 1, 12));
    const RecordsPtr ra2 = train_ok(a2.get());
    REQUIRE_EQ(tb_records_save(ra2.get(), dir.string().c_str()), TB_OK);
    REQUIRE_EQ(tb_records_open(dir.string().c_str(), &raw), TB_OK);
    const RecordsPtr tainted(raw);
    CHECK_EQ(tb_profiles_compute(tainted.get(), &praw), TB_ERROR_CONFIG);
    CHECK(std::string(tb_last_error()).find("two records") != std::string::npos);
}

TEST_CASE("the findings report crosses the boundary with its verdict") {
    const fs::path dir = scratch_dir("tb_capi_findings");
    for (const char* solver :
         {"adam", "adamax", "nadam", "rmsprop", "sgd", "adadelta", "adagrad", "ftrl"}) {
        const ConfigPtr cfg = parse_ok(desk_doc(solver, 1));
        const RecordsPtr recs = train_ok(cfg.get());
        REQUIRE_EQ(tb_records_save(recs.get(), dir.string().c_str()), TB_OK);
    }

    tb_records* raw = nullptr;
    REQUIRE_EQ(tb_records_open(dir.string().c_str(), &raw), TB_OK);
    const RecordsPtr all(raw);

    int pass = -1;
    char* text = nullptr;
    REQUIRE_EQ(tb_findings(all.get(), &pass, &text), TB_OK);
    const std::string report = take(text);
    CHECK((pass == 0 || pass == 1));
    // All eight solvers present: four executed assertions, no skip note.
    CHECK_EQ(std::count(report.begin(), report.end(), '\n'), 4);
    CHECK_EQ(report.find("missing"), std::string::npos);

    // One solver alone leaves most assertions unexecuted but is no error.
    const ConfigPtr solo_cfg = parse_ok(desk_doc("sgd", 1));
    const RecordsPtr solo = train_ok(solo_cfg.get());
    REQUIRE_EQ(tb_findings(solo.get(), &pass, &text), TB_OK);
    const std::string partial = take(text);
    CHECK(partial.find("[skip]") != std::string::npos);
    CHECK(partial.find("missing") != std::string::npos);

    CHECK_EQ(tb_findings(all.get(), nullptr, &text), TB_ERROR_ARGUMENT);
}

TEST_CASE("the built-in self checks pass through the boundary") {
    int failures = -1;
    char* text = nullptr;
    REQUIRE_EQ(tb_verify(&failures, &text), TB_OK);
    const std::string report = take(text);
    CHECK_EQ(failures, 0);
    CHECK(report.find("[PASS]") != std::string::npos);
    CHECK_EQ(report.find("[FAIL]"), std::string::npos);

    CHECK_EQ(tb_verify(nullptr, &text), TB_ERROR_ARGUMENT);
}
