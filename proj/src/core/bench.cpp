#include "core/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "core/error.hpp"
#include "core/lbfgs.hpp"
#include "core/optim.hpp"

namespace tb {

using json = nlohmann::json;

namespace {

bool params_finite(const ParamSet& w) {
    for (const auto& e : w)
        if (!e.value.all_finite()) return false;
    return true;
}

void train_minibatch(const RunConfig& cfg, const Problem& prob, Network& net, ParamSet& w,
                     Rng& root, ExperimentRecord& rec) {
    const Optimizer opt = make_optimizer(cfg.optimizer, cfg.hyper);
    OptimizerState st;
    BatchPlan plan = cfg.batch;
    plan.seed = cfg.seed;

    try {
        for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            const auto batches = iterate_batches(prob.train.size(), plan, epoch);
            Rng aug_rng = root.fork("augment", epoch);
            Rng drop_rng = root.fork("dropout", epoch);

            double loss_sum = 0.0;
            for (const auto& idx : batches) {
                Tensor bx = gather_rows(prob.train.images, idx);
                const Tensor by = gather_rows(prob.train.labels, idx);
                if (cfg.augment.active()) bx = augment_batch(bx, cfg.augment, aug_rng);

                double batch_loss = 0.0;
                const GradientSource gs = [&](const ParamSet& at, ParamSet& grad_out) {
                    batch_loss = net.loss_and_grad(bx, by, at, Mode::train, &drop_rng, grad_out);
                };
                opt.step(w, gs, st);
                require(std::isfinite(batch_loss), errc::non_finite,
                        "training loss left the finite range in epoch " + std::to_string(epoch));
                loss_sum += batch_loss;
            }
            require(params_finite(w), errc::non_finite,
                    "weights left the finite range in epoch " + std::to_string(epoch));
            rec.loss_trace.push_back(loss_sum / static_cast<double>(batches.size()));
            if (cfg.eval_each_epoch)
                rec.accuracy_trace.push_back(
                    evaluate_accuracy(net, w, prob.test.images, prob.test.labels));
        }
    } catch (const Error& e) {
        if (e.code() != errc::non_finite) throw;
        rec.failed = true;
        rec.failure = e.what();
    }
}

void train_full_batch(const RunConfig& cfg, const Problem& prob, Network& net, ParamSet& w,
                      ExperimentRecord& rec) {
    // The quasi-Newton solver needs one fixed deterministic objective, so it
    // runs the whole training set per evaluation with batch statistics and
    // no side effects; the batch plan and augmentation do not apply.
    LbfgsSolver solver(cfg.hyper);
    std::vector<double> x = flatten_params(w);
    ParamSet point = w.zeros_like();
    ParamSet grads = w.zeros_like();
    const Objective fg = [&](const std::vector<double>& at, std::vector<double>& g) {
        unflatten_params(at, point);
        const double f = net.loss_and_grad(prob.train.images, prob.train.labels, point,
                                           Mode::frozen, nullptr, grads);
        g = flatten_params(grads);
        return f;
    };

    try {
        for (size_t it = 0; it < cfg.epochs; ++it) {
            const LbfgsReport rep = solver.step(x, fg);
            require(std::isfinite(rep.f), errc::non_finite,
                    "objective left the finite range at iteration " + std::to_string(it));
            rec.loss_trace.push_back(rep.f);
            if (cfg.eval_each_epoch) {
                unflatten_params(x, w);
                rec.accuracy_trace.push_back(
                    evaluate_accuracy(net, w, prob.test.images, prob.test.labels));
            }
        }
    } catch (const Error& e) {
        if (e.code() != errc::non_finite) throw;
        rec.failed = true;
        rec.failure = e.what();
    }
    unflatten_params(x, w);
}

// Runs fn(0..count-1) on up to `workers` threads. Results land in
// caller-owned slots by index, so completion order never shows.
void run_indexed(size_t count, size_t workers, const std::function<void(size_t)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    auto drain = [&] {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const size_t n = std::min(workers, count);
    pool.reserve(n);
    for (size_t t = 0; t < n; ++t) pool.emplace_back(drain);
    for (auto& th : pool) th.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

std::string format_double(double v) { return json(v).dump(); }

} // namespace

Problem prepare_problem(const RunConfig& cfg) {
    const ProblemSpec& ps = cfg.problem;
    Problem prob;
    prob.id = ps.id();

    // problem.synthetic.seed doubles as the data seed for the split, so the
    // same problem materializes identically no matter the run seed.
    const uint64_t data_seed = ps.synthetic.seed;
    if (ps.dataset == "synthetic") {
        const Dataset all = generate_synthetic(ps.synthetic);
        std::tie(prob.train, prob.test) = split_train_test(all, ps.train_fraction, data_seed);
    } else if (ps.dataset == "cifar10" || ps.dataset == "cifar100") {
        const int variant = ps.dataset == "cifar100" ? 100 : 10;
        if (ps.test_paths.empty()) {
            const Dataset all = read_cifar(ps.train_paths, variant);
            std::tie(prob.train, prob.test) = split_train_test(all, ps.train_fraction, data_seed);
        } else {
            prob.train = read_cifar(ps.train_paths, variant);
            prob.test = read_cifar(ps.test_paths, variant);
        }
    } else if (ps.dataset == "ppm") {
        const Dataset all = read_ppm_directory(ps.train_paths[0]);
        std::tie(prob.train, prob.test) = split_train_test(all, ps.train_fraction, data_seed);
    } else {
        fail(errc::invalid_value, "unknown dataset '" + ps.dataset + "'");
    }

    const auto& shape = prob.train.images.shape();  // (P,C,H,W)
    prob.arch = make_architecture(ps.architecture, {shape[1], shape[2], shape[3]},
                                  prob.train.classes());
    if (cfg.smooth_mode) prob.arch = smooth_variant(prob.arch);
    return prob;
}

ExperimentRecord run_training(const RunConfig& cfg) {
    return run_training(cfg, prepare_problem(cfg));
}

ExperimentRecord run_training(const RunConfig& cfg, const Problem& prob) {
    cfg.validate();
    const auto started = std::chrono::steady_clock::now();

    ExperimentRecord rec;
    rec.config_hash = config_hash(cfg);
    rec.canonical_config = canonical_config_json(cfg);
    rec.problem_id = prob.id;
    rec.solver = cfg.optimizer;
    rec.preset = cfg.preset;
    rec.initializer = init_name(cfg.initializer);
    rec.seed = cfg.seed;

    Network net(prob.arch);
    Rng root(cfg.seed);
    Rng init_rng = root.fork("init");
    ParamSet w = net.init_params(cfg.initializer, init_rng, cfg.bias_init);

    // The recorded start: full training set, batch statistics, no updates.
    rec.initial_loss =
        net.loss(prob.train.images, prob.train.labels, w, Mode::frozen);
    rec.final_loss = rec.initial_loss;

    if (cfg.algo() == Algo::lbfgs)
        train_full_batch(cfg, prob, net, w, rec);
    else
        train_minibatch(cfg, prob, net, w, root, rec);

    if (!rec.loss_trace.empty()) rec.final_loss = rec.loss_trace.back();
    if (!rec.accuracy_trace.empty()) {
        rec.final_accuracy = rec.accuracy_trace.back();
    } else if (!rec.failed && cfg.epochs > 0) {
        rec.final_accuracy = evaluate_accuracy(net, w, prob.test.images, prob.test.labels);
    }

    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return rec;
}

std::vector<ExperimentRecord> multistart(const RunConfig& tmpl, const MultistartSpec& spec,
                                         size_t workers) {
    spec.validate();
    const Problem prob = prepare_problem(tmpl);

    std::vector<RunConfig> configs;
    for (uint64_t seed : spec.seeds)
        for (Init init : spec.initializers) {
            RunConfig cfg = tmpl;
            cfg.seed = seed;
            cfg.batch.seed = seed;
            cfg.initializer = init;
            configs.push_back(cfg);
        }

    std::vector<ExperimentRecord> records(configs.size());
    run_indexed(configs.size(), workers,
                [&](size_t i) { records[i] = run_training(configs[i], prob); });
    return records;
}

GridOutcome grid_search(const RunConfig& tmpl, const GridSpec& grid, size_t workers) {
    grid.validate();
    const size_t n = grid.cardinality();
    require(n >= 1, errc::empty_grid, "grid has no points");
    const Problem prob = prepare_problem(tmpl);

    std::vector<RunConfig> configs;
    configs.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        RunConfig cfg = tmpl;
        cfg.hyper = grid.point(tmpl.hyper, i);
        configs.push_back(cfg);
    }

    GridOutcome out;
    out.records.resize(n);
    run_indexed(n, workers, [&](size_t i) { out.records[i] = run_training(configs[i], prob); });

    size_t best = 0;
    for (size_t i = 1; i < n; ++i) {
        const auto& a = out.records[i];
        const auto& b = out.records[best];
        if (a.final_accuracy > b.final_accuracy ||
            (a.final_accuracy == b.final_accuracy && a.final_loss < b.final_loss))
            best = i;
    }
    out.best_index = best;
    out.best = configs[best].hyper;
    return out;
}

std::vector<double> default_tau_grid() {
    std::vector<double> taus(50);
    for (int i = 0; i < 50; ++i)
        taus[i] = std::pow(10.0, -4.0 * (49.0 - i) / 49.0);
    return taus;
}

std::vector<ProfileCurve> success_rate_profiles(const std::vector<ExperimentRecord>& records,
                                                const std::vector<double>& tau_grid) {
    require(!records.empty(), errc::missing_record, "no records to profile");
    require(!tau_grid.empty(), errc::invalid_value, "tau grid is empty");

    std::set<std::string> problem_set, solver_set;
    for (const auto& rec : records) {
        problem_set.insert(rec.problem_id);
        solver_set.insert(rec.solver);
    }
    const std::vector<std::string> problems(problem_set.begin(), problem_set.end());
    const std::vector<std::string> solvers(solver_set.begin(), solver_set.end());

    std::map<std::pair<std::string, std::string>, const ExperimentRecord*> by_pair;
    for (const auto& rec : records) {
        const auto key = std::make_pair(rec.problem_id, rec.solver);
        require(by_pair.emplace(key, &rec).second, errc::invalid_value,
                "two records for " + rec.solver + " on " + rec.problem_id);
    }

    // Shared starting losses, with failures folded back to the start.
    std::map<std::string, double> f0;
    std::map<std::pair<std::string, std::string>, double> fps;
    for (const auto& p : problems) {
        for (const auto& s : solvers) {
            const auto it = by_pair.find({p, s});
            require(it != by_pair.end(), errc::missing_record,
                    "no record for " + s + " on " + p);
            const ExperimentRecord& rec = *it->second;
            const auto f0_it = f0.find(p);
            if (f0_it == f0.end())
                f0[p] = rec.initial_loss;
            else
                require(f0_it->second == rec.initial_loss, errc::inconsistent_start,
                        "solvers disagree on the starting loss of " + p);
            fps[{p, s}] = rec.failed ? rec.initial_loss : rec.final_loss;
        }
    }

    std::map<std::string, double> fL;
    for (const auto& p : problems) {
        double best = fps[{p, solvers.front()}];
        for (const auto& s : solvers) best = std::min(best, fps[{p, s}]);
        fL[p] = best;
    }

    std::vector<ProfileCurve> curves;
    for (const auto& s : solvers) {
        ProfileCurve curve;
        curve.solver = s;
        curve.tau = tau_grid;
        for (const double tau : tau_grid) {
            size_t solved = 0;
            for (const auto& p : problems)
                if (fps[{p, s}] <= fL[p] + tau * (f0[p] - fL[p])) ++solved;
            curve.sigma.push_back(static_cast<double>(solved) /
                                  static_cast<double>(problems.size()));
        }
        curves.push_back(std::move(curve));
    }
    return curves;
}

FindingsReport qualitative_findings_check(const std::vector<ExperimentRecord>& records) {
    static const std::vector<std::string> good = {"adam", "adamax", "nadam", "rmsprop", "sgd"};
    static const std::vector<std::string> poor = {"adadelta", "adagrad", "ftrl"};

    FindingsReport report;
    std::map<std::string, const ExperimentRecord*> by_solver;
    for (const auto& rec : records) {
        require(by_solver.emplace(rec.solver, &rec).second, errc::invalid_value,
                "two records for solver " + rec.solver);
        require(rec.problem_id == records.front().problem_id, errc::invalid_value,
                "findings check needs records from a single problem");
    }

    auto final_of = [&](const std::string& s) { return by_solver.at(s)->final_loss; };
    auto have = [&](const std::string& s) { return by_solver.count(s) != 0; };

    for (const auto& q : poor) {
        if (!have(q)) {
            report.lines.push_back("[skip] " + q + ": no record");
            report.complete = false;
            continue;
        }
        bool ok = true, skipped = false;
        std::string culprit;
        for (const auto& g : good) {
            if (!have(g)) {
                culprit = g + " has no record";
                skipped = true;
                break;
            }
            if (!(final_of(g) < final_of(q))) {
                culprit = g + " did not end below it";
                ok = false;
                break;
            }
        }
        if (skipped) {
            report.lines.push_back("[skip] " + q + ": " + culprit);
            report.complete = false;
        } else if (ok) {
            report.lines.push_back("[ok]   every tuned solver ends below " + q + " (" +
                                   format_double(final_of(q)) + ")");
        } else {
            report.lines.push_back("[FAIL] " + q + ": " + culprit);
            report.pass = false;
        }
    }

    if (have("ftrl")) {
        bool smallest = true;
        std::string culprit;
        const ExperimentRecord& f = *by_solver.at("ftrl");
        const double ftrl_dec = (f.initial_loss - f.final_loss) / f.initial_loss;
        for (const auto& [name, rec] : by_solver) {
            if (name == "ftrl") continue;
            const double dec = (rec->initial_loss - rec->final_loss) / rec->initial_loss;
            if (!(ftrl_dec < dec)) {
                smallest = false;
                culprit = name;
                break;
            }
        }
        if (smallest) {
            report.lines.push_back("[ok]   ftrl moved least relative to its start");
        } else {
            report.lines.push_back("[FAIL] ftrl did not move least; " + culprit +
                                   " decreased no more");
            report.pass = false;
        }
    } else {
        report.lines.push_back("[skip] ftrl: no record");
        report.complete = false;
    }
    return report;
}

std::string record_to_json(const ExperimentRecord& rec) {
    json j;
    j["run"] = rec.config_hash;
    j["problem"] = rec.problem_id;
    j["solver"] = rec.solver;
    j["preset"] = rec.preset;
    j["initializer"] = rec.initializer;
    j["seed"] = rec.seed;
    j["initial_loss"] = rec.initial_loss;
    j["loss_trace"] = rec.loss_trace;
    j["accuracy_trace"] = rec.accuracy_trace;
    j["final_loss"] = rec.final_loss;
    j["final_accuracy"] = rec.final_accuracy;
    j["failed"] = rec.failed;
    j["failure"] = rec.failure;
    j["config"] = json::parse(rec.canonical_config);
    return j.dump(2) + "\n";
}

ExperimentRecord record_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(errc::parse_error, std::string("record document: ") + e.what());
    }
    require(j.is_object(), errc::parse_error, "record document must be a JSON object");
    for (const char* key : {"run", "problem", "solver", "preset", "initializer", "seed",
                            "initial_loss", "loss_trace", "accuracy_trace", "final_loss",
                            "final_accuracy", "failed", "failure", "config"})
        require(j.contains(key), errc::missing_record,
                std::string("record document lacks '") + key + "'");

    ExperimentRecord rec;
    rec.config_hash = j.at("run").get<std::string>();
    rec.problem_id = j.at("problem").get<std::string>();
    rec.solver = j.at("solver").get<std::string>();
    rec.preset = j.at("preset").get<std::string>();
    rec.initializer = j.at("initializer").get<std::string>();
    rec.seed = j.at("seed").get<uint64_t>();
    rec.initial_loss = j.at("initial_loss").get<double>();
    rec.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    rec.accuracy_trace = j.at("accuracy_trace").get<std::vector<double>>();
    rec.final_loss = j.at("final_loss").get<double>();
    rec.final_accuracy = j.at("final_accuracy").get<double>();
    rec.failed = j.at("failed").get<bool>();
    rec.failure = j.at("failure").get<std::string>();
    rec.canonical_config = j.at("config").dump();
    return rec;
}

void save_record(const ExperimentRecord& rec, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    {
        std::ofstream out(dir / ("run-" + rec.config_hash + ".json"),
                          std::ios::binary | std::ios::trunc);
        require(out.good(), errc::io_error, "cannot write record in " + out_dir);
        out << record_to_json(rec);
    }

    const fs::path index = dir / "index.csv";
    const bool fresh = !fs::exists(index);
    {
        std::ofstream out(index, std::ios::binary | std::ios::app);
        require(out.good(), errc::io_error, "cannot append to " + index.string());
        if (fresh) out << "run,problem,solver,preset,initializer,seed,final_loss,final_accuracy,seconds\n";
        char seconds[32];
        std::snprintf(seconds, sizeof seconds, "%.3f", rec.seconds);
        out << rec.config_hash << ',' << rec.problem_id << ',' << rec.solver << ','
            << rec.preset << ',' << rec.initializer << ',' << rec.seed << ','
            << format_double(rec.final_loss) << ',' << format_double(rec.final_accuracy) << ','
            << seconds << '\n';
    }

    // Manifest: config identity per file, rewritten sorted so reruns of the
    // same set produce the same bytes.
    const fs::path manifest = dir / "manifest.json";
    json m;
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        std::stringstream buffer;
        buffer << in.rdbuf();
        try {
            m = json::parse(buffer.str());
        } catch (const json::parse_error&) {
            m = json::object();
        }
    }
    if (!m.is_object() || !m.contains("runs") || !m.at("runs").is_object())
        m = json{{"runs", json::object()}};
    m["runs"][rec.config_hash] = {{"file", "run-" + rec.config_hash + ".json"},
                                  {"problem", rec.problem_id},
                                  {"solver", rec.solver},
                                  {"preset", rec.preset},
                                  {"initializer", rec.initializer},
                                  {"seed", rec.seed}};
    std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
    require(out.good(), errc::io_error, "cannot write " + manifest.string());
    out << m.dump(2) << "\n";
}

std::vector<ExperimentRecord> load_records(const std::string& dir) {
    namespace fs = std::filesystem;
    require(fs::is_directory(dir), errc::io_error, dir + " is not a directory");

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.rfind("run-", 0) == 0 &&
            name.size() > 9 && name.substr(name.size() - 5) == ".json")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    require(!files.empty(), errc::missing_record, "no run records in " + dir);

    std::vector<ExperimentRecord> records;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        require(in.good(), errc::io_error, "cannot open " + f.string());
        std::stringstream buffer;
        buffer << in.rdbuf();
        records.push_back(record_from_json(buffer.str()));
    }
    return records;
}

std::string profiles_csv(const std::vector<ProfileCurve>& curves) {
    std::string out = "solver,tau,sigma\n";
    for (const auto& curve : curves)
        for (size_t i = 0; i < curve.tau.size(); ++i)
            out += curve.solver + "," + format_double(curve.tau[i]) + "," +
                   format_double(curve.sigma[i]) + "\n";
    return out;
}

void save_profiles(const std::vector<ProfileCurve>& curves, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "profiles.csv", std::ios::binary | std::ios::trunc);
    require(out.good(), errc::io_error, "cannot write profiles.csv in " + out_dir);
    out << profiles_csv(curves);
}

} // namespace tb
