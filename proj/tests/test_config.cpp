#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/error.hpp"
#include "doctest.h"
#include "testing.hpp"

using namespace tb;
using tbtest::throws_code;

TEST_CASE("an empty document resolves to the stock run") {
    RunConfig cfg = parse_run_config("{}");
    CHECK_EQ(cfg.optimizer, "adam");
    CHECK_EQ(cfg.preset, "default");
    CHECK_EQ(cfg.algo(), Algo::adam);
    CHECK_EQ(cfg.epochs, 100);
    CHECK_EQ(cfg.seed, 1699806);
    CHECK_EQ(cfg.batch.batch_size, 128);
    CHECK(cfg.batch.drop_last);
    CHECK_EQ(cfg.batch.seed, cfg.seed);
    CHECK_EQ(cfg.problem.dataset, "synthetic");
    CHECK_EQ(cfg.problem.architecture, "baseline-mini");
    CHECK_EQ(cfg.problem.id(), "synthetic/baseline-mini");
    CHECK_EQ(cfg.problem.synthetic.classes, 8);
    CHECK_EQ(cfg.problem.synthetic.per_class, 80);
    CHECK_EQ(cfg.problem.synthetic.noise_sigma, 0.05);
    CHECK_EQ(cfg.problem.train_fraction, 0.8);
    CHECK_EQ(cfg.initializer, Init::lecun_normal);
    CHECK_EQ(cfg.bias_init, BiasInit::zero);
    CHECK(!cfg.smooth_mode);
    CHECK(cfg.eval_each_epoch);
    CHECK(!cfg.augment.active());
    // the hyperparameters come from the factory preset
    CHECK_EQ(cfg.hyper.eta, 1e-3);
    CHECK_EQ(cfg.hyper.beta2, 0.999);
    CHECK_EQ(cfg.hyper.epsilon, 1e-7);
}

TEST_CASE("the epoch budget follows the preset unless pinned") {
    CHECK_EQ(parse_run_config(R"({"optimizer":{"preset":"tuned"}})").epochs, 50);
    CHECK_EQ(parse_run_config(R"({"epochs":7})").epochs, 7);
    CHECK_EQ(parse_run_config(R"({"epochs":"default"})").epochs, 100);
    CHECK_EQ(parse_run_config(R"({"epochs":"tuned"})").epochs, 50);
    CHECK_EQ(parse_run_config(R"({"epochs":"large"})").epochs, 30);
    // a pinned count wins over the preset's shorter budget
    CHECK_EQ(parse_run_config(R"({"optimizer":{"preset":"tuned"},"epochs":200})").epochs, 200);
    CHECK(throws_code(errc::invalid_value, [] { parse_run_config(R"({"epochs":"forever"})"); }));
    CHECK(throws_code(errc::invalid_value, [] { parse_run_config(R"({"epochs":-3})"); }));
}

TEST_CASE("documents are strict: unknown keys and wrong types are refused") {
    CHECK(throws_code(errc::parse_error, [] { parse_run_config("{nope"); }));
    CHECK(throws_code(errc::invalid_value, [] { parse_run_config("[1,2]"); }));
    CHECK(throws_code(errc::unknown_key, [] { parse_run_config(R"({"epocs":5})"); }));
    CHECK(throws_code(errc::unknown_key,
                      [] { parse_run_config(R"({"problem":{"data":"synthetic"}})"); }));
    CHECK(throws_code(errc::unknown_key,
                      [] { parse_run_config(R"({"optimizer":{"learning_rate":0.1}})"); }));
    CHECK(throws_code(errc::unknown_key,
                      [] { parse_run_config(R"({"batch":{"shuffle":true}})"); }));
    CHECK(throws_code(errc::unknown_key,
                      [] { parse_run_config(R"({"augment":{"crop":true}})"); }));
    CHECK(throws_code(errc::unknown_key,
                      [] { parse_run_config(R"({"problem":{"synthetic":{"pixels":9}}})"); }));
    CHECK(throws_code(errc::invalid_value, [] { parse_run_config(R"({"epochs":true})"); }));
    CHECK(throws_code(errc::invalid_value, [] { parse_run_config(R"({"seed":-1})"); }));
    CHECK(throws_code(errc::invalid_value,
                      [] { parse_run_config(R"({"batch":{"size":"large"}})"); }));
    CHECK(throws_code(errc::invalid_value,
                      [] { parse_run_config(R"({"optimizer":{"amsgrad":1}})"); }));
    CHECK(throws_code(errc::unknown_optimizer,
                      [] { parse_run_config(R"({"optimizer":{"name":"lion"}})"); }));
    CHECK(throws_code(errc::invalid_value,
                      [] { parse_run_config(R"({"optimizer":{"preset":"best"}})"); }));
    CHECK(throws_code(errc::invalid_value, [] { parse_run_config(R"({"bias_init":"ones"})"); }));
    CHECK(throws_code(errc::invalid_value, [] { parse_run_config(R"({"initializer":"he"})"); }));
}

TEST_CASE("literal hyperparameters override the chosen preset") {
    RunConfig cfg = parse_run_config(
        R"({"optimizer":{"name":"sgd","preset":"tuned","eta":0.5,"nesterov":true}})");
    CHECK_EQ(cfg.hyper.eta, 0.5);
    CHECK_EQ(cfg.hyper.beta, 0.9);  // untouched preset value
    CHECK(cfg.hyper.nesterov);

    // out-of-range literals fail the final validation
    CHECK(throws_code(errc::invalid_hyper_params, [] {
        parse_run_config(R"({"optimizer":{"name":"adam","beta1":1.5}})");
    }));
}

TEST_CASE("dataset wiring rules") {
    CHECK(throws_code(errc::invalid_value,
                      [] { parse_run_config(R"({"problem":{"dataset":"imagenet"}})"); }));
    // synthetic carries no files; file datasets need them
    CHECK(throws_code(errc::invalid_value, [] {
        parse_run_config(R"({"problem":{"dataset":"synthetic","train_paths":["x.bin"]}})");
    }));
    CHECK(throws_code(errc::invalid_value,
                      [] { parse_run_config(R"({"problem":{"dataset":"cifar10"}})"); }));
    CHECK(throws_code(errc::invalid_value, [] {
        parse_run_config(R"({"problem":{"dataset":"ppm","train_paths":["a","b"]}})");
    }));
    CHECK(throws_code(errc::invalid_value, [] {
        parse_run_config(
            R"({"problem":{"dataset":"ppm","train_paths":["a"],"test_paths":["b"]}})");
    }));
    CHECK(throws_code(errc::invalid_value,
                      [] { parse_run_config(R"({"problem":{"train_fraction":1.5}})"); }));
    CHECK(throws_code(errc::bad_batch_size, [] { parse_run_config(R"({"batch":{"size":0}})"); }));
    CHECK(throws_code(errc::invalid_value, [] {
        parse_run_config(R"({"augment":{"contrast_lo":2.0,"contrast_hi":1.0}})");
    }));

    RunConfig cifar = parse_run_config(
        R"({"problem":{"dataset":"cifar10","train_paths":["batch_1.bin","batch_2.bin"]}})");
    CHECK_EQ(cifar.problem.train_paths.size(), 2);
}

TEST_CASE("the quasi-newton solver insists on the smooth configuration") {
    CHECK(throws_code(errc::invalid_value,
                      [] { parse_run_config(R"({"optimizer":{"name":"lbfgs"}})"); }));
    RunConfig cfg =
        parse_run_config(R"({"optimizer":{"name":"lbfgs"},"smooth_mode":true})");
    CHECK(cfg.smooth_mode);
    CHECK_EQ(cfg.algo(), Algo::lbfgs);
}

TEST_CASE("dotted overrides rewrite the document before validation") {
    std::vector<std::string> ov = {"optimizer.eta=0.01", "batch.size=32",
                                   "problem.synthetic.noise_sigma=0.2", "smooth_mode=true",
                                   "epochs=tuned"};
    RunConfig cfg = parse_run_config("{}", ov);
    CHECK_EQ(cfg.hyper.eta, 0.01);
    CHECK_EQ(cfg.batch.batch_size, 32);
    CHECK_EQ(cfg.problem.synthetic.noise_sigma, 0.2);
    CHECK(cfg.smooth_mode);
    CHECK_EQ(cfg.epochs, 50);  // the word forms work through overrides too

    // later overrides beat earlier ones and the base document
    RunConfig last =
        parse_run_config(R"({"epochs":5})", {"epochs=10", "epochs=20"});
    CHECK_EQ(last.epochs, 20);

    CHECK(throws_code(errc::invalid_value, [] { parse_run_config("{}", {"no_equals"}); }));
    CHECK(throws_code(errc::invalid_value, [] { parse_run_config("{}", {"=5"}); }));
    CHECK(throws_code(errc::invalid_value,
                      [] { parse_run_config("{}", {"optimizer..eta=1"}); }));
    CHECK(throws_code(errc::invalid_value,
                      [] { parse_run_config("{}", {"epochs=5", "epochs.inner=1"}); }));
    CHECK(throws_code(errc::unknown_key, [] { parse_run_config("{}", {"bogus=1"}); }));
}

TEST_CASE("document merging resolves overrides but defers validation") {
    std::string merged = merge_config_document("{}", {"epochs=potato"});
    CHECK(merged.find("potato") != std::string::npos);
    CHECK(throws_code(errc::parse_error, [] { merge_config_document("{oops", {}); }));
}

TEST_CASE("multistart defaults to the stock seed list with both initializers") {
    MultistartConfig ms = parse_multistart_config("{}", {});
    CHECK_EQ(ms.spec.seeds, paper_seed_list());
    CHECK_EQ(ms.spec.seeds.size(), 12);
    REQUIRE_EQ(ms.spec.initializers.size(), 2);
    CHECK_EQ(ms.spec.initializers[0], Init::glorot_uniform);
    CHECK_EQ(ms.spec.initializers[1], Init::lecun_normal);

    MultistartConfig named =
        parse_multistart_config(R"({"multistart":{"seeds":"paper"}})", {});
    CHECK_EQ(named.spec.seeds, paper_seed_list());

    MultistartConfig own = parse_multistart_config(
        R"({"multistart":{"seeds":[5,6,7],"initializers":["lecun_normal"]}})", {});
    CHECK_EQ(own.spec.seeds, std::vector<uint64_t>{5, 6, 7});
    REQUIRE_EQ(own.spec.initializers.size(), 1);
    CHECK_EQ(own.spec.initializers[0], Init::lecun_normal);

    CHECK(throws_code(errc::duplicate_seed, [] {
        parse_multistart_config(R"({"multistart":{"seeds":[1,2,1]}})", {});
    }));
    CHECK(throws_code(errc::invalid_value, [] {
        parse_multistart_config(R"({"multistart":{"seeds":[]}})", {});
    }));
    CHECK(throws_code(errc::invalid_value, [] {
        parse_multistart_config(R"({"multistart":{"seeds":"mine"}})", {});
    }));
    CHECK(throws_code(errc::unknown_key, [] {
        parse_multistart_config(R"({"multistart":{"restarts":4}})", {});
    }));
    CHECK(throws_code(errc::invalid_value, [] {
        parse_multistart_config(
            R"({"multistart":{"initializers":["lecun_normal","lecun_normal"]}})", {});
    }));
}

TEST_CASE("search grids enumerate the documented products") {
    CHECK_EQ(preset_grid(Algo::adam).cardinality(), 162);
    CHECK_EQ(preset_grid(Algo::rmsprop).cardinality(), 162);
    CHECK_EQ(preset_grid(Algo::adamax).cardinality(), 81);
    CHECK_EQ(preset_grid(Algo::nadam).cardinality(), 81);
    CHECK_EQ(preset_grid(Algo::sgd).cardinality(), 24);
    CHECK(throws_code(errc::empty_grid, [] { preset_grid(Algo::adadelta); }));
    CHECK(throws_code(errc::empty_grid, [] { preset_grid(Algo::ftrl); }));
    CHECK(throws_code(errc::empty_grid, [] { preset_grid(Algo::lbfgs); }));

    GridConfig implied = parse_grid_config(R"({"optimizer":{"name":"sgd"}})", {});
    CHECK_EQ(implied.spec.cardinality(), 24);
    GridConfig spelled =
        parse_grid_config(R"({"optimizer":{"name":"sgd"},"grid":"preset"})", {});
    CHECK_EQ(spelled.spec.cardinality(), 24);

    GridConfig own = parse_grid_config(
        R"({"grid":{"eta":[0.1,0.01],"amsgrad":[false,true]}})", {});
    CHECK_EQ(own.spec.cardinality(), 4);

    CHECK(throws_code(errc::unknown_key, [] {
        parse_grid_config(R"({"grid":{"momentum":[0.9]}})", {});
    }));
    CHECK(throws_code(errc::empty_grid, [] {
        parse_grid_config(R"({"grid":{"eta":[]}})", {});
    }));
    CHECK(throws_code(errc::invalid_value, [] {
        parse_grid_config(R"({"grid":{"eta":0.1}})", {});
    }));
    CHECK(throws_code(errc::invalid_value, [] {
        parse_grid_config(R"({"grid":{"amsgrad":[0,1]}})", {});
    }));
}

TEST_CASE("grid points walk the odometer with the last axis fastest") {
    GridSpec grid = preset_grid(Algo::adam);
    HyperParams base = preset_hyper_params(Algo::adam, "default");

    HyperParams first = grid.point(base, 0);
    CHECK_EQ(first.eta, 1e-2);
    CHECK_EQ(first.beta1, 0.6);
    CHECK_EQ(first.beta2, 0.99);
    CHECK_EQ(first.epsilon, 1e-6);
    CHECK(!first.amsgrad);

    HyperParams second = grid.point(base, 1);
    CHECK_EQ(second.eta, 1e-2);  // slow axes hold still
    CHECK(second.amsgrad);

    HyperParams last = grid.point(base, 161);
    CHECK_EQ(last.eta, 1e-4);
    CHECK_EQ(last.beta1, 0.99);
    CHECK_EQ(last.beta2, 0.9999);
    CHECK_EQ(last.epsilon, 1e-8);
    CHECK(last.amsgrad);

    // every enumerated point is distinct
    std::set<std::tuple<double, double, double, double, bool>> seen;
    for (size_t i = 0; i < grid.cardinality(); ++i) {
        HyperParams hp = grid.point(base, i);
        seen.insert({hp.eta, hp.beta1, hp.beta2, hp.epsilon, hp.amsgrad});
    }
    CHECK_EQ(seen.size(), 162);

    CHECK(throws_code(errc::invalid_value, [&] { grid.point(base, 162); }));
}

TEST_CASE("hyperparameter assignment by name covers every field") {
    HyperParams hp;
    set_hyper_value(hp, "eta", 0.25);
    set_hyper_value(hp, "lambda", 0.5);
    set_hyper_value(hp, "history", 6);
    set_hyper_value(hp, "nesterov", 1.0);
    CHECK_EQ(hp.eta, 0.25);
    CHECK_EQ(hp.lambda, 0.5);
    CHECK_EQ(hp.history, 6);
    CHECK(hp.nesterov);
    CHECK(throws_code(errc::unknown_key, [&] { set_hyper_value(hp, "gamma", 1.0); }));
    CHECK(throws_code(errc::invalid_value, [&] { set_hyper_value(hp, "history", 2.5); }));
    CHECK(hyper_key_is_boolean("amsgrad"));
    CHECK(hyper_key_is_boolean("centered"));
    CHECK(!hyper_key_is_boolean("eta"));
}

TEST_CASE("canonical serialization pins the identity of a run") {
    RunConfig a = parse_run_config(R"({"seed":9,"optimizer":{"name":"sgd"}})");
    RunConfig b = parse_run_config(R"({"optimizer":{"name":"sgd"},"seed":9})");
    CHECK_EQ(canonical_config_json(a), canonical_config_json(b));
    CHECK_EQ(config_hash(a), config_hash(b));
    CHECK_EQ(config_hash(a).size(), 16);
    CHECK(config_hash(a).find_first_not_of("0123456789abcdef") == std::string::npos);

    // a canonical document is itself a loadable config with the same hash
    RunConfig back = parse_run_config(canonical_config_json(a));
    CHECK_EQ(config_hash(back), config_hash(a));

    RunConfig other = parse_run_config(R"({"seed":10,"optimizer":{"name":"sgd"}})");
    CHECK(config_hash(other) != config_hash(a));
    RunConfig deep = parse_run_config(
        R"({"seed":9,"optimizer":{"name":"sgd"},"problem":{"synthetic":{"noise_sigma":0.06}}})");
    CHECK(config_hash(deep) != config_hash(a));

    // compact form: no whitespace anywhere
    CHECK(canonical_config_json(a).find(' ') == std::string::npos);
    CHECK(canonical_config_json(a).find('\n') == std::string::npos);
}

TEST_CASE("the hash primitive matches its published test vectors") {
    CHECK_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
    CHECK_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
    CHECK_EQ(fnv1a64("foobar"), 0x85944171f73967e8ull);
}
