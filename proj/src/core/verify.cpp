#include "core/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "core/bench.hpp"
#include "core/error.hpp"
#include "core/lbfgs.hpp"
#include "core/nn.hpp"
#include "core/optim.hpp"
#include "core/oracle.hpp"
#include "core/rng.hpp"

namespace tb {

namespace {

std::string format(const char* pattern, ...) {
    char buf[256];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof buf, pattern, args);
    va_end(args);
    return buf;
}

// Random convex quartic a(w-c)^2 + b(w-c)^4. The curvature range keeps
// every update rule numerically tame while still exercising the state
// recursions on non-constant gradients.
struct ScalarProblem {
    double a, b, c, w0;

    double value(double w) const {
        double u = w - c;
        return a * u * u + b * u * u * u * u;
    }
    double grad(double w) const {
        double u = w - c;
        return 2.0 * a * u + 4.0 * b * u * u * u;
    }
};

ScalarProblem sample_problem(Rng& rng) {
    ScalarProblem p;
    p.a = rng.uniform(0.1, 3.0);
    p.b = rng.uniform(0.0, 1.0);
    p.c = rng.uniform(-2.0, 2.0);
    p.w0 = rng.uniform(-3.0, 3.0);
    return p;
}

// Draw every knob any of the rules reads, inside its valid range. One draw
// list feeds both implementations so they see identical settings.
HyperParams sample_hyper(Rng& rng) {
    HyperParams hp;
    hp.eta = std::pow(10.0, rng.uniform(-3.0, -0.5));
    hp.beta = rng.uniform(0.0, 0.95);
    hp.beta1 = rng.uniform(0.5, 0.99);
    hp.beta2 = rng.uniform(0.9, 0.9999);
    hp.epsilon = std::pow(10.0, rng.uniform(-8.0, -6.0));
    hp.rho = rng.uniform(0.5, 0.99);
    hp.lambda = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 0.5);
    hp.nesterov = rng.uniform() < 0.5;
    hp.amsgrad = rng.uniform() < 0.5;
    hp.centered = rng.uniform() < 0.5;
    hp.adam_standard_correction = rng.uniform() < 0.5;
    hp.adadelta_strict = rng.uniform() < 0.5;
    return hp;
}

oracle::ScalarHp mirror(const HyperParams& hp) {
    oracle::ScalarHp s;
    s.eta = hp.eta;
    s.beta = hp.beta;
    s.beta1 = hp.beta1;
    s.beta2 = hp.beta2;
    s.eps = hp.epsilon;
    s.rho = hp.rho;
    s.lambda = hp.lambda;
    s.nesterov = hp.nesterov;
    s.amsgrad = hp.amsgrad;
    s.centered = hp.centered;
    s.adam_standard_correction = hp.adam_standard_correction;
    s.adadelta_strict = hp.adadelta_strict;
    return s;
}

template <typename Ref>
double worst_gap(Algo algo, size_t problems, int steps, uint64_t seed) {
    double worst = 0.0;
    Rng branch = Rng(seed).fork(algo_name(algo));
    for (size_t pi = 0; pi < problems; ++pi) {
        Rng rc = branch.fork("case", pi);
        ScalarProblem prob = sample_problem(rc);
        HyperParams hp = sample_hyper(rc);
        oracle::ScalarHp shp = mirror(hp);
        auto grad = [&](double w) { return prob.grad(w); };

        Optimizer opt = make_optimizer(algo_name(algo), hp);
        ParamSet w;
        w.add("w", Tensor({1}, prob.w0));
        OptimizerState st;
        GradientSource gs = [&](const ParamSet& at, ParamSet& g) { g[0][0] = grad(at[0][0]); };

        Ref ref;
        double wr = prob.w0;
        for (int s = 0; s < steps; ++s) {
            opt.step(w, gs, st);
            wr = ref.step(wr, grad, shp);
            worst = std::max(worst, std::fabs(w[0][0] - wr));
        }
    }
    return worst;
}

double worst_gap_lbfgs(size_t problems, int steps, uint64_t seed) {
    double worst = 0.0;
    Rng branch = Rng(seed).fork(algo_name(Algo::lbfgs));
    for (size_t pi = 0; pi < problems; ++pi) {
        Rng rc = branch.fork("case", pi);
        ScalarProblem prob = sample_problem(rc);

        LbfgsSolver solver{HyperParams{}};  // stock line-search constants
        std::vector<double> w{prob.w0};
        Objective obj = [&](const std::vector<double>& x, std::vector<double>& g) {
            g[0] = prob.grad(x[0]);
            return prob.value(x[0]);
        };

        oracle::LbfgsRef ref;
        double wr = prob.w0;
        oracle::ValGradFn fg = [&](double x, double* g) {
            *g = prob.grad(x);
            return prob.value(x);
        };
        for (int s = 0; s < steps; ++s) {
            solver.step(w, obj);
            wr = ref.step(wr, fg);
            worst = std::max(worst, std::fabs(w[0] - wr));
        }
    }
    return worst;
}

ExperimentRecord plain_record(const std::string& problem, const std::string& solver, double f0,
                              double fin) {
    ExperimentRecord r;
    r.problem_id = problem;
    r.solver = solver;
    r.initial_loss = f0;
    r.final_loss = fin;
    return r;
}

} // namespace

CheckResult check_scalar_oracles(size_t problems, int steps, double tol, uint64_t seed) {
    double worst = 0.0;
    worst = std::max(worst, worst_gap<oracle::SgdRef>(Algo::sgd, problems, steps, seed));
    worst = std::max(worst, worst_gap<oracle::AdamRef>(Algo::adam, problems, steps, seed));
    worst = std::max(worst, worst_gap<oracle::AdamaxRef>(Algo::adamax, problems, steps, seed));
    worst = std::max(worst, worst_gap<oracle::NadamRef>(Algo::nadam, problems, steps, seed));
    worst = std::max(worst, worst_gap<oracle::AdagradRef>(Algo::adagrad, problems, steps, seed));
    worst = std::max(worst, worst_gap<oracle::RmspropRef>(Algo::rmsprop, problems, steps, seed));
    worst = std::max(worst, worst_gap<oracle::AdadeltaRef>(Algo::adadelta, problems, steps, seed));
    worst = std::max(worst, worst_gap<oracle::FtrlRef>(Algo::ftrl, problems, steps, seed));
    worst = std::max(worst, worst_gap_lbfgs(problems, steps, seed));

    CheckResult r;
    r.name = "scalar-rules";
    r.pass = worst <= tol;
    r.detail = format("worst iterate gap %.3e over %zu problems x 9 rules x %d steps (tol %.0e)",
                      worst, problems, steps, tol);
    return r;
}

CheckResult check_network_gradients(size_t instances, double step, double tol, uint64_t seed) {
    double worst = 0.0;
    size_t coords = 0;
    Rng root(seed);
    for (size_t i = 0; i < instances; ++i) {
        Rng rc = root.fork("net", i);
        size_t H = 8 + rc.next_u64() % 4;
        size_t W = 8 + rc.next_u64() % 4;
        size_t classes = 2 + rc.next_u64() % 3;
        size_t conv_width = 2 + rc.next_u64() % 3;
        size_t dense_width = 6 + rc.next_u64() % 5;
        size_t B = 2 + rc.next_u64() % 2;

        ArchitectureSpec spec;
        spec.variant = "gradcheck";
        spec.input = {2, H, W};
        spec.classes = classes;
        BlockSpec conv;
        conv.kind = BlockKind::cdb;
        conv.width = conv_width;
        conv.act = Act::silu;
        conv.pool = PoolKind::mean;
        conv.pool_size = 2;
        conv.batchnorm = true;
        conv.dropout = 0.0;
        BlockSpec dense;
        dense.kind = BlockKind::fcb;
        dense.width = dense_width;
        dense.act = Act::silu;
        BlockSpec cls;
        cls.kind = BlockKind::classify;
        spec.blocks = {conv, dense, cls};

        Network net(spec);
        require(net.param_count() <= 5000, errc::invalid_value,
                "gradient check instance grew past its intended size");

        Rng init_rng = rc.fork("init");
        ParamSet w = net.init_params(Init::lecun_normal, init_rng);

        Rng xr = rc.fork("x");
        Tensor x({B, 2, H, W});
        for (size_t j = 0; j < x.size(); ++j) x[j] = xr.uniform();
        Rng yr = rc.fork("y");
        Tensor y({B, classes});
        for (size_t bi = 0; bi < B; ++bi) y.at(bi, yr.next_u64() % classes) = 1.0;

        // One training pass moves the running statistics off their resting
        // values; the differentiation then runs with them frozen, so every
        // probe sees the same normalization.
        (void)net.forward(x, w, Mode::train, nullptr);

        ParamSet grads = w.zeros_like();
        (void)net.loss_and_grad(x, y, w, Mode::eval, nullptr, grads);

        std::vector<double> flat = flatten_params(w);
        std::vector<double> analytic = flatten_params(grads);
        ParamSet probe = w;
        for (size_t j = 0; j < flat.size(); ++j) {
            double keep = flat[j];
            flat[j] = keep + step;
            unflatten_params(flat, probe);
            double up = net.loss(x, y, probe, Mode::eval, nullptr);
            flat[j] = keep - step;
            unflatten_params(flat, probe);
            double down = net.loss(x, y, probe, Mode::eval, nullptr);
            flat[j] = keep;
            double numeric = (up - down) / (2.0 * step);
            double rel = std::fabs(analytic[j] - numeric) /
                         std::max({std::fabs(analytic[j]), std::fabs(numeric), 1e-3});
            worst = std::max(worst, rel);
        }
        coords += flat.size();
    }

    CheckResult r;
    r.name = "network-gradients";
    r.pass = worst <= tol;
    r.detail = format("worst relative error %.3e over %zu coordinates in %zu networks (tol %.0e)",
                      worst, coords, instances, tol);
    return r;
}

CheckResult check_profile_example(double tol) {
    // Two problems, two solvers, every run starting from loss 1. Solver
    // "first" wins problem one outright and needs tau = 1/6 to close the
    // gap on problem two; "second" wins problem two and needs tau = 1/9 on
    // problem one. Both closed-form thresholds follow from
    // f <= f_best + tau (f0 - f_best).
    std::vector<ExperimentRecord> recs = {
        plain_record("p1", "first", 1.0, 0.1),
        plain_record("p2", "first", 1.0, 0.5),
        plain_record("p1", "second", 1.0, 0.2),
        plain_record("p2", "second", 1.0, 0.4),
    };

    auto sigma_at = [&](const std::string& solver, double tau) {
        std::vector<ProfileCurve> curves = success_rate_profiles(recs, {tau});
        for (const ProfileCurve& c : curves)
            if (c.solver == solver) return c.sigma[0];
        fail(errc::missing_record, "solver missing from its own profile");
    };
    auto full_coverage_tau = [&](const std::string& solver) {
        double lo = 0.0, hi = 1.0;
        for (int i = 0; i < 200; ++i) {
            double mid = 0.5 * (lo + hi);
            if (sigma_at(solver, mid) >= 1.0)
                hi = mid;
            else
                lo = mid;
        }
        return hi;
    };

    double gap_first = std::fabs(full_coverage_tau("first") - 1.0 / 6.0);
    double gap_second = std::fabs(full_coverage_tau("second") - 1.0 / 9.0);
    bool halves = sigma_at("first", 0.0) == 0.5 && sigma_at("second", 0.0) == 0.5;

    CheckResult r;
    r.name = "profile-example";
    r.pass = gap_first <= tol && gap_second <= tol && halves;
    r.detail = format("threshold gaps %.3e and %.3e (tol %.0e), half coverage at tau 0: %s",
                      gap_first, gap_second, tol, halves ? "yes" : "no");
    return r;
}

CheckResult check_profile_properties(size_t sets, uint64_t seed) {
    Rng root(seed);
    size_t bad = 0;
    size_t first_bad = 0;
    for (size_t si = 0; si < sets; ++si) {
        Rng rc = root.fork("set", si);
        size_t P = 1 + rc.next_u64() % 6;
        size_t S = 1 + rc.next_u64() % 5;
        std::vector<double> f0(P);
        for (double& v : f0) v = rc.uniform(0.5, 5.0);

        // Finals may exceed the start, but one anchor run per problem stays
        // at or below it. That pins each problem's best final under its
        // start, the regime where the curves are provably monotone (and the
        // one real data lives in, since a diverged run counts as its start).
        std::vector<size_t> anchor(P);
        for (size_t p = 0; p < P; ++p) anchor[p] = rc.next_u64() % S;

        std::vector<ExperimentRecord> recs;
        std::vector<ExperimentRecord> resolved;  // failures written out explicitly
        for (size_t s = 0; s < S; ++s) {
            for (size_t p = 0; p < P; ++p) {
                double stretch = anchor[p] == s ? 1.0 : 1.2;
                ExperimentRecord r = plain_record("p" + std::to_string(p),
                                                  "s" + std::to_string(s), f0[p],
                                                  f0[p] * rc.uniform(0.0, stretch));
                if (rc.uniform() < 0.15 && anchor[p] != s) {
                    r.failed = true;
                    r.failure = "diverged";
                }
                recs.push_back(r);
                ExperimentRecord e = r;
                if (e.failed) {
                    // what the profile is defined to substitute
                    e.failed = false;
                    e.failure.clear();
                    e.final_loss = e.initial_loss;
                }
                resolved.push_back(e);
            }
        }

        size_t extra = 3 + rc.next_u64() % 6;
        std::vector<double> taus{0.0};
        for (size_t k = 0; k < extra; ++k) taus.push_back(rc.uniform(0.0, 1.2));
        std::sort(taus.begin(), taus.end());
        taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

        std::vector<ProfileCurve> curves = success_rate_profiles(recs, taus);

        bool ok = true;
        double cover = 0.0;
        for (const ProfileCurve& c : curves) {
            for (size_t k = 0; k < c.sigma.size(); ++k) {
                ok = ok && c.sigma[k] >= 0.0 && c.sigma[k] <= 1.0;
                if (k > 0) ok = ok && c.sigma[k] >= c.sigma[k - 1];
            }
            cover += c.sigma.front();  // taus.front() == 0
        }
        // at tau = 0 each problem's best final loss qualifies, so the
        // counts across solvers total at least one per problem
        ok = ok && std::llround(cover * static_cast<double>(P)) >= static_cast<long long>(P);

        // substituting a failed run's start by hand must change nothing
        std::vector<ProfileCurve> explicit_curves = success_rate_profiles(resolved, taus);
        for (size_t ci = 0; ci < curves.size(); ++ci)
            ok = ok && curves[ci].sigma == explicit_curves[ci].sigma;

        // per-problem affine rescaling of the losses must change nothing
        std::vector<ExperimentRecord> scaled = recs;
        std::vector<double> alpha(P), delta(P);
        for (size_t p = 0; p < P; ++p) {
            alpha[p] = rc.uniform(0.3, 3.0);
            delta[p] = rc.uniform(-2.0, 2.0);
        }
        for (size_t s = 0; s < S; ++s) {
            for (size_t p = 0; p < P; ++p) {
                ExperimentRecord& r = scaled[s * P + p];
                r.initial_loss = alpha[p] * r.initial_loss + delta[p];
                r.final_loss = alpha[p] * r.final_loss + delta[p];
            }
        }
        std::vector<ProfileCurve> scaled_curves = success_rate_profiles(scaled, taus);
        for (size_t ci = 0; ci < curves.size(); ++ci)
            ok = ok && curves[ci].sigma == scaled_curves[ci].sigma;

        if (!ok && bad == 0) first_bad = si;
        if (!ok) bad++;
    }

    CheckResult r;
    r.name = "profile-properties";
    r.pass = bad == 0;
    r.detail = bad == 0 ? format("%zu record sets held every invariant", sets)
                        : format("%zu of %zu record sets broke an invariant (first at set %zu)",
                                 bad, sets, first_bad);
    return r;
}

CheckResult check_lbfgs_quadratic(size_t dim, int budget, double tol, uint64_t seed) {
    // The curvature spread is deliberately mild. With the loose curvature
    // condition (c2 = 0.9) the solver takes unit steps and contracts the
    // gradient roughly fivefold per iteration on anisotropic spectra, the
    // same rate the reference scientific-computing implementation shows on
    // identical instances, so a tight budget implies a tame spectrum.
    Rng rc = Rng(seed).fork("quadratic");
    std::vector<double> curv(dim), center(dim), x(dim);
    for (size_t i = 0; i < dim; ++i) {
        curv[i] = std::pow(10.0, rc.uniform(-0.05, 0.05));
        center[i] = rc.uniform(-2.0, 2.0);
        x[i] = rc.uniform(-2.0, 2.0);
    }
    Objective fg = [&](const std::vector<double>& w, std::vector<double>& g) {
        double f = 0.0;
        for (size_t i = 0; i < w.size(); ++i) {
            double u = w[i] - center[i];
            g[i] = curv[i] * u;
            f += 0.5 * curv[i] * u * u;
        }
        return f;
    };

    LbfgsSolver solver{HyperParams{}};
    double reached = HUGE_VAL;
    int used = 0;
    for (int it = 0; it < budget; ++it) {
        LbfgsReport rep = solver.step(x, fg);
        reached = std::min(reached, rep.grad_norm);
        used = it + 1;
        if (reached <= tol) break;
    }

    CheckResult r;
    r.name = "quadratic-solver";
    r.pass = reached <= tol;
    r.detail = format("gradient norm %.3e after %d of %d iterations, %zu variables (tol %.0e)",
                      reached, used, budget, dim, tol);
    return r;
}

std::vector<CheckResult> verify_all() {
    return {
        check_scalar_oracles(1000, 3, 1e-12, 1699806),
        check_network_gradients(20, 1e-5, 1e-5, 1699806),
        check_profile_example(1e-12),
        check_profile_properties(1000, 1699806),
        check_lbfgs_quadratic(6, 10, 1e-8, 1699806),
    };
}

} // namespace tb
