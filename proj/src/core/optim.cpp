#include "core/optim.hpp"

#include <cmath>

#include "core/error.hpp"

namespace tb {

const char* algo_name(Algo a) {
    switch (a) {
        case Algo::sgd: return "sgd";
        case Algo::adam: return "adam";
        case Algo::adamax: return "adamax";
        case Algo::nadam: return "nadam";
        case Algo::adagrad: return "adagrad";
        case Algo::rmsprop: return "rmsprop";
        case Algo::adadelta: return "adadelta";
        case Algo::ftrl: return "ftrl";
        default: return "lbfgs";
    }
}

Algo algo_from_name(const std::string& name) {
    for (Algo a : {Algo::sgd, Algo::adam, Algo::adamax, Algo::nadam, Algo::adagrad, Algo::rmsprop,
                   Algo::adadelta, Algo::ftrl, Algo::lbfgs})
        if (name == algo_name(a)) return a;
    fail(errc::unknown_optimizer, "unknown optimizer '" + name + "'");
}

void HyperParams::validate(Algo algo) const {
    require(eta > 0.0, errc::invalid_hyper_params, "eta must be positive");
    require(epsilon > 0.0, errc::invalid_hyper_params, "epsilon must be positive");
    auto unit = [](double x) { return x >= 0.0 && x < 1.0; };
    require(unit(beta), errc::invalid_hyper_params, "beta must lie in [0,1)");
    require(unit(beta1), errc::invalid_hyper_params, "beta1 must lie in [0,1)");
    require(unit(beta2), errc::invalid_hyper_params, "beta2 must lie in [0,1)");
    require(unit(rho), errc::invalid_hyper_params, "rho must lie in [0,1)");
    require(lambda >= 0.0, errc::invalid_hyper_params, "lambda must be nonnegative");
    if (algo == Algo::lbfgs) {
        require(history >= 1, errc::invalid_hyper_params, "history must be at least 1");
        require(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0,
                errc::invalid_hyper_params, "need 0 < c1 < c2 < 1");
        require(max_line_evals >= 2, errc::invalid_hyper_params,
                "line search needs at least 2 evaluations");
        require(curvature_floor > 0.0, errc::invalid_hyper_params,
                "curvature floor must be positive");
    }
}

HyperParams preset_hyper_params(Algo algo, const std::string& preset) {
    bool tuned = preset == "tuned";
    require(tuned || preset == "default", errc::invalid_value,
            "unknown preset '" + preset + "' (expected default or tuned)");
    HyperParams hp;
    switch (algo) {
        case Algo::sgd:
            hp.eta = tuned ? 1e-1 : 1e-2;
            hp.beta = tuned ? 0.9 : 0.0;
            hp.nesterov = false;
            break;
        case Algo::adam:
            hp.eta = 1e-3;
            hp.beta1 = 0.9;
            hp.beta2 = tuned ? 0.9999 : 0.999;
            hp.epsilon = tuned ? 1e-8 : 1e-7;
            hp.amsgrad = tuned;
            break;
        case Algo::adamax:
            hp.eta = 1e-3;
            hp.beta1 = tuned ? 0.6 : 0.9;
            hp.beta2 = tuned ? 0.99 : 0.999;
            hp.epsilon = tuned ? 1e-6 : 1e-7;
            break;
        case Algo::nadam:
            hp.eta = 1e-3;
            hp.beta1 = tuned ? 0.99 : 0.9;
            hp.beta2 = tuned ? 0.99 : 0.999;
            hp.epsilon = tuned ? 1e-6 : 1e-7;
            break;
        case Algo::rmsprop:
            hp.eta = tuned ? 1e-3 : 1e-2;
            hp.beta = 0.0;
            hp.rho = 0.9;
            hp.epsilon = tuned ? 1e-6 : 1e-7;
            hp.centered = false;
            break;
        case Algo::adadelta:
            // never tuned; eta is listed for completeness but the rule set
            // below takes no step size
            hp.eta = 1e-3;
            hp.rho = 0.95;
            hp.epsilon = 1e-7;
            break;
        case Algo::adagrad:
            hp.eta = 1e-3;
            hp.rho = 0.95;  // stored but unused: the accumulator rule has no decay
            hp.epsilon = 1e-7;
            break;
        case Algo::ftrl:
            hp.eta = 1e-3;
            hp.beta = 0.1;
            hp.beta1 = 0.0;
            hp.beta2 = 0.0;
            hp.lambda = 0.0;
            break;
        case Algo::lbfgs:
            break;  // fixed solver constants, nothing tunable here
    }
    return hp;
}

bool OptimizerState::has(const std::string& name) const {
    for (const auto& s : slots)
        if (s.first == name) return true;
    return false;
}

ParamSet& OptimizerState::slot_zeros(const std::string& name, const ParamSet& like) {
    for (auto& s : slots)
        if (s.first == name) return s.second;
    slots.emplace_back(name, like.zeros_like());
    return slots.back().second;
}

ParamSet& OptimizerState::slot_copy(const std::string& name, const ParamSet& like) {
    for (auto& s : slots)
        if (s.first == name) return s.second;
    slots.emplace_back(name, like);
    return slots.back().second;
}

ParamSet& OptimizerState::get(const std::string& name) {
    for (auto& s : slots)
        if (s.first == name) return s.second;
    fail(errc::invalid_value, "optimizer state has no slot '" + name + "'");
}

namespace {

void check_grad_layout(const ParamSet& w, const ParamSet& g) {
    require(g.same_layout(w), errc::shape_mismatch,
            "gradient layout does not match the parameters");
}

} // namespace

void sgd_step(ParamSet& w, const GradientSource& gs, OptimizerState& st, const HyperParams& hp) {
    ParamSet& prev = st.slot_copy("prev", w);  // first step: prev == w, no momentum
    ParamSet g = w.zeros_like();
    st.k++;
    if (hp.nesterov) {
        ParamSet z = w;
        for (size_t e = 0; e < w.count(); ++e)
            for (size_t i = 0; i < w[e].size(); ++i)
                z[e][i] = w[e][i] + hp.beta * (w[e][i] - prev[e][i]);
        gs(z, g);
        check_grad_layout(w, g);
        for (size_t e = 0; e < w.count(); ++e)
            for (size_t i = 0; i < w[e].size(); ++i) {
                double next = z[e][i] - hp.eta * g[e][i];
                prev[e][i] = w[e][i];
                w[e][i] = next;
            }
    } else {
        gs(w, g);
        check_grad_layout(w, g);
        for (size_t e = 0; e < w.count(); ++e)
            for (size_t i = 0; i < w[e].size(); ++i) {
                double next = w[e][i] - hp.eta * g[e][i] + hp.beta * (w[e][i] - prev[e][i]);
                prev[e][i] = w[e][i];
                w[e][i] = next;
            }
    }
}

void adam_step(ParamSet& w, const GradientSource& gs, OptimizerState& st, const HyperParams& hp) {
    ParamSet g = w.zeros_like();
    gs(w, g);
    check_grad_layout(w, g);
    ParamSet& m = st.slot_zeros("m", w);
    ParamSet& v = st.slot_zeros("v", w);
    ParamSet* vmax = hp.amsgrad ? &st.slot_zeros("vmax", w) : nullptr;
    st.k++;
    double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.k));
    double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.k));
    double scale = hp.adam_standard_correction ? std::sqrt(c2) / c1 : c2 / c1;
    for (size_t e = 0; e < w.count(); ++e) {
        for (size_t i = 0; i < w[e].size(); ++i) {
            double grad = g[e][i];
            m[e][i] = hp.beta1 * m[e][i] + (1.0 - hp.beta1) * grad;
            v[e][i] = hp.beta2 * v[e][i] + (1.0 - hp.beta2) * grad * grad;
            double vs = v[e][i];
            if (vmax) {
                if (vs > (*vmax)[e][i]) (*vmax)[e][i] = vs;
                vs = (*vmax)[e][i];
            }
            w[e][i] -= hp.eta * scale * m[e][i] / std::sqrt(hp.epsilon + vs);
        }
    }
}

void adamax_step(ParamSet& w, const GradientSource& gs, OptimizerState& st,
                 const HyperParams& hp) {
    ParamSet g = w.zeros_like();
    gs(w, g);
    check_grad_layout(w, g);
    ParamSet& m = st.slot_zeros("m", w);
    ParamSet& u = st.slot_zeros("u", w);
    st.k++;
    double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.k));
    for (size_t e = 0; e < w.count(); ++e) {
        for (size_t i = 0; i < w[e].size(); ++i) {
            double grad = g[e][i];
            m[e][i] = hp.beta1 * m[e][i] + (1.0 - hp.beta1) * grad;
            double decayed = hp.beta2 * u[e][i];
            double cand = std::fabs(grad);
            u[e][i] = decayed > cand ? decayed : cand;
            // an all-zero gradient history gives u = 0; leave the coordinate be
            if (u[e][i] == 0.0) continue;
            w[e][i] -= hp.eta * m[e][i] / (c1 * u[e][i]);
        }
    }
}

void nadam_step(ParamSet& w, const GradientSource& gs, OptimizerState& st,
                const HyperParams& hp) {
    ParamSet& prev = st.slot_copy("prev", w);
    ParamSet z = w;
    for (size_t e = 0; e < w.count(); ++e)
        for (size_t i = 0; i < w[e].size(); ++i)
            z[e][i] = w[e][i] + hp.beta * (w[e][i] - prev[e][i]);
    ParamSet g = w.zeros_like();
    gs(z, g);
    check_grad_layout(w, g);
    ParamSet& m = st.slot_zeros("m", w);
    ParamSet& v = st.slot_zeros("v", w);
    st.k++;
    double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.k));
    double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.k));
    double scale = hp.adam_standard_correction ? std::sqrt(c2) / c1 : c2 / c1;
    for (size_t e = 0; e < w.count(); ++e) {
        for (size_t i = 0; i < w[e].size(); ++i) {
            double grad = g[e][i];
            m[e][i] = hp.beta1 * m[e][i] + (1.0 - hp.beta1) * grad;
            v[e][i] = hp.beta2 * v[e][i] + (1.0 - hp.beta2) * grad * grad;
            double next = z[e][i] - hp.eta * scale * m[e][i] / std::sqrt(hp.epsilon + v[e][i]);
            prev[e][i] = w[e][i];
            w[e][i] = next;
        }
    }
}

void adagrad_step(ParamSet& w, const GradientSource& gs, OptimizerState& st,
                  const HyperParams& hp) {
    ParamSet g = w.zeros_like();
    gs(w, g);
    check_grad_layout(w, g);
    ParamSet& G = st.slot_zeros("G", w);
    st.k++;
    for (size_t e = 0; e < w.count(); ++e) {
        for (size_t i = 0; i < w[e].size(); ++i) {
            double grad = g[e][i];
            G[e][i] += grad * grad;
            w[e][i] -= hp.eta * grad / std::sqrt(hp.epsilon + G[e][i]);
        }
    }
}

void rmsprop_step(ParamSet& w, const GradientSource& gs, OptimizerState& st,
                  const HyperParams& hp) {
    ParamSet g = w.zeros_like();
    gs(w, g);
    check_grad_layout(w, g);
    ParamSet& v = st.slot_zeros("v", w);
    ParamSet* mg = hp.centered ? &st.slot_zeros("mg", w) : nullptr;
    ParamSet* vel = hp.beta != 0.0 ? &st.slot_zeros("vel", w) : nullptr;
    st.k++;
    for (size_t e = 0; e < w.count(); ++e) {
        for (size_t i = 0; i < w[e].size(); ++i) {
            double grad = g[e][i];
            v[e][i] = hp.rho * v[e][i] + (1.0 - hp.rho) * grad * grad;
            double denom = hp.epsilon + v[e][i];
            if (mg) {
                (*mg)[e][i] = hp.rho * (*mg)[e][i] + (1.0 - hp.rho) * grad;
                denom -= (*mg)[e][i] * (*mg)[e][i];
            }
            double move = hp.eta * grad / std::sqrt(denom);
            if (vel) {
                (*vel)[e][i] = hp.beta * (*vel)[e][i] + move;
                move = (*vel)[e][i];
            }
            w[e][i] -= move;
        }
    }
}

void adadelta_step(ParamSet& w, const GradientSource& gs, OptimizerState& st,
                   const HyperParams& hp) {
    ParamSet g = w.zeros_like();
    gs(w, g);
    check_grad_layout(w, g);
    ParamSet& v = st.slot_zeros("v", w);
    ParamSet& dacc = st.slot_zeros("dacc", w);
    st.k++;
    for (size_t e = 0; e < w.count(); ++e) {
        for (size_t i = 0; i < w[e].size(); ++i) {
            double grad = g[e][i];
            v[e][i] = hp.rho * v[e][i] + (1.0 - hp.rho) * grad * grad;
            double delta;
            if (hp.adadelta_strict) {
                delta = -std::sqrt(hp.epsilon + dacc[e][i]) * grad /
                        std::pow(hp.epsilon + v[e][i], 0.25);
            } else {
                delta = -std::sqrt(hp.epsilon + dacc[e][i]) * grad /
                        std::sqrt(hp.epsilon + v[e][i]);
            }
            dacc[e][i] = hp.rho * dacc[e][i] + (1.0 - hp.rho) * delta * delta;
            w[e][i] += delta;
        }
    }
}

void ftrl_step(ParamSet& w, const GradientSource& gs, OptimizerState& st, const HyperParams& hp) {
    ParamSet g = w.zeros_like();
    gs(w, g);
    check_grad_layout(w, g);
    ParamSet& z = st.slot_zeros("z", w);
    ParamSet& n = st.slot_zeros("n", w);
    st.k++;
    for (size_t e = 0; e < w.count(); ++e) {
        for (size_t i = 0; i < w[e].size(); ++i) {
            double grad = g[e][i];
            double n_next = n[e][i] + grad * grad;
            double sigma = (std::sqrt(n_next) - std::sqrt(n[e][i])) / hp.eta;
            z[e][i] += grad - sigma * w[e][i];
            n[e][i] = n_next;
            if (std::fabs(z[e][i]) <= hp.lambda) {
                w[e][i] = 0.0;
            } else {
                double lr = hp.eta / (hp.beta + std::sqrt(n[e][i]));
                double sign = z[e][i] > 0.0 ? 1.0 : -1.0;
                w[e][i] = -lr * (z[e][i] - sign * hp.lambda);
            }
        }
    }
}

void Optimizer::step(ParamSet& w, const GradientSource& gs, OptimizerState& st) const {
    switch (algo) {
        case Algo::sgd: return sgd_step(w, gs, st, hp);
        case Algo::adam: return adam_step(w, gs, st, hp);
        case Algo::adamax: return adamax_step(w, gs, st, hp);
        case Algo::nadam: return nadam_step(w, gs, st, hp);
        case Algo::adagrad: return adagrad_step(w, gs, st, hp);
        case Algo::rmsprop: return rmsprop_step(w, gs, st, hp);
        case Algo::adadelta: return adadelta_step(w, gs, st, hp);
        case Algo::ftrl: return ftrl_step(w, gs, st, hp);
        case Algo::lbfgs:
            fail(errc::invalid_value,
                 "lbfgs is a full-batch solver; drive it through LbfgsSolver");
    }
}

Optimizer make_optimizer(const std::string& name, const HyperParams& hp) {
    Optimizer opt{algo_from_name(name), hp};
    opt.hp.validate(opt.algo);
    return opt;
}

Optimizer make_optimizer(const std::string& name, const std::string& preset) {
    Algo algo = algo_from_name(name);
    return Optimizer{algo, preset_hyper_params(algo, preset)};
}

} // namespace tb
