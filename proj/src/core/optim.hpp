#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/params.hpp"

namespace tb {

enum class Algo { sgd, adam, adamax, nadam, adagrad, rmsprop, adadelta, ftrl, lbfgs };

const char* algo_name(Algo a);
Algo algo_from_name(const std::string& name);

struct HyperParams {
    double eta = 1e-3;
    double beta = 0.0;        // momentum weight; l2-shift weight for ftrl
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    double rho = 0.9;
    double lambda = 0.0;      // l1 strength (ftrl)
    bool nesterov = false;
    bool amsgrad = false;
    bool centered = false;
    // Two spots where the written rule and common practice diverge; the
    // literal form is the default, the switches select the common one.
    bool adam_standard_correction = false;   // sqrt(1-b2^k) instead of (1-b2^k)
    bool adadelta_strict = false;            // quarter-power denominator

    // quasi-Newton knobs
    size_t history = 10;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    int max_line_evals = 20;
    double curvature_floor = 1e-10;

    void validate(Algo algo) const;  // throws invalid_hyper_params
};

// Factory settings per algorithm. "default" is the stock configuration,
// "tuned" the grid-search winner; the three algorithms that were never
// tuned (adadelta, adagrad, ftrl) reuse their defaults, as does lbfgs.
HyperParams preset_hyper_params(Algo algo, const std::string& preset);

// Lazily allocated named slots, each mirroring the parameter layout, plus
// the step counter. Slots hold whatever running quantities an algorithm
// declares (moments, accumulators, the previous iterate, ...). A deque so
// that references handed out by slot_zeros survive later insertions; the
// steppers hold several at once while they create them.
struct OptimizerState {
    int64_t k = 0;
    std::deque<std::pair<std::string, ParamSet>> slots;

    bool has(const std::string& name) const;
    ParamSet& slot_zeros(const std::string& name, const ParamSet& like);
    ParamSet& slot_copy(const std::string& name, const ParamSet& like);
    ParamSet& get(const std::string& name);
};

// Supplies the mini-batch gradient at a requested point. Steppers call it
// exactly once per step, at the iterate the update rule evaluates; the
// extrapolating rules (nesterov sgd, nadam) probe a shifted point.
using GradientSource = std::function<void(const ParamSet& at, ParamSet& grad_out)>;

void sgd_step(ParamSet& w, const GradientSource& gs, OptimizerState& st, const HyperParams& hp);
void adam_step(ParamSet& w, const GradientSource& gs, OptimizerState& st, const HyperParams& hp);
void adamax_step(ParamSet& w, const GradientSource& gs, OptimizerState& st, const HyperParams& hp);
void nadam_step(ParamSet& w, const GradientSource& gs, OptimizerState& st, const HyperParams& hp);
void adagrad_step(ParamSet& w, const GradientSource& gs, OptimizerState& st, const HyperParams& hp);
void rmsprop_step(ParamSet& w, const GradientSource& gs, OptimizerState& st, const HyperParams& hp);
void adadelta_step(ParamSet& w, const GradientSource& gs, OptimizerState& st, const HyperParams& hp);
void ftrl_step(ParamSet& w, const GradientSource& gs, OptimizerState& st, const HyperParams& hp);

// Validated (algorithm, hyperparameter) bundle. step() drives the
// mini-batch rules above; the full-batch quasi-Newton solver lives in
// lbfgs.hpp and refuses this entry point.
struct Optimizer {
    Algo algo;
    HyperParams hp;
    void step(ParamSet& w, const GradientSource& gs, OptimizerState& st) const;
};

Optimizer make_optimizer(const std::string& name, const HyperParams& hp);
Optimizer make_optimizer(const std::string& name, const std::string& preset);

} // namespace tb
