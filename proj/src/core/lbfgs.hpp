#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "core/optim.hpp"

namespace tb {

// Value and gradient of the full-batch objective at w; writes the gradient
// into g (resized by the caller) and returns the value.
using Objective = std::function<double(const std::vector<double>& w, std::vector<double>& g)>;

struct LbfgsReport {
    double f = 0.0;            // objective after the step
    double grad_norm = 0.0;
    double step_norm = 0.0;
    int line_evals = 0;
    bool accepted = false;         // the iterate moved
    bool pair_rejected = false;    // curvature too flat, update skipped
    bool line_search_failed = false;
};

// Limited-memory quasi-Newton solver: two-loop recursion over at most
// `history` curvature pairs, initial scaling s.y/y.y, and a strong Wolfe
// bracket-and-bisect line search (c1/c2/budget from the hyperparameters).
// The search doubles the trial step until it brackets, then bisects; the
// scalar reference in oracle.cpp follows the identical recipe.
//
// Once the line search fails (budget exhausted, typically at stationarity)
// the solver latches: further steps return immediately with the iterate
// unchanged, so a fixed-length trace stays cheap and truthful.
class LbfgsSolver {
public:
    explicit LbfgsSolver(const HyperParams& hp);

    LbfgsReport step(std::vector<double>& w, const Objective& fg);

    bool stalled() const { return stalled_; }
    size_t pairs() const { return s_.size(); }

    // state round-trip for checkpointing
    void export_state(std::vector<std::pair<std::string, std::vector<double>>>& out) const;
    void import_state(const std::vector<std::pair<std::string, std::vector<double>>>& in);

private:
    std::vector<double> direction() const;

    HyperParams hp_;
    std::deque<std::vector<double>> s_, y_;
    std::vector<double> g_;
    double f_ = 0.0;
    bool primed_ = false;
    bool stalled_ = false;
};

} // namespace tb
