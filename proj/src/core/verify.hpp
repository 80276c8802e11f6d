#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tb {

// One self-check outcome. detail carries the measured worst case so a
// failure report says how far off the implementation was, not just that
// it was off.
struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Every update rule against its standalone scalar reference: `problems`
// random 1-d objectives per algorithm, the first `steps` iterates must
// agree within tol.
CheckResult check_scalar_oracles(size_t problems, int steps, double tol, uint64_t seed);

// Analytic network gradients against central finite differences on random
// small instances (silu activations, mean pooling, batchnorm in its fixed
// statistics mode, dropout off). step is the probe h; tol bounds
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-3).
CheckResult check_network_gradients(size_t instances, double step, double tol, uint64_t seed);

// The two-problem, two-solver success-rate example: the tau where each
// solver's curve reaches 1 must sit at the closed-form threshold.
CheckResult check_profile_example(double tol);

// Random record sets: curves stay in [0,1], never decrease in tau, cover
// every problem at tau = 0, and survive per-problem affine rescaling.
CheckResult check_profile_properties(size_t sets, uint64_t seed);

// The quasi-Newton solver on a random diagonal quadratic: the gradient
// norm must fall below tol within `budget` iterations.
CheckResult check_lbfgs_quadratic(size_t dim, int budget, double tol, uint64_t seed);

// The bundled suite with stock parameters; what the verify command runs.
std::vector<CheckResult> verify_all();

} // namespace tb
