#pragma once

#include <functional>
#include <vector>

// Standalone scalar re-derivations of every update rule in the suite.
// These operate on plain doubles, share no code with the tensor steppers in
// optim.cpp/lbfgs.cpp, and exist so the real implementations can be checked
// against an independent transcription of the same math. Keep it that way:
// nothing here may include tensor or optimizer headers.

namespace tb::oracle {

using GradFn = std::function<double(double)>;      // gradient at a point
using ValGradFn = std::function<double(double, double*)>;  // value + gradient

struct ScalarHp {
    double eta = 1e-3;
    double beta = 0.0;       // momentum weight
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;
    double rho = 0.9;
    double lambda = 0.0;     // l1 strength
    bool nesterov = false;
    bool amsgrad = false;
    bool centered = false;
    bool adam_standard_correction = false;
    bool adadelta_strict = false;
};

struct SgdRef {
    double prev = 0.0;
    bool has_prev = false;
    double step(double w, const GradFn& g, const ScalarHp& hp);
};

struct AdamRef {
    double m = 0.0, v = 0.0, vmax = 0.0;
    long k = 0;
    double step(double w, const GradFn& g, const ScalarHp& hp);
};

struct AdamaxRef {
    double m = 0.0, u = 0.0;
    long k = 0;
    double step(double w, const GradFn& g, const ScalarHp& hp);
};

struct NadamRef {
    double m = 0.0, v = 0.0;
    double prev = 0.0;
    bool has_prev = false;
    long k = 0;
    double step(double w, const GradFn& g, const ScalarHp& hp);
};

struct AdagradRef {
    double G = 0.0;
    double step(double w, const GradFn& g, const ScalarHp& hp);
};

struct RmspropRef {
    double v = 0.0, mg = 0.0, vel = 0.0;
    double step(double w, const GradFn& g, const ScalarHp& hp);
};

struct AdadeltaRef {
    double v = 0.0, dacc = 0.0;
    double step(double w, const GradFn& g, const ScalarHp& hp);
};

struct FtrlRef {
    double z = 0.0, n = 0.0;
    double step(double w, const GradFn& g, const ScalarHp& hp);
};

// Scalar quasi-Newton reference: the inverse-Hessian recursion written out
// directly (in one dimension V_k collapses to zero, so an accepted pair
// simply sets H to s/y), plus the same bracket-and-bisect strong Wolfe
// search the flat-vector implementation documents.
struct LbfgsRef {
    double H = 1.0;
    bool has_pair = false;
    double fw = 0.0, gw = 0.0;
    bool primed = false;
    bool line_search_failed = false;
    double step(double w, const ValGradFn& fg);
};

} // namespace tb::oracle
