#include "core/oracle.hpp"

#include <cmath>

namespace tb::oracle {

double SgdRef::step(double w, const GradFn& g, const ScalarHp& hp) {
    double last = has_prev ? prev : w;  // first step carries no momentum
    double next;
    if (hp.nesterov) {
        double z = w + hp.beta * (w - last);
        next = z - hp.eta * g(z);
    } else {
        next = w - hp.eta * g(w) + hp.beta * (w - last);
    }
    prev = w;
    has_prev = true;
    return next;
}

double AdamRef::step(double w, const GradFn& g, const ScalarHp& hp) {
    double grad = g(w);
    k++;
    m = hp.beta1 * m + (1.0 - hp.beta1) * grad;
    v = hp.beta2 * v + (1.0 - hp.beta2) * grad * grad;
    double vs = v;
    if (hp.amsgrad) {
        if (v > vmax) vmax = v;
        vs = vmax;
    }
    double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(k));
    double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(k));
    double scale = hp.adam_standard_correction ? std::sqrt(c2) / c1 : c2 / c1;
    return w - hp.eta * scale * m / std::sqrt(hp.eps + vs);
}

double AdamaxRef::step(double w, const GradFn& g, const ScalarHp& hp) {
    double grad = g(w);
    k++;
    m = hp.beta1 * m + (1.0 - hp.beta1) * grad;
    double cand = std::fabs(grad);
    u = hp.beta2 * u > cand ? hp.beta2 * u : cand;
    if (u == 0.0) return w;  // nothing seen yet, leave the iterate alone
    double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(k));
    return w - hp.eta * m / (c1 * u);
}

double NadamRef::step(double w, const GradFn& g, const ScalarHp& hp) {
    double last = has_prev ? prev : w;
    double z = w + hp.beta * (w - last);
    double grad = g(z);
    k++;
    m = hp.beta1 * m + (1.0 - hp.beta1) * grad;
    v = hp.beta2 * v + (1.0 - hp.beta2) * grad * grad;
    double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(k));
    double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(k));
    double scale = hp.adam_standard_correction ? std::sqrt(c2) / c1 : c2 / c1;
    double next = z - hp.eta * scale * m / std::sqrt(hp.eps + v);
    prev = w;
    has_prev = true;
    return next;
}

double AdagradRef::step(double w, const GradFn& g, const ScalarHp& hp) {
    double grad = g(w);
    G += grad * grad;
    return w - hp.eta * grad / std::sqrt(hp.eps + G);
}

double RmspropRef::step(double w, const GradFn& g, const ScalarHp& hp) {
    double grad = g(w);
    v = hp.rho * v + (1.0 - hp.rho) * grad * grad;
    double denom = hp.eps + v;
    if (hp.centered) {
        mg = hp.rho * mg + (1.0 - hp.rho) * grad;
        denom -= mg * mg;
    }
    double move = hp.eta * grad / std::sqrt(denom);
    if (hp.beta != 0.0) {
        vel = hp.beta * vel + move;
        move = vel;
    }
    return w - move;
}

double AdadeltaRef::step(double w, const GradFn& g, const ScalarHp& hp) {
    double grad = g(w);
    v = hp.rho * v + (1.0 - hp.rho) * grad * grad;
    double delta;
    if (hp.adadelta_strict) {
        // literal transcription: the rooted accumulator matrix enters at -1/2
        delta = -std::sqrt(hp.eps + dacc) * grad / std::pow(hp.eps + v, 0.25);
    } else {
        delta = -std::sqrt(hp.eps + dacc) * grad / std::sqrt(hp.eps + v);
    }
    dacc = hp.rho * dacc + (1.0 - hp.rho) * delta * delta;
    return w + delta;
}

double FtrlRef::step(double w, const GradFn& g, const ScalarHp& hp) {
    double grad = g(w);
    double n_next = n + grad * grad;
    double sigma = (std::sqrt(n_next) - std::sqrt(n)) / hp.eta;
    z += grad - sigma * w;
    n = n_next;
    if (std::fabs(z) <= hp.lambda) return 0.0;
    double lr = hp.eta / (hp.beta + std::sqrt(n));
    double sign = z > 0.0 ? 1.0 : -1.0;
    return -lr * (z - sign * hp.lambda);
}

namespace {

// Strong Wolfe bracket-and-bisect. One evaluation is one call of fg.
// Mirrors the documented search in lbfgs.cpp step for step; both sides
// must follow this exact recipe or the trajectories drift apart.
struct Probe {
    double t, f, df;
};

bool wolfe_scalar(const ValGradFn& fg, double w, double d, double f0, double df0, int max_evals,
                  double& t_out, double& f_out, double& g_out) {
    const double c1 = 1e-4, c2 = 0.9;
    int evals = 0;
    auto eval = [&](double t) {
        double gg = 0.0;
        double ff = fg(w + t * d, &gg);
        evals++;
        return Probe{t, ff, gg * d};
    };
    auto zoom = [&](Probe lo, Probe hi) -> bool {
        while (evals < max_evals) {
            Probe mid = eval(0.5 * (lo.t + hi.t));
            if (mid.f > f0 + c1 * mid.t * df0 || mid.f >= lo.f) {
                hi = mid;
            } else {
                if (std::fabs(mid.df) <= c2 * std::fabs(df0)) {
                    t_out = mid.t;
                    f_out = mid.f;
                    g_out = mid.df / d;
                    return true;
                }
                if (mid.df * (hi.t - lo.t) >= 0.0) hi = lo;
                lo = mid;
            }
        }
        return false;
    };

    Probe prev{0.0, f0, df0};
    double t = 1.0;
    bool first = true;
    while (evals < max_evals) {
        Probe cur = eval(t);
        if (cur.f > f0 + c1 * t * df0 || (!first && cur.f >= prev.f)) return zoom(prev, cur);
        if (std::fabs(cur.df) <= c2 * std::fabs(df0)) {
            t_out = cur.t;
            f_out = cur.f;
            g_out = cur.df / d;
            return true;
        }
        if (cur.df >= 0.0) return zoom(cur, prev);
        prev = cur;
        t *= 2.0;
        first = false;
    }
    return false;
}

} // namespace

double LbfgsRef::step(double w, const ValGradFn& fg) {
    if (!primed) {
        fw = fg(w, &gw);
        primed = true;
    }
    line_search_failed = false;
    if (gw == 0.0) return w;
    double d = -(has_pair ? H : 1.0) * gw;
    double df0 = gw * d;
    double t = 0.0, f_new = 0.0, g_new = 0.0;
    if (!wolfe_scalar(fg, w, d, fw, df0, 20, t, f_new, g_new)) {
        line_search_failed = true;
        return w;
    }
    double s = t * d;
    double y = g_new - gw;
    if (y * s > 1e-10) {
        H = s / y;  // scalar collapse of the recursion: V vanishes, H = s s / (y s)
        has_pair = true;
    }
    fw = f_new;
    gw = g_new;
    return w + s;
}

} // namespace tb::oracle
