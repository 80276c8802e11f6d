#include "core/lbfgs.hpp"

#include <cmath>

#include "core/error.hpp"

namespace tb {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

} // namespace

LbfgsSolver::LbfgsSolver(const HyperParams& hp) : hp_(hp) { hp_.validate(Algo::lbfgs); }

std::vector<double> LbfgsSolver::direction() const {
    std::vector<double> q = g_;
    size_t npairs = s_.size();
    std::vector<double> alpha(npairs);
    for (size_t idx = npairs; idx-- > 0;) {  // newest to oldest
        double rho = 1.0 / dot(y_[idx], s_[idx]);
        alpha[idx] = rho * dot(s_[idx], q);
        for (size_t i = 0; i < q.size(); ++i) q[i] -= alpha[idx] * y_[idx][i];
    }
    double gamma = 1.0;
    if (npairs > 0) {
        const auto& s = s_.back();
        const auto& y = y_.back();
        gamma = dot(s, y) / dot(y, y);
    }
    for (double& v : q) v *= gamma;
    for (size_t idx = 0; idx < npairs; ++idx) {  // oldest to newest
        double rho = 1.0 / dot(y_[idx], s_[idx]);
        double beta = rho * dot(y_[idx], q);
        for (size_t i = 0; i < q.size(); ++i) q[i] += s_[idx][i] * (alpha[idx] - beta);
    }
    for (double& v : q) v = -v;
    return q;
}

LbfgsReport LbfgsSolver::step(std::vector<double>& w, const Objective& fg) {
    LbfgsReport rep;
    if (!primed_) {
        g_.assign(w.size(), 0.0);
        f_ = fg(w, g_);
        primed_ = true;
    }
    rep.f = f_;
    rep.grad_norm = norm(g_);
    if (stalled_ || rep.grad_norm == 0.0) return rep;

    std::vector<double> d = direction();
    double df0 = dot(g_, d);
    if (df0 >= 0.0) {
        // numerically unusable curvature; fall back to steepest descent
        s_.clear();
        y_.clear();
        d = g_;
        for (double& v : d) v = -v;
        df0 = -rep.grad_norm * rep.grad_norm;
    }

    // Strong Wolfe bracket-and-bisect, the same recipe the scalar reference
    // follows: double the trial until it brackets or satisfies, bisect after.
    const double c1 = hp_.wolfe_c1, c2 = hp_.wolfe_c2;
    const double f0 = f_;
    int evals = 0;
    std::vector<double> w_try(w.size()), g_try(w.size());
    struct Probe {
        double t, f, df;
    };
    std::vector<double> g_best;
    double t_acc = -1.0, f_acc = 0.0;

    auto eval = [&](double t) {
        for (size_t i = 0; i < w.size(); ++i) w_try[i] = w[i] + t * d[i];
        double ft = fg(w_try, g_try);
        evals++;
        return Probe{t, ft, dot(g_try, d)};
    };
    auto accept = [&](const Probe& p) {
        t_acc = p.t;
        f_acc = p.f;
        g_best = g_try;
    };
    auto zoom = [&](Probe lo, Probe hi) {
        while (evals < hp_.max_line_evals) {
            Probe mid = eval(0.5 * (lo.t + hi.t));
            if (mid.f > f0 + c1 * mid.t * df0 || mid.f >= lo.f) {
                hi = mid;
            } else {
                if (std::fabs(mid.df) <= c2 * std::fabs(df0)) {
                    accept(mid);
                    return;
                }
                if (mid.df * (hi.t - lo.t) >= 0.0) hi = lo;
                lo = mid;
            }
        }
    };

    Probe prev{0.0, f0, df0};
    double t = 1.0;
    bool first = true;
    while (evals < hp_.max_line_evals) {
        Probe cur = eval(t);
        if (cur.f > f0 + c1 * t * df0 || (!first && cur.f >= prev.f)) {
            zoom(prev, cur);
            break;
        }
        if (std::fabs(cur.df) <= c2 * std::fabs(df0)) {
            accept(cur);
            break;
        }
        if (cur.df >= 0.0) {
            zoom(cur, prev);
            break;
        }
        prev = cur;
        t *= 2.0;
        first = false;
    }

    rep.line_evals = evals;
    if (t_acc < 0.0) {
        rep.line_search_failed = true;
        stalled_ = true;
        return rep;
    }

    std::vector<double> s(w.size()), ynew(w.size());
    for (size_t i = 0; i < w.size(); ++i) {
        s[i] = t_acc * d[i];
        ynew[i] = g_best[i] - g_[i];
        w[i] += s[i];
    }
    double ys = dot(ynew, s);
    if (ys > hp_.curvature_floor) {
        s_.push_back(std::move(s));
        y_.push_back(std::move(ynew));
        if (s_.size() > hp_.history) {
            s_.pop_front();
            y_.pop_front();
        }
    } else {
        rep.pair_rejected = true;
    }

    f_ = f_acc;
    g_ = std::move(g_best);
    rep.f = f_;
    rep.grad_norm = norm(g_);
    rep.step_norm = t_acc * norm(d);
    rep.accepted = true;
    return rep;
}

void LbfgsSolver::export_state(
    std::vector<std::pair<std::string, std::vector<double>>>& out) const {
    out.clear();
    out.emplace_back("meta", std::vector<double>{primed_ ? 1.0 : 0.0, stalled_ ? 1.0 : 0.0, f_,
                                                 static_cast<double>(s_.size())});
    out.emplace_back("g", g_);
    for (size_t i = 0; i < s_.size(); ++i) {
        out.emplace_back("s" + std::to_string(i), s_[i]);
        out.emplace_back("y" + std::to_string(i), y_[i]);
    }
}

void LbfgsSolver::import_state(
    const std::vector<std::pair<std::string, std::vector<double>>>& in) {
    s_.clear();
    y_.clear();
    size_t npairs = 0;
    for (const auto& [name, vals] : in) {
        if (name == "meta") {
            require(vals.size() == 4, errc::invalid_value, "bad solver state meta block");
            primed_ = vals[0] != 0.0;
            stalled_ = vals[1] != 0.0;
            f_ = vals[2];
            npairs = static_cast<size_t>(vals[3]);
        } else if (name == "g") {
            g_ = vals;
        }
    }
    for (size_t i = 0; i < npairs; ++i) {
        bool found_s = false, found_y = false;
        for (const auto& [name, vals] : in) {
            if (name == "s" + std::to_string(i)) {
                s_.push_back(vals);
                found_s = true;
            }
            if (name == "y" + std::to_string(i)) {
                y_.push_back(vals);
                found_y = true;
            }
        }
        require(found_s && found_y, errc::invalid_value, "missing curvature pair in state");
    }
}

} // namespace tb
