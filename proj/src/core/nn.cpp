#include "core/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "json.hpp"

namespace tb {

namespace {

constexpr double BN_EPS = 1e-5;
constexpr double BN_MOMENTUM = 0.99;
constexpr double LOG_FLOOR = 1e-12;

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

size_t conv_extent(size_t m, size_t n, size_t s) {
    if (m + 1 <= n) return 0;
    return (m - n + 1) / s;
}

// ---- raw kernels over contiguous (C,H,W) slices --------------------------

void conv_fwd_one(const double* x, size_t C, size_t H, size_t W, const double* k, size_t K,
                  size_t n, size_t s, double* y, size_t OH, size_t OW) {
    for (size_t kk = 0; kk < K; ++kk) {
        for (size_t c = 0; c < C; ++c) {
            const double* kbase = k + ((kk * C + c) * n) * n;
            for (size_t a = 0; a < n; ++a) {
                for (size_t b = 0; b < n; ++b) {
                    double w = kbase[a * n + b];
                    for (size_t i = 0; i < OH; ++i) {
                        const double* xrow = x + (c * H + i * s + a) * W + b;
                        double* yrow = y + (kk * OH + i) * OW;
                        if (s == 1) {
                            for (size_t j = 0; j < OW; ++j) yrow[j] += w * xrow[j];
                        } else {
                            for (size_t j = 0; j < OW; ++j) yrow[j] += w * xrow[j * s];
                        }
                    }
                }
            }
        }
    }
}

void conv_bwd_one(const double* x, size_t C, size_t H, size_t W, const double* k, size_t K,
                  size_t n, size_t s, const double* gy, size_t OH, size_t OW, double* gx,
                  double* gk) {
    for (size_t kk = 0; kk < K; ++kk) {
        for (size_t c = 0; c < C; ++c) {
            const double* kbase = k + ((kk * C + c) * n) * n;
            double* gkbase = gk + ((kk * C + c) * n) * n;
            for (size_t a = 0; a < n; ++a) {
                for (size_t b = 0; b < n; ++b) {
                    double w = kbase[a * n + b];
                    double acc = 0.0;
                    for (size_t i = 0; i < OH; ++i) {
                        const double* grow = gy + (kk * OH + i) * OW;
                        const double* xrow = x + (c * H + i * s + a) * W + b;
                        double* gxrow = gx + (c * H + i * s + a) * W + b;
                        if (s == 1) {
                            for (size_t j = 0; j < OW; ++j) {
                                acc += grow[j] * xrow[j];
                                gxrow[j] += w * grow[j];
                            }
                        } else {
                            for (size_t j = 0; j < OW; ++j) {
                                acc += grow[j] * xrow[j * s];
                                gxrow[j * s] += w * grow[j];
                            }
                        }
                    }
                    gkbase[a * n + b] += acc;
                }
            }
        }
    }
}

void pool_fwd_one(const double* x, size_t C, size_t H, size_t W, PoolKind kind, size_t p,
                  double* y, size_t OH, size_t OW) {
    double inv = 1.0 / static_cast<double>(p * p);
    for (size_t c = 0; c < C; ++c) {
        for (size_t i = 0; i < OH; ++i) {
            for (size_t j = 0; j < OW; ++j) {
                const double* win = x + (c * H + i * p) * W + j * p;
                double v;
                if (kind == PoolKind::max) {
                    v = win[0];
                    for (size_t a = 0; a < p; ++a)
                        for (size_t b = 0; b < p; ++b)
                            if (win[a * W + b] > v) v = win[a * W + b];
                } else {
                    v = 0.0;
                    for (size_t a = 0; a < p; ++a)
                        for (size_t b = 0; b < p; ++b) v += win[a * W + b];
                    v *= inv;
                }
                y[(c * OH + i) * OW + j] = v;
            }
        }
    }
}

void pool_bwd_one(const double* x, size_t C, size_t H, size_t W, PoolKind kind, size_t p,
                  const double* gy, size_t OH, size_t OW, double* gx) {
    double inv = 1.0 / static_cast<double>(p * p);
    for (size_t c = 0; c < C; ++c) {
        for (size_t i = 0; i < OH; ++i) {
            for (size_t j = 0; j < OW; ++j) {
                double g = gy[(c * OH + i) * OW + j];
                const double* win = x + (c * H + i * p) * W + j * p;
                double* gwin = gx + (c * H + i * p) * W + j * p;
                if (kind == PoolKind::max) {
                    size_t best_a = 0, best_b = 0;
                    double best = win[0];
                    for (size_t a = 0; a < p; ++a)
                        for (size_t b = 0; b < p; ++b)
                            if (win[a * W + b] > best) {
                                best = win[a * W + b];
                                best_a = a;
                                best_b = b;
                            }
                    gwin[best_a * W + best_b] += g;
                } else {
                    double share = g * inv;
                    for (size_t a = 0; a < p; ++a)
                        for (size_t b = 0; b < p; ++b) gwin[a * W + b] += share;
                }
            }
        }
    }
}

} // namespace

// ---- public single-sample primitives --------------------------------------

Tensor conv2d_forward(const Tensor& x, const Tensor& kernels, size_t stride) {
    require(x.rank() == 3, errc::bad_shape, "conv input must be (C,H,W)");
    require(kernels.rank() == 4, errc::bad_shape, "conv kernels must be (K,C,n,n)");
    require(stride >= 1, errc::invalid_value, "stride must be at least 1");
    require(kernels.extent(2) == kernels.extent(3), errc::bad_shape, "conv window must be square");
    require(kernels.extent(1) == x.extent(0), errc::shape_mismatch,
            "kernel channels " + std::to_string(kernels.extent(1)) + " vs input channels " +
                std::to_string(x.extent(0)));
    size_t n = kernels.extent(2);
    size_t oh = conv_extent(x.extent(1), n, stride);
    size_t ow = conv_extent(x.extent(2), n, stride);
    require(oh >= 1 && ow >= 1, errc::shape_underflow,
            "conv reduces " + Tensor::shape_string(x.shape()) + " below 1x1");
    Tensor y({kernels.extent(0), oh, ow});
    conv_fwd_one(x.data(), x.extent(0), x.extent(1), x.extent(2), kernels.data(),
                 kernels.extent(0), n, stride, y.data(), oh, ow);
    return y;
}

void conv2d_backward(const Tensor& x, const Tensor& kernels, size_t stride, const Tensor& gout,
                     Tensor& gx, Tensor& gk) {
    size_t n = kernels.extent(2);
    size_t oh = conv_extent(x.extent(1), n, stride);
    size_t ow = conv_extent(x.extent(2), n, stride);
    require(gout.rank() == 3 && gout.extent(0) == kernels.extent(0) && gout.extent(1) == oh &&
                gout.extent(2) == ow,
            errc::shape_mismatch, "conv gradient shape does not match the forward output");
    require(gx.same_shape(x) && gk.same_shape(kernels), errc::shape_mismatch,
            "conv gradient accumulators have wrong shapes");
    conv_bwd_one(x.data(), x.extent(0), x.extent(1), x.extent(2), kernels.data(),
                 kernels.extent(0), n, stride, gout.data(), oh, ow, gx.data(), gk.data());
}

double activate_one(Act a, double z) {
    if (a == Act::relu) return z > 0.0 ? z : 0.0;
    return z * logistic(z);
}

double activate_grad_one(Act a, double z) {
    if (a == Act::relu) return z > 0.0 ? 1.0 : 0.0;  // subgradient 0 at the kink
    double s = logistic(z);
    return s * (1.0 + z * (1.0 - s));
}

Tensor activate(const Tensor& z, Act a) {
    Tensor y(z.shape());
    for (size_t i = 0; i < z.size(); ++i) y[i] = activate_one(a, z[i]);
    return y;
}

Tensor pool_forward(const Tensor& x, PoolKind kind, size_t p) {
    require(kind != PoolKind::none, errc::invalid_value, "pool kind none has no forward");
    require(p >= 1, errc::bad_pool_size, "pool size must be at least 1");
    require(x.rank() == 3, errc::bad_shape, "pool input must be (C,H,W)");
    size_t oh = x.extent(1) / p, ow = x.extent(2) / p;
    require(oh >= 1 && ow >= 1, errc::shape_underflow,
            "pool reduces " + Tensor::shape_string(x.shape()) + " below 1x1");
    Tensor y({x.extent(0), oh, ow});
    pool_fwd_one(x.data(), x.extent(0), x.extent(1), x.extent(2), kind, p, y.data(), oh, ow);
    return y;
}

Tensor pool_backward(const Tensor& x, PoolKind kind, size_t p, const Tensor& gout) {
    size_t oh = x.extent(1) / p, ow = x.extent(2) / p;
    require(gout.rank() == 3 && gout.extent(0) == x.extent(0) && gout.extent(1) == oh &&
                gout.extent(2) == ow,
            errc::shape_mismatch, "pool gradient shape does not match the forward output");
    Tensor gx(x.shape());
    pool_bwd_one(x.data(), x.extent(0), x.extent(1), x.extent(2), kind, p, gout.data(), oh, ow,
                 gx.data());
    return gx;
}

// ---- batchnorm -------------------------------------------------------------

Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         Tensor& run_mean, Tensor& run_var, Mode mode, BnCache* cache) {
    require(x.rank() == 4, errc::bad_shape, "batchnorm input must be (B,C,H,W)");
    size_t B = x.extent(0), C = x.extent(1), HW = x.extent(2) * x.extent(3);
    require(gamma.size() == C && beta.size() == C && run_mean.size() == C && run_var.size() == C,
            errc::shape_mismatch, "batchnorm parameter extents do not match channels");
    if (mode != Mode::eval)
        require(B >= 2, errc::degenerate_batch,
                "batch statistics need at least 2 samples, got " + std::to_string(B));

    size_t per_channel = B * HW;
    Tensor y(x.shape());
    Tensor mean({C}), var({C});
    if (mode == Mode::eval) {
        mean = run_mean;
        var = run_var;
    } else {
        for (size_t c = 0; c < C; ++c) {
            double m = 0.0;
            for (size_t b = 0; b < B; ++b) {
                const double* p = x.data() + (b * C + c) * HW;
                for (size_t i = 0; i < HW; ++i) m += p[i];
            }
            m /= static_cast<double>(per_channel);
            double v = 0.0;
            for (size_t b = 0; b < B; ++b) {
                const double* p = x.data() + (b * C + c) * HW;
                for (size_t i = 0; i < HW; ++i) {
                    double d = p[i] - m;
                    v += d * d;
                }
            }
            v /= static_cast<double>(per_channel);
            mean[c] = m;
            var[c] = v;
        }
        if (mode == Mode::train) {
            for (size_t c = 0; c < C; ++c) {
                run_mean[c] = BN_MOMENTUM * run_mean[c] + (1.0 - BN_MOMENTUM) * mean[c];
                run_var[c] = BN_MOMENTUM * run_var[c] + (1.0 - BN_MOMENTUM) * var[c];
            }
        }
    }

    Tensor invstd({C});
    for (size_t c = 0; c < C; ++c) invstd[c] = 1.0 / std::sqrt(var[c] + BN_EPS);
    if (cache) {
        cache->xhat = Tensor(x.shape());
        cache->invstd = invstd;
        cache->per_channel = per_channel;
    }
    for (size_t b = 0; b < B; ++b) {
        for (size_t c = 0; c < C; ++c) {
            const double* p = x.data() + (b * C + c) * HW;
            double* q = y.data() + (b * C + c) * HW;
            double* h = cache ? cache->xhat.data() + (b * C + c) * HW : nullptr;
            double m = mean[c], is = invstd[c], g = gamma[c], bb = beta[c];
            for (size_t i = 0; i < HW; ++i) {
                double xh = (p[i] - m) * is;
                if (h) h[i] = xh;
                q[i] = g * xh + bb;
            }
        }
    }
    return y;
}

void batchnorm_backward(const Tensor& gout, const Tensor& gamma, const BnCache& cache, Mode mode,
                        Tensor& gx, Tensor& ggamma, Tensor& gbeta) {
    size_t B = gout.extent(0), C = gout.extent(1), HW = gout.extent(2) * gout.extent(3);
    double N = static_cast<double>(cache.per_channel);
    for (size_t c = 0; c < C; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (size_t b = 0; b < B; ++b) {
            const double* g = gout.data() + (b * C + c) * HW;
            const double* xh = cache.xhat.data() + (b * C + c) * HW;
            for (size_t i = 0; i < HW; ++i) {
                sum_g += g[i];
                sum_gx += g[i] * xh[i];
            }
        }
        ggamma[c] += sum_gx;
        gbeta[c] += sum_g;
        double is = cache.invstd[c], gm = gamma[c];
        for (size_t b = 0; b < B; ++b) {
            const double* g = gout.data() + (b * C + c) * HW;
            const double* xh = cache.xhat.data() + (b * C + c) * HW;
            double* out = gx.data() + (b * C + c) * HW;
            if (mode == Mode::eval) {
                // running statistics are constants, only the affine map remains
                for (size_t i = 0; i < HW; ++i) out[i] += g[i] * gm * is;
            } else {
                for (size_t i = 0; i < HW; ++i)
                    out[i] += gm * is * (g[i] - sum_g / N - xh[i] * sum_gx / N);
            }
        }
    }
}

Tensor dropout_forward(const Tensor& x, double rate, Mode mode, Rng& rng,
                       std::vector<uint8_t>* mask) {
    require(rate >= 0.0 && rate < 1.0, errc::bad_rate,
            "drop rate must lie in [0,1), got " + std::to_string(rate));
    if (mode != Mode::train || rate == 0.0) {
        if (mask) mask->assign(x.size(), 1);
        return x;
    }
    double keep_scale = 1.0 / (1.0 - rate);
    Tensor y(x.shape());
    if (mask) mask->assign(x.size(), 0);
    for (size_t i = 0; i < x.size(); ++i) {
        if (rng.uniform() < rate) {
            y[i] = 0.0;
        } else {
            y[i] = x[i] * keep_scale;
            if (mask) (*mask)[i] = 1;
        }
    }
    return y;
}

Tensor dense_forward(const Tensor& x, const Tensor& W, const Tensor& b) {
    require(x.rank() == 2 && W.rank() == 2 && b.rank() == 1, errc::bad_shape,
            "dense expects x (B,in), W (out,in), b (out)");
    size_t B = x.extent(0), in = x.extent(1), out = W.extent(0);
    require(W.extent(1) == in, errc::shape_mismatch,
            "dense weight takes " + std::to_string(W.extent(1)) + " inputs, got " +
                std::to_string(in));
    require(b.extent(0) == out, errc::shape_mismatch, "dense bias extent mismatch");
    Tensor y({B, out});
    for (size_t bi = 0; bi < B; ++bi) {
        const double* xr = x.data() + bi * in;
        double* yr = y.data() + bi * out;
        for (size_t o = 0; o < out; ++o) {
            const double* wr = W.data() + o * in;
            double acc = b[o];
            for (size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
            yr[o] = acc;
        }
    }
    return y;
}

void dense_backward(const Tensor& x, const Tensor& W, const Tensor& gout, Tensor& gx, Tensor& gW,
                    Tensor& gb) {
    size_t B = x.extent(0), in = x.extent(1), out = W.extent(0);
    for (size_t bi = 0; bi < B; ++bi) {
        const double* gr = gout.data() + bi * out;
        const double* xr = x.data() + bi * in;
        double* gxr = gx.data() + bi * in;
        for (size_t o = 0; o < out; ++o) {
            double g = gr[o];
            if (g == 0.0) continue;
            const double* wr = W.data() + o * in;
            double* gwr = gW.data() + o * in;
            for (size_t i = 0; i < in; ++i) {
                gxr[i] += g * wr[i];
                gwr[i] += g * xr[i];
            }
            gb[o] += g;
        }
    }
}

Tensor softmax(const Tensor& logits) {
    require(logits.rank() == 2, errc::bad_shape, "softmax expects (B,N) logits");
    size_t B = logits.extent(0), N = logits.extent(1);
    Tensor p(logits.shape());
    for (size_t b = 0; b < B; ++b) {
        const double* z = logits.data() + b * N;
        double* q = p.data() + b * N;
        double m = z[0];
        for (size_t i = 0; i < N; ++i) {
            require(!std::isnan(z[i]), errc::non_finite, "NaN logit in softmax");
            if (z[i] > m) m = z[i];
        }
        double sum = 0.0;
        for (size_t i = 0; i < N; ++i) {
            q[i] = std::exp(z[i] - m);
            sum += q[i];
        }
        for (size_t i = 0; i < N; ++i) q[i] /= sum;
    }
    return p;
}

double cce_loss(const Tensor& probs, const Tensor& targets) {
    require(probs.same_shape(targets), errc::shape_mismatch,
            "probabilities and targets must share a shape");
    require(probs.rank() == 2, errc::bad_shape, "cross entropy expects (B,N)");
    size_t B = probs.extent(0), N = probs.extent(1);
    double total = 0.0;
    for (size_t b = 0; b < B; ++b) {
        const double* y = targets.data() + b * N;
        const double* p = probs.data() + b * N;
        size_t ones = 0;
        for (size_t i = 0; i < N; ++i) {
            require(y[i] == 0.0 || y[i] == 1.0, errc::bad_target,
                    "target rows must be one-hot");
            if (y[i] == 1.0) {
                ones++;
                total -= std::log(std::max(p[i], LOG_FLOOR));
            }
        }
        require(ones == 1, errc::bad_target, "target rows must contain exactly one 1");
    }
    return total / static_cast<double>(B);
}

// ---- architecture ----------------------------------------------------------

namespace {

const char* act_str(Act a) { return a == Act::relu ? "relu" : "silu"; }
const char* pool_str(PoolKind p) {
    switch (p) {
        case PoolKind::none: return "none";
        case PoolKind::max: return "max";
        default: return "mean";
    }
}
const char* kind_str(BlockKind k) {
    switch (k) {
        case BlockKind::cdb: return "cdb";
        case BlockKind::cb: return "cb";
        case BlockKind::fcb: return "fcb";
        default: return "classify";
    }
}

Act act_parse(const std::string& s) {
    if (s == "relu") return Act::relu;
    if (s == "silu") return Act::silu;
    fail(errc::invalid_value, "unknown activation '" + s + "'");
}
PoolKind pool_parse(const std::string& s) {
    if (s == "none") return PoolKind::none;
    if (s == "max") return PoolKind::max;
    if (s == "mean") return PoolKind::mean;
    fail(errc::invalid_value, "unknown pool kind '" + s + "'");
}
BlockKind kind_parse(const std::string& s) {
    if (s == "cdb") return BlockKind::cdb;
    if (s == "cb") return BlockKind::cb;
    if (s == "fcb") return BlockKind::fcb;
    if (s == "classify") return BlockKind::classify;
    fail(errc::invalid_value, "unknown block kind '" + s + "'");
}

void validate_architecture(const ArchitectureSpec& spec) {
    require(spec.input.size() == 3, errc::bad_shape, "input shape must be (C,H,W)");
    for (size_t e : spec.input) require(e > 0, errc::bad_shape, "zero extent in input shape");
    require(spec.classes >= 2, errc::invalid_value, "need at least two classes");
    require(spec.kernel >= 1, errc::invalid_value, "conv window must be at least 1");
    require(spec.stride >= 1, errc::invalid_value, "stride must be at least 1");
    require(!spec.blocks.empty(), errc::invalid_value, "architecture has no blocks");
    require(spec.blocks.back().kind == BlockKind::classify, errc::invalid_value,
            "the last block must be the classifier");
    bool seen_dense = false;
    for (size_t i = 0; i < spec.blocks.size(); ++i) {
        const BlockSpec& b = spec.blocks[i];
        bool last = i + 1 == spec.blocks.size();
        require((b.kind == BlockKind::classify) == last, errc::invalid_value,
                "exactly one classifier block, at the end");
        if (b.kind == BlockKind::cdb)
            require(b.pool != PoolKind::none, errc::invalid_value,
                    "downsampling conv blocks need a pool kind");
        if (b.kind == BlockKind::cb)
            require(b.pool == PoolKind::none, errc::invalid_value,
                    "plain conv blocks must not pool");
        if (b.kind == BlockKind::cdb || b.kind == BlockKind::cb) {
            require(!seen_dense, errc::invalid_value, "conv blocks cannot follow dense blocks");
            require(b.width > 0, errc::invalid_value, "conv block width must be positive");
            if (b.pool != PoolKind::none)
                require(b.pool_size >= 1, errc::bad_pool_size, "pool size must be at least 1");
        }
        if (b.kind == BlockKind::fcb) {
            require(b.width > 0, errc::invalid_value, "dense block width must be positive");
            seen_dense = true;
        }
        require(b.dropout >= 0.0 && b.dropout < 1.0, errc::bad_rate,
                "drop rate must lie in [0,1)");
    }
}

} // namespace

ArchitectureSpec make_architecture(const std::string& variant, std::vector<size_t> input,
                                   size_t classes) {
    std::string base = variant;
    bool mini = false;
    if (base.size() > 5 && base.substr(base.size() - 5) == "-mini") {
        mini = true;
        base = base.substr(0, base.size() - 5);
    }
    bool wide = base == "wide" || base == "deepwide";
    bool deep = base == "deep" || base == "deepwide";
    require(base == "baseline" || wide || deep, errc::invalid_value,
            "unknown architecture variant '" + variant + "'");

    std::vector<size_t> widths = mini ? std::vector<size_t>{8, 16, 32}
                                      : std::vector<size_t>{16, 32, 64, 128, 256};
    size_t dense_width = mini ? 64 : 512;

    ArchitectureSpec spec;
    spec.variant = variant;
    spec.input = std::move(input);
    spec.classes = classes;
    for (size_t w : widths) {
        size_t d = wide ? 2 * w : w;
        BlockSpec cdb;
        cdb.kind = BlockKind::cdb;
        cdb.width = d;
        cdb.pool = PoolKind::max;
        cdb.pool_size = 2;
        cdb.batchnorm = true;
        spec.blocks.push_back(cdb);
        if (deep) {
            BlockSpec cb;
            cb.kind = BlockKind::cb;
            cb.width = d;
            cb.pool = PoolKind::none;
            cb.batchnorm = true;
            spec.blocks.push_back(cb);
        }
    }
    BlockSpec fcb;
    fcb.kind = BlockKind::fcb;
    fcb.width = dense_width;
    spec.blocks.push_back(fcb);
    BlockSpec cls;
    cls.kind = BlockKind::classify;
    spec.blocks.push_back(cls);
    return spec;
}

ArchitectureSpec smooth_variant(ArchitectureSpec spec) {
    for (BlockSpec& b : spec.blocks) {
        b.act = Act::silu;
        if (b.pool == PoolKind::max) b.pool = PoolKind::mean;
        b.dropout = 0.0;
    }
    return spec;
}

std::string architecture_to_json(const ArchitectureSpec& spec) {
    nlohmann::ordered_json j;
    j["variant"] = spec.variant;
    j["input"] = spec.input;
    j["classes"] = spec.classes;
    j["kernel"] = spec.kernel;
    j["stride"] = spec.stride;
    j["blocks"] = nlohmann::ordered_json::array();
    for (const BlockSpec& b : spec.blocks) {
        nlohmann::ordered_json jb;
        jb["kind"] = kind_str(b.kind);
        if (b.kind != BlockKind::classify) jb["width"] = b.width;
        if (b.kind != BlockKind::classify) jb["act"] = act_str(b.act);
        if (b.kind == BlockKind::cdb) {
            jb["pool"] = pool_str(b.pool);
            jb["pool_size"] = b.pool_size;
        }
        if (b.kind == BlockKind::cdb || b.kind == BlockKind::cb) jb["batchnorm"] = b.batchnorm;
        if (b.kind != BlockKind::classify) jb["dropout"] = b.dropout;
        j["blocks"].push_back(jb);
    }
    return j.dump(2);
}

ArchitectureSpec architecture_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(errc::parse_error, e.what());
    }
    ArchitectureSpec spec;
    try {
        for (auto& [key, val] : j.items()) {
            if (key == "variant") spec.variant = val.get<std::string>();
            else if (key == "input") spec.input = val.get<std::vector<size_t>>();
            else if (key == "classes") spec.classes = val.get<size_t>();
            else if (key == "kernel") spec.kernel = val.get<size_t>();
            else if (key == "stride") spec.stride = val.get<size_t>();
            else if (key == "blocks") {
                for (auto& jb : val) {
                    BlockSpec b;
                    for (auto& [bk, bv] : jb.items()) {
                        if (bk == "kind") b.kind = kind_parse(bv.get<std::string>());
                        else if (bk == "width") b.width = bv.get<size_t>();
                        else if (bk == "act") b.act = act_parse(bv.get<std::string>());
                        else if (bk == "pool") b.pool = pool_parse(bv.get<std::string>());
                        else if (bk == "pool_size") b.pool_size = bv.get<size_t>();
                        else if (bk == "batchnorm") b.batchnorm = bv.get<bool>();
                        else if (bk == "dropout") b.dropout = bv.get<double>();
                        else fail(errc::unknown_key, "unknown block key '" + bk + "'");
                    }
                    spec.blocks.push_back(b);
                }
            } else {
                fail(errc::unknown_key, "unknown architecture key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(errc::invalid_value, std::string("bad architecture value: ") + e.what());
    }
    validate_architecture(spec);
    return spec;
}

// ---- network ---------------------------------------------------------------

struct Network::Pass {
    std::vector<Tensor> out;                 // output of every node
    std::vector<BnCache> bn;                 // per node (sparse)
    std::vector<std::vector<uint8_t>> mask;  // dropout survivors per node
};

Network::Network(const ArchitectureSpec& spec) : spec_(spec) {
    validate_architecture(spec_);
    size_t C = spec_.input[0], H = spec_.input[1], W = spec_.input[2];
    size_t n = spec_.kernel, s = spec_.stride;
    bool flat = false;
    size_t features = 0;
    size_t block_no = 0;

    auto add_conv_block = [&](const BlockSpec& b) {
        block_no++;
        std::string prefix = "block" + std::to_string(block_no);
        require(!flat, errc::invalid_value, "conv blocks cannot follow dense blocks");
        require(H >= n && W >= n, errc::shape_underflow,
                prefix + ": conv window larger than its input");
        size_t oh = conv_extent(H, n, s), ow = conv_extent(W, n, s);
        require(oh >= 1 && ow >= 1, errc::shape_underflow,
                prefix + ": conv output collapses to zero extent");
        Node conv;
        conv.op = Node::Op::conv;
        conv.w_index = layout_.count();
        layout_.add(prefix + ".conv.w", Tensor({b.width, C, n, n}));
        nodes_.push_back(conv);
        C = b.width;
        H = oh;
        W = ow;

        Node act;
        act.op = Node::Op::act;
        act.act = b.act;
        nodes_.push_back(act);

        if (b.pool != PoolKind::none) {
            size_t p = b.pool_size;
            require(H / p >= 1 && W / p >= 1, errc::shape_underflow,
                    prefix + ": pool output collapses to zero extent");
            Node pool;
            pool.op = Node::Op::pool;
            pool.pool = b.pool;
            pool.pool_size = p;
            nodes_.push_back(pool);
            H /= p;
            W /= p;
        }
        if (b.batchnorm) {
            Node bn;
            bn.op = Node::Op::bn;
            bn.gamma_index = layout_.count();
            layout_.add(prefix + ".bn.gamma", Tensor({C}));
            bn.beta_index = layout_.count();
            layout_.add(prefix + ".bn.beta", Tensor({C}));
            bn.bn_slot = run_mean_.size();
            run_mean_.push_back(Tensor({C}));
            run_var_.push_back(Tensor({C}, 1.0));
            nodes_.push_back(bn);
        }
        if (b.dropout > 0.0) {
            Node drop;
            drop.op = Node::Op::dropout;
            drop.dropout = b.dropout;
            nodes_.push_back(drop);
        }
    };

    auto add_flatten = [&]() {
        if (flat) return;
        Node f;
        f.op = Node::Op::flatten;
        nodes_.push_back(f);
        features = C * H * W;
        flat = true;
    };

    auto add_dense = [&](size_t width, const std::string& prefix) {
        Node d;
        d.op = Node::Op::dense;
        d.w_index = layout_.count();
        layout_.add(prefix + ".w", Tensor({width, features}));
        d.b_index = layout_.count();
        layout_.add(prefix + ".b", Tensor({width}));
        nodes_.push_back(d);
        features = width;
    };

    for (const BlockSpec& b : spec_.blocks) {
        switch (b.kind) {
            case BlockKind::cdb:
            case BlockKind::cb:
                add_conv_block(b);
                break;
            case BlockKind::fcb: {
                block_no++;
                add_flatten();
                add_dense(b.width, "block" + std::to_string(block_no) + ".dense");
                Node act;
                act.op = Node::Op::act;
                act.act = b.act;
                nodes_.push_back(act);
                if (b.dropout > 0.0) {
                    Node drop;
                    drop.op = Node::Op::dropout;
                    drop.dropout = b.dropout;
                    nodes_.push_back(drop);
                }
                break;
            }
            case BlockKind::classify: {
                add_flatten();
                add_dense(spec_.classes, "classify");
                Node sm;
                sm.op = Node::Op::softmax;
                nodes_.push_back(sm);
                break;
            }
        }
    }
}

ParamSet Network::init_params(Init kind, Rng& rng, BiasInit bias) const {
    ParamSet w;
    for (const auto& e : layout_) {
        const std::string& name = e.name;
        auto ends_with = [&](const char* suffix) {
            size_t len = std::strlen(suffix);
            return name.size() >= len && name.compare(name.size() - len, len, suffix) == 0;
        };
        if (ends_with(".bn.gamma")) {
            w.add(name, Tensor(e.value.shape(), 1.0));
        } else if (ends_with(".bn.beta")) {
            w.add(name, Tensor(e.value.shape(), 0.0));
        } else if (ends_with(".b")) {
            if (bias == BiasInit::zero) w.add(name, Tensor(e.value.shape(), 0.0));
            else w.add(name, init_tensor(e.value.shape(), kind, rng));
        } else {
            w.add(name, init_tensor(e.value.shape(), kind, rng));
        }
    }
    return w;
}

Tensor Network::run_forward(const Tensor& x, const ParamSet& w, Mode mode, Rng* rng, Pass* pass) {
    require(x.rank() == 4, errc::bad_shape, "network input must be (B,C,H,W)");
    require(x.extent(1) == spec_.input[0] && x.extent(2) == spec_.input[1] &&
                x.extent(3) == spec_.input[2],
            errc::shape_mismatch, "input sample shape does not match the architecture");
    require(w.same_layout(layout_), errc::shape_mismatch,
            "parameter set does not match this network's layout");

    size_t B = x.extent(0);
    if (pass) {
        pass->out.resize(nodes_.size());
        pass->bn.resize(nodes_.size());
        pass->mask.resize(nodes_.size());
    }
    Tensor cur = x;
    for (size_t ni = 0; ni < nodes_.size(); ++ni) {
        const Node& node = nodes_[ni];
        Tensor next;
        switch (node.op) {
            case Node::Op::conv: {
                const Tensor& k = w[node.w_index];
                size_t C = cur.extent(1), H = cur.extent(2), W = cur.extent(3);
                size_t n = k.extent(2);
                size_t oh = conv_extent(H, n, spec_.stride), ow = conv_extent(W, n, spec_.stride);
                next = Tensor({B, k.extent(0), oh, ow});
                for (size_t b = 0; b < B; ++b)
                    conv_fwd_one(cur.data() + b * C * H * W, C, H, W, k.data(), k.extent(0), n,
                                 spec_.stride, next.data() + b * k.extent(0) * oh * ow, oh, ow);
                break;
            }
            case Node::Op::act: {
                next = Tensor(cur.shape());
                for (size_t i = 0; i < cur.size(); ++i) next[i] = activate_one(node.act, cur[i]);
                break;
            }
            case Node::Op::pool: {
                size_t C = cur.extent(1), H = cur.extent(2), W = cur.extent(3);
                size_t p = node.pool_size, oh = H / p, ow = W / p;
                next = Tensor({B, C, oh, ow});
                for (size_t b = 0; b < B; ++b)
                    pool_fwd_one(cur.data() + b * C * H * W, C, H, W, node.pool, p,
                                 next.data() + b * C * oh * ow, oh, ow);
                break;
            }
            case Node::Op::bn: {
                next = batchnorm_forward(cur, w[node.gamma_index], w[node.beta_index],
                                         run_mean_[node.bn_slot], run_var_[node.bn_slot], mode,
                                         pass ? &pass->bn[ni] : nullptr);
                break;
            }
            case Node::Op::dropout: {
                require(mode != Mode::train || rng != nullptr, errc::invalid_value,
                        "training with dropout needs a random stream");
                Rng dummy(0);
                Rng layer_rng = (mode == Mode::train) ? rng->fork("drop", ni) : dummy;
                next = dropout_forward(cur, node.dropout, mode, layer_rng,
                                       pass ? &pass->mask[ni] : nullptr);
                break;
            }
            case Node::Op::flatten: {
                size_t F = cur.size() / B;
                next = Tensor({B, F}, std::vector<double>(cur.data(), cur.data() + cur.size()));
                break;
            }
            case Node::Op::dense: {
                next = dense_forward(cur, w[node.w_index], w[node.b_index]);
                break;
            }
            case Node::Op::softmax: {
                next = softmax(cur);
                break;
            }
        }
        if (pass) pass->out[ni] = next;
        cur = std::move(next);
    }
    return cur;
}

Tensor Network::forward(const Tensor& x, const ParamSet& w, Mode mode, Rng* rng) {
    return run_forward(x, w, mode, rng, nullptr);
}

double Network::loss(const Tensor& x, const Tensor& y, const ParamSet& w, Mode mode, Rng* rng) {
    return cce_loss(forward(x, w, mode, rng), y);
}

double Network::loss_and_grad(const Tensor& x, const Tensor& y, const ParamSet& w, Mode mode,
                              Rng* rng, ParamSet& grads) {
    Pass pass;
    Tensor probs = run_forward(x, w, mode, rng, &pass);
    double loss = cce_loss(probs, y);

    if (!grads.same_layout(layout_)) grads = layout_.zeros_like();
    else for (auto& e : grads) e.value.fill(0.0);

    size_t B = x.extent(0), N = spec_.classes;
    // Gradient of the clamped mean cross entropy through the softmax. Rows
    // whose true-class probability sits at the clamp floor contribute a
    // constant loss, hence a zero gradient.
    Tensor g({B, N});
    double invB = 1.0 / static_cast<double>(B);
    for (size_t b = 0; b < B; ++b) {
        const double* yr = y.data() + b * N;
        const double* pr = probs.data() + b * N;
        double* gr = g.data() + b * N;
        double true_p = 0.0;
        for (size_t i = 0; i < N; ++i)
            if (yr[i] == 1.0) true_p = pr[i];
        if (true_p <= LOG_FLOOR) continue;
        for (size_t i = 0; i < N; ++i) gr[i] = (pr[i] - yr[i]) * invB;
    }

    // Walk the graph backwards; the softmax node was folded into g above.
    require(nodes_.back().op == Node::Op::softmax, errc::invalid_value,
            "network must end in a softmax");
    for (size_t ni = nodes_.size() - 1; ni-- > 0;) {
        const Node& node = nodes_[ni];
        const Tensor& input = (ni == 0) ? x : pass.out[ni - 1];
        Tensor gin;
        switch (node.op) {
            case Node::Op::conv: {
                const Tensor& k = w[node.w_index];
                size_t C = input.extent(1), H = input.extent(2), W = input.extent(3);
                size_t n = k.extent(2);
                size_t K = k.extent(0);
                size_t oh = g.extent(2), ow = g.extent(3);
                gin = Tensor(input.shape());
                Tensor& gk = grads[node.w_index];
                for (size_t b = 0; b < B; ++b)
                    conv_bwd_one(input.data() + b * C * H * W, C, H, W, k.data(), K, n,
                                 spec_.stride, g.data() + b * K * oh * ow, oh, ow,
                                 gin.data() + b * C * H * W, gk.data());
                break;
            }
            case Node::Op::act: {
                gin = Tensor(input.shape());
                for (size_t i = 0; i < input.size(); ++i)
                    gin[i] = g[i] * activate_grad_one(node.act, input[i]);
                break;
            }
            case Node::Op::pool: {
                size_t C = input.extent(1), H = input.extent(2), W = input.extent(3);
                size_t p = node.pool_size, oh = H / p, ow = W / p;
                gin = Tensor(input.shape());
                for (size_t b = 0; b < B; ++b)
                    pool_bwd_one(input.data() + b * C * H * W, C, H, W, node.pool, p,
                                 g.data() + b * C * oh * ow, oh, ow,
                                 gin.data() + b * C * H * W);
                break;
            }
            case Node::Op::bn: {
                gin = Tensor(input.shape());
                batchnorm_backward(g, w[node.gamma_index], pass.bn[ni], mode, gin,
                                   grads[node.gamma_index], grads[node.beta_index]);
                break;
            }
            case Node::Op::dropout: {
                gin = Tensor(input.shape());
                if (mode == Mode::train && node.dropout > 0.0) {
                    double keep_scale = 1.0 / (1.0 - node.dropout);
                    const auto& mask = pass.mask[ni];
                    for (size_t i = 0; i < input.size(); ++i)
                        gin[i] = mask[i] ? g[i] * keep_scale : 0.0;
                } else {
                    gin = g;
                }
                break;
            }
            case Node::Op::flatten: {
                gin = Tensor(input.shape(),
                             std::vector<double>(g.data(), g.data() + g.size()));
                break;
            }
            case Node::Op::dense: {
                gin = Tensor(input.shape());
                dense_backward(input, w[node.w_index], g, gin, grads[node.w_index],
                               grads[node.b_index]);
                break;
            }
            case Node::Op::softmax:
                // unreachable: handled before the loop
                break;
        }
        g = std::move(gin);
    }
    return loss;
}

void Network::reset_running_stats() {
    for (Tensor& t : run_mean_) t.fill(0.0);
    for (Tensor& t : run_var_) t.fill(1.0);
}

double evaluate_accuracy(Network& net, const ParamSet& w, const Tensor& images,
                         const Tensor& labels, size_t batch) {
    require(images.rank() == 4 && labels.rank() == 2, errc::bad_shape,
            "expected images (P,C,H,W) and one-hot labels (P,N)");
    size_t P = images.extent(0);
    require(P >= 1, errc::empty_dataset, "no samples to score");
    require(labels.extent(0) == P, errc::shape_mismatch, "image/label counts differ");
    size_t N = labels.extent(1);
    size_t sample = images.size() / P;
    size_t hits = 0;
    for (size_t start = 0; start < P; start += batch) {
        size_t count = std::min(batch, P - start);
        Tensor chunk({count, images.extent(1), images.extent(2), images.extent(3)},
                     std::vector<double>(images.data() + start * sample,
                                         images.data() + (start + count) * sample));
        Tensor probs = net.forward(chunk, w, Mode::eval, nullptr);
        for (size_t b = 0; b < count; ++b) {
            const double* pr = probs.data() + b * N;
            const double* yr = labels.data() + (start + b) * N;
            size_t pi = 0, yi = 0;
            for (size_t i = 1; i < N; ++i) {
                if (pr[i] > pr[pi]) pi = i;  // strict: ties keep the lowest index
                if (yr[i] > yr[yi]) yi = i;
            }
            if (pi == yi) hits++;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(P);
}

} // namespace tb
