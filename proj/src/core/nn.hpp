#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/params.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace tb {

enum class Act { relu, silu };
enum class PoolKind { none, max, mean };

// train:  batch statistics, running stats updated, dropout active.
// eval:   running statistics, dropout off.
// frozen: batch statistics but no side effects and no dropout; used whenever
//         the loss must be a fixed deterministic function of the weights
//         (full-batch solvers, recorded starting loss).
enum class Mode { train, eval, frozen };

// ---- single-sample layer primitives -------------------------------------

// x is (C,H,W), kernels are (K,C,n,n); valid convolution, no bias.
// Output spatial extent is floor((m - n + 1) / s) per axis.
Tensor conv2d_forward(const Tensor& x, const Tensor& kernels, size_t stride);

// Accumulates into gx and gk, which must be zeroed (or carry a running sum)
// by the caller; gout matches the forward output shape.
void conv2d_backward(const Tensor& x, const Tensor& kernels, size_t stride,
                     const Tensor& gout, Tensor& gx, Tensor& gk);

double activate_one(Act a, double z);
double activate_grad_one(Act a, double z);
Tensor activate(const Tensor& z, Act a);

// Non-overlapping p x p windows; trailing rows/columns that do not fill a
// window are dropped. Max pooling routes gradient to the first maximum in
// row-major window order.
Tensor pool_forward(const Tensor& x, PoolKind kind, size_t p);
Tensor pool_backward(const Tensor& x, PoolKind kind, size_t p, const Tensor& gout);

// ---- batch primitives ----------------------------------------------------

// x is (B,C,H,W); statistics are per channel over batch and space.
// In train mode running stats are blended as r <- 0.99 r + 0.01 batch.
struct BnCache {
    Tensor xhat;     // normalized activations, same shape as x
    Tensor invstd;   // (C,)
    size_t per_channel = 0;
};
Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         Tensor& run_mean, Tensor& run_var, Mode mode, BnCache* cache);
void batchnorm_backward(const Tensor& gout, const Tensor& gamma, const BnCache& cache,
                        Mode mode, Tensor& gx, Tensor& ggamma, Tensor& gbeta);

// Zeroes each value with probability rate and rescales survivors by
// 1/(1-rate); identity when not training. mask records survivors.
Tensor dropout_forward(const Tensor& x, double rate, Mode mode, Rng& rng,
                       std::vector<uint8_t>* mask);

// x is (B,in), W is (out,in), b is (out); y = x W^T + b, no activation.
Tensor dense_forward(const Tensor& x, const Tensor& W, const Tensor& b);
void dense_backward(const Tensor& x, const Tensor& W, const Tensor& gout,
                    Tensor& gx, Tensor& gW, Tensor& gb);

// Row-wise softmax with max shift; logits are (B,N).
Tensor softmax(const Tensor& logits);

// Mean categorical cross entropy over the batch; probabilities are clamped
// at 1e-12 inside the log. Target rows must be one-hot.
double cce_loss(const Tensor& probs, const Tensor& targets);

// ---- architecture --------------------------------------------------------

enum class BlockKind { cdb, cb, fcb, classify };

struct BlockSpec {
    BlockKind kind = BlockKind::cdb;
    size_t width = 0;          // conv channels or dense units; ignored for classify
    Act act = Act::relu;
    PoolKind pool = PoolKind::none;
    size_t pool_size = 2;
    bool batchnorm = false;
    double dropout = 0.0;
};

struct ArchitectureSpec {
    std::string variant;             // free-form label carried into results
    std::vector<size_t> input;       // (C,H,W)
    size_t classes = 0;
    size_t kernel = 3;               // conv window edge
    size_t stride = 1;
    std::vector<BlockSpec> blocks;   // must end with exactly one classify block
};

// Preset families. "baseline" is the five-stage stack (16..256 channels,
// dense 512); "-mini" is the three-stage desk variant (8/16/32, dense 64).
// wide doubles conv channels, deep puts a non-downsampling conv block after
// every downsampling one, deepwide does both.
ArchitectureSpec make_architecture(const std::string& variant,
                                   std::vector<size_t> input, size_t classes);

// Swaps every activation to silu, every pool to mean, and disables dropout;
// the smooth configuration required by the quasi-Newton solver.
ArchitectureSpec smooth_variant(ArchitectureSpec spec);

std::string architecture_to_json(const ArchitectureSpec& spec);
ArchitectureSpec architecture_from_json(const std::string& text);

enum class BiasInit { zero, sampled };

// Executable network. Holds the realized layer graph and the batchnorm
// running statistics; weights live outside in a ParamSet so the optimizers
// can treat them uniformly.
class Network {
public:
    explicit Network(const ArchitectureSpec& spec);

    const ArchitectureSpec& spec() const { return spec_; }
    size_t param_count() const { return layout_.total_size(); }
    const ParamSet& param_layout() const { return layout_; }

    // Fresh weights in layout order. Weight tensors follow the requested
    // initializer; batchnorm scale/offset start at 1/0; biases follow bias.
    ParamSet init_params(Init kind, Rng& rng, BiasInit bias = BiasInit::zero) const;

    // Probabilities, (B,classes). rng is only consulted by dropout in train
    // mode and may be null otherwise.
    Tensor forward(const Tensor& x, const ParamSet& w, Mode mode, Rng* rng = nullptr);

    double loss(const Tensor& x, const Tensor& y, const ParamSet& w, Mode mode,
                Rng* rng = nullptr);

    // Forward + mean cross entropy + full backward in one pass; writes the
    // gradient for every entry of w into grads (same layout, overwritten).
    double loss_and_grad(const Tensor& x, const Tensor& y, const ParamSet& w, Mode mode,
                         Rng* rng, ParamSet& grads);

    void reset_running_stats();

private:
    struct Node {
        enum class Op { conv, act, pool, bn, dropout, flatten, dense, softmax } op;
        // conv/dense parameter indices into the layout (SIZE_MAX = unused)
        size_t w_index = SIZE_MAX;
        size_t b_index = SIZE_MAX;
        size_t gamma_index = SIZE_MAX;
        size_t beta_index = SIZE_MAX;
        Act act = Act::relu;
        PoolKind pool = PoolKind::none;
        size_t pool_size = 2;
        double dropout = 0.0;
        size_t bn_slot = SIZE_MAX;   // index into running-stat storage
    };

    struct Pass;  // per-call caches, defined in the .cpp

    Tensor run_forward(const Tensor& x, const ParamSet& w, Mode mode, Rng* rng, Pass* pass);

    ArchitectureSpec spec_;
    std::vector<Node> nodes_;
    ParamSet layout_;                 // zero tensors defining names and shapes
    std::vector<Tensor> run_mean_, run_var_;
};

// Fraction of samples whose predicted class (argmax, lowest index on ties)
// matches the labeled class. images (P,C,H,W), labels one-hot (P,N).
double evaluate_accuracy(Network& net, const ParamSet& w, const Tensor& images,
                         const Tensor& labels, size_t batch = 256);

} // namespace tb
