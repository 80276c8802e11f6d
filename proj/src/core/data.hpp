#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace tb {

enum class Split { all, train, test };

struct Dataset {
    Tensor images;                    // (P,C,H,W), values in [0,1]
    Tensor labels;                    // (P,N) one-hot rows
    std::vector<uint8_t> aux_labels;  // coarse byte per sample (cifar100 only)
    std::string provenance;
    Split split = Split::all;

    size_t size() const { return images.rank() == 4 ? images.extent(0) : 0; }
    size_t classes() const { return labels.rank() == 2 ? labels.extent(1) : 0; }
};

// Procedural texture classes: even classes are oriented stripe patterns,
// odd classes checkerboard-like interference patterns; orientation and
// spatial frequency step with the class index, each sample draws its own
// phases, and optional pixel noise goes on top. Samples are laid out
// class-major and exactly balanced.
struct SyntheticSpec {
    size_t classes = 8;
    size_t per_class = 80;
    size_t channels = 3;
    size_t height = 32;
    size_t width = 32;
    double noise_sigma = 0.05;
    uint64_t seed = 1699806;
};

Dataset generate_synthetic(const SyntheticSpec& spec);

// Stratified split: within each class the sample indices are shuffled by a
// stream forked from `seed` and the first round(fraction * count) go to the
// train side. Both halves keep the original relative order of their rows.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double train_fraction,
                                             uint64_t seed);

// Binary CIFAR records: one label byte (the 100-class variant has a coarse
// byte first, then the fine byte) followed by 3072 bytes, three 32x32
// planes in R,G,B order. Files may be concatenated in any count.
Dataset read_cifar(const std::vector<std::string>& paths, int variant);
void write_cifar(const std::string& path, const Dataset& ds, int variant);

// Binary PPM (P6, maxval 255). Comments and arbitrary whitespace are legal
// between header tokens; exactly one whitespace byte separates the maxval
// from the pixel bytes.
Tensor read_ppm(const std::string& path);

// One class per subdirectory of root (sorted by name), every image the
// same size. Class order defines the label indices.
Dataset read_ppm_directory(const std::string& root);

struct AugmentationSpec {
    bool hflip = false;
    bool vflip = false;
    bool rotate = false;       // quarter turns, square images only
    double brightness = 0.0;   // shift drawn from [-brightness, +brightness]
    double contrast_lo = 1.0;  // scale drawn from [contrast_lo, contrast_hi]
    double contrast_hi = 1.0;
    double noise_sigma = 0.0;

    bool active() const {
        return hflip || vflip || rotate || brightness != 0.0 || contrast_lo != 1.0 ||
               contrast_hi != 1.0 || noise_sigma != 0.0;
    }
};

// Single-image transforms, image shape (C,H,W). The value-changing ones
// clamp back into [0,1].
Tensor flip_h(const Tensor& img);
Tensor flip_v(const Tensor& img);
Tensor rot90(const Tensor& img, int quarter_turns);
Tensor adjust_brightness(const Tensor& img, double delta);
Tensor adjust_contrast(const Tensor& img, double scale);  // pivots around 0.5
Tensor add_noise(const Tensor& img, double sigma, Rng& rng);

// Applies the enabled transforms to every sample of a (B,C,H,W) batch with
// independent draws per sample, in a fixed order: flips, rotation,
// brightness, contrast, noise.
Tensor augment_batch(const Tensor& batch, const AugmentationSpec& spec, Rng& rng);

struct BatchPlan {
    size_t batch_size = 128;
    bool drop_last = true;
    uint64_t seed = 1699806;
};

// Index batches for one epoch: a seeded permutation of [0,P) cut into
// consecutive slices. With drop_last the trailing partial slice is dropped,
// so every batch has exactly batch_size indices.
std::vector<std::vector<size_t>> iterate_batches(size_t population, const BatchPlan& plan,
                                                 size_t epoch);

Tensor gather_rows(const Tensor& source, const std::vector<size_t>& idx);

} // namespace tb
