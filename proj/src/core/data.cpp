#include "core/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "core/error.hpp"

namespace tb {

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

void check_image_rank3(const Tensor& img, const char* who) {
    require(img.rank() == 3, errc::bad_shape,
            std::string(who) + " expects a (C,H,W) image, got rank " +
                std::to_string(img.rank()));
}

} // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
    require(spec.classes >= 2, errc::invalid_value, "synthetic data needs at least 2 classes");
    require(spec.per_class >= 1, errc::invalid_value, "synthetic data needs per_class >= 1");
    require(spec.channels >= 1 && spec.height >= 1 && spec.width >= 1, errc::invalid_value,
            "synthetic image dimensions must be positive");
    require(spec.noise_sigma >= 0.0, errc::invalid_value, "noise_sigma must be >= 0");

    const size_t P = spec.classes * spec.per_class;
    const size_t C = spec.channels, H = spec.height, W = spec.width;
    Dataset ds;
    ds.images = Tensor({P, C, H, W});
    ds.labels = Tensor({P, spec.classes}, 0.0);
    ds.provenance = "synthetic";

    const double pi = std::numbers::pi;
    const size_t pairs = (spec.classes + 1) / 2;
    Rng root(spec.seed);

    for (size_t c = 0; c < spec.classes; ++c) {
        const size_t pair = c / 2;
        const bool checkered = (c % 2 == 1);
        const double theta = pi * static_cast<double>(pair) / static_cast<double>(pairs);
        const double cycles = 3.0 + static_cast<double>(pair % 3) * 2.0;
        const double ct = std::cos(theta), st = std::sin(theta);

        for (size_t s = 0; s < spec.per_class; ++s) {
            const size_t idx = c * spec.per_class + s;
            Rng draw = root.fork("sample", idx);

            // Two phases per channel, drawn up front so the stream layout
            // does not depend on the pattern family.
            std::vector<double> phase_a(C), phase_b(C);
            for (size_t ch = 0; ch < C; ++ch) phase_a[ch] = draw.uniform(0.0, 2.0 * pi);
            for (size_t ch = 0; ch < C; ++ch) phase_b[ch] = draw.uniform(0.0, 2.0 * pi);

            for (size_t ch = 0; ch < C; ++ch) {
                for (size_t y = 0; y < H; ++y) {
                    for (size_t x = 0; x < W; ++x) {
                        const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(W);
                        const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(H);
                        const double along = ct * u + st * v;
                        const double across = -st * u + ct * v;
                        double wave = std::sin(2.0 * pi * cycles * along + phase_a[ch]);
                        if (checkered)
                            wave *= std::sin(2.0 * pi * cycles * across + phase_b[ch]);
                        double px = 0.5 + 0.38 * wave;
                        if (spec.noise_sigma > 0.0)
                            px = clamp01(px + spec.noise_sigma * draw.normal());
                        ds.images.at(idx, ch, y, x) = px;
                    }
                }
            }
            ds.labels.at(idx, c) = 1.0;
        }
    }
    return ds;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double train_fraction,
                                             uint64_t seed) {
    require(ds.size() > 0, errc::empty_dataset, "cannot split an empty dataset");
    require(train_fraction > 0.0 && train_fraction < 1.0, errc::invalid_value,
            "train_fraction must lie strictly between 0 and 1");

    const size_t P = ds.size(), N = ds.classes();
    std::vector<std::vector<size_t>> by_class(N);
    for (size_t i = 0; i < P; ++i) {
        size_t c = 0;
        while (c < N && ds.labels.at(i, c) != 1.0) ++c;
        require(c < N, errc::bad_target, "sample " + std::to_string(i) + " has no one-hot label");
        by_class[c].push_back(i);
    }

    std::vector<size_t> train_idx, test_idx;
    Rng root(seed);
    for (size_t c = 0; c < N; ++c) {
        auto& members = by_class[c];
        if (members.empty()) continue;
        std::vector<uint64_t> order(members.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng stream = root.fork("split", c);
        stream.shuffle_indices(order.data(), order.size());
        const auto take = static_cast<size_t>(
            std::llround(train_fraction * static_cast<double>(members.size())));
        std::vector<size_t> chosen(order.begin(), order.begin() + static_cast<long>(take));
        std::sort(chosen.begin(), chosen.end());
        std::vector<bool> is_train(members.size(), false);
        for (size_t k : chosen) is_train[k] = true;
        for (size_t k = 0; k < members.size(); ++k)
            (is_train[k] ? train_idx : test_idx).push_back(members[k]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    require(!train_idx.empty() && !test_idx.empty(), errc::empty_dataset,
            "split left one side empty; adjust train_fraction or dataset size");

    auto take_rows = [&](const std::vector<size_t>& rows, Split side) {
        Dataset out;
        out.images = gather_rows(ds.images, rows);
        out.labels = gather_rows(ds.labels, rows);
        if (!ds.aux_labels.empty())
            for (size_t r : rows) out.aux_labels.push_back(ds.aux_labels[r]);
        out.provenance = ds.provenance;
        out.split = side;
        return out;
    };
    return {take_rows(train_idx, Split::train), take_rows(test_idx, Split::test)};
}

namespace {

constexpr size_t CIFAR_PIXELS = 3 * 32 * 32;

size_t cifar_record_bytes(int variant) { return (variant == 100 ? 2 : 1) + CIFAR_PIXELS; }

void check_cifar_variant(int variant) {
    require(variant == 10 || variant == 100, errc::invalid_value,
            "cifar variant must be 10 or 100, got " + std::to_string(variant));
}

} // namespace

Dataset read_cifar(const std::vector<std::string>& paths, int variant) {
    check_cifar_variant(variant);
    require(!paths.empty(), errc::empty_dataset, "no cifar files given");

    const size_t rec = cifar_record_bytes(variant);
    const size_t classes = static_cast<size_t>(variant);
    std::vector<uint8_t> raw;
    for (const auto& path : paths) {
        std::ifstream in(path, std::ios::binary);
        require(in.good(), errc::io_error, "cannot open " + path);
        std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
        require(!bytes.empty(), errc::empty_dataset, path + " is empty");
        require(bytes.size() % rec == 0, errc::truncated_file,
                path + ": size " + std::to_string(bytes.size()) +
                    " is not a whole number of " + std::to_string(rec) + "-byte records");
        raw.insert(raw.end(), bytes.begin(), bytes.end());
    }

    const size_t P = raw.size() / rec;
    Dataset ds;
    ds.images = Tensor({P, 3, 32, 32});
    ds.labels = Tensor({P, classes}, 0.0);
    ds.provenance = variant == 100 ? "cifar100" : "cifar10";

    for (size_t i = 0; i < P; ++i) {
        const uint8_t* r = raw.data() + i * rec;
        size_t off = 0;
        if (variant == 100) ds.aux_labels.push_back(r[off++]);
        const uint8_t fine = r[off++];
        require(fine < classes, errc::label_out_of_range,
                "record " + std::to_string(i) + " has label " + std::to_string(fine) +
                    " but the variant only has " + std::to_string(classes) + " classes");
        ds.labels.at(i, fine) = 1.0;
        double* img = ds.images.data() + i * CIFAR_PIXELS;
        for (size_t p = 0; p < CIFAR_PIXELS; ++p)
            img[p] = static_cast<double>(r[off + p]) / 255.0;
    }
    return ds;
}

void write_cifar(const std::string& path, const Dataset& ds, int variant) {
    check_cifar_variant(variant);
    require(ds.size() > 0, errc::empty_dataset, "refusing to write an empty cifar file");
    require(ds.classes() == static_cast<size_t>(variant), errc::dimension_mismatch,
            "dataset has " + std::to_string(ds.classes()) + " classes, variant needs " +
                std::to_string(variant));
    require(ds.images.rank() == 4 && ds.images.extent(1) == 3 && ds.images.extent(2) == 32 &&
                ds.images.extent(3) == 32,
            errc::dimension_mismatch, "cifar images must be (P,3,32,32)");
    if (variant == 100)
        require(ds.aux_labels.size() == ds.size(), errc::length_mismatch,
                "cifar100 needs one coarse label per sample");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), errc::io_error, "cannot open " + path + " for writing");
    for (size_t i = 0; i < ds.size(); ++i) {
        if (variant == 100) out.put(static_cast<char>(ds.aux_labels[i]));
        size_t fine = 0;
        while (fine < ds.classes() && ds.labels.at(i, fine) != 1.0) ++fine;
        require(fine < ds.classes(), errc::bad_target,
                "sample " + std::to_string(i) + " has no one-hot label");
        out.put(static_cast<char>(fine));
        const double* img = ds.images.data() + i * CIFAR_PIXELS;
        for (size_t p = 0; p < CIFAR_PIXELS; ++p) {
            const auto byte = static_cast<long>(std::llround(img[p] * 255.0));
            require(byte >= 0 && byte <= 255, errc::invalid_value,
                    "pixel outside [0,1] cannot be written as a byte");
            out.put(static_cast<char>(static_cast<uint8_t>(byte)));
        }
    }
    require(out.good(), errc::io_error, "short write to " + path);
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments that
// run to end of line. Returns false at end of file.
bool next_ppm_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c) && c != '#') {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    if (c != EOF) in.unget();
    return !tok.empty();
}

size_t parse_ppm_number(const std::string& tok, const std::string& path, const char* what) {
    size_t value = 0;
    for (char ch : tok) {
        require(ch >= '0' && ch <= '9', errc::malformed_header,
                path + ": " + what + " is not a number: '" + tok + "'");
        value = value * 10 + static_cast<size_t>(ch - '0');
        require(value <= 1u << 20, errc::malformed_header,
                path + ": " + what + " is implausibly large");
    }
    return value;
}

} // namespace

Tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), errc::io_error, "cannot open " + path);

    std::string tok;
    require(next_ppm_token(in, tok), errc::malformed_header, path + ": missing magic");
    require(tok == "P6", errc::malformed_header,
            path + ": only binary P6 is supported, got '" + tok + "'");
    require(next_ppm_token(in, tok), errc::malformed_header, path + ": missing width");
    const size_t W = parse_ppm_number(tok, path, "width");
    require(next_ppm_token(in, tok), errc::malformed_header, path + ": missing height");
    const size_t H = parse_ppm_number(tok, path, "height");
    require(next_ppm_token(in, tok), errc::malformed_header, path + ": missing maxval");
    const size_t maxval = parse_ppm_number(tok, path, "maxval");
    require(maxval == 255, errc::malformed_header,
            path + ": maxval must be 255, got " + std::to_string(maxval));
    require(W > 0 && H > 0, errc::malformed_header, path + ": zero image dimension");

    // Exactly one whitespace byte separates the header from the pixels.
    const int sep = in.get();
    require(sep != EOF && std::isspace(sep), errc::malformed_header,
            path + ": expected single whitespace before pixel data");

    std::vector<char> pixels(W * H * 3);
    in.read(pixels.data(), static_cast<std::streamsize>(pixels.size()));
    require(static_cast<size_t>(in.gcount()) == pixels.size(), errc::truncated_file,
            path + ": expected " + std::to_string(pixels.size()) + " pixel bytes");

    // PPM interleaves RGB per pixel; internally planes are separate.
    Tensor img({3, H, W});
    for (size_t y = 0; y < H; ++y)
        for (size_t x = 0; x < W; ++x)
            for (size_t ch = 0; ch < 3; ++ch)
                img.at(ch, y, x) =
                    static_cast<double>(static_cast<uint8_t>(pixels[(y * W + x) * 3 + ch])) /
                    255.0;
    return img;
}

Dataset read_ppm_directory(const std::string& root) {
    namespace fs = std::filesystem;
    require(fs::is_directory(root), errc::io_error, root + " is not a directory");

    std::vector<std::string> class_dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
    std::sort(class_dirs.begin(), class_dirs.end());
    require(!class_dirs.empty(), errc::empty_dataset, root + " has no class subdirectories");

    std::vector<std::pair<Tensor, size_t>> samples;
    for (size_t c = 0; c < class_dirs.size(); ++c) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(root) / class_dirs[c]))
            if (entry.is_regular_file()) files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) samples.emplace_back(read_ppm(f), c);
    }
    require(!samples.empty(), errc::empty_dataset, root + " holds no images");

    const auto& ref = samples.front().first.shape();
    for (const auto& [img, cls] : samples)
        require(img.shape() == ref, errc::dimension_mismatch,
                "all images must share one size; found " + Tensor::shape_string(img.shape()) +
                    " next to " + Tensor::shape_string(ref));

    Dataset ds;
    ds.images = Tensor({samples.size(), ref[0], ref[1], ref[2]});
    ds.labels = Tensor({samples.size(), class_dirs.size()}, 0.0);
    ds.provenance = "ppm:" + root;
    const size_t stride = ref[0] * ref[1] * ref[2];
    for (size_t i = 0; i < samples.size(); ++i) {
        std::copy_n(samples[i].first.data(), stride, ds.images.data() + i * stride);
        ds.labels.at(i, samples[i].second) = 1.0;
    }
    return ds;
}

Tensor flip_h(const Tensor& img) {
    check_image_rank3(img, "flip_h");
    const size_t C = img.extent(0), H = img.extent(1), W = img.extent(2);
    Tensor out(img.shape());
    for (size_t c = 0; c < C; ++c)
        for (size_t y = 0; y < H; ++y)
            for (size_t x = 0; x < W; ++x) out.at(c, y, x) = img.at(c, y, W - 1 - x);
    return out;
}

Tensor flip_v(const Tensor& img) {
    check_image_rank3(img, "flip_v");
    const size_t C = img.extent(0), H = img.extent(1), W = img.extent(2);
    Tensor out(img.shape());
    for (size_t c = 0; c < C; ++c)
        for (size_t y = 0; y < H; ++y)
            for (size_t x = 0; x < W; ++x) out.at(c, y, x) = img.at(c, H - 1 - y, x);
    return out;
}

Tensor rot90(const Tensor& img, int quarter_turns) {
    check_image_rank3(img, "rot90");
    const size_t C = img.extent(0), H = img.extent(1), W = img.extent(2);
    require(H == W, errc::bad_shape, "rotation is defined for square images only");
    int q = quarter_turns % 4;
    if (q < 0) q += 4;
    if (q == 0) return img;
    Tensor out(img.shape());
    for (size_t c = 0; c < C; ++c)
        for (size_t y = 0; y < H; ++y)
            for (size_t x = 0; x < W; ++x) {
                // one counterclockwise quarter turn per application
                size_t sy = y, sx = x;
                for (int t = 0; t < q; ++t) {
                    const size_t ny = sx;
                    const size_t nx = H - 1 - sy;
                    sy = ny;
                    sx = nx;
                }
                out.at(c, y, x) = img.at(c, sy, sx);
            }
    return out;
}

Tensor adjust_brightness(const Tensor& img, double delta) {
    check_image_rank3(img, "adjust_brightness");
    Tensor out(img.shape());
    for (size_t i = 0; i < img.size(); ++i) out[i] = clamp01(img[i] + delta);
    return out;
}

Tensor adjust_contrast(const Tensor& img, double scale) {
    check_image_rank3(img, "adjust_contrast");
    require(scale >= 0.0, errc::invalid_value, "contrast scale must be >= 0");
    Tensor out(img.shape());
    for (size_t i = 0; i < img.size(); ++i) out[i] = clamp01(0.5 + scale * (img[i] - 0.5));
    return out;
}

Tensor add_noise(const Tensor& img, double sigma, Rng& rng) {
    check_image_rank3(img, "add_noise");
    require(sigma >= 0.0, errc::invalid_value, "noise sigma must be >= 0");
    Tensor out(img.shape());
    for (size_t i = 0; i < img.size(); ++i) out[i] = clamp01(img[i] + sigma * rng.normal());
    return out;
}

Tensor augment_batch(const Tensor& batch, const AugmentationSpec& spec, Rng& rng) {
    require(batch.rank() == 4, errc::bad_shape, "augment_batch expects a (B,C,H,W) batch");
    require(spec.brightness >= 0.0, errc::invalid_value, "brightness range must be >= 0");
    require(spec.contrast_lo > 0.0 && spec.contrast_hi >= spec.contrast_lo, errc::invalid_value,
            "contrast range must satisfy 0 < lo <= hi");
    require(spec.noise_sigma >= 0.0, errc::invalid_value, "noise sigma must be >= 0");
    if (spec.rotate)
        require(batch.extent(2) == batch.extent(3), errc::bad_shape,
                "rotation augmentation needs square images");
    if (!spec.active()) return batch;

    const size_t B = batch.extent(0), C = batch.extent(1), H = batch.extent(2),
                 W = batch.extent(3);
    const size_t stride = C * H * W;
    Tensor out(batch.shape());
    for (size_t b = 0; b < B; ++b) {
        Tensor img({C, H, W});
        std::copy_n(batch.data() + b * stride, stride, img.data());
        if (spec.hflip && rng.uniform() < 0.5) img = flip_h(img);
        if (spec.vflip && rng.uniform() < 0.5) img = flip_v(img);
        if (spec.rotate) img = rot90(img, static_cast<int>(rng.next_u64() % 4));
        if (spec.brightness != 0.0)
            img = adjust_brightness(img, rng.uniform(-spec.brightness, spec.brightness));
        if (spec.contrast_lo != 1.0 || spec.contrast_hi != 1.0)
            img = adjust_contrast(img, rng.uniform(spec.contrast_lo, spec.contrast_hi));
        if (spec.noise_sigma > 0.0) img = add_noise(img, spec.noise_sigma, rng);
        std::copy_n(img.data(), stride, out.data() + b * stride);
    }
    return out;
}

std::vector<std::vector<size_t>> iterate_batches(size_t population, const BatchPlan& plan,
                                                 size_t epoch) {
    require(plan.batch_size >= 1, errc::bad_batch_size, "batch size must be >= 1");
    require(population >= 1, errc::empty_dataset, "cannot batch an empty population");

    std::vector<uint64_t> order(population);
    for (size_t i = 0; i < population; ++i) order[i] = i;
    Rng stream = Rng(plan.seed).fork("shuffle", epoch);
    stream.shuffle_indices(order.data(), order.size());

    std::vector<std::vector<size_t>> batches;
    const size_t full = population / plan.batch_size;
    const size_t limit = plan.drop_last ? full * plan.batch_size : population;
    require(!plan.drop_last || full >= 1, errc::bad_batch_size,
            "batch size " + std::to_string(plan.batch_size) + " exceeds population " +
                std::to_string(population) + " with drop_last");
    for (size_t start = 0; start < limit; start += plan.batch_size) {
        const size_t stop = std::min(limit, start + plan.batch_size);
        batches.emplace_back(order.begin() + static_cast<long>(start),
                             order.begin() + static_cast<long>(stop));
    }
    return batches;
}

Tensor gather_rows(const Tensor& source, const std::vector<size_t>& idx) {
    require(source.rank() >= 2, errc::bad_shape, "gather_rows needs a leading sample axis");
    require(!idx.empty(), errc::empty_dataset, "gather_rows got no indices");
    size_t stride = 1;
    for (size_t a = 1; a < source.rank(); ++a) stride *= source.extent(a);
    std::vector<size_t> shape = source.shape();
    shape[0] = idx.size();
    Tensor out(shape);
    for (size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] < source.extent(0), errc::invalid_value,
                "row index " + std::to_string(idx[i]) + " out of range");
        std::copy_n(source.data() + idx[i] * stride, stride, out.data() + i * stride);
    }
    return out;
}

} // namespace tb
