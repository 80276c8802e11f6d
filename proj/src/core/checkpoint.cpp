#include "core/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace tb {

namespace {

constexpr char MAGIC[4] = {'T', 'B', 'C', 'K'};
constexpr uint32_t VERSION = 1;

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    require(in.gcount() == 4, errc::truncated_file, path + " ends mid-field");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t get_u64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    require(in.gcount() == 8, errc::truncated_file, path + " ends mid-field");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in, const std::string& path) {
    uint64_t bits = get_u64(in, path);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

void write_tensor_file(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), errc::io_error, "cannot open " + path + " for writing");
    out.write(MAGIC, 4);
    put_u32(out, VERSION);
    put_u64(out, tensors.size());
    for (const NamedTensor& t : tensors) {
        put_u32(out, static_cast<uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put_u32(out, static_cast<uint32_t>(t.value.rank()));
        for (size_t e : t.value.shape()) put_u64(out, e);
        for (size_t i = 0; i < t.value.size(); ++i) put_f64(out, t.value[i]);
    }
    out.flush();
    require(out.good(), errc::io_error, "short write to " + path);
}

std::vector<NamedTensor> read_tensor_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), errc::io_error, "cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    require(in.gcount() == 4 && std::memcmp(magic, MAGIC, 4) == 0, errc::malformed_header,
            path + " is not a tensor container");
    uint32_t version = get_u32(in, path);
    require(version == VERSION, errc::malformed_header,
            path + " has unsupported container version " + std::to_string(version));
    uint64_t count = get_u64(in, path);
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (uint64_t ti = 0; ti < count; ++ti) {
        uint32_t name_len = get_u32(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        require(static_cast<uint32_t>(in.gcount()) == name_len, errc::truncated_file,
                path + " ends inside a tensor name");
        uint32_t rank = get_u32(in, path);
        std::vector<size_t> shape(rank);
        for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<size_t>(get_u64(in, path));
        Tensor t(shape);
        for (size_t i = 0; i < t.size(); ++i) t[i] = get_f64(in, path);
        tensors.push_back({std::move(name), std::move(t)});
    }
    return tensors;
}

void save_params(const std::string& path, const ParamSet& w) {
    std::vector<NamedTensor> tensors;
    for (const auto& e : w) tensors.push_back({e.name, e.value});
    write_tensor_file(path, tensors);
}

void load_params(const std::string& path, ParamSet& w) {
    std::vector<NamedTensor> tensors = read_tensor_file(path);
    require(tensors.size() == w.count(), errc::length_mismatch,
            path + " holds " + std::to_string(tensors.size()) + " tensors, expected " +
                std::to_string(w.count()));
    for (size_t i = 0; i < tensors.size(); ++i) {
        require(tensors[i].name == w.entry(i).name, errc::invalid_value,
                path + " names tensor " + std::to_string(i) + " '" + tensors[i].name +
                    "', expected '" + w.entry(i).name + "'");
        require(tensors[i].value.shape() == w[i].shape(), errc::shape_mismatch,
                path + " tensor '" + tensors[i].name + "' has the wrong shape");
        w[i] = std::move(tensors[i].value);
    }
}

void save_optimizer_state(const std::string& path, const OptimizerState& st) {
    std::vector<NamedTensor> tensors;
    tensors.push_back({"__step", Tensor({1}, {static_cast<double>(st.k)})});
    for (const auto& [slot, set] : st.slots)
        for (const auto& e : set) tensors.push_back({slot + "/" + e.name, e.value});
    write_tensor_file(path, tensors);
}

void load_optimizer_state(const std::string& path, OptimizerState& st) {
    std::vector<NamedTensor> tensors = read_tensor_file(path);
    st.k = 0;
    st.slots.clear();
    for (auto& t : tensors) {
        if (t.name == "__step") {
            st.k = static_cast<int64_t>(t.value[0]);
            continue;
        }
        size_t slash = t.name.find('/');
        require(slash != std::string::npos, errc::invalid_value,
                path + ": state tensor '" + t.name + "' has no slot prefix");
        std::string slot = t.name.substr(0, slash);
        std::string entry = t.name.substr(slash + 1);
        ParamSet* set = nullptr;
        for (auto& s : st.slots)
            if (s.first == slot) set = &s.second;
        if (!set) {
            st.slots.emplace_back(slot, ParamSet{});
            set = &st.slots.back().second;
        }
        set->add(entry, std::move(t.value));
    }
}

} // namespace tb
