#pragma once

#include <stdexcept>
#include <string>

namespace tb {

// Every failure the library can raise, by name. Tests match on these, and
// the C API folds them into coarser status codes at the boundary.
enum class errc {
    shape_mismatch,
    bad_shape,
    length_mismatch,
    non_finite,
    degenerate_batch,
    bad_pool_size,
    bad_rate,
    bad_target,
    shape_underflow,
    empty_dataset,
    truncated_file,
    label_out_of_range,
    malformed_header,
    dimension_mismatch,
    bad_batch_size,
    unknown_optimizer,
    invalid_hyper_params,
    line_search_failure,
    duplicate_seed,
    empty_grid,
    missing_record,
    inconsistent_start,
    parse_error,
    unknown_key,
    invalid_value,
    io_error,
};

const char* errc_name(errc c);

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
    errc code() const { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, errc code, const std::string& what) {
    if (!ok) fail(code, what);
}

} // namespace tb
