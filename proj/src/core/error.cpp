#include "core/error.hpp"

namespace tb {

const char* errc_name(errc c) {
    switch (c) {
        case errc::shape_mismatch: return "ShapeMismatch";
        case errc::bad_shape: return "BadShape";
        case errc::length_mismatch: return "LengthMismatch";
        case errc::non_finite: return "NonFinite";
        case errc::degenerate_batch: return "DegenerateBatch";
        case errc::bad_pool_size: return "BadPoolSize";
        case errc::bad_rate: return "BadRate";
        case errc::bad_target: return "BadTarget";
        case errc::shape_underflow: return "ShapeUnderflow";
        case errc::empty_dataset: return "EmptyDataset";
        case errc::truncated_file: return "TruncatedFile";
        case errc::label_out_of_range: return "LabelOutOfRange";
        case errc::malformed_header: return "MalformedHeader";
        case errc::dimension_mismatch: return "DimensionMismatch";
        case errc::bad_batch_size: return "BadBatchSize";
        case errc::unknown_optimizer: return "UnknownOptimizer";
        case errc::invalid_hyper_params: return "InvalidHyperParams";
        case errc::line_search_failure: return "LineSearchFailure";
        case errc::duplicate_seed: return "DuplicateSeed";
        case errc::empty_grid: return "EmptyGrid";
        case errc::missing_record: return "MissingRecord";
        case errc::inconsistent_start: return "InconsistentStart";
        case errc::parse_error: return "ParseError";
        case errc::unknown_key: return "UnknownKey";
        case errc::invalid_value: return "InvalidValue";
        case errc::io_error: return "IoError";
    }
    return "UnknownError";
}

} // namespace tb
