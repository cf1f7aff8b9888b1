#pragma once

#include <filesystem>
#include <string>

#include "lidsn/tensor.hpp"

namespace lidsn::model {

/// CSV for a 2-D tensor: header "row,0,1,...", then one line per row prefixed by its index.
/// Values use 17 significant digits.
std::string matrix_csv(const Tensor& m);

/// Heatmap with fixed 8-px cells. Colors ramp linearly from dark blue (minimum) to
/// yellow (maximum); a constant matrix renders at the low end.
std::string heatmap_svg(const Tensor& m);

/// Writes `text` to `path`; throws FormatError(io_failure) when the file cannot be written.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace lidsn::model
