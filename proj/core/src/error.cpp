#include "lidsn/error.hpp"

namespace lidsn {

const char* to_string(FormatErrc code) {
  switch (code) {
    case FormatErrc::bad_magic: return "bad magic";
    case FormatErrc::unsupported_version: return "unsupported version";
    case FormatErrc::truncated: return "truncated payload";
    case FormatErrc::label_out_of_range: return "label out of range";
    case FormatErrc::invalid_dimensions: return "invalid dimensions";
    case FormatErrc::invalid_sampling_rate: return "invalid sampling rate";
    case FormatErrc::trailing_bytes: return "trailing bytes";
    case FormatErrc::non_finite_value: return "non-finite value";
    case FormatErrc::unknown_parameter: return "unknown parameter";
    case FormatErrc::io_failure: return "i/o failure";
  }
  return "format error";
}

}  // namespace lidsn
