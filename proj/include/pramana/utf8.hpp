#pragma once

#include <string>
#include <string_view>

namespace pramana::utf8 {

// Decode UTF-8 to Unicode scalar values. Invalid byte sequences are
// replaced with U+FFFD (one replacement per bogus byte run) so that
// decoding never throws on arbitrary input.
std::u32string decode(std::string_view s);

// Encode Unicode scalar values back to UTF-8. Lone surrogates and
// out-of-range values are written as U+FFFD.
std::string encode(std::u32string_view s);

}  // namespace pramana::utf8
