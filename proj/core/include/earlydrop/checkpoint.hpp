// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "earlydrop/parameters.hpp"

namespace earlydrop {

/// Binary checkpoint layout, all integers little-endian:
///
///   "DDCK" | version u32 | segment count u64 |
///   per segment: name length u64 | UTF-8 name | rank u64 | dims u64 x rank |
///                values f64 x prod(dims)
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const ParameterVector &segments);
/// Throws ParseError naming the byte offset of the problem.
ParameterVector decode_checkpoint(std::string_view bytes);

void save_checkpoint(const ParameterVector &segments, const std::string &path);
ParameterVector load_checkpoint(const std::string &path);

} // namespace earlydrop
