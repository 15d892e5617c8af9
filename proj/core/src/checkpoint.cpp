// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/checkpoint.hpp"

#include <limits>
#include <vector>

#include "binary_io.hpp"

namespace earlydrop {

std::string encode_checkpoint(const ParameterVector &p) {
  detail::ByteWriter w;
  w.bytes("DDCK");
  w.u32(kCheckpointVersion);
  w.u64(p.segment_count());
  for (std::size_t i = 0; i < p.segment_count(); ++i) {
    const Segment &s = p.segments()[i];
    w.u64(s.name.size());
    w.bytes(s.name);
    w.u64(s.shape.size());
    for (auto d : s.shape) w.u64(d);
    for (double v : p.segment_values(i)) w.f64(v);
  }
  return w.take();
}

ParameterVector decode_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (r.bytes(4) != "DDCK") r.fail("bad magic, expected DDCK");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(version) + ", expected " +
           std::to_string(kCheckpointVersion));
  }
  const auto count = r.u64();
  ParameterVector p;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.u64();
    if (name_len > r.remaining()) r.fail("segment name length exceeds file");
    std::string name(r.bytes(name_len));
    const auto rank = r.u64();
    if (rank > r.remaining() / 8) r.fail("segment rank exceeds file");
    Shape shape;
    std::uint64_t n = 1;
    for (std::uint64_t d = 0; d < rank; ++d) {
      const auto dim = r.u64();
      if (dim != 0 && n > std::numeric_limits<std::uint64_t>::max() / dim)
        r.fail("segment size overflows");
      n *= dim;
      shape.push_back(dim);
    }
    if (n > r.remaining() / 8) r.fail("segment " + name + " values truncated");
    std::vector<double> values(n);
    for (auto &v : values) v = r.f64();
    p.add_segment(std::move(name), std::move(shape), values);
  }
  if (r.remaining() != 0) r.fail("trailing bytes after last segment");
  return p;
}

void save_checkpoint(const ParameterVector &segments, const std::string &path) {
  detail::write_file(path, encode_checkpoint(segments));
}

ParameterVector load_checkpoint(const std::string &path) {
  return decode_checkpoint(detail::read_file(path));
}

} // namespace earlydrop
