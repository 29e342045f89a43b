// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <fstream>

#include "binary_io.h"
#include "mctse/clue_net.h"

namespace mctse {

namespace {
constexpr char kMagic[6] = {'M', 'C', 'E', 'M', 'B', '1'};
}

void write_embedding_file(const std::string& path, Modality modality, const Tensor& data) {
  if (data.rank() != 2) throw DimensionError("embedding file data must be [L x D], got " + to_string(data.shape()));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out.write(kMagic, sizeof kMagic);
  out.put(static_cast<char>(modality));
  detail::put_u32(out, static_cast<std::uint32_t>(data.dim(0)));
  detail::put_u32(out, static_cast<std::uint32_t>(data.dim(1)));
  for (double v : data.values()) detail::put_f32(out, static_cast<float>(v));
  if (!out) throw InputError("write failed for " + path);
}

EmbeddingFile read_embedding_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open embedding file " + path);
  detail::Reader r(in, path);
  if (r.str(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) r.fail("not an MCEMB1 embedding file");
  const auto byte = static_cast<unsigned char>(r.str(1)[0]);
  if (byte > static_cast<unsigned char>(Modality::kTag)) r.fail("unknown modality byte " + std::to_string(byte));
  const std::uint32_t l = r.u32(), d = r.u32();
  if (l == 0 || d == 0) r.fail("empty embedding");
  std::vector<double> v(static_cast<std::size_t>(l) * d);
  for (auto& x : v) {
    x = r.f32();
    if (!std::isfinite(x)) r.fail("non-finite value");
  }
  if (!r.at_end()) r.fail("trailing bytes after data");
  return {static_cast<Modality>(byte), Tensor({l, d}, std::move(v))};
}

}  // namespace mctse
