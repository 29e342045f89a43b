// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mctse/errors.h"
#include "mctse/signal.h"

namespace mctse {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::vector<char>& buf, std::size_t off) {
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

AudioClip read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open WAV file: " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw InputError(path + ": not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t off = 12;
  while (off + 8 <= buf.size()) {
    const std::string id(buf.data() + off, 4);
    const auto size = read_le<std::uint32_t>(buf, off + 4);
    const std::size_t body = off + 8;
    if (body + size > buf.size()) throw InputError(path + ": truncated chunk '" + id + "'");
    if (id == "fmt ") {
      if (size < 16) throw InputError(path + ": short fmt chunk");
      format = read_le<std::uint16_t>(buf, body);
      channels = read_le<std::uint16_t>(buf, body + 2);
      rate = read_le<std::uint32_t>(buf, body + 4);
      bits = read_le<std::uint16_t>(buf, body + 14);
      if (format == kFormatExtensible && size >= 26) format = read_le<std::uint16_t>(buf, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw InputError(path + ": data chunk before fmt chunk");
      if (channels != 1) throw InputError(path + ": only mono audio is supported");
      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      if (format == kFormatPcm && bits == 16) {
        clip.samples.resize(size / 2);
        for (std::size_t i = 0; i < clip.samples.size(); ++i)
          clip.samples[i] = read_le<std::int16_t>(buf, body + 2 * i) / 32768.0;
      } else if (format == kFormatFloat && bits == 32) {
        clip.samples.resize(size / 4);
        for (std::size_t i = 0; i < clip.samples.size(); ++i)
          clip.samples[i] = read_le<float>(buf, body + 4 * i);
      } else {
        throw InputError(path + ": unsupported sample format " + std::to_string(format) + "/" +
                         std::to_string(bits) + " bit");
      }
      return clip;
    }
    off = body + size + (size & 1u);
  }
  throw InputError(path + ": no data chunk");
}

void write_wav(const std::string& path, const AudioClip& clip, WavFormat format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write WAV file: " + path);
  const bool pcm = format == WavFormat::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.size() * (bits / 8));
  os.write("RIFF", 4);
  put_le<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  put_le<std::uint32_t>(os, 16);
  put_le<std::uint16_t>(os, pcm ? kFormatPcm : kFormatFloat);
  put_le<std::uint16_t>(os, 1);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(clip.sample_rate));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(clip.sample_rate) * (bits / 8));
  put_le<std::uint16_t>(os, bits / 8);
  put_le<std::uint16_t>(os, bits);
  os.write("data", 4);
  put_le<std::uint32_t>(os, data_bytes);
  for (double v : clip.samples) {
    if (pcm) {
      const double s = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
      put_le<std::int16_t>(os, static_cast<std::int16_t>(s));
    } else {
      put_le<float>(os, static_cast<float>(v));
    }
  }
  if (!os) throw InputError("write failed: " + path);
}

}  // namespace mctse
