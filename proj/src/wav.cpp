#include "pramana/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "pramana/errors.hpp"

namespace pramana {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DependencyError("cannot open WAV file: " + path);
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0) {
    throw ConfigError("not a RIFF/WAVE file: " + path);
  }

  WavData wav;
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, format = 0;
  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const char* chunk_id = bytes.data() + pos;
    const std::uint32_t chunk_size = read_u32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_size > n) {
      throw ConfigError("truncated WAV chunk in " + path);
    }
    if (std::memcmp(chunk_id, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw ConfigError("malformed fmt chunk in " + path);
      format = read_u16(p + body);
      channels = read_u16(p + body + 2);
      wav.sample_rate = static_cast<int>(read_u32(p + body + 4));
      bits = read_u16(p + body + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk_id, "data", 4) == 0) {
      if (!have_fmt) throw ConfigError("data chunk before fmt chunk in " + path);
      if (format != 1 || bits != 16) {
        throw ConfigError("unsupported WAV encoding (need 16-bit PCM): " + path);
      }
      if (channels != 1) {
        throw ConfigError("unsupported channel count (need mono): " + path);
      }
      const std::size_t count = chunk_size / 2;
      wav.samples.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::int16_t s =
            static_cast<std::int16_t>(read_u16(p + body + 2 * i));
        wav.samples[i] = static_cast<float>(s) / 32768.0f;
      }
      return wav;
    }
    // Chunks are word-aligned; odd sizes carry a pad byte.
    pos = body + chunk_size + (chunk_size & 1);
  }
  throw ConfigError("no data chunk in WAV file: " + path);
}

void write_wav(const std::string& path, const WavData& wav) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(wav.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out.append("RIFF");
  put_u32(out, 36 + data_bytes);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(wav.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wav.sample_rate * 2));  // byte rate
  put_u16(out, 2);   // block align
  put_u16(out, 16);  // bits
  out.append("data");
  put_u32(out, data_bytes);
  for (float s : wav.samples) {
    const float clamped = std::clamp(s, -1.0f, 1.0f);
    const auto v = static_cast<std::int16_t>(std::lrint(clamped * 32767.0f));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw DependencyError("cannot write WAV file: " + path);
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) {
    throw DependencyError("short write to WAV file: " + path);
  }
}

}  // namespace pramana
