#pragma once

#include <string>
#include <vector>

namespace pramana {

struct WavData {
  int sample_rate = 0;
  std::vector<float> samples;  // mono, in [-1, 1]
};

// Reads a 16-bit PCM mono WAV file. Multi-channel or non-PCM input is a
// ConfigError; unreadable files are a DependencyError.
WavData read_wav(const std::string& path);

// Writes samples as 16-bit PCM mono (values clamped to [-1, 1]).
void write_wav(const std::string& path, const WavData& wav);

}  // namespace pramana
