#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pramana/types.hpp"

namespace pramana {

struct VadConfig {
  int frame_ms = 30;
  // A frame is voiced when its level exceeds the noise floor by this much.
  double energy_threshold_db = 12.0;
  // Unvoiced gaps up to this many frames are bridged into the surrounding
  // voiced run.
  int hangover_frames = 8;
  double min_dur_s = 2.0;
  double max_dur_s = 30.0;
  // The noise floor is this percentile of per-frame levels.
  double noise_floor_percentile = 10.0;
};

// Energy-based voice activity detection. Frame levels are measured in dB
// relative to the percentile noise floor, so the result is invariant under
// positive scaling of the input. Runs shorter than min_dur_s are dropped;
// runs longer than max_dur_s are split at the quietest interior frame.
// Produced ids are "<source>-NNNN".
std::vector<AudioSegment> detect_segments(const std::vector<float>& samples, int sample_rate,
                                          const VadConfig& cfg,
                                          const std::string& source_id = "",
                                          const std::string& audio_path = "");

// Reads a JSONL segment manifest produced elsewhere; rows are sorted per
// source by offset and overlapping rows are rejected (error names the
// offending pair). Malformed rows fail with their line number.
std::vector<AudioSegment> load_external_segments(const std::string& path);

enum class DurationBucket { b2_10, b10_20, b20_30, other };

std::string_view to_string(DurationBucket b);

// Bands: [2,10), [10,20), [20,30]; anything else is `other`.
DurationBucket duration_bucket(double duration_s);
inline DurationBucket duration_bucket(const AudioSegment& seg) {
  return duration_bucket(seg.duration_s);
}

}  // namespace pramana
