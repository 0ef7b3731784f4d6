#include "pramana/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "pramana/errors.hpp"
#include "pramana/manifest.hpp"

namespace pramana {

namespace {

constexpr double kDeadLevelDb = -1e9;
// Below this spread between the noise floor and the loudest live frame the
// signal is treated as homogeneous (e.g. a constant tone, or tone bursts
// against digital silence): the percentile floor sits at the signal's own
// level and would veto everything, so every live frame counts as voiced
// instead. Measured from the floor rather than the quietest live frame so
// that a handful of fade-in/fade-out frames cannot mask the degeneracy.
constexpr double kHomogeneousRangeDb = 0.5;

struct Run {
  std::size_t begin;  // frame index, inclusive
  std::size_t end;    // frame index, exclusive
};

std::vector<Run> split_long_runs(const Run& run, const std::vector<double>& frame_db,
                                 std::size_t max_frames) {
  const std::size_t len = run.end - run.begin;
  if (len <= max_frames) {
    return {run};
  }
  // Split at the quietest frame in the middle 50% so neither side becomes
  // a sliver, then recurse.
  const std::size_t lo = run.begin + len / 4;
  const std::size_t hi = run.end - len / 4;
  std::size_t cut = lo;
  for (std::size_t i = lo; i < hi; ++i) {
    if (frame_db[i] < frame_db[cut]) cut = i;
  }
  if (cut == run.begin) cut = run.begin + 1;  // guarantee progress
  std::vector<Run> out = split_long_runs({run.begin, cut}, frame_db, max_frames);
  std::vector<Run> right = split_long_runs({cut, run.end}, frame_db, max_frames);
  out.insert(out.end(), right.begin(), right.end());
  return out;
}

}  // namespace

std::vector<AudioSegment> detect_segments(const std::vector<float>& samples, int sample_rate,
                                          const VadConfig& cfg, const std::string& source_id,
                                          const std::string& audio_path) {
  if (sample_rate <= 0) {
    throw ConfigError("sample_rate must be positive");
  }
  if (cfg.frame_ms <= 0 || cfg.min_dur_s >= cfg.max_dur_s) {
    throw ConfigError("invalid VAD config: need frame_ms > 0 and min_dur_s < max_dur_s");
  }
  const std::size_t frame_len = std::max<std::size_t>(
      1, static_cast<std::size_t>(sample_rate) * static_cast<std::size_t>(cfg.frame_ms) / 1000);
  const std::size_t n_frames = samples.size() / frame_len;
  if (n_frames == 0) return {};

  std::vector<double> frame_db(n_frames, kDeadLevelDb);
  std::vector<double> live;
  live.reserve(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    double acc = 0.0;
    for (std::size_t i = f * frame_len; i < (f + 1) * frame_len; ++i) {
      acc += static_cast<double>(samples[i]) * static_cast<double>(samples[i]);
    }
    const double rms = std::sqrt(acc / static_cast<double>(frame_len));
    if (rms > 0.0) {
      frame_db[f] = 20.0 * std::log10(rms);
      live.push_back(frame_db[f]);
    }
  }
  if (live.empty()) return {};

  std::sort(live.begin(), live.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::lround(cfg.noise_floor_percentile / 100.0 * static_cast<double>(live.size() - 1)));
  const double floor_db = live[std::min(rank, live.size() - 1)];
  const bool homogeneous = live.back() - floor_db <= kHomogeneousRangeDb;

  std::vector<char> voiced(n_frames, 0);
  for (std::size_t f = 0; f < n_frames; ++f) {
    if (frame_db[f] == kDeadLevelDb) continue;  // digital silence is never voiced
    if (homogeneous) {
      voiced[f] = 1;
    } else if (frame_db[f] > floor_db + cfg.energy_threshold_db) {
      voiced[f] = 1;
    }
  }

  // Collect voiced runs, bridging unvoiced gaps up to hangover_frames.
  std::vector<Run> runs;
  std::size_t f = 0;
  while (f < n_frames) {
    if (!voiced[f]) {
      ++f;
      continue;
    }
    Run run{f, f + 1};
    std::size_t gap_start = run.end;
    while (gap_start < n_frames) {
      std::size_t g = gap_start;
      while (g < n_frames && !voiced[g]) ++g;
      if (g == gap_start) {  // no gap: extend the voiced stretch
        while (g < n_frames && voiced[g]) ++g;
        run.end = g;
        gap_start = g;
        continue;
      }
      if (g < n_frames && g - gap_start <= static_cast<std::size_t>(cfg.hangover_frames)) {
        run.end = g;  // bridge the gap into the run
        gap_start = g;
        continue;
      }
      break;
    }
    runs.push_back(run);
    f = run.end;
    while (f < n_frames && !voiced[f]) ++f;
  }

  const double frame_s = static_cast<double>(frame_len) / static_cast<double>(sample_rate);
  const auto max_frames =
      std::max<std::size_t>(1, static_cast<std::size_t>(cfg.max_dur_s / frame_s));

  std::vector<AudioSegment> segments;
  const std::string stem = source_id.empty() ? "seg" : source_id;
  for (const Run& run : runs) {
    for (const Run& piece : split_long_runs(run, frame_db, max_frames)) {
      const double dur = static_cast<double>(piece.end - piece.begin) * frame_s;
      if (dur < cfg.min_dur_s) continue;
      AudioSegment seg;
      char idx[8];
      std::snprintf(idx, sizeof(idx), "%04zu", segments.size() + 1);
      seg.id = stem + "-" + idx;
      seg.source_id = source_id;
      seg.audio_path = audio_path;
      seg.offset_s = static_cast<double>(piece.begin) * frame_s;
      seg.duration_s = dur;
      segments.push_back(std::move(seg));
    }
  }
  return segments;
}

std::vector<AudioSegment> load_external_segments(const std::string& path) {
  std::vector<AudioSegment> segments = read_segments(path);
  // Group per source (falling back to the audio path), sort by offset, and
  // reject overlaps within each group.
  auto group_key = [](const AudioSegment& s) {
    return s.source_id.empty() ? s.audio_path : s.source_id;
  };
  std::stable_sort(segments.begin(), segments.end(),
                   [&](const AudioSegment& a, const AudioSegment& b) {
                     const auto ka = group_key(a), kb = group_key(b);
                     if (ka != kb) return ka < kb;
                     return a.offset_s < b.offset_s;
                   });
  for (std::size_t i = 1; i < segments.size(); ++i) {
    const AudioSegment& prev = segments[i - 1];
    const AudioSegment& cur = segments[i];
    if (group_key(prev) == group_key(cur) &&
        prev.offset_s + prev.duration_s > cur.offset_s + 1e-9) {
      throw ConfigError("overlapping segments: '" + prev.id + "' and '" + cur.id + "'");
    }
  }
  return segments;
}

std::string_view to_string(DurationBucket b) {
  switch (b) {
    case DurationBucket::b2_10:
      return "2-10";
    case DurationBucket::b10_20:
      return "10-20";
    case DurationBucket::b20_30:
      return "20-30";
    case DurationBucket::other:
      return "other";
  }
  return "other";
}

DurationBucket duration_bucket(double duration_s) {
  if (duration_s >= 2.0 && duration_s < 10.0) return DurationBucket::b2_10;
  if (duration_s >= 10.0 && duration_s < 20.0) return DurationBucket::b10_20;
  if (duration_s >= 20.0 && duration_s <= 30.0) return DurationBucket::b20_30;
  return DurationBucket::other;
}

}  // namespace pramana
