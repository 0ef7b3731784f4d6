#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pramana/types.hpp"

namespace pramana {

// One simulated transcriber: outputs are the reference text with
// independent per-character perturbations at char_error_rate, plus a
// confidence that tracks the realized error:
//   confidence = clamp(1 - confidence_a * realized_cer + noise(confidence_b), 0, 1)
struct TranscriberProfile {
  std::string id;
  double char_error_rate = 0.0;
  // Restrict perturbation to substitutions drawn from replacement_alphabet
  // (empty = corpus alphabet). Lets tests build guaranteed-disjoint
  // outputs.
  bool substitution_only = false;
  std::string replacement_alphabet;
  double confidence_a = 4.0;
  double confidence_b = 0.02;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_segments = 100;
  std::string alphabet = "abcdefghijklmnopqrstuvwxyz";
  int words_min = 4;
  int words_max = 40;
  int word_len_min = 2;
  int word_len_max = 6;
  double seconds_per_word = 0.6;
  std::vector<std::string> domains = {"education", "news", "podcast"};
  std::vector<TranscriberProfile> profiles;
  // Write zero-filled 16 kHz WAV stubs under <out_dir>/audio/. Off by
  // default: nothing in the replay pipeline opens the audio files.
  bool write_wavs = false;
};

nlohmann::json synth_config_to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& doc);

// Emits into out_dir:
//   reference.jsonl          ground-truth segment manifest (with text)
//   <profile>.replay.jsonl   per-transcriber replay table
//   embeddings.replay.jsonl  bag-of-chars vectors for texts + segments
//   corpus.json              the SynthConfig that produced everything
//   pipeline.json            a ready-to-run config over the replay files
// Identical configs produce byte-identical directories.
void generate(const SynthConfig& cfg, const std::string& out_dir);

// Micro-averaged CER of one replay manifest against the references,
// normalized on both sides.
double measure_realized_cer(const std::string& corpus_dir, const std::string& transcriber_id);

struct SweepGrid {
  std::vector<double> taus = {1.0};
  std::vector<int> deltas = {1};
  // One rho applied to every evaluator in the sweep's fixed two-evaluator
  // stack (embedding similarity + confidence).
  std::vector<double> rhos = {0.8};
  std::vector<int> lambdas = {2};
};

struct SweepRow {
  double tau = 0.0;
  int delta = 0;
  double rho = 0.0;
  int lambda = 0;
  std::size_t accepted = 0;
  double accepted_fraction = 0.0;
  // Fraction of accepted labels whose normalized text equals the
  // normalized reference; 1.0 when nothing was accepted.
  double precision = 1.0;
  // Micro CER of accepted labels against their references; 0 when empty.
  double pseudo_cer = 0.0;
  std::vector<std::string> accepted_ids;
};

// Grid order: tau (outer), delta, rho, lambda (inner). Runs the
// agreement + filter stages directly over the corpus replay tables.
std::vector<SweepRow> sweep(const SweepGrid& grid, const std::string& corpus_dir);

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace pramana
