#include "pramana/synthcorpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "pramana/agreement.hpp"
#include "pramana/embeddings.hpp"
#include "pramana/errors.hpp"
#include "pramana/evaluators.hpp"
#include "pramana/manifest.hpp"
#include "pramana/pipeline.hpp"
#include "pramana/rng.hpp"
#include "pramana/textnorm.hpp"
#include "pramana/utf8.hpp"
#include "pramana/wav.hpp"

namespace pramana {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_keys(const json& doc, const std::unordered_set<std::string>& allowed,
                  const std::string& ctx) {
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key: " + ctx + key);
    }
  }
}

void validate_synth_config(const SynthConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.n_segments == 0) problems.push_back("n_segments must be > 0");
  if (cfg.alphabet.empty()) problems.push_back("alphabet must not be empty");
  if (cfg.words_min < 1) problems.push_back("words_min must be >= 1");
  if (cfg.words_max < cfg.words_min) problems.push_back("words_max must be >= words_min");
  if (cfg.word_len_min < 1) problems.push_back("word_len_min must be >= 1");
  if (cfg.word_len_max < cfg.word_len_min) {
    problems.push_back("word_len_max must be >= word_len_min");
  }
  if (!(cfg.seconds_per_word > 0.0)) problems.push_back("seconds_per_word must be > 0");
  if (cfg.profiles.empty()) problems.push_back("profiles must not be empty");
  std::unordered_set<std::string> ids;
  for (const TranscriberProfile& p : cfg.profiles) {
    if (p.id.empty()) problems.push_back("profile id must not be empty");
    if (!ids.insert(p.id).second) problems.push_back("duplicate profile id '" + p.id + "'");
    if (!(p.char_error_rate >= 0.0 && p.char_error_rate <= 1.0)) {
      problems.push_back("profile '" + p.id + "': char_error_rate must be within [0, 1]");
    }
    if (!(p.confidence_a >= 0.0) || !(p.confidence_b >= 0.0)) {
      problems.push_back("profile '" + p.id + "': confidence model params must be >= 0");
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const std::string& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

struct Alphabet {
  std::u32string chars;
};

Alphabet decode_alphabet(const std::string& raw, const std::string& what) {
  Alphabet a;
  a.chars = utf8::decode(raw);
  if (a.chars.empty()) throw ConfigError(what + " must not be empty");
  return a;
}

// Perturbation probability is scaled so that the realized CER (edits over
// the full reference length, spaces included) tracks char_error_rate even
// though spaces themselves are never touched.
std::string perturb(Rng& rng, const std::string& text, const TranscriberProfile& profile,
                    const Alphabet& repl) {
  const std::u32string src = utf8::decode(text);
  std::size_t nonspace = 0;
  for (char32_t c : src) {
    if (c != U' ') ++nonspace;
  }
  if (nonspace == 0) return text;
  const double p = std::min(
      1.0, profile.char_error_rate * static_cast<double>(src.size()) /
               static_cast<double>(nonspace));

  auto random_char = [&](char32_t exclude) -> std::optional<char32_t> {
    if (repl.chars.size() == 1 && repl.chars[0] == exclude) return std::nullopt;
    for (;;) {
      const char32_t c = repl.chars[rng.below(repl.chars.size())];
      if (c != exclude) return c;
    }
  };

  std::u32string out;
  out.reserve(src.size() + src.size() / 8);
  for (char32_t c : src) {
    if (c == U' ' || rng.real() >= p) {
      out.push_back(c);
      continue;
    }
    const std::uint64_t op = profile.substitution_only ? 0 : rng.below(3);
    if (op == 0) {  // substitute
      const std::optional<char32_t> r = random_char(c);
      out.push_back(r.value_or(c));
    } else if (op == 1) {  // delete
      continue;
    } else {  // insert after
      out.push_back(c);
      out.push_back(repl.chars[rng.below(repl.chars.size())]);
    }
  }
  return utf8::encode(out);
}

std::string segment_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "syn-%05zu", i);
  return buf;
}

struct ReplayEntry {
  std::string text;
  double confidence = 0.0;
};

struct Corpus {
  SynthConfig cfg;
  std::vector<AudioSegment> references;
  // profile id -> segment id -> entry, in cfg.profiles order via cfg.
  std::unordered_map<std::string, std::unordered_map<std::string, ReplayEntry>> outputs;
};

Corpus load_corpus(const std::string& corpus_dir) {
  const fs::path dir(corpus_dir);
  std::ifstream cj(dir / "corpus.json");
  if (!cj) throw DependencyError("cannot open corpus config: " + (dir / "corpus.json").string());
  json doc;
  try {
    doc = json::parse(cj);
  } catch (const json::exception& e) {
    throw ConfigError((dir / "corpus.json").string() + ": " + e.what());
  }
  Corpus corpus;
  corpus.cfg = synth_config_from_json(doc);
  corpus.references = read_segments((dir / "reference.jsonl").string());
  for (const TranscriberProfile& p : corpus.cfg.profiles) {
    const fs::path path = dir / (p.id + ".replay.jsonl");
    std::ifstream in(path);
    if (!in) throw DependencyError("cannot open replay manifest: " + path.string());
    auto& table = corpus.outputs[p.id];
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const json row = json::parse(line);
        ReplayEntry entry;
        entry.text = row.at("text").get<std::string>();
        entry.confidence = row.at("confidence").get<double>();
        table[row.at("id").get<std::string>()] = std::move(entry);
      } catch (const std::exception& e) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }
  return corpus;
}

PipelineConfig replay_pipeline_config(const SynthConfig& cfg) {
  PipelineConfig pc;
  for (const TranscriberProfile& p : cfg.profiles) {
    TranscriberSpec t;
    t.id = p.id;
    t.kind = TranscriberSpec::Kind::replay;
    t.path = p.id + ".replay.jsonl";
    t.batch_size = 16;
    pc.transcribers.push_back(std::move(t));
  }
  pc.agreement.tau = 1.0;
  pc.agreement.delta = 1;
  pc.agreement.include_self = true;

  EvaluatorSpec sonar;
  sonar.id = "sonar";
  sonar.kind = EvaluatorSpec::Kind::embedding_similarity;
  sonar.rho = 0.8;
  sonar.provider.id = "bag";
  sonar.provider.kind = EmbeddingProviderSpec::Kind::mock_bag_of_chars;
  sonar.provider.alphabet = cfg.alphabet;
  EvaluatorSpec conf;
  conf.id = "rnnt_conf";
  conf.kind = EvaluatorSpec::Kind::confidence;
  conf.rho = 0.7;
  pc.filter.evaluators = {std::move(sonar), std::move(conf)};
  pc.filter.lambda = 2;
  pc.filter.comparison = FilterComparison::ge;

  pc.workers = 1;
  pc.ordered_output = true;
  pc.checkpoint_path = "checkpoint.jsonl";
  return pc;
}

}  // namespace

json synth_config_to_json(const SynthConfig& cfg) {
  json doc;
  doc["seed"] = cfg.seed;
  doc["n_segments"] = cfg.n_segments;
  doc["alphabet"] = cfg.alphabet;
  doc["words_min"] = cfg.words_min;
  doc["words_max"] = cfg.words_max;
  doc["word_len_min"] = cfg.word_len_min;
  doc["word_len_max"] = cfg.word_len_max;
  doc["seconds_per_word"] = cfg.seconds_per_word;
  doc["domains"] = cfg.domains;
  doc["write_wavs"] = cfg.write_wavs;
  json profiles = json::array();
  for (const TranscriberProfile& p : cfg.profiles) {
    json row;
    row["id"] = p.id;
    row["char_error_rate"] = p.char_error_rate;
    row["substitution_only"] = p.substitution_only;
    row["replacement_alphabet"] = p.replacement_alphabet;
    row["confidence_a"] = p.confidence_a;
    row["confidence_b"] = p.confidence_b;
    profiles.push_back(std::move(row));
  }
  doc["profiles"] = std::move(profiles);
  return doc;
}

SynthConfig synth_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("corpus config must be a JSON object");
  require_keys(doc,
               {"seed", "n_segments", "alphabet", "words_min", "words_max", "word_len_min",
                "word_len_max", "seconds_per_word", "domains", "write_wavs", "profiles"},
               "");
  SynthConfig cfg;
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.n_segments = doc.value("n_segments", cfg.n_segments);
  cfg.alphabet = doc.value("alphabet", cfg.alphabet);
  cfg.words_min = doc.value("words_min", cfg.words_min);
  cfg.words_max = doc.value("words_max", cfg.words_max);
  cfg.word_len_min = doc.value("word_len_min", cfg.word_len_min);
  cfg.word_len_max = doc.value("word_len_max", cfg.word_len_max);
  cfg.seconds_per_word = doc.value("seconds_per_word", cfg.seconds_per_word);
  if (doc.contains("domains")) cfg.domains = doc["domains"].get<std::vector<std::string>>();
  cfg.write_wavs = doc.value("write_wavs", cfg.write_wavs);
  if (doc.contains("profiles")) {
    if (!doc["profiles"].is_array()) throw ConfigError("profiles must be an array");
    cfg.profiles.clear();
    std::size_t idx = 0;
    for (const json& row : doc["profiles"]) {
      require_keys(row,
                   {"id", "char_error_rate", "substitution_only", "replacement_alphabet",
                    "confidence_a", "confidence_b"},
                   "profiles." + std::to_string(idx) + ".");
      TranscriberProfile p;
      p.id = row.value("id", "");
      p.char_error_rate = row.value("char_error_rate", 0.0);
      p.substitution_only = row.value("substitution_only", false);
      p.replacement_alphabet = row.value("replacement_alphabet", "");
      p.confidence_a = row.value("confidence_a", 4.0);
      p.confidence_b = row.value("confidence_b", 0.02);
      cfg.profiles.push_back(std::move(p));
      ++idx;
    }
  }
  validate_synth_config(cfg);
  return cfg;
}

void generate(const SynthConfig& cfg, const std::string& out_dir) {
  validate_synth_config(cfg);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  if (cfg.write_wavs) fs::create_directories(dir / "audio");

  const Alphabet alpha = decode_alphabet(cfg.alphabet, "alphabet");
  Rng rng(cfg.seed);

  std::vector<AudioSegment> segments;
  segments.reserve(cfg.n_segments);
  for (std::size_t i = 0; i < cfg.n_segments; ++i) {
    const std::uint64_t n_words =
        rng.range(static_cast<std::uint64_t>(cfg.words_min),
                  static_cast<std::uint64_t>(cfg.words_max));
    std::u32string text;
    for (std::uint64_t w = 0; w < n_words; ++w) {
      if (w != 0) text.push_back(U' ');
      const std::uint64_t len = rng.range(static_cast<std::uint64_t>(cfg.word_len_min),
                                          static_cast<std::uint64_t>(cfg.word_len_max));
      for (std::uint64_t c = 0; c < len; ++c) {
        text.push_back(alpha.chars[rng.below(alpha.chars.size())]);
      }
    }
    AudioSegment seg;
    seg.id = segment_name(i);
    seg.audio_path = "audio/" + seg.id + ".wav";
    seg.offset_s = 0.0;
    seg.duration_s = static_cast<double>(n_words) * cfg.seconds_per_word;
    if (!cfg.domains.empty()) seg.domain = cfg.domains[i % cfg.domains.size()];
    seg.reference_text = utf8::encode(text);
    segments.push_back(std::move(seg));
  }

  {
    std::ofstream out(dir / "reference.jsonl", std::ios::trunc);
    if (!out) throw DependencyError("cannot write " + (dir / "reference.jsonl").string());
    for (const AudioSegment& seg : segments) {
      out << segment_to_json(seg).dump() << '\n';
    }
  }

  const NormalizationConfig norm;
  std::vector<std::vector<std::string>> texts_by_profile(cfg.profiles.size());
  for (std::size_t pi = 0; pi < cfg.profiles.size(); ++pi) {
    const TranscriberProfile& profile = cfg.profiles[pi];
    const Alphabet repl = profile.replacement_alphabet.empty()
                              ? alpha
                              : decode_alphabet(profile.replacement_alphabet,
                                                "replacement_alphabet");
    const fs::path path = dir / (profile.id + ".replay.jsonl");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DependencyError("cannot write " + path.string());
    for (const AudioSegment& seg : segments) {
      const std::string text = perturb(rng, *seg.reference_text, profile, repl);
      const double realized = cer(normalize(*seg.reference_text, norm), normalize(text, norm));
      const double noise = (rng.real() * 2.0 - 1.0) * profile.confidence_b;
      const double confidence =
          std::clamp(1.0 - profile.confidence_a * realized + noise, 0.0, 1.0);
      json row;
      row["id"] = seg.id;
      row["text"] = text;
      row["confidence"] = confidence;
      out << row.dump() << '\n';
      texts_by_profile[pi].push_back(text);
    }
  }

  {
    EmbeddingProviderSpec mock;
    mock.id = "bag";
    mock.kind = EmbeddingProviderSpec::Kind::mock_bag_of_chars;
    mock.alphabet = cfg.alphabet;
    const std::shared_ptr<EmbeddingProvider> provider = make_embedding_provider(mock);

    const fs::path path = dir / "embeddings.replay.jsonl";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DependencyError("cannot write " + path.string());
    std::unordered_set<std::string> seen;
    auto emit = [&](const std::string& key, const std::vector<double>& vec) {
      if (!seen.insert(key).second) return;
      json row;
      row["id"] = key;
      row["vector"] = vec;
      out << row.dump() << '\n';
    };
    auto emit_text = [&](const std::string& text) {
      emit(text_embedding_key(text), provider->embed_text(text));
      const std::string normed = normalize(text, norm);
      emit(text_embedding_key(normed), provider->embed_text(normed));
    };
    for (std::size_t i = 0; i < segments.size(); ++i) {
      emit_text(*segments[i].reference_text);
      for (const auto& texts : texts_by_profile) {
        emit_text(texts[i]);
      }
      emit(segments[i].id, provider->embed_audio(segments[i]));
    }
  }

  {
    std::ofstream out(dir / "corpus.json", std::ios::trunc);
    if (!out) throw DependencyError("cannot write " + (dir / "corpus.json").string());
    out << synth_config_to_json(cfg).dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "pipeline.json", std::ios::trunc);
    if (!out) throw DependencyError("cannot write " + (dir / "pipeline.json").string());
    out << pipeline_config_to_json(replay_pipeline_config(cfg)).dump(2) << '\n';
  }

  if (cfg.write_wavs) {
    for (const AudioSegment& seg : segments) {
      WavData wav;
      wav.sample_rate = 16000;
      wav.samples.assign(
          static_cast<std::size_t>(seg.duration_s * static_cast<double>(wav.sample_rate)),
          0.0f);
      write_wav((dir / seg.audio_path).string(), wav);
    }
  }
}

double measure_realized_cer(const std::string& corpus_dir,
                            const std::string& transcriber_id) {
  const Corpus corpus = load_corpus(corpus_dir);
  auto it = corpus.outputs.find(transcriber_id);
  if (it == corpus.outputs.end()) {
    throw ConfigError("unknown transcriber id: '" + transcriber_id + "'");
  }
  const NormalizationConfig norm;
  std::size_t edits = 0;
  std::size_t ref_len = 0;
  for (const AudioSegment& seg : corpus.references) {
    auto entry = it->second.find(seg.id);
    if (entry == it->second.end()) {
      throw ConfigError("replay manifest for '" + transcriber_id + "' is missing id '" +
                        seg.id + "'");
    }
    const EditCounts ec = char_edit_counts(normalize(*seg.reference_text, norm),
                                           normalize(entry->second.text, norm));
    edits += ec.edits;
    ref_len += ec.ref_len;
  }
  if (ref_len == 0) throw ConfigError("empty reference corpus");
  return static_cast<double>(edits) / static_cast<double>(ref_len);
}

std::vector<SweepRow> sweep(const SweepGrid& grid, const std::string& corpus_dir) {
  const Corpus corpus = load_corpus(corpus_dir);
  const NormalizationConfig norm;

  EmbeddingProviderSpec mock;
  mock.id = "bag";
  mock.kind = EmbeddingProviderSpec::Kind::mock_bag_of_chars;
  mock.alphabet = corpus.cfg.alphabet;
  const std::shared_ptr<EmbeddingProvider> provider = make_embedding_provider(mock);

  // Candidates in profile order, mirroring the pipeline's configured
  // transcriber order.
  std::vector<CandidateSet> cands;
  cands.reserve(corpus.references.size());
  for (const AudioSegment& seg : corpus.references) {
    CandidateSet set;
    set.segment_id = seg.id;
    for (const TranscriberProfile& p : corpus.cfg.profiles) {
      const auto& table = corpus.outputs.at(p.id);
      auto it = table.find(seg.id);
      if (it == table.end()) {
        throw ConfigError("replay manifest for '" + p.id + "' is missing id '" + seg.id + "'");
      }
      TranscriptCandidate cand;
      cand.segment_id = seg.id;
      cand.transcriber_id = p.id;
      cand.text = it->second.text;
      cand.confidence = it->second.confidence;
      set.candidates.push_back(std::move(cand));
    }
    cands.push_back(std::move(set));
  }

  struct Scored {
    bool selected = false;
    double similarity = 0.0;
    double confidence = 0.0;
    bool exact = false;
    std::size_t char_edits = 0;
    std::size_t ref_len = 0;
    std::string id;
  };

  std::vector<SweepRow> rows;
  for (double tau : grid.taus) {
    for (int delta : grid.deltas) {
      AgreementConfig acfg;
      acfg.tau = tau;
      acfg.delta = delta;
      std::vector<Scored> scored(cands.size());
      for (std::size_t i = 0; i < cands.size(); ++i) {
        const AudioSegment& seg = corpus.references[i];
        Scored& s = scored[i];
        s.id = seg.id;
        const AgreementResult ag = select_pseudo_label(cands[i], acfg, norm);
        if (!ag.selected) continue;
        const TranscriptCandidate& sel = cands[i].candidates[*ag.selected];
        s.selected = true;
        s.similarity =
            cosine_similarity(provider->embed_text(sel.text), provider->embed_audio(seg));
        s.confidence = sel.confidence.value_or(0.0);
        const std::string ref_norm = normalize(*seg.reference_text, norm);
        const std::string sel_norm = normalize(sel.text, norm);
        s.exact = ref_norm == sel_norm;
        const EditCounts ec = char_edit_counts(ref_norm, sel_norm);
        s.char_edits = ec.edits;
        s.ref_len = ec.ref_len;
      }
      for (double rho : grid.rhos) {
        for (int lambda : grid.lambdas) {
          SweepRow row;
          row.tau = tau;
          row.delta = delta;
          row.rho = rho;
          row.lambda = lambda;
          std::size_t exact = 0;
          std::size_t edits = 0;
          std::size_t ref_len = 0;
          for (const Scored& s : scored) {
            if (!s.selected) continue;
            const int passes = (s.similarity >= rho ? 1 : 0) + (s.confidence >= rho ? 1 : 0);
            if (passes < lambda) continue;
            ++row.accepted;
            row.accepted_ids.push_back(s.id);
            if (s.exact) ++exact;
            edits += s.char_edits;
            ref_len += s.ref_len;
          }
          row.accepted_fraction =
              static_cast<double>(row.accepted) / static_cast<double>(cands.size());
          row.precision = row.accepted == 0
                              ? 1.0
                              : static_cast<double>(exact) / static_cast<double>(row.accepted);
          row.pseudo_cer =
              ref_len == 0 ? 0.0 : static_cast<double>(edits) / static_cast<double>(ref_len);
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "tau,delta,rho,lambda,accepted,accepted_fraction,precision,pseudo_cer\n";
  char buf[256];
  for (const SweepRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%d,%.17g,%d,%zu,%.17g,%.17g,%.17g\n", row.tau,
                  row.delta, row.rho, row.lambda, row.accepted, row.accepted_fraction,
                  row.precision, row.pseudo_cer);
    out << buf;
  }
  return out.str();
}

}  // namespace pramana
