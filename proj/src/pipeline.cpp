#include "pramana/pipeline.hpp"

#include <atomic>
#include <condition_variable>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "pramana/errors.hpp"
#include "pramana/hash.hpp"

namespace pramana {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Yield accounting

void accumulate(YieldReport& report, const LabelRecord& rec) {
  const double hours = rec.segment.duration_s / 3600.0;
  const std::string domain = rec.segment.domain.value_or("");
  DomainYield& dom = report.per_domain[domain];

  ++report.segments_input;
  ++dom.segments_input;
  report.hours_input += hours;
  dom.hours_input += hours;

  if (rec.selected) {
    report.hours_after_agreement += hours;
    dom.hours_after_agreement += hours;
  }
  if (rec.accepted_text) {
    report.hours_after_filter += hours;
    dom.hours_after_filter += hours;
    ++report.segments_accepted;
    ++dom.segments_accepted;
  } else if (rec.stage_rejected) {
    ++report.rejected[std::string(to_string(*rec.stage_rejected))];
  }
}

YieldReport recompute_yield(const std::vector<LabelRecord>& records) {
  YieldReport report;
  for (const LabelRecord& rec : records) {
    accumulate(report, rec);
  }
  return report;
}

json yield_report_to_json(const YieldReport& report) {
  json doc;
  doc["hours_input"] = report.hours_input;
  doc["hours_after_agreement"] = report.hours_after_agreement;
  doc["hours_after_filter"] = report.hours_after_filter;
  doc["segments_input"] = report.segments_input;
  doc["segments_accepted"] = report.segments_accepted;
  json rejected;
  for (const char* reason :
       {"transcription_error", "no_agreement", "filtered", "missing_evaluator_input"}) {
    auto it = report.rejected.find(reason);
    rejected[reason] = it == report.rejected.end() ? 0 : it->second;
  }
  doc["rejected"] = std::move(rejected);
  json domains = json::object();
  for (const auto& [name, dom] : report.per_domain) {
    json d;
    d["hours_input"] = dom.hours_input;
    d["hours_after_agreement"] = dom.hours_after_agreement;
    d["hours_after_filter"] = dom.hours_after_filter;
    d["segments_input"] = dom.segments_input;
    d["segments_accepted"] = dom.segments_accepted;
    domains[name] = std::move(d);
  }
  doc["per_domain"] = std::move(domains);
  return doc;
}

// ---------------------------------------------------------------------------
// Labeler

Labeler::Labeler(const PipelineConfig& cfg) : cfg_(cfg) {
  for (const EvaluatorSpec& spec : cfg_.filter.evaluators) {
    EvalCtx ctx;
    ctx.spec = spec;
    if (spec.kind == EvaluatorSpec::Kind::embedding_similarity) {
      ctx.provider = make_embedding_provider(spec.provider);
    } else if (spec.kind == EvaluatorSpec::Kind::external) {
      std::ifstream in(spec.path);
      if (!in) {
        throw DependencyError("external evaluator '" + spec.id +
                              "': cannot open score table " + spec.path);
      }
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
          const json row = json::parse(line);
          ctx.external_scores[row.at("id").get<std::string>()] =
              row.at("score").get<double>();
        } catch (const std::exception& e) {
          throw ConfigError(spec.path + ":" + std::to_string(lineno) + ": " + e.what());
        }
      }
    }
    evals_.push_back(std::move(ctx));
  }
}

double Labeler::score_one(const EvalCtx& ctx, const AudioSegment& seg,
                          const TranscriptCandidate& selected) const {
  switch (ctx.spec.kind) {
    case EvaluatorSpec::Kind::confidence: {
      if (selected.token_dists && !selected.token_dists->empty()) {
        return renyi_confidence(*selected.token_dists, ctx.spec.alpha, ctx.spec.aggregation);
      }
      if (selected.confidence) {
        return *selected.confidence;
      }
      throw EvaluatorInputError("missing evaluator input: transcriber '" +
                                selected.transcriber_id +
                                "' provided neither token_dists nor confidence");
    }
    case EvaluatorSpec::Kind::embedding_similarity: {
      const std::string text = ctx.spec.use_normalized_text
                                   ? normalize(selected.text, cfg_.normalization)
                                   : selected.text;
      const std::vector<double> text_vec = ctx.provider->embed_text(text);
      const std::vector<double> audio_vec = ctx.provider->embed_audio(seg);
      return cosine_similarity(text_vec, audio_vec);
    }
    case EvaluatorSpec::Kind::external: {
      auto it = ctx.external_scores.find(seg.id);
      if (it == ctx.external_scores.end()) {
        throw EvaluatorInputError("missing evaluator input: no external score for id '" +
                                  seg.id + "'");
      }
      return it->second;
    }
  }
  throw ConfigError("unknown evaluator kind");
}

LabelRecord Labeler::label(const AudioSegment& seg,
                           const std::vector<TranscribeOutcome>& per_transcriber) const {
  LabelRecord rec;
  rec.segment = seg;
  bool failed = false;
  for (const TranscribeOutcome& out : per_transcriber) {
    if (out.candidate) rec.candidates.push_back(*out.candidate);
    if (!out.error.empty() || !out.candidate) failed = true;
  }
  if (failed) {
    rec.stage_rejected = StageRejected::transcription_error;
    return rec;
  }

  const AgreementResult ag =
      select_pseudo_label(CandidateSet{seg.id, rec.candidates}, cfg_.agreement,
                          cfg_.normalization);
  rec.agreement_scores = ag.scores;
  rec.selected = ag.selected;
  if (!ag.selected) {
    rec.stage_rejected = StageRejected::no_agreement;
    return rec;
  }
  const TranscriptCandidate& selected = rec.candidates[*ag.selected];

  std::map<std::string, double> scores;
  for (const EvalCtx& ctx : evals_) {
    try {
      scores[ctx.spec.id] = score_one(ctx, seg, selected);
    } catch (const EvaluatorInputError&) {
      rec.evaluator_scores = std::move(scores);
      rec.stage_rejected = StageRejected::missing_evaluator_input;
      return rec;
    }
  }
  rec.evaluator_scores = scores;

  const FilterResult fr = filter_decision(scores, cfg_.filter);
  if (fr.accepted) {
    rec.accepted_text = selected.text;
  } else {
    rec.stage_rejected = StageRejected::filtered;
  }
  return rec;
}

void Labeler::healthcheck() const {
  for (const EvalCtx& ctx : evals_) {
    if (ctx.provider) ctx.provider->healthcheck();
  }
}

// ---------------------------------------------------------------------------
// run_pipeline

namespace {

struct ResumeState {
  std::unordered_set<std::string> done;
  std::vector<std::string> kept_lines;        // raw output rows, original order
  std::vector<LabelRecord> kept_records;      // parsed version of kept_lines
};

// Loads checkpoint + existing output and reconciles them: only records
// whose ids were checkpointed survive (an output row without a checkpoint
// entry may be a torn write from a crash, so it is recomputed).
ResumeState load_resume_state(const std::string& checkpoint_path,
                              const std::string& output_path,
                              const std::string& expected_hash) {
  ResumeState state;
  std::unordered_set<std::string> checkpointed;
  {
    std::ifstream ck(checkpoint_path);
    if (!ck) return state;  // nothing to resume from
    std::string line;
    bool saw_header = false;
    std::size_t lineno = 0;
    while (std::getline(ck, line)) {
      ++lineno;
      if (line.empty()) continue;
      json row;
      try {
        row = json::parse(line);
      } catch (const json::exception& e) {
        throw ConfigError(checkpoint_path + ":" + std::to_string(lineno) + ": " + e.what());
      }
      if (!saw_header) {
        if (row.value("config_hash", "") != expected_hash) {
          throw ConfigError("incompatible checkpoint: " + checkpoint_path +
                            " was written with a different configuration");
        }
        saw_header = true;
        continue;
      }
      if (row.contains("id")) checkpointed.insert(row["id"].get<std::string>());
    }
  }

  std::ifstream out(output_path);
  if (!out) return state;  // checkpoint without output: everything is recomputed
  std::string line;
  while (std::getline(out, line)) {
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception&) {
      continue;  // torn final line from a crash
    }
    const std::string id = row.value("id", "");
    if (checkpointed.count(id) && !state.done.count(id)) {
      state.done.insert(id);
      state.kept_lines.push_back(line);
      state.kept_records.push_back(label_record_from_json(row));
    }
  }
  return state;
}

class Writer {
 public:
  Writer(const std::string& output_path, const std::string& checkpoint_path,
         const ResumeState& resume, const std::string& hash_hex)
      : out_(output_path, std::ios::trunc), checkpoint_path_(checkpoint_path) {
    if (!out_) {
      throw DependencyError("cannot open output manifest for writing: " + output_path);
    }
    for (const std::string& line : resume.kept_lines) {
      out_ << line << '\n';
    }
    out_.flush();
    if (!checkpoint_path_.empty()) {
      ck_.open(checkpoint_path_, std::ios::trunc);
      if (!ck_) {
        throw DependencyError("cannot open checkpoint for writing: " + checkpoint_path_);
      }
      json header;
      header["config_hash"] = hash_hex;
      ck_ << header.dump() << '\n';
      for (const std::string& id : resume_ids(resume)) {
        json row;
        row["id"] = id;
        ck_ << row.dump() << '\n';
      }
      ck_.flush();
    }
  }

  void write(const LabelRecord& rec) {
    out_ << label_record_to_json(rec).dump() << '\n';
    out_.flush();
    if (ck_.is_open()) {
      json row;
      row["id"] = rec.segment.id;
      ck_ << row.dump() << '\n';
      ck_.flush();
    }
  }

 private:
  static std::vector<std::string> resume_ids(const ResumeState& resume) {
    std::vector<std::string> ids;
    ids.reserve(resume.kept_records.size());
    for (const LabelRecord& rec : resume.kept_records) ids.push_back(rec.segment.id);
    return ids;
  }

  std::ofstream out_;
  std::string checkpoint_path_;
  std::ofstream ck_;
};

}  // namespace

YieldReport run_pipeline(const PipelineConfig& cfg, const std::string& input_manifest_path,
                         const std::string& output_manifest_path, const RunOptions& opts) {
  if (cfg.transcribers.empty()) {
    throw ConfigError("invalid config:\n  - transcribers must not be empty");
  }
  const int workers = std::max(1, cfg.workers);
  const std::vector<AudioSegment> input = read_segments(input_manifest_path);
  {
    std::unordered_set<std::string> seen;
    for (const AudioSegment& seg : input) {
      if (!seen.insert(seg.id).second) {
        throw ConfigError("duplicate segment id in input manifest: '" + seg.id + "'");
      }
    }
  }

  std::vector<std::shared_ptr<Transcriber>> transcribers;
  transcribers.reserve(cfg.transcribers.size());
  for (const TranscriberSpec& spec : cfg.transcribers) {
    transcribers.push_back(make_transcriber(spec));
  }
  Labeler labeler(cfg);
  for (const auto& t : transcribers) {
    t->healthcheck();
  }
  labeler.healthcheck();

  const std::string hash_hex = to_hex(config_hash(cfg));
  const std::string checkpoint_path = cfg.checkpoint_path.value_or("");
  ResumeState resume;
  if (opts.resume) {
    if (checkpoint_path.empty()) {
      throw ConfigError("resume requires checkpoint_path in the config");
    }
    resume = load_resume_state(checkpoint_path, output_manifest_path, hash_hex);
  }

  YieldReport report;
  for (const LabelRecord& rec : resume.kept_records) {
    accumulate(report, rec);
  }

  std::vector<AudioSegment> worklist;
  worklist.reserve(input.size());
  for (const AudioSegment& seg : input) {
    if (!resume.done.count(seg.id)) worklist.push_back(seg);
  }

  Writer writer(output_manifest_path, checkpoint_path, resume, hash_hex);

  int chunk_size = cfg.transcribers.front().batch_size;
  for (const TranscriberSpec& spec : cfg.transcribers) {
    chunk_size = std::min(chunk_size, spec.batch_size);
  }
  std::vector<std::vector<AudioSegment>> chunks;
  for (std::size_t i = 0; i < worklist.size(); i += static_cast<std::size_t>(chunk_size)) {
    const std::size_t end = std::min(worklist.size(), i + static_cast<std::size_t>(chunk_size));
    chunks.emplace_back(worklist.begin() + static_cast<std::ptrdiff_t>(i),
                        worklist.begin() + static_cast<std::ptrdiff_t>(end));
  }

  std::mutex mu;
  std::condition_variable cv;
  std::map<std::size_t, std::vector<LabelRecord>> ready;
  std::atomic<std::size_t> next_chunk{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  const std::size_t buffer_cap = static_cast<std::size_t>(workers) * 2 + 2;

  auto process_chunk = [&](const std::vector<AudioSegment>& chunk) {
    std::vector<std::vector<TranscribeOutcome>> by_transcriber;
    by_transcriber.reserve(transcribers.size());
    for (const auto& t : transcribers) {
      for (int attempt = 0;; ++attempt) {
        try {
          by_transcriber.push_back(t->transcribe_batch(chunk));
          break;
        } catch (const TranscriberError&) {
          if (attempt >= opts.batch_retries) throw;
        }
      }
    }
    std::vector<LabelRecord> records;
    records.reserve(chunk.size());
    for (std::size_t j = 0; j < chunk.size(); ++j) {
      std::vector<TranscribeOutcome> per(transcribers.size());
      for (std::size_t k = 0; k < transcribers.size(); ++k) {
        per[k] = by_transcriber[k][j];
      }
      records.push_back(labeler.label(chunk[j], per));
    }
    return records;
  };

  auto worker = [&] {
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(mu);
        cv.wait(lk, [&] { return stop.load() || ready.size() < buffer_cap; });
      }
      if (stop.load()) return;
      const std::size_t i = next_chunk.fetch_add(1);
      if (i >= chunks.size()) return;
      std::vector<LabelRecord> records;
      try {
        records = process_chunk(chunks[i]);
      } catch (...) {
        {
          std::lock_guard<std::mutex> lk(mu);
          if (!failure) failure = std::current_exception();
        }
        stop.store(true);
        cv.notify_all();
        return;
      }
      {
        std::lock_guard<std::mutex> lk(mu);
        ready.emplace(i, std::move(records));
      }
      cv.notify_all();
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back(worker);
  }

  // This thread is the single writer. ordered_output reorders chunks back
  // into input order; otherwise chunks are written as they complete.
  std::size_t written = 0;
  std::size_t chunks_written = 0;
  std::size_t next_expected = 0;
  bool truncated = false;
  while (chunks_written < chunks.size()) {
    std::vector<LabelRecord> batch;
    {
      std::unique_lock<std::mutex> lk(mu);
      cv.wait(lk, [&] {
        if (failure || stop.load()) return true;
        if (cfg.ordered_output) return ready.count(next_expected) > 0;
        return !ready.empty();
      });
      if (failure || stop.load()) break;
      auto it = cfg.ordered_output ? ready.find(next_expected) : ready.begin();
      batch = std::move(it->second);
      ready.erase(it);
      ++next_expected;
    }
    cv.notify_all();
    for (const LabelRecord& rec : batch) {
      writer.write(rec);
      accumulate(report, rec);
      ++written;
      if (opts.progress) opts.progress(written, worklist.size());
      if (opts.stop_after != 0 && written >= opts.stop_after) {
        truncated = true;
        break;
      }
    }
    if (truncated) break;
    ++chunks_written;
  }

  stop.store(true);
  cv.notify_all();
  for (std::thread& t : pool) {
    t.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
  (void)truncated;
  return report;
}

}  // namespace pramana
