#include "pramana/transcribers.hpp"

#include <fstream>
#include <mutex>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"
#include "pramana/errors.hpp"
#include "pramana/subprocess.hpp"

namespace pramana {

using nlohmann::json;

namespace {

struct ReplyFields {
  std::string text;
  std::optional<std::vector<std::vector<double>>> token_dists;
  std::optional<double> confidence;
};

// Shared reply-object validation for replay tables, subprocess lines, and
// HTTP result entries. Throws ConfigError with a plain message; callers
// wrap it with their own context.
ReplyFields parse_reply_fields(const json& row) {
  ReplyFields out;
  auto it = row.find("text");
  if (it == row.end() || !it->is_string()) {
    throw ConfigError("reply missing string field 'text'");
  }
  out.text = it->get<std::string>();
  if (auto td = row.find("token_dists"); td != row.end() && !td->is_null()) {
    if (!td->is_array()) throw ConfigError("'token_dists' must be an array of arrays");
    std::vector<std::vector<double>> dists;
    for (const json& d : *td) {
      if (!d.is_array()) throw ConfigError("'token_dists' must be an array of arrays");
      dists.push_back(d.get<std::vector<double>>());
    }
    out.token_dists = std::move(dists);
  }
  if (auto c = row.find("confidence"); c != row.end() && !c->is_null()) {
    if (!c->is_number()) throw ConfigError("'confidence' must be a number");
    const double v = c->get<double>();
    if (v < 0.0 || v > 1.0) throw ConfigError("'confidence' out of [0,1]");
    out.confidence = v;
  }
  return out;
}

TranscriptCandidate to_candidate(const std::string& segment_id, const std::string& transcriber_id,
                                 ReplyFields&& f) {
  TranscriptCandidate c;
  c.segment_id = segment_id;
  c.transcriber_id = transcriber_id;
  c.text = std::move(f.text);
  c.token_dists = std::move(f.token_dists);
  c.confidence = f.confidence;
  return c;
}

json request_json(const AudioSegment& seg) {
  json req;
  req["id"] = seg.id;
  req["audio_path"] = seg.audio_path;
  req["offset_s"] = seg.offset_s;
  req["duration_s"] = seg.duration_s;
  return req;
}

// Matches a stream of reply objects against the pending id set. Returns
// false once every pending id is resolved.
class BatchCollector {
 public:
  BatchCollector(const std::vector<AudioSegment>& segments, const std::string& transcriber_id,
                 std::vector<TranscribeOutcome>& outcomes)
      : transcriber_id_(transcriber_id), outcomes_(outcomes) {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      outcomes_[i].segment_id = segments[i].id;
      pending_.emplace(segments[i].id, i);
    }
  }

  bool done() const { return pending_.empty(); }

  void accept(const json& row) {
    auto idit = row.find("id");
    if (idit == row.end() || !idit->is_string()) {
      throw TranscriberError("protocol violation: reply missing string field 'id': " +
                             row.dump());
    }
    const std::string id = idit->get<std::string>();
    auto pit = pending_.find(id);
    if (pit == pending_.end()) {
      throw TranscriberError("protocol violation: reply for unknown id '" + id + "'");
    }
    ReplyFields fields;
    try {
      fields = parse_reply_fields(row);
    } catch (const ConfigError& e) {
      throw TranscriberError("protocol violation: " + std::string(e.what()) + ": " + row.dump());
    }
    outcomes_[pit->second].candidate = to_candidate(id, transcriber_id_, std::move(fields));
    pending_.erase(pit);
  }

  void fail_pending(const std::string& error) {
    for (const auto& [id, idx] : pending_) {
      outcomes_[idx].error = error + ": id '" + id + "'";
    }
    pending_.clear();
  }

 private:
  std::string transcriber_id_;
  std::vector<TranscribeOutcome>& outcomes_;
  std::unordered_map<std::string, std::size_t> pending_;
};

class ReplayTranscriber : public Transcriber {
 public:
  explicit ReplayTranscriber(TranscriberSpec spec) : spec_(std::move(spec)) {}

  const TranscriberSpec& spec() const override { return spec_; }

  std::vector<TranscribeOutcome> transcribe_batch(
      const std::vector<AudioSegment>& segments) override {
    std::lock_guard<std::mutex> lock(mu_);
    ensure_loaded();
    std::vector<TranscribeOutcome> outcomes(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i) {
      outcomes[i].segment_id = segments[i].id;
      auto it = table_.find(segments[i].id);
      if (it == table_.end()) {
        outcomes[i].error = "incomplete batch: no replay entry for id '" + segments[i].id + "'";
        continue;
      }
      ReplyFields copy = it->second;
      outcomes[i].candidate = to_candidate(segments[i].id, spec_.id, std::move(copy));
    }
    return outcomes;
  }

  void healthcheck() override {
    std::lock_guard<std::mutex> lock(mu_);
    ensure_loaded();
  }

 private:
  void ensure_loaded() {
    if (loaded_) return;
    std::ifstream in(spec_.path);
    if (!in) {
      throw DependencyError("replay file unreadable: " + spec_.path);
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const json row = json::parse(line);
        const std::string id = row.at("id").get<std::string>();
        table_[id] = parse_reply_fields(row);
      } catch (const std::exception& e) {
        throw ConfigError(spec_.path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    loaded_ = true;
  }

  TranscriberSpec spec_;
  std::mutex mu_;
  bool loaded_ = false;
  std::unordered_map<std::string, ReplyFields> table_;
};

class SubprocessTranscriber : public Transcriber {
 public:
  explicit SubprocessTranscriber(TranscriberSpec spec) : spec_(std::move(spec)) {}

  const TranscriberSpec& spec() const override { return spec_; }

  std::vector<TranscribeOutcome> transcribe_batch(
      const std::vector<AudioSegment>& segments) override {
    std::lock_guard<std::mutex> lock(mu_);
    ensure_child();
    std::vector<TranscribeOutcome> outcomes(segments.size());
    BatchCollector collector(segments, spec_.id, outcomes);
    try {
      for (const AudioSegment& seg : segments) {
        child_->write_line(request_json(seg).dump());
      }
    } catch (const DependencyError& e) {
      reset_child();
      throw TranscriberError("protocol violation: " + std::string(e.what()));
    }
    while (!collector.done()) {
      std::string line;
      LineProcess::ReadStatus status;
      try {
        status = child_->read_line(line, spec_.timeout_s);
      } catch (const DependencyError& e) {
        reset_child();
        throw TranscriberError("protocol violation: " + std::string(e.what()));
      }
      if (status == LineProcess::ReadStatus::timeout) {
        collector.fail_pending("transcriber timeout");
        reset_child();
        break;
      }
      if (status == LineProcess::ReadStatus::eof) {
        collector.fail_pending("incomplete batch: stream ended before reply");
        reset_child();
        break;
      }
      json row;
      try {
        row = json::parse(line);
      } catch (const json::exception&) {
        reset_child();
        throw TranscriberError("protocol violation: unparseable reply line: " + line);
      }
      try {
        collector.accept(row);
      } catch (const TranscriberError&) {
        reset_child();
        throw;
      }
    }
    return outcomes;
  }

  void healthcheck() override {
    std::lock_guard<std::mutex> lock(mu_);
    ensure_child();
  }

 private:
  void ensure_child() {
    if (child_) return;
    child_ = std::make_unique<LineProcess>(spec_.command);
    json hello;
    hello["op"] = "hello";
    hello["version"] = 1;
    try {
      child_->write_line(hello.dump());
    } catch (const DependencyError& e) {
      reset_child();
      throw DependencyError("transcriber '" + spec_.id + "' unspawnable: " + e.what());
    }
    std::string line;
    const auto status = child_->read_line(line, spec_.timeout_s);
    if (status == LineProcess::ReadStatus::eof) {
      reset_child();
      throw DependencyError("transcriber '" + spec_.id +
                            "' exited before handshake (command: " + spec_.command + ")");
    }
    if (status == LineProcess::ReadStatus::timeout) {
      reset_child();
      throw DependencyError("transcriber '" + spec_.id + "' handshake timeout");
    }
    json reply;
    try {
      reply = json::parse(line);
    } catch (const json::exception&) {
      reset_child();
      throw TranscriberError("protocol violation: bad handshake reply: " + line);
    }
    if (reply.value("op", "") != "hello" || reply.value("version", 0) != 1) {
      reset_child();
      throw TranscriberError("protocol violation: bad handshake reply: " + line);
    }
  }

  void reset_child() {
    if (child_) {
      child_->kill_now();
      child_.reset();
    }
  }

  TranscriberSpec spec_;
  std::mutex mu_;
  std::unique_ptr<LineProcess> child_;
};

class HttpTranscriber : public Transcriber {
 public:
  explicit HttpTranscriber(TranscriberSpec spec) : spec_(std::move(spec)) {}

  const TranscriberSpec& spec() const override { return spec_; }

  std::vector<TranscribeOutcome> transcribe_batch(
      const std::vector<AudioSegment>& segments) override {
    std::lock_guard<std::mutex> lock(mu_);
    json body;
    body["segments"] = json::array();
    for (const AudioSegment& seg : segments) {
      body["segments"].push_back(request_json(seg));
    }
    httplib::Client client(spec_.endpoint);
    configure(client);
    auto res = client.Post("/transcribe", body.dump(), "application/json");
    std::vector<TranscribeOutcome> outcomes(segments.size());
    BatchCollector collector(segments, spec_.id, outcomes);
    if (!res) {
      if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Write) {
        collector.fail_pending("transcriber timeout");
        return outcomes;
      }
      throw TranscriberError("connection refused: " + spec_.endpoint + " (" +
                             httplib::to_string(res.error()) + ")");
    }
    if (res->status != 200) {
      throw TranscriberError("protocol violation: HTTP status " + std::to_string(res->status) +
                             " from " + spec_.endpoint);
    }
    json parsed;
    try {
      parsed = json::parse(res->body);
    } catch (const json::exception&) {
      throw TranscriberError("protocol violation: unparseable response body");
    }
    auto results = parsed.find("results");
    if (results == parsed.end() || !results->is_array()) {
      throw TranscriberError("protocol violation: response missing 'results' array");
    }
    for (const json& row : *results) {
      collector.accept(row);
    }
    collector.fail_pending("incomplete batch: no reply in response");
    return outcomes;
  }

  void healthcheck() override {
    std::lock_guard<std::mutex> lock(mu_);
    httplib::Client client(spec_.endpoint);
    configure(client);
    auto res = client.Get("/");
    // Any HTTP status proves the endpoint is alive; only transport-level
    // failure counts as unhealthy.
    if (!res) {
      throw DependencyError("connection refused: " + spec_.endpoint + " (" +
                            httplib::to_string(res.error()) + ")");
    }
  }

 private:
  void configure(httplib::Client& client) const {
    const auto whole = static_cast<time_t>(spec_.timeout_s);
    const auto usec =
        static_cast<time_t>((spec_.timeout_s - static_cast<double>(whole)) * 1e6);
    client.set_connection_timeout(whole, usec);
    client.set_read_timeout(whole, usec);
    client.set_write_timeout(whole, usec);
  }

  TranscriberSpec spec_;
  std::mutex mu_;
};

}  // namespace

std::shared_ptr<Transcriber> make_transcriber(const TranscriberSpec& spec) {
  if (spec.id.empty()) throw ConfigError("transcriber id must be nonempty");
  if (spec.batch_size < 1) throw ConfigError("transcriber batch_size must be >= 1");
  switch (spec.kind) {
    case TranscriberSpec::Kind::replay:
      if (spec.path.empty()) throw ConfigError("replay transcriber needs 'path'");
      return std::make_shared<ReplayTranscriber>(spec);
    case TranscriberSpec::Kind::subprocess:
      if (spec.command.empty()) throw ConfigError("subprocess transcriber needs 'command'");
      return std::make_shared<SubprocessTranscriber>(spec);
    case TranscriberSpec::Kind::http:
      if (spec.endpoint.empty()) throw ConfigError("http transcriber needs 'endpoint'");
      return std::make_shared<HttpTranscriber>(spec);
  }
  throw ConfigError("unknown transcriber kind");
}

}  // namespace pramana
