#include "pramana/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <mutex>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"
#include "pramana/errors.hpp"
#include "pramana/hash.hpp"
#include "pramana/subprocess.hpp"
#include "pramana/utf8.hpp"

namespace pramana {

using nlohmann::json;

std::string text_embedding_key(std::string_view text) {
  return "text:" + to_hex(fnv1a64(text));
}

namespace {

class MockBagOfChars : public EmbeddingProvider {
 public:
  explicit MockBagOfChars(EmbeddingProviderSpec spec) : spec_(std::move(spec)) {
    const std::u32string cps = utf8::decode(spec_.alphabet);
    if (cps.empty()) {
      throw ConfigError("mock_bag_of_chars provider needs a nonempty alphabet");
    }
    for (char32_t cp : cps) {
      if (index_.emplace(cp, index_.size()).second == false) {
        throw ConfigError("mock_bag_of_chars alphabet has duplicate characters");
      }
    }
    if (spec_.dimension == 0) {
      spec_.dimension = static_cast<int>(index_.size());
    } else if (spec_.dimension != static_cast<int>(index_.size())) {
      throw ConfigError("mock_bag_of_chars dimension must match alphabet size");
    }
  }

  const EmbeddingProviderSpec& spec() const override { return spec_; }

  std::vector<double> embed_text(const std::string& text) override {
    std::vector<double> v(static_cast<std::size_t>(spec_.dimension), 0.0);
    for (char32_t cp : utf8::decode(text)) {
      auto it = index_.find(cp);
      if (it != index_.end()) v[it->second] += 1.0;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (double& x : v) x /= norm;
    }
    return v;
  }

  std::vector<double> embed_audio(const AudioSegment& segment) override {
    // The mock stands in for an audio encoder in test corpora, which carry
    // ground truth; it embeds the reference text.
    if (!segment.reference_text) {
      throw EvaluatorInputError("embedding unavailable: segment '" + segment.id +
                                "' has no reference text");
    }
    return embed_text(*segment.reference_text);
  }

  void healthcheck() override {}

 private:
  EmbeddingProviderSpec spec_;
  std::unordered_map<char32_t, std::size_t> index_;
};

class ReplayEmbedding : public EmbeddingProvider {
 public:
  explicit ReplayEmbedding(EmbeddingProviderSpec spec) : spec_(std::move(spec)) {}

  const EmbeddingProviderSpec& spec() const override { return spec_; }

  std::vector<double> embed_text(const std::string& text) override {
    return lookup(text_embedding_key(text));
  }

  std::vector<double> embed_audio(const AudioSegment& segment) override {
    return lookup(segment.id);
  }

  void healthcheck() override {
    std::lock_guard<std::mutex> lock(mu_);
    ensure_loaded();
  }

 private:
  std::vector<double> lookup(const std::string& key) {
    std::lock_guard<std::mutex> lock(mu_);
    ensure_loaded();
    auto it = table_.find(key);
    if (it == table_.end()) {
      throw EvaluatorInputError("embedding unavailable: no entry for key '" + key + "'");
    }
    return it->second;
  }

  void ensure_loaded() {
    if (loaded_) return;
    std::ifstream in(spec_.path);
    if (!in) {
      throw DependencyError("embedding table unreadable: " + spec_.path);
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const json row = json::parse(line);
        table_[row.at("id").get<std::string>()] = row.at("vector").get<std::vector<double>>();
      } catch (const std::exception& e) {
        throw ConfigError(spec_.path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    loaded_ = true;
  }

  EmbeddingProviderSpec spec_;
  std::mutex mu_;
  bool loaded_ = false;
  std::unordered_map<std::string, std::vector<double>> table_;
};

class WireEmbeddingBase : public EmbeddingProvider {
 public:
  explicit WireEmbeddingBase(EmbeddingProviderSpec spec) : spec_(std::move(spec)) {}

  const EmbeddingProviderSpec& spec() const override { return spec_; }

  std::vector<double> embed_text(const std::string& text) override {
    json req;
    req["id"] = text_embedding_key(text);
    req["kind"] = "text";
    req["text"] = text;
    return roundtrip(req);
  }

  std::vector<double> embed_audio(const AudioSegment& segment) override {
    json req;
    req["id"] = segment.id;
    req["kind"] = "audio";
    req["audio_path"] = segment.audio_path;
    req["offset_s"] = segment.offset_s;
    req["duration_s"] = segment.duration_s;
    return roundtrip(req);
  }

 protected:
  std::vector<double> parse_vector(const json& row, const std::string& want_id) {
    if (row.value("id", "") != want_id) {
      throw DependencyError("embedding protocol violation: reply id mismatch: " + row.dump());
    }
    auto it = row.find("vector");
    if (it == row.end() || !it->is_array()) {
      throw DependencyError("embedding protocol violation: reply missing 'vector'");
    }
    return it->get<std::vector<double>>();
  }

  virtual std::vector<double> roundtrip(const json& req) = 0;

  EmbeddingProviderSpec spec_;
  std::mutex mu_;
};

class SubprocessEmbedding : public WireEmbeddingBase {
 public:
  using WireEmbeddingBase::WireEmbeddingBase;

  void healthcheck() override {
    std::lock_guard<std::mutex> lock(mu_);
    ensure_child();
  }

 private:
  std::vector<double> roundtrip(const json& req) override {
    std::lock_guard<std::mutex> lock(mu_);
    ensure_child();
    const std::string want_id = req.at("id").get<std::string>();
    try {
      child_->write_line(req.dump());
    } catch (const DependencyError& e) {
      reset_child();
      throw DependencyError("embedding provider '" + spec_.id + "': " + e.what());
    }
    std::string line;
    const auto status = child_->read_line(line, spec_.timeout_s);
    if (status != LineProcess::ReadStatus::ok) {
      reset_child();
      throw DependencyError("embedding provider '" + spec_.id +
                            (status == LineProcess::ReadStatus::timeout ? "' timed out"
                                                                        : "' closed its stream"));
    }
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception&) {
      reset_child();
      throw DependencyError("embedding protocol violation: unparseable reply line: " + line);
    }
    return parse_vector(row, want_id);
  }

  void ensure_child() {
    if (child_) return;
    child_ = std::make_unique<LineProcess>(spec_.command);
    json hello;
    hello["op"] = "hello";
    hello["version"] = 1;
    child_->write_line(hello.dump());
    std::string line;
    const auto status = child_->read_line(line, spec_.timeout_s);
    if (status != LineProcess::ReadStatus::ok) {
      reset_child();
      throw DependencyError("embedding provider '" + spec_.id + "' failed handshake");
    }
    json reply;
    try {
      reply = json::parse(line);
    } catch (const json::exception&) {
      reset_child();
      throw DependencyError("embedding protocol violation: bad handshake reply: " + line);
    }
    if (reply.value("op", "") != "hello" || reply.value("version", 0) != 1) {
      reset_child();
      throw DependencyError("embedding protocol violation: bad handshake reply: " + line);
    }
  }

  void reset_child() {
    if (child_) {
      child_->kill_now();
      child_.reset();
    }
  }

  std::unique_ptr<LineProcess> child_;
};

class HttpEmbedding : public WireEmbeddingBase {
 public:
  using WireEmbeddingBase::WireEmbeddingBase;

  void healthcheck() override {
    std::lock_guard<std::mutex> lock(mu_);
    httplib::Client client(spec_.endpoint);
    configure(client);
    auto res = client.Get("/");
    if (!res) {
      throw DependencyError("connection refused: " + spec_.endpoint + " (" +
                            httplib::to_string(res.error()) + ")");
    }
  }

 private:
  std::vector<double> roundtrip(const json& req) override {
    std::lock_guard<std::mutex> lock(mu_);
    const std::string want_id = req.at("id").get<std::string>();
    json body;
    body["requests"] = json::array({req});
    httplib::Client client(spec_.endpoint);
    configure(client);
    auto res = client.Post("/embed", body.dump(), "application/json");
    if (!res) {
      throw DependencyError("connection refused: " + spec_.endpoint + " (" +
                            httplib::to_string(res.error()) + ")");
    }
    if (res->status != 200) {
      throw DependencyError("embedding protocol violation: HTTP status " +
                            std::to_string(res->status) + " from " + spec_.endpoint);
    }
    json parsed;
    try {
      parsed = json::parse(res->body);
    } catch (const json::exception&) {
      throw DependencyError("embedding protocol violation: unparseable response body");
    }
    auto results = parsed.find("results");
    if (results == parsed.end() || !results->is_array() || results->empty()) {
      throw DependencyError("embedding protocol violation: response missing 'results'");
    }
    return parse_vector(results->front(), want_id);
  }

  void configure(httplib::Client& client) const {
    const auto whole = static_cast<time_t>(spec_.timeout_s);
    const auto usec =
        static_cast<time_t>((spec_.timeout_s - static_cast<double>(whole)) * 1e6);
    client.set_connection_timeout(whole, usec);
    client.set_read_timeout(whole, usec);
    client.set_write_timeout(whole, usec);
  }
};

// Front for every provider: per-key result cache plus dimension checks.
class CachingProvider : public EmbeddingProvider {
 public:
  explicit CachingProvider(std::shared_ptr<EmbeddingProvider> inner)
      : inner_(std::move(inner)) {}

  const EmbeddingProviderSpec& spec() const override { return inner_->spec(); }

  std::vector<double> embed_text(const std::string& text) override {
    return cached(text_embedding_key(text), [&] { return inner_->embed_text(text); });
  }

  std::vector<double> embed_audio(const AudioSegment& segment) override {
    return cached("audio:" + segment.id, [&] { return inner_->embed_audio(segment); });
  }

  void healthcheck() override { inner_->healthcheck(); }

 private:
  template <typename Fn>
  std::vector<double> cached(const std::string& key, Fn compute) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    std::vector<double> v = compute();
    const int dim = inner_->spec().dimension;
    if (dim > 0 && static_cast<int>(v.size()) != dim) {
      throw DependencyError("embedding dimension mismatch: provider '" + inner_->spec().id +
                            "' returned " + std::to_string(v.size()) + ", expected " +
                            std::to_string(dim));
    }
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.emplace(key, std::move(v)).first->second;
  }

  std::shared_ptr<EmbeddingProvider> inner_;
  std::mutex mu_;
  std::unordered_map<std::string, std::vector<double>> cache_;
};

}  // namespace

std::shared_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderSpec& spec) {
  if (spec.id.empty()) throw ConfigError("embedding provider id must be nonempty");
  std::shared_ptr<EmbeddingProvider> inner;
  switch (spec.kind) {
    case EmbeddingProviderSpec::Kind::mock_bag_of_chars:
      inner = std::make_shared<MockBagOfChars>(spec);
      break;
    case EmbeddingProviderSpec::Kind::replay:
      if (spec.path.empty()) throw ConfigError("replay embedding provider needs 'path'");
      inner = std::make_shared<ReplayEmbedding>(spec);
      break;
    case EmbeddingProviderSpec::Kind::subprocess:
      if (spec.command.empty()) throw ConfigError("subprocess embedding provider needs 'command'");
      inner = std::make_shared<SubprocessEmbedding>(spec);
      break;
    case EmbeddingProviderSpec::Kind::http:
      if (spec.endpoint.empty()) throw ConfigError("http embedding provider needs 'endpoint'");
      inner = std::make_shared<HttpEmbedding>(spec);
      break;
  }
  if (!inner) throw ConfigError("unknown embedding provider kind");
  return std::make_shared<CachingProvider>(std::move(inner));
}

}  // namespace pramana
