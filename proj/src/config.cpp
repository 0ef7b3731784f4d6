#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "pramana/errors.hpp"
#include "pramana/hash.hpp"
#include "pramana/pipeline.hpp"
#include "pramana/utf8.hpp"

// PipelineConfig <-> JSON plus overrides, hashing, and the experiment
// presets. Parsing is strict: every object is checked against its known
// key set so typos in config files or --set paths fail loudly.

namespace pramana {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& ctx) {
  if (!obj.is_object()) {
    throw ConfigError(ctx + " must be a JSON object");
  }
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key: " + ctx + "." + key);
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for config key '") + key + "'");
  }
}

NormalizationConfig normalization_from_json(const json& obj) {
  check_keys(obj, {"unicode_form", "collapse_whitespace", "strip_punctuation", "lowercase_latin"},
             "normalization");
  NormalizationConfig cfg;
  const std::string form = get_or<std::string>(obj, "unicode_form", "NFC");
  if (form == "NFC") {
    cfg.unicode_form = UnicodeForm::NFC;
  } else if (form == "NFKC") {
    cfg.unicode_form = UnicodeForm::NFKC;
  } else {
    throw ConfigError("normalization.unicode_form must be NFC or NFKC");
  }
  cfg.collapse_whitespace = get_or<bool>(obj, "collapse_whitespace", true);
  cfg.lowercase_latin = get_or<bool>(obj, "lowercase_latin", true);
  for (char32_t cp : utf8::decode(get_or<std::string>(obj, "strip_punctuation", ""))) {
    cfg.strip_punctuation.insert(cp);
  }
  return cfg;
}

json normalization_to_json(const NormalizationConfig& cfg) {
  json obj;
  obj["unicode_form"] = cfg.unicode_form == UnicodeForm::NFC ? "NFC" : "NFKC";
  obj["collapse_whitespace"] = cfg.collapse_whitespace;
  obj["lowercase_latin"] = cfg.lowercase_latin;
  std::u32string cps(cfg.strip_punctuation.begin(), cfg.strip_punctuation.end());
  std::sort(cps.begin(), cps.end());
  obj["strip_punctuation"] = utf8::encode(cps);
  return obj;
}

TranscriberSpec transcriber_from_json(const json& obj, const std::string& ctx) {
  check_keys(obj, {"id", "kind", "command", "endpoint", "path", "batch_size", "timeout_s",
                   "max_inflight"},
             ctx);
  TranscriberSpec spec;
  spec.id = get_or<std::string>(obj, "id", "");
  const std::string kind = get_or<std::string>(obj, "kind", "replay");
  if (kind == "replay") {
    spec.kind = TranscriberSpec::Kind::replay;
  } else if (kind == "subprocess") {
    spec.kind = TranscriberSpec::Kind::subprocess;
  } else if (kind == "http") {
    spec.kind = TranscriberSpec::Kind::http;
  } else {
    throw ConfigError(ctx + ".kind must be one of replay, subprocess, http");
  }
  spec.command = get_or<std::string>(obj, "command", "");
  spec.endpoint = get_or<std::string>(obj, "endpoint", "");
  spec.path = get_or<std::string>(obj, "path", "");
  spec.batch_size = get_or<int>(obj, "batch_size", 16);
  spec.timeout_s = get_or<double>(obj, "timeout_s", 30.0);
  spec.max_inflight = get_or<int>(obj, "max_inflight", 1);
  return spec;
}

json transcriber_to_json(const TranscriberSpec& spec) {
  json obj;
  obj["id"] = spec.id;
  switch (spec.kind) {
    case TranscriberSpec::Kind::replay:
      obj["kind"] = "replay";
      obj["path"] = spec.path;
      break;
    case TranscriberSpec::Kind::subprocess:
      obj["kind"] = "subprocess";
      obj["command"] = spec.command;
      break;
    case TranscriberSpec::Kind::http:
      obj["kind"] = "http";
      obj["endpoint"] = spec.endpoint;
      break;
  }
  obj["batch_size"] = spec.batch_size;
  obj["timeout_s"] = spec.timeout_s;
  obj["max_inflight"] = spec.max_inflight;
  return obj;
}

EmbeddingProviderSpec provider_from_json(const json& obj, const std::string& ctx) {
  check_keys(obj, {"id", "kind", "dimension", "command", "endpoint", "path", "alphabet",
                   "timeout_s"},
             ctx);
  EmbeddingProviderSpec spec;
  spec.id = get_or<std::string>(obj, "id", "");
  const std::string kind = get_or<std::string>(obj, "kind", "mock_bag_of_chars");
  if (kind == "mock_bag_of_chars") {
    spec.kind = EmbeddingProviderSpec::Kind::mock_bag_of_chars;
  } else if (kind == "replay") {
    spec.kind = EmbeddingProviderSpec::Kind::replay;
  } else if (kind == "subprocess") {
    spec.kind = EmbeddingProviderSpec::Kind::subprocess;
  } else if (kind == "http") {
    spec.kind = EmbeddingProviderSpec::Kind::http;
  } else {
    throw ConfigError(ctx + ".kind must be one of mock_bag_of_chars, replay, subprocess, http");
  }
  spec.dimension = get_or<int>(obj, "dimension", 0);
  spec.command = get_or<std::string>(obj, "command", "");
  spec.endpoint = get_or<std::string>(obj, "endpoint", "");
  spec.path = get_or<std::string>(obj, "path", "");
  spec.alphabet = get_or<std::string>(obj, "alphabet", "abcdefghijklmnopqrstuvwxyz");
  spec.timeout_s = get_or<double>(obj, "timeout_s", 30.0);
  return spec;
}

json provider_to_json(const EmbeddingProviderSpec& spec) {
  json obj;
  obj["id"] = spec.id;
  switch (spec.kind) {
    case EmbeddingProviderSpec::Kind::mock_bag_of_chars:
      obj["kind"] = "mock_bag_of_chars";
      obj["alphabet"] = spec.alphabet;
      break;
    case EmbeddingProviderSpec::Kind::replay:
      obj["kind"] = "replay";
      obj["path"] = spec.path;
      break;
    case EmbeddingProviderSpec::Kind::subprocess:
      obj["kind"] = "subprocess";
      obj["command"] = spec.command;
      break;
    case EmbeddingProviderSpec::Kind::http:
      obj["kind"] = "http";
      obj["endpoint"] = spec.endpoint;
      break;
  }
  obj["dimension"] = spec.dimension;
  obj["timeout_s"] = spec.timeout_s;
  return obj;
}

EvaluatorSpec evaluator_from_json(const json& obj, const std::string& ctx) {
  check_keys(obj, {"id", "kind", "rho", "params"}, ctx);
  EvaluatorSpec spec;
  spec.id = get_or<std::string>(obj, "id", "");
  const std::string kind = get_or<std::string>(obj, "kind", "confidence");
  const json params = obj.value("params", json::object());
  if (kind == "confidence") {
    spec.kind = EvaluatorSpec::Kind::confidence;
    check_keys(params, {"alpha", "aggregation"}, ctx + ".params");
    spec.alpha = get_or<double>(params, "alpha", 0.5);
    spec.aggregation =
        aggregation_from_string(get_or<std::string>(params, "aggregation", "mean"));
  } else if (kind == "embedding_similarity") {
    spec.kind = EvaluatorSpec::Kind::embedding_similarity;
    check_keys(params, {"provider", "use_normalized_text"}, ctx + ".params");
    if (!params.contains("provider")) {
      throw ConfigError(ctx + ": embedding_similarity evaluator needs params.provider");
    }
    spec.provider = provider_from_json(params["provider"], ctx + ".params.provider");
    spec.use_normalized_text = get_or<bool>(params, "use_normalized_text", false);
  } else if (kind == "external") {
    spec.kind = EvaluatorSpec::Kind::external;
    check_keys(params, {"path"}, ctx + ".params");
    spec.path = get_or<std::string>(params, "path", "");
    if (spec.path.empty()) {
      throw ConfigError(ctx + ": external evaluator needs params.path");
    }
  } else {
    throw ConfigError(ctx + ".kind must be one of confidence, embedding_similarity, external");
  }
  spec.rho = get_or<double>(obj, "rho", 0.0);
  return spec;
}

json evaluator_to_json(const EvaluatorSpec& spec) {
  json obj;
  obj["id"] = spec.id;
  obj["rho"] = spec.rho;
  json params;
  switch (spec.kind) {
    case EvaluatorSpec::Kind::confidence:
      obj["kind"] = "confidence";
      params["alpha"] = spec.alpha;
      params["aggregation"] = std::string(to_string(spec.aggregation));
      break;
    case EvaluatorSpec::Kind::embedding_similarity:
      obj["kind"] = "embedding_similarity";
      params["provider"] = provider_to_json(spec.provider);
      params["use_normalized_text"] = spec.use_normalized_text;
      break;
    case EvaluatorSpec::Kind::external:
      obj["kind"] = "external";
      params["path"] = spec.path;
      break;
  }
  obj["params"] = std::move(params);
  return obj;
}

void validate(const PipelineConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.transcribers.empty()) {
    problems.push_back("at least one transcriber is required");
  }
  std::set<std::string> ids;
  for (const TranscriberSpec& t : cfg.transcribers) {
    if (t.id.empty()) problems.push_back("transcriber id must be nonempty");
    if (!ids.insert(t.id).second) problems.push_back("duplicate transcriber id '" + t.id + "'");
    if (t.batch_size < 1) problems.push_back("transcriber '" + t.id + "': batch_size must be >= 1");
    if (t.timeout_s <= 0) problems.push_back("transcriber '" + t.id + "': timeout_s must be > 0");
    if (t.max_inflight < 1)
      problems.push_back("transcriber '" + t.id + "': max_inflight must be >= 1");
    if (t.kind == TranscriberSpec::Kind::replay && t.path.empty())
      problems.push_back("transcriber '" + t.id + "': replay kind needs 'path'");
    if (t.kind == TranscriberSpec::Kind::subprocess && t.command.empty())
      problems.push_back("transcriber '" + t.id + "': subprocess kind needs 'command'");
    if (t.kind == TranscriberSpec::Kind::http && t.endpoint.empty())
      problems.push_back("transcriber '" + t.id + "': http kind needs 'endpoint'");
  }
  if (cfg.agreement.tau < 0.0 || cfg.agreement.tau > 1.0) {
    problems.push_back("agreement.tau must be in [0,1]");
  }
  if (cfg.agreement.delta < 0) {
    problems.push_back("agreement.delta must be >= 0");
  }
  if (cfg.filter.lambda < 0) {
    problems.push_back("filter.lambda must be >= 0");
  }
  std::set<std::string> eids;
  for (const EvaluatorSpec& e : cfg.filter.evaluators) {
    if (e.id.empty()) problems.push_back("evaluator id must be nonempty");
    if (!eids.insert(e.id).second) problems.push_back("duplicate evaluator id '" + e.id + "'");
    if (e.kind == EvaluatorSpec::Kind::confidence) {
      if (e.rho < 0.0 || e.rho > 1.0)
        problems.push_back("evaluator '" + e.id + "': confidence rho must be in [0,1]");
      if (e.alpha <= 0.0 || e.alpha == 1.0)
        problems.push_back("evaluator '" + e.id + "': alpha must be > 0 and != 1");
    }
    if (e.kind == EvaluatorSpec::Kind::embedding_similarity && (e.rho < -1.0 || e.rho > 1.0)) {
      problems.push_back("evaluator '" + e.id + "': similarity rho must be in [-1,1]");
    }
  }
  if (cfg.workers < 1) {
    problems.push_back("workers must be >= 1");
  }
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const std::string& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }

  // Degenerate-but-legal settings get a warning, not an error.
  const int n = static_cast<int>(cfg.transcribers.size());
  const int max_score = cfg.agreement.include_self ? n : n - 1;
  if (cfg.agreement.delta >= max_score) {
    std::cerr << "warning: agreement.delta=" << cfg.agreement.delta << " with " << n
              << " transcriber(s) rejects every segment\n";
  }
  const int k = static_cast<int>(cfg.filter.evaluators.size());
  const bool unreachable = cfg.filter.comparison == FilterComparison::ge
                               ? cfg.filter.lambda > k
                               : cfg.filter.lambda >= k;
  if (unreachable) {
    std::cerr << "warning: filter.lambda=" << cfg.filter.lambda << " with " << k
              << " evaluator(s) rejects every segment\n";
  }
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& doc) {
  check_keys(doc,
             {"transcribers", "agreement", "filter", "normalization", "workers",
              "checkpoint_path", "ordered_output"},
             "config");
  PipelineConfig cfg;
  if (auto it = doc.find("transcribers"); it != doc.end()) {
    if (!it->is_array()) throw ConfigError("config.transcribers must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      cfg.transcribers.push_back(
          transcriber_from_json((*it)[i], "config.transcribers[" + std::to_string(i) + "]"));
    }
  }
  if (auto it = doc.find("agreement"); it != doc.end()) {
    check_keys(*it, {"tau", "delta", "include_self"}, "agreement");
    cfg.agreement.tau = get_or<double>(*it, "tau", 1.0);
    cfg.agreement.delta = get_or<int>(*it, "delta", 1);
    cfg.agreement.include_self = get_or<bool>(*it, "include_self", true);
  }
  if (auto it = doc.find("filter"); it != doc.end()) {
    check_keys(*it, {"evaluators", "lambda", "comparison"}, "filter");
    if (auto ev = it->find("evaluators"); ev != it->end()) {
      if (!ev->is_array()) throw ConfigError("filter.evaluators must be an array");
      for (std::size_t i = 0; i < ev->size(); ++i) {
        cfg.filter.evaluators.push_back(
            evaluator_from_json((*ev)[i], "filter.evaluators[" + std::to_string(i) + "]"));
      }
    }
    cfg.filter.lambda = get_or<int>(*it, "lambda", 0);
    const std::string cmp = get_or<std::string>(*it, "comparison", "ge");
    if (cmp == "ge") {
      cfg.filter.comparison = FilterComparison::ge;
    } else if (cmp == "gt") {
      cfg.filter.comparison = FilterComparison::gt;
    } else {
      throw ConfigError("filter.comparison must be ge or gt");
    }
  }
  if (auto it = doc.find("normalization"); it != doc.end()) {
    cfg.normalization = normalization_from_json(*it);
  }
  cfg.workers = get_or<int>(doc, "workers", 1);
  if (auto it = doc.find("checkpoint_path"); it != doc.end() && !it->is_null()) {
    cfg.checkpoint_path = it->get<std::string>();
  }
  cfg.ordered_output = get_or<bool>(doc, "ordered_output", true);
  validate(cfg);
  return cfg;
}

json pipeline_config_to_json(const PipelineConfig& cfg) {
  json doc;
  doc["transcribers"] = json::array();
  for (const TranscriberSpec& t : cfg.transcribers) {
    doc["transcribers"].push_back(transcriber_to_json(t));
  }
  doc["agreement"]["tau"] = cfg.agreement.tau;
  doc["agreement"]["delta"] = cfg.agreement.delta;
  doc["agreement"]["include_self"] = cfg.agreement.include_self;
  doc["filter"]["evaluators"] = json::array();
  for (const EvaluatorSpec& e : cfg.filter.evaluators) {
    doc["filter"]["evaluators"].push_back(evaluator_to_json(e));
  }
  doc["filter"]["lambda"] = cfg.filter.lambda;
  doc["filter"]["comparison"] = cfg.filter.comparison == FilterComparison::ge ? "ge" : "gt";
  doc["normalization"] = normalization_to_json(cfg.normalization);
  doc["workers"] = cfg.workers;
  if (cfg.checkpoint_path) {
    doc["checkpoint_path"] = *cfg.checkpoint_path;
  }
  doc["ordered_output"] = cfg.ordered_output;
  return doc;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  PipelineConfig cfg = pipeline_config_from_json(doc);
  resolve_config_paths(cfg, std::filesystem::path(path).parent_path().string());
  return cfg;
}

void resolve_config_paths(PipelineConfig& cfg, const std::string& base_dir) {
  const std::filesystem::path base(base_dir);
  auto rebase = [&](std::string& p) {
    if (p.empty()) return;
    const std::filesystem::path fp(p);
    if (fp.is_absolute() || base.empty()) return;
    p = (base / fp).lexically_normal().string();
  };
  for (TranscriberSpec& t : cfg.transcribers) rebase(t.path);
  for (EvaluatorSpec& e : cfg.filter.evaluators) {
    rebase(e.path);
    rebase(e.provider.path);
  }
  if (cfg.checkpoint_path) rebase(*cfg.checkpoint_path);
}

void apply_override(json& doc, const std::string& dotted_key, const std::string& value) {
  if (dotted_key.empty()) {
    throw ConfigError("override key must be nonempty");
  }
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = dotted_key.find('.', start);
    parts.push_back(dotted_key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json* cur = &doc;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    const std::string& part = parts[i];
    if (cur->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(part);
      } catch (const std::exception&) {
        throw ConfigError("override '" + dotted_key + "': '" + part + "' is not an array index");
      }
      if (idx >= cur->size()) {
        throw ConfigError("override '" + dotted_key + "': index " + part + " out of range");
      }
      cur = &(*cur)[idx];
    } else if (cur->is_object() || cur->is_null()) {
      cur = &(*cur)[part];
    } else {
      throw ConfigError("override '" + dotted_key + "': '" + part + "' is not an object");
    }
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // plain string
  }
  const std::string& leaf = parts.back();
  if (cur->is_array()) {
    std::size_t idx = 0;
    try {
      idx = std::stoul(leaf);
    } catch (const std::exception&) {
      throw ConfigError("override '" + dotted_key + "': '" + leaf + "' is not an array index");
    }
    if (idx >= cur->size()) {
      throw ConfigError("override '" + dotted_key + "': index " + leaf + " out of range");
    }
    (*cur)[idx] = parsed;
  } else {
    (*cur)[leaf] = parsed;
  }
}

std::uint64_t config_hash(const PipelineConfig& cfg) {
  json doc = pipeline_config_to_json(cfg);
  doc.erase("workers");
  doc.erase("checkpoint_path");
  return fnv1a64(doc.dump());
}

PipelineConfig ablation_preset(const std::string& name, const PipelineConfig& base) {
  auto find_transcriber = [&](const std::string& id) -> TranscriberSpec {
    for (const TranscriberSpec& t : base.transcribers) {
      if (t.id == id) return t;
    }
    throw ConfigError("preset " + name + " requires transcriber '" + id + "'");
  };
  auto find_evaluator = [&](const std::string& id) -> EvaluatorSpec {
    for (const EvaluatorSpec& e : base.filter.evaluators) {
      if (e.id == id) return e;
    }
    throw ConfigError("preset " + name + " requires evaluator '" + id + "'");
  };

  PipelineConfig cfg = base;
  if (name == "PN-RNNT") {
    cfg.transcribers = {find_transcriber("rnnt")};
    cfg.agreement.delta = 0;
    cfg.filter.evaluators = {};
    cfg.filter.lambda = 0;
  } else if (name == "PN-SONAR") {
    cfg.transcribers = {find_transcriber("rnnt")};
    cfg.agreement.delta = 0;
    cfg.filter.evaluators = {find_evaluator("sonar")};
    cfg.filter.lambda = 1;
  } else if (name == "PN-No-Filter") {
    cfg.transcribers = {find_transcriber("rnnt"), find_transcriber("ctc")};
    cfg.agreement.tau = 1.0;
    cfg.agreement.delta = 1;
    cfg.filter.evaluators = {};
    cfg.filter.lambda = 0;
  } else if (name == "PN") {
    cfg.transcribers = {find_transcriber("rnnt"), find_transcriber("ctc")};
    cfg.agreement.tau = 1.0;
    cfg.agreement.delta = 1;
    EvaluatorSpec sonar = find_evaluator("sonar");
    sonar.rho = 0.8;
    EvaluatorSpec rnnt_conf = find_evaluator("rnnt_conf");
    rnnt_conf.rho = 0.7;
    cfg.filter.evaluators = {std::move(sonar), std::move(rnnt_conf)};
    cfg.filter.lambda = 2;
    cfg.filter.comparison = FilterComparison::ge;
  } else {
    throw ConfigError("unknown preset: " + name +
                      " (expected PN-RNNT, PN-SONAR, PN-No-Filter, or PN)");
  }
  return cfg;
}

}  // namespace pramana
