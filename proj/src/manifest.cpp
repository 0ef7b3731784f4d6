#include "pramana/manifest.hpp"

#include <fstream>

#include "pramana/errors.hpp"

namespace pramana {

using nlohmann::json;

namespace {

double require_number(const json& row, const char* key) {
  auto it = row.find(key);
  if (it == row.end() || !it->is_number()) {
    throw ConfigError(std::string("missing or non-numeric field '") + key + "'");
  }
  return it->get<double>();
}

std::string require_string(const json& row, const char* key) {
  auto it = row.find(key);
  if (it == row.end() || !it->is_string()) {
    throw ConfigError(std::string("missing or non-string field '") + key + "'");
  }
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& row, const char* key) {
  auto it = row.find(key);
  if (it == row.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw ConfigError(std::string("non-string field '") + key + "'");
  }
  return it->get<std::string>();
}

template <typename Fn>
auto read_jsonl(const std::string& path, Fn per_row) {
  std::ifstream in(path);
  if (!in) {
    throw DependencyError("cannot open manifest: " + path);
  }
  std::vector<decltype(per_row(json{}))> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
      out.push_back(per_row(row));
    } catch (const json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

json segment_to_json(const AudioSegment& seg) {
  json row;
  row["id"] = seg.id;
  row["audio_path"] = seg.audio_path;
  row["offset_s"] = seg.offset_s;
  row["duration_s"] = seg.duration_s;
  if (!seg.source_id.empty()) row["source"] = seg.source_id;
  if (seg.domain) row["domain"] = *seg.domain;
  if (seg.reference_text) row["text"] = *seg.reference_text;
  return row;
}

AudioSegment segment_from_json(const json& row) {
  AudioSegment seg;
  seg.id = require_string(row, "id");
  seg.audio_path = require_string(row, "audio_path");
  seg.offset_s = require_number(row, "offset_s");
  seg.duration_s = require_number(row, "duration_s");
  if (auto s = optional_string(row, "source")) seg.source_id = *s;
  seg.domain = optional_string(row, "domain");
  seg.reference_text = optional_string(row, "text");
  if (seg.duration_s <= 0.0) {
    throw ConfigError("segment '" + seg.id + "' has non-positive duration");
  }
  if (seg.offset_s < 0.0) {
    throw ConfigError("segment '" + seg.id + "' has negative offset");
  }
  return seg;
}

json label_record_to_json(const LabelRecord& rec) {
  json row = segment_to_json(rec.segment);
  json cands = json::array();
  for (const TranscriptCandidate& c : rec.candidates) {
    json jc;
    jc["transcriber_id"] = c.transcriber_id;
    jc["text"] = c.text;
    if (c.confidence) jc["confidence"] = *c.confidence;
    cands.push_back(std::move(jc));
  }
  row["candidates"] = std::move(cands);
  json agreement;
  agreement["scores"] = rec.agreement_scores;
  agreement["selected"] =
      rec.selected ? json(static_cast<std::int64_t>(*rec.selected)) : json(nullptr);
  row["agreement"] = std::move(agreement);
  row["evaluators"] = rec.evaluator_scores;
  if (rec.accepted_text) row["accepted_text"] = *rec.accepted_text;
  if (rec.stage_rejected) row["stage_rejected"] = std::string(to_string(*rec.stage_rejected));
  return row;
}

LabelRecord label_record_from_json(const json& row) {
  LabelRecord rec;
  rec.segment = segment_from_json(row);
  if (auto it = row.find("candidates"); it != row.end()) {
    for (const json& jc : *it) {
      TranscriptCandidate c;
      c.segment_id = rec.segment.id;
      c.transcriber_id = require_string(jc, "transcriber_id");
      c.text = require_string(jc, "text");
      if (auto cit = jc.find("confidence"); cit != jc.end() && !cit->is_null()) {
        c.confidence = cit->get<double>();
      }
      rec.candidates.push_back(std::move(c));
    }
  }
  if (auto it = row.find("agreement"); it != row.end()) {
    if (auto sc = it->find("scores"); sc != it->end()) {
      rec.agreement_scores = sc->get<std::vector<int>>();
    }
    if (auto sel = it->find("selected"); sel != it->end() && !sel->is_null()) {
      rec.selected = sel->get<std::size_t>();
    }
  }
  if (auto it = row.find("evaluators"); it != row.end()) {
    rec.evaluator_scores = it->get<std::map<std::string, double>>();
  }
  if (auto it = row.find("accepted_text"); it != row.end() && !it->is_null()) {
    rec.accepted_text = it->get<std::string>();
  }
  if (auto it = row.find("stage_rejected"); it != row.end() && !it->is_null()) {
    auto stage = stage_rejected_from_string(it->get<std::string>());
    if (!stage) {
      throw ConfigError("unknown stage_rejected value: " + it->get<std::string>());
    }
    rec.stage_rejected = stage;
  }
  if (rec.accepted_text.has_value() == rec.stage_rejected.has_value()) {
    throw ConfigError("record '" + rec.segment.id +
                      "' must carry exactly one of accepted_text or stage_rejected");
  }
  return rec;
}

std::vector<AudioSegment> read_segments(const std::string& path) {
  return read_jsonl(path, [](const json& row) { return segment_from_json(row); });
}

std::vector<LabelRecord> read_label_records(const std::string& path) {
  return read_jsonl(path, [](const json& row) { return label_record_from_json(row); });
}

}  // namespace pramana
