#include "pramana/evalharness.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pramana/errors.hpp"
#include "pramana/segmentation.hpp"

namespace pramana {

using nlohmann::json;

bool operator==(const SliceStats& a, const SliceStats& b) {
  return a.wer == b.wer && a.utterances == b.utterances && a.minutes == b.minutes;
}

bool operator==(const SystemReport& a, const SystemReport& b) {
  return a.system == b.system && a.overall == b.overall &&
         a.overall_macro == b.overall_macro && a.per_domain == b.per_domain &&
         a.per_bucket == b.per_bucket;
}

bool operator==(const EvalReport& a, const EvalReport& b) { return a.systems == b.systems; }

namespace {

struct Accum {
  std::size_t edits = 0;
  std::size_t ref_words = 0;
  std::size_t utterances = 0;
  double minutes = 0.0;

  void add(const EditCounts& ec, double duration_s) {
    edits += ec.edits;
    ref_words += ec.ref_len;
    ++utterances;
    minutes += duration_s / 60.0;
  }

  SliceStats finish() const {
    SliceStats s;
    s.wer = ref_words == 0 ? 0.0 : static_cast<double>(edits) / static_cast<double>(ref_words);
    s.utterances = utterances;
    s.minutes = minutes;
    return s;
  }
};

// Shortest-exact double rendering: 17 significant digits always
// round-trip through strtod bit-for-bit.
std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& raw) {
  if (raw.find_first_of(",\"\n") == std::string::npos) return raw;
  std::string out = "\"";
  for (char c : raw) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> parse_csv_line(const std::string& line, std::size_t lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) {
    throw ConfigError("report csv line " + std::to_string(lineno) + ": unterminated quote");
  }
  fields.push_back(std::move(cur));
  return fields;
}

double parse_double_field(const std::string& s, std::size_t lineno) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw ConfigError("report csv line " + std::to_string(lineno) + ": bad number '" + s + "'");
  }
  return v;
}

constexpr const char* kCsvHeader = "system,section,key,wer,utterances,minutes";

}  // namespace

SystemReport evaluate_system(const std::vector<AudioSegment>& references,
                             const std::map<std::string, std::string>& hypotheses,
                             const NormalizationConfig& norm,
                             const std::string& system_name) {
  std::vector<const AudioSegment*> refs;
  refs.reserve(references.size());
  for (const AudioSegment& seg : references) refs.push_back(&seg);
  std::sort(refs.begin(), refs.end(),
            [](const AudioSegment* a, const AudioSegment* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < refs.size(); ++i) {
    if (refs[i]->id == refs[i - 1]->id) {
      throw ConfigError("duplicate reference id: '" + refs[i]->id + "'");
    }
  }

  std::vector<std::string> missing;
  for (const AudioSegment* seg : refs) {
    if (!hypotheses.count(seg->id)) missing.push_back(seg->id);
  }
  if (!missing.empty()) {
    std::string msg = "missing hypotheses for ids:";
    for (const std::string& id : missing) msg += " '" + id + "'";
    throw ConfigError(msg);
  }

  Accum overall;
  std::map<std::string, Accum> per_domain;
  std::map<std::string, Accum> per_bucket;

  for (const AudioSegment* seg : refs) {
    if (!seg->reference_text || seg->reference_text->empty()) {
      throw ConfigError("empty reference text: id '" + seg->id + "'");
    }
    const std::string ref_norm = normalize(*seg->reference_text, norm);
    const std::string hyp_norm = normalize(hypotheses.at(seg->id), norm);
    if (ref_norm.empty()) {
      throw ConfigError("empty reference text: id '" + seg->id + "'");
    }
    const EditCounts ec = word_edit_counts(ref_norm, hyp_norm);
    overall.add(ec, seg->duration_s);
    per_domain[seg->domain.value_or("")].add(ec, seg->duration_s);
    per_bucket[std::string(to_string(duration_bucket(*seg)))].add(ec, seg->duration_s);
  }

  SystemReport report;
  report.system = system_name;
  report.overall = overall.finish();
  double macro_sum = 0.0;
  for (const auto& [domain, acc] : per_domain) {
    const SliceStats s = acc.finish();
    report.per_domain[domain] = s;
    macro_sum += s.wer;
  }
  report.overall_macro = per_domain.empty() ? 0.0 : macro_sum / static_cast<double>(per_domain.size());
  for (const auto& [bucket, acc] : per_bucket) {
    report.per_bucket[bucket] = acc.finish();
  }
  return report;
}

EvalReport evaluate(
    const std::vector<AudioSegment>& references,
    const std::vector<std::pair<std::string, std::map<std::string, std::string>>>& systems,
    const NormalizationConfig& norm) {
  EvalReport report;
  report.systems.reserve(systems.size());
  for (const auto& [name, hyps] : systems) {
    report.systems.push_back(evaluate_system(references, hyps, norm, name));
  }
  return report;
}

ReportFormat report_format_from_string(std::string_view s) {
  if (s == "text") return ReportFormat::text;
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw ConfigError("unknown report format: '" + std::string(s) + "'");
}

namespace {

void render_text(const EvalReport& report, std::ostringstream& out) {
  bool first = true;
  for (const SystemReport& sys : report.systems) {
    if (!first) out << '\n';
    first = false;
    out << "system: " << sys.system << '\n';
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-8s %-16s %10s %10s %10s\n", "section", "key", "wer",
                  "utts", "minutes");
    out << buf;
    auto row = [&](const char* section, const std::string& key, const SliceStats& s) {
      std::snprintf(buf, sizeof(buf), "%-8s %-16s %10.4f %10zu %10.2f\n", section, key.c_str(),
                    s.wer, s.utterances, s.minutes);
      out << buf;
    };
    for (const auto& [domain, s] : sys.per_domain) row("domain", domain, s);
    for (const auto& [bucket, s] : sys.per_bucket) row("bucket", bucket, s);
    SliceStats macro = sys.overall;
    macro.wer = sys.overall_macro;
    row("overall", "ALL-macro", macro);
    row("overall", "ALL", sys.overall);
  }
}

void render_csv(const EvalReport& report, std::ostringstream& out) {
  out << kCsvHeader << '\n';
  for (const SystemReport& sys : report.systems) {
    auto row = [&](const char* section, const std::string& key, double wer,
                   std::size_t utterances, double minutes) {
      out << csv_field(sys.system) << ',' << section << ',' << csv_field(key) << ','
          << fmt_double(wer) << ',' << utterances << ',' << fmt_double(minutes) << '\n';
    };
    for (const auto& [domain, s] : sys.per_domain) {
      row("domain", domain, s.wer, s.utterances, s.minutes);
    }
    for (const auto& [bucket, s] : sys.per_bucket) {
      row("bucket", bucket, s.wer, s.utterances, s.minutes);
    }
    row("overall", "macro", sys.overall_macro, sys.overall.utterances, sys.overall.minutes);
    row("overall", "micro", sys.overall.wer, sys.overall.utterances, sys.overall.minutes);
  }
}

json slice_to_json(const SliceStats& s) {
  json doc;
  doc["wer"] = s.wer;
  doc["utterances"] = s.utterances;
  doc["minutes"] = s.minutes;
  return doc;
}

void render_json(const EvalReport& report, std::ostringstream& out) {
  json doc = json::array();
  for (const SystemReport& sys : report.systems) {
    json s;
    s["system"] = sys.system;
    s["overall"] = slice_to_json(sys.overall);
    s["overall_macro"] = sys.overall_macro;
    json domains = json::object();
    for (const auto& [domain, stats] : sys.per_domain) domains[domain] = slice_to_json(stats);
    s["per_domain"] = std::move(domains);
    json buckets = json::object();
    for (const auto& [bucket, stats] : sys.per_bucket) buckets[bucket] = slice_to_json(stats);
    s["per_bucket"] = std::move(buckets);
    doc.push_back(std::move(s));
  }
  out << doc.dump(2) << '\n';
}

}  // namespace

std::string report_table(const EvalReport& report, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::text:
      render_text(report, out);
      break;
    case ReportFormat::csv:
      render_csv(report, out);
      break;
    case ReportFormat::json:
      render_json(report, out);
      break;
  }
  return out.str();
}

EvalReport parse_report_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::size_t lineno = 0;
  EvalReport report;
  std::map<std::string, std::size_t> index;  // system -> position
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != kCsvHeader) {
        throw ConfigError("report csv line 1: unexpected header '" + line + "'");
      }
      continue;
    }
    const std::vector<std::string> f = parse_csv_line(line, lineno);
    if (f.size() != 6) {
      throw ConfigError("report csv line " + std::to_string(lineno) + ": expected 6 fields, got " +
                        std::to_string(f.size()));
    }
    auto [it, inserted] = index.try_emplace(f[0], report.systems.size());
    if (inserted) {
      report.systems.emplace_back();
      report.systems.back().system = f[0];
    }
    SystemReport& sys = report.systems[it->second];
    SliceStats s;
    s.wer = parse_double_field(f[3], lineno);
    s.utterances = static_cast<std::size_t>(std::stoull(f[4]));
    s.minutes = parse_double_field(f[5], lineno);
    if (f[1] == "domain") {
      sys.per_domain[f[2]] = s;
    } else if (f[1] == "bucket") {
      sys.per_bucket[f[2]] = s;
    } else if (f[1] == "overall" && f[2] == "micro") {
      sys.overall = s;
    } else if (f[1] == "overall" && f[2] == "macro") {
      sys.overall_macro = s.wer;
    } else {
      throw ConfigError("report csv line " + std::to_string(lineno) + ": unknown section '" +
                        f[1] + "/" + f[2] + "'");
    }
  }
  return report;
}

std::map<std::string, std::string> read_hypotheses(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DependencyError("cannot open hypothesis manifest: " + path);
  }
  std::map<std::string, std::string> hyps;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!row.contains("id") || !row["id"].is_string()) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": missing string field 'id'");
    }
    const std::string id = row["id"].get<std::string>();
    std::string text;
    // Pipeline rows first: their "text" field is the segment's reference
    // (when present), never the hypothesis, so accepted_text must win.
    if (row.contains("accepted_text") && row["accepted_text"].is_string()) {
      text = row["accepted_text"].get<std::string>();
    } else if (row.contains("stage_rejected")) {
      continue;  // rejected pipeline row: no hypothesis to score
    } else if (row.contains("text") && row["text"].is_string()) {
      text = row["text"].get<std::string>();
    } else {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": missing string field 'text'");
    }
    if (!hyps.emplace(id, std::move(text)).second) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate hypothesis id '" +
                        id + "'");
    }
  }
  return hyps;
}

}  // namespace pramana
