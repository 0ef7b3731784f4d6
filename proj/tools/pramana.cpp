// pramana: pseudo-labeling toolkit for low-resource speech corpora.
//
// Subcommands cover the full flow: segment audio (VAD), run the
// multi-transcriber labeling pipeline, evaluate hypotheses (WER tables),
// recompute yield stats from a labeled manifest, and generate/sweep
// synthetic corpora for calibration.
//
// Exit codes: 0 success, 1 per-item failures (and unexpected errors),
// 2 usage/config errors, 3 external-dependency failures.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pramana/errors.hpp"
#include "pramana/evalharness.hpp"
#include "pramana/manifest.hpp"
#include "pramana/pipeline.hpp"
#include "pramana/segmentation.hpp"
#include "pramana/synthcorpus.hpp"
#include "pramana/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pramana;

namespace {

json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void require_output_writable(const std::string& path, bool overwrite, bool resume = false) {
  if (path.empty()) return;
  if (fs::exists(path) && !overwrite && !resume) {
    throw ConfigError("output already exists: " + path +
                      " (pass --overwrite to replace it)");
  }
}

void print_funnel(const YieldReport& r) {
  std::fprintf(stderr, "input:            %9.2f h  (%zu segments)\n", r.hours_input,
               r.segments_input);
  std::fprintf(stderr, "after agreement:  %9.2f h\n", r.hours_after_agreement);
  std::fprintf(stderr, "after filter:     %9.2f h  (%zu accepted)\n", r.hours_after_filter,
               r.segments_accepted);
  std::string rejected = "rejected:";
  for (const char* reason :
       {"transcription_error", "no_agreement", "filtered", "missing_evaluator_input"}) {
    auto it = r.rejected.find(reason);
    rejected += std::string(" ") + reason + "=" +
                std::to_string(it == r.rejected.end() ? 0 : it->second);
  }
  std::fprintf(stderr, "%s\n", rejected.c_str());
}

// ---------------------------------------------------------------------------
// segment

struct SegmentArgs {
  std::string input;
  std::string output;
  VadConfig vad;
  bool keep_going = false;
  bool overwrite = false;
};

int cmd_segment(const SegmentArgs& args) {
  if (!fs::exists(args.input)) {
    throw ConfigError("input path does not exist: " + args.input);
  }
  require_output_writable(args.output, args.overwrite);

  std::vector<fs::path> files;
  if (fs::is_directory(args.input)) {
    for (const auto& entry : fs::directory_iterator(args.input)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (ext == ".wav") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(args.input);
  }

  std::ofstream out(args.output, std::ios::trunc);
  if (!out) throw DependencyError("cannot open output manifest for writing: " + args.output);

  std::size_t n_segments = 0;
  std::size_t n_files = 0;
  for (const fs::path& file : files) {
    std::vector<AudioSegment> segments;
    try {
      const WavData wav = read_wav(file.string());
      segments = detect_segments(wav.samples, wav.sample_rate, args.vad,
                                 file.stem().string(), file.string());
    } catch (const std::exception& e) {
      if (args.keep_going) {
        std::fprintf(stderr, "warning: %s: %s\n", file.string().c_str(), e.what());
        continue;
      }
      std::fprintf(stderr, "error: %s: %s\n", file.string().c_str(), e.what());
      return 1;
    }
    ++n_files;
    for (const AudioSegment& seg : segments) {
      out << segment_to_json(seg).dump() << '\n';
      ++n_segments;
    }
  }
  std::fprintf(stderr, "wrote %zu segments from %zu files to %s\n", n_segments, n_files,
               args.output.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// run

struct RunArgs {
  std::string config;
  std::string input;
  std::string output;
  std::string preset;
  std::vector<std::string> overrides;
  bool resume = false;
  bool overwrite = false;
  int workers = 0;  // 0: not passed
  bool workers_passed = false;
  std::size_t stop_after = 0;
  int batch_retries = 2;
};

int cmd_run(const RunArgs& args) {
  json doc = parse_json_file(args.config);
  for (const std::string& kv : args.overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    }
    apply_override(doc, kv.substr(0, eq), kv.substr(eq + 1));
  }
  PipelineConfig cfg = pipeline_config_from_json(doc);
  resolve_config_paths(cfg, fs::path(args.config).parent_path().string());
  if (!args.preset.empty()) {
    cfg = ablation_preset(args.preset, cfg);
  }
  if (const char* env = std::getenv("PRAMANA_WORKERS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError("PRAMANA_WORKERS must be a positive integer, got '" +
                        std::string(env) + "'");
    }
    cfg.workers = static_cast<int>(v);
  }
  if (args.workers_passed) {
    if (args.workers < 1) throw ConfigError("--workers must be >= 1");
    cfg.workers = args.workers;
  }
  require_output_writable(args.output, args.overwrite, args.resume);

  RunOptions opts;
  opts.resume = args.resume;
  opts.stop_after = args.stop_after;
  opts.batch_retries = args.batch_retries;
  opts.progress = [](std::size_t done, std::size_t total) {
    if (total == 0) return;
    if (done % 100 == 0 || done == total) {
      std::fprintf(stderr, "labeled %zu/%zu\n", done, total);
    }
  };
  const YieldReport report = run_pipeline(cfg, args.input, args.output, opts);
  print_funnel(report);
  std::cout << yield_report_to_json(report).dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string refs;
  std::vector<std::string> hyps;
  std::string config;
  std::string format = "text";
  std::string output;
  bool by_domain = false;
  bool by_duration = false;
};

int cmd_eval(const EvalArgs& args) {
  NormalizationConfig norm;
  if (!args.config.empty()) {
    norm = load_pipeline_config(args.config).normalization;
  }
  const std::vector<AudioSegment> refs = read_segments(args.refs);

  std::vector<std::pair<std::string, std::map<std::string, std::string>>> systems;
  std::set<std::string> names;
  for (const std::string& path : args.hyps) {
    std::string name = fs::path(path).stem().string();
    if (!names.insert(name).second) {
      int i = 2;
      while (!names.insert(name + "-" + std::to_string(i)).second) ++i;
      name += "-" + std::to_string(i);
    }
    systems.emplace_back(name, read_hypotheses(path));
  }

  EvalReport report = evaluate(refs, systems, norm);
  if (!args.by_domain) {
    for (SystemReport& sys : report.systems) sys.per_domain.clear();
  }
  if (!args.by_duration) {
    for (SystemReport& sys : report.systems) sys.per_bucket.clear();
  }
  const std::string rendered = report_table(report, report_format_from_string(args.format));
  if (args.output.empty()) {
    std::cout << rendered;
  } else {
    std::ofstream out(args.output, std::ios::trunc);
    if (!out) throw DependencyError("cannot open output for writing: " + args.output);
    out << rendered;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// stats

int cmd_stats(const std::string& input) {
  const std::vector<LabelRecord> records = read_label_records(input);
  const YieldReport report = recompute_yield(records);
  print_funnel(report);
  std::cout << yield_report_to_json(report).dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out_dir;
  std::string config;
  std::uint64_t seed = 1;
  bool seed_passed = false;
  std::size_t n_segments = 100;
  bool n_segments_passed = false;
  std::vector<std::string> profiles;  // "id=cer"
  bool wavs = false;
  bool overwrite = false;
};

int cmd_synth(const SynthArgs& args) {
  SynthConfig cfg;
  if (!args.config.empty()) {
    cfg = synth_config_from_json(parse_json_file(args.config));
  }
  if (args.seed_passed) cfg.seed = args.seed;
  if (args.n_segments_passed) cfg.n_segments = args.n_segments;
  if (!args.profiles.empty()) {
    cfg.profiles.clear();
    for (const std::string& kv : args.profiles) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--profile expects id=char_error_rate, got '" + kv + "'");
      }
      TranscriberProfile p;
      p.id = kv.substr(0, eq);
      try {
        std::size_t used = 0;
        p.char_error_rate = std::stod(kv.substr(eq + 1), &used);
        if (used != kv.size() - eq - 1) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ConfigError("--profile expects id=char_error_rate, got '" + kv + "'");
      }
      cfg.profiles.push_back(std::move(p));
    }
  }
  if (cfg.profiles.empty()) {
    cfg.profiles.push_back({"rnnt", 0.05, false, "", 4.0, 0.02});
    cfg.profiles.push_back({"ctc", 0.08, false, "", 4.0, 0.02});
  }
  if (args.wavs) cfg.write_wavs = true;

  const fs::path marker = fs::path(args.out_dir) / "corpus.json";
  if (fs::exists(marker) && !args.overwrite) {
    throw ConfigError("corpus already exists: " + args.out_dir +
                      " (pass --overwrite to regenerate)");
  }
  generate(cfg, args.out_dir);
  std::fprintf(stderr, "wrote corpus to %s (%zu segments)\n", args.out_dir.c_str(),
               cfg.n_segments);
  for (const TranscriberProfile& p : cfg.profiles) {
    std::fprintf(stderr, "  %s: configured cer %.3f, realized cer %.3f\n", p.id.c_str(),
                 p.char_error_rate, measure_realized_cer(args.out_dir, p.id));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string corpus;
  SweepGrid grid;
  std::string output;
};

int cmd_sweep(const SweepArgs& args) {
  const std::vector<SweepRow> rows = sweep(args.grid, args.corpus);
  const std::string csv = sweep_csv(rows);
  if (args.output.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(args.output, std::ios::trunc);
    if (!out) throw DependencyError("cannot open output for writing: " + args.output);
    out << csv;
  }
  std::fprintf(stderr, "swept %zu grid points\n", rows.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pseudo-labeling toolkit for low-resource speech corpora"};
  app.require_subcommand(1);

  SegmentArgs seg;
  CLI::App* seg_cmd = app.add_subcommand("segment", "detect voiced segments in WAV files");
  seg_cmd->add_option("input", seg.input, "WAV file or directory of WAV files")->required();
  seg_cmd->add_option("-o,--output", seg.output, "segment manifest to write")->required();
  seg_cmd->add_option("--frame-ms", seg.vad.frame_ms, "analysis frame length (ms)");
  seg_cmd->add_option("--threshold-db", seg.vad.energy_threshold_db,
                      "voicing threshold above the noise floor (dB)");
  seg_cmd->add_option("--hangover-frames", seg.vad.hangover_frames,
                      "bridge unvoiced gaps up to this many frames");
  seg_cmd->add_option("--min-dur-s", seg.vad.min_dur_s, "drop segments shorter than this");
  seg_cmd->add_option("--max-dur-s", seg.vad.max_dur_s, "split segments longer than this");
  seg_cmd->add_option("--noise-percentile", seg.vad.noise_floor_percentile,
                      "noise floor percentile of frame levels");
  seg_cmd->add_flag("--keep-going", seg.keep_going, "warn on unreadable files instead of failing");
  seg_cmd->add_flag("--overwrite", seg.overwrite, "replace an existing output manifest");

  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "label a segment manifest");
  run_cmd->add_option("-c,--config", run.config, "pipeline config JSON")->required();
  run_cmd->add_option("-i,--input", run.input, "input segment manifest")->required();
  run_cmd->add_option("-o,--output", run.output, "labeled manifest to write")->required();
  run_cmd->add_option("--preset", run.preset,
                      "experiment preset: PN-RNNT, PN-SONAR, PN-No-Filter, PN");
  run_cmd->add_option("--set", run.overrides, "config override key=value (repeatable)");
  run_cmd->add_flag("--resume", run.resume, "continue from the config's checkpoint");
  run_cmd->add_flag("--overwrite", run.overwrite, "replace an existing output manifest");
  CLI::Option* workers_opt =
      run_cmd->add_option("--workers", run.workers, "worker thread count");
  run_cmd->add_option("--stop-after", run.stop_after,
                      "stop after writing this many records (testing aid)");
  run_cmd->add_option("--batch-retries", run.batch_retries,
                      "retries for batch-level transcriber failures");

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score hypothesis manifests against references");
  eval_cmd->add_option("-r,--refs", ev.refs, "reference manifest (rows carry text)")->required();
  eval_cmd->add_option("hyps", ev.hyps, "hypothesis manifests ({id,text} JSONL)")
      ->required()
      ->expected(-1);
  eval_cmd->add_option("-c,--config", ev.config,
                       "pipeline config whose normalization settings to use");
  eval_cmd->add_option("--format", ev.format, "output format: text, csv, json")
      ->check(CLI::IsMember({"text", "csv", "json"}));
  eval_cmd->add_option("-o,--output", ev.output, "write the table here instead of stdout");
  eval_cmd->add_flag("--by-domain", ev.by_domain, "include per-domain rows");
  eval_cmd->add_flag("--by-duration", ev.by_duration, "include per-duration-bucket rows");

  std::string stats_input;
  CLI::App* stats_cmd =
      app.add_subcommand("stats", "recompute the yield funnel from a labeled manifest");
  stats_cmd->add_option("input", stats_input, "labeled manifest")->required();

  SynthArgs synth_args;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic replay corpus");
  synth_cmd->add_option("-o,--out", synth_args.out_dir, "corpus directory")->required();
  synth_cmd->add_option("-c,--config", synth_args.config, "corpus config JSON");
  CLI::Option* seed_opt = synth_cmd->add_option("--seed", synth_args.seed, "RNG seed");
  CLI::Option* nseg_opt =
      synth_cmd->add_option("--n-segments", synth_args.n_segments, "number of segments");
  synth_cmd->add_option("--profile", synth_args.profiles,
                        "transcriber profile id=char_error_rate (repeatable)");
  synth_cmd->add_flag("--wavs", synth_args.wavs, "write zero-filled WAV stubs");
  synth_cmd->add_flag("--overwrite", synth_args.overwrite, "regenerate an existing corpus");

  SweepArgs sweep_args;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "grid-sweep thresholds over a synthetic corpus");
  sweep_cmd->add_option("--corpus", sweep_args.corpus, "corpus directory")->required();
  sweep_cmd->add_option("--taus", sweep_args.grid.taus, "agreement tau values")->delimiter(',');
  sweep_cmd->add_option("--deltas", sweep_args.grid.deltas, "agreement delta values")
      ->delimiter(',');
  sweep_cmd->add_option("--rhos", sweep_args.grid.rhos, "evaluator rho values")->delimiter(',');
  sweep_cmd->add_option("--lambdas", sweep_args.grid.lambdas, "filter lambda values")
      ->delimiter(',');
  sweep_cmd->add_option("-o,--output", sweep_args.output,
                        "write the CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  run.workers_passed = workers_opt->count() > 0;
  synth_args.seed_passed = seed_opt->count() > 0;
  synth_args.n_segments_passed = nseg_opt->count() > 0;

  try {
    if (seg_cmd->parsed()) return cmd_segment(seg);
    if (run_cmd->parsed()) return cmd_run(run);
    if (eval_cmd->parsed()) return cmd_eval(ev);
    if (stats_cmd->parsed()) return cmd_stats(stats_input);
    if (synth_cmd->parsed()) return cmd_synth(synth_args);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DependencyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
