// Line-JSON stub used by the adapter tests: speaks the subprocess
// transcriber/embedding protocol and misbehaves on demand so parent-side
// error handling can be exercised deterministically.
//
//   echo_child [--mode transcribe|embed] [options]
//
// Transcribe replies echo the request id as the text unless --text is
// given. Fault flags:
//   --no-handshake         exit before answering the handshake
//   --fail-handshake       answer the handshake with the wrong op
//   --hang-handshake       never answer the handshake
//   --sleep-ms N           sleep before every reply
//   --drop-id ID           never reply for this request id
//   --garbage-on ID        emit a non-JSON line instead of this reply
//   --wrong-id-on ID       reply with an unknown id for this request
//   --die-on ID            exit(1) upon receiving this request id

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pramana/hash.hpp"

using nlohmann::json;

namespace {

struct Options {
  std::string mode = "transcribe";
  std::string text;  // empty: echo the request id
  bool has_confidence = false;
  double confidence = 0.0;
  json token_dists;  // null unless --dists given
  int dim = 4;
  bool no_handshake = false;
  bool fail_handshake = false;
  bool hang_handshake = false;
  int sleep_ms = 0;
  std::string drop_id;
  std::string garbage_on;
  std::string wrong_id_on;
  std::string die_on;
};

[[noreturn]] void usage_error(const std::string& msg) {
  std::cerr << "echo_child: " << msg << "\n";
  std::exit(64);
}

Options parse_args(int argc, char** argv) {
  Options opt;
  auto need_value = [&](int& i, const char* flag) -> std::string {
    if (i + 1 >= argc) usage_error(std::string("missing value for ") + flag);
    return argv[++i];
  };
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--mode") {
      opt.mode = need_value(i, "--mode");
    } else if (arg == "--text") {
      opt.text = need_value(i, "--text");
    } else if (arg == "--confidence") {
      opt.has_confidence = true;
      opt.confidence = std::stod(need_value(i, "--confidence"));
    } else if (arg == "--dists") {
      opt.token_dists = json::parse(need_value(i, "--dists"));
    } else if (arg == "--dim") {
      opt.dim = std::stoi(need_value(i, "--dim"));
    } else if (arg == "--no-handshake") {
      opt.no_handshake = true;
    } else if (arg == "--fail-handshake") {
      opt.fail_handshake = true;
    } else if (arg == "--hang-handshake") {
      opt.hang_handshake = true;
    } else if (arg == "--sleep-ms") {
      opt.sleep_ms = std::stoi(need_value(i, "--sleep-ms"));
    } else if (arg == "--drop-id") {
      opt.drop_id = need_value(i, "--drop-id");
    } else if (arg == "--garbage-on") {
      opt.garbage_on = need_value(i, "--garbage-on");
    } else if (arg == "--wrong-id-on") {
      opt.wrong_id_on = need_value(i, "--wrong-id-on");
    } else if (arg == "--die-on") {
      opt.die_on = need_value(i, "--die-on");
    } else {
      usage_error("unknown flag " + arg);
    }
  }
  if (opt.mode != "transcribe" && opt.mode != "embed") {
    usage_error("--mode must be transcribe or embed");
  }
  return opt;
}

void emit(const std::string& line) {
  std::cout << line << "\n" << std::flush;
}

// Deterministic pseudo-embedding: bytes of a hash of the payload, so the
// parent can assert stable vectors without real models.
std::vector<double> fake_vector(const std::string& payload, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  std::uint64_t h = pramana::fnv1a64(payload);
  for (int j = 0; j < dim; ++j) {
    if (j % 8 == 0 && j != 0) h = pramana::fnv1a64(pramana::to_hex(h));
    v[static_cast<std::size_t>(j)] =
        static_cast<double>((h >> (8 * (j % 8))) & 0xff) / 255.0;
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const Options opt = parse_args(argc, argv);

  std::string line;
  if (!std::getline(std::cin, line)) return 0;
  if (opt.no_handshake) return 1;
  if (opt.hang_handshake) {
    std::this_thread::sleep_for(std::chrono::hours(24));
    return 0;
  }
  json hello;
  try {
    hello = json::parse(line);
  } catch (const json::exception&) {
    return 1;
  }
  if (hello.value("op", "") != "hello") return 1;
  if (opt.fail_handshake) {
    emit(R"({"op":"goodbye","version":1})");
  } else {
    emit(R"({"op":"hello","version":1})");
  }

  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    json req;
    try {
      req = json::parse(line);
    } catch (const json::exception&) {
      emit("not json");
      continue;
    }
    const std::string id = req.value("id", "");
    if (!opt.die_on.empty() && id == opt.die_on) return 1;
    if (opt.sleep_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(opt.sleep_ms));
    }
    if (!opt.drop_id.empty() && id == opt.drop_id) continue;
    if (!opt.garbage_on.empty() && id == opt.garbage_on) {
      emit("this is not a reply");
      continue;
    }
    json reply;
    reply["id"] = (!opt.wrong_id_on.empty() && id == opt.wrong_id_on) ? id + "-bogus" : id;
    if (opt.mode == "transcribe") {
      reply["text"] = opt.text.empty() ? id : opt.text;
      if (opt.has_confidence) reply["confidence"] = opt.confidence;
      if (!opt.token_dists.is_null()) reply["token_dists"] = opt.token_dists;
    } else {
      const std::string payload =
          req.value("kind", "") == "text" ? req.value("text", "") : req.value("audio_path", "");
      reply["vector"] = fake_vector(payload, opt.dim);
    }
    emit(reply.dump());
  }
  return 0;
}
