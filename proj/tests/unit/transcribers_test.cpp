#include <atomic>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "pramana/errors.hpp"
#include "pramana/transcribers.hpp"
#include "test_util.hpp"

using nlohmann::json;
using pramana::AudioSegment;
using pramana::TranscriberSpec;

namespace {

std::vector<AudioSegment> segments_named(const std::vector<std::string>& ids) {
  std::vector<AudioSegment> segs;
  for (const auto& id : ids) {
    AudioSegment s;
    s.id = id;
    s.source_id = "src";
    s.audio_path = "src.wav";
    s.duration_s = 3.0;
    segs.push_back(std::move(s));
  }
  return segs;
}

TranscriberSpec replay_spec(const std::string& path) {
  TranscriberSpec spec;
  spec.id = "rp";
  spec.kind = TranscriberSpec::Kind::replay;
  spec.path = path;
  return spec;
}

TranscriberSpec child_spec(const std::string& extra_args, double timeout_s = 10.0) {
  TranscriberSpec spec;
  spec.id = "child";
  spec.kind = TranscriberSpec::Kind::subprocess;
  spec.command = std::string(ECHO_CHILD_PATH) + " --mode transcribe " + extra_args;
  spec.timeout_s = timeout_s;
  return spec;
}

// Minimal transcription server for the HTTP adapter tests. Echoes each
// segment id as its text unless told to misbehave.
class TestServer {
 public:
  explicit TestServer(bool drop_second = false, int status = 200) {
    server_.Post("/transcribe", [=](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      json results = json::array();
      std::size_t n = 0;
      for (const auto& seg : body.at("segments")) {
        ++n;
        if (drop_second && n == 2) continue;
        results.push_back({{"id", seg.at("id")}, {"text", seg.at("id")}});
      }
      if (status != 200) {
        res.status = status;
        return;
      }
      res.set_content(json{{"results", results}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~TestServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("replay adapter returns table entries verbatim") {
  testutil::TempDir dir;
  const auto path = dir.file("t.replay.jsonl");
  testutil::write_file(path,
                       R"({"id":"seg1","text":"अब तो"})"
                       "\n"
                       R"({"id":"seg2","text":"x","confidence":0.75})"
                       "\n"
                       R"({"id":"seg3","text":"y","token_dists":[[0.9,0.1]]})"
                       "\n");
  auto t = pramana::make_transcriber(replay_spec(path));
  t->healthcheck();
  const auto out = t->transcribe_batch(segments_named({"seg1", "seg2", "seg3"}));
  REQUIRE(out.size() == 3);
  REQUIRE(out[0].ok());
  CHECK(out[0].candidate->text == "अब तो");
  CHECK(out[0].candidate->transcriber_id == "rp");
  CHECK(!out[0].candidate->confidence.has_value());
  REQUIRE(out[1].ok());
  CHECK(out[1].candidate->confidence == doctest::Approx(0.75));
  REQUIRE(out[2].ok());
  REQUIRE(out[2].candidate->token_dists.has_value());
  CHECK(out[2].candidate->token_dists->at(0) == std::vector<double>{0.9, 0.1});

  // Determinism: a second pass gives the same answers.
  const auto again = t->transcribe_batch(segments_named({"seg1"}));
  CHECK(again[0].candidate->text == "अब तो");
}

TEST_CASE("replay adapter flags ids missing from its table") {
  testutil::TempDir dir;
  const auto path = dir.file("t.replay.jsonl");
  testutil::write_file(path, R"({"id":"seg1","text":"t"})" "\n");
  auto t = pramana::make_transcriber(replay_spec(path));
  const auto out = t->transcribe_batch(segments_named({"seg1", "ghost"}));
  REQUIRE(out.size() == 2);
  CHECK(out[0].ok());
  CHECK(!out[1].ok());
  CHECK(out[1].error == "incomplete batch: no replay entry for id 'ghost'");
}

TEST_CASE("replay adapter rejects unreadable and malformed tables") {
  testutil::TempDir dir;
  auto missing = pramana::make_transcriber(replay_spec(dir.file("nope.jsonl")));
  CHECK_THROWS_AS(missing->healthcheck(), pramana::DependencyError);

  const auto bad = dir.file("bad.jsonl");
  testutil::write_file(bad, R"({"id":"a","text":"t"})" "\n{oops\n");
  auto t = pramana::make_transcriber(replay_spec(bad));
  try {
    t->healthcheck();
    FAIL("expected ConfigError");
  } catch (const pramana::ConfigError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("spec validation catches structural mistakes") {
  TranscriberSpec spec;
  spec.kind = TranscriberSpec::Kind::replay;
  spec.path = "x.jsonl";
  CHECK_THROWS_AS(pramana::make_transcriber(spec), pramana::ConfigError);  // empty id
  spec.id = "ok";
  spec.batch_size = 0;
  CHECK_THROWS_AS(pramana::make_transcriber(spec), pramana::ConfigError);
  spec.batch_size = 1;
  spec.path.clear();
  CHECK_THROWS_AS(pramana::make_transcriber(spec), pramana::ConfigError);
}

TEST_CASE("subprocess adapter round-trips a batch through the echo child") {
  auto t = pramana::make_transcriber(child_spec(""));
  t->healthcheck();
  const auto out = t->transcribe_batch(segments_named({"a", "b", "c"}));
  REQUIRE(out.size() == 3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    REQUIRE(out[i].ok());
    // The echo child answers with the request id as the text.
    CHECK(out[i].candidate->text == out[i].segment_id);
  }
  CHECK(out[0].segment_id == "a");
  CHECK(out[2].segment_id == "c");
}

TEST_CASE("subprocess adapter passes confidence and distributions through") {
  auto t = pramana::make_transcriber(
      child_spec("--confidence 0.66 --dists [[0.9,0.1],[0.5,0.5]]"));
  const auto out = t->transcribe_batch(segments_named({"a"}));
  REQUIRE(out[0].ok());
  CHECK(out[0].candidate->confidence == doctest::Approx(0.66));
  REQUIRE(out[0].candidate->token_dists.has_value());
  CHECK(out[0].candidate->token_dists->size() == 2);
}

TEST_CASE("a dropped reply times out only the affected segment") {
  auto t = pramana::make_transcriber(child_spec("--drop-id b", 1.0));
  const auto out = t->transcribe_batch(segments_named({"a", "b", "c"}));
  REQUIRE(out.size() == 3);
  CHECK(out[0].ok());
  CHECK(out[2].ok());
  CHECK(!out[1].ok());
  CHECK(out[1].error == "transcriber timeout: id 'b'");
}

TEST_CASE("a child that dies mid-batch fails the unanswered segments") {
  auto t = pramana::make_transcriber(child_spec("--die-on b"));
  const auto out = t->transcribe_batch(segments_named({"a", "b", "c"}));
  REQUIRE(out.size() == 3);
  CHECK(out[0].ok());
  CHECK(!out[1].ok());
  CHECK(!out[2].ok());
  CHECK(out[1].error.find("incomplete batch") == 0);
}

TEST_CASE("garbage replies are a protocol violation") {
  auto t = pramana::make_transcriber(child_spec("--garbage-on a"));
  CHECK_THROWS_AS(t->transcribe_batch(segments_named({"a"})),
                  pramana::TranscriberError);
}

TEST_CASE("replies for unknown ids are a protocol violation") {
  auto t = pramana::make_transcriber(child_spec("--wrong-id-on a"));
  CHECK_THROWS_AS(t->transcribe_batch(segments_named({"a"})),
                  pramana::TranscriberError);
}

TEST_CASE("handshake failures are caught at healthcheck") {
  auto silent = pramana::make_transcriber(child_spec("--no-handshake", 1.0));
  CHECK_THROWS_AS(silent->healthcheck(), pramana::DependencyError);

  auto wrong = pramana::make_transcriber(child_spec("--fail-handshake"));
  CHECK_THROWS_AS(wrong->healthcheck(), pramana::TranscriberError);

  TranscriberSpec unspawnable;
  unspawnable.id = "nope";
  unspawnable.kind = TranscriberSpec::Kind::subprocess;
  unspawnable.command = "/nonexistent/binary/path";
  CHECK_THROWS_AS(pramana::make_transcriber(unspawnable)->healthcheck(),
                  pramana::DependencyError);
}

TEST_CASE("http adapter round-trips a batch") {
  TestServer server;
  TranscriberSpec spec;
  spec.id = "api";
  spec.kind = TranscriberSpec::Kind::http;
  spec.endpoint = server.endpoint();
  auto t = pramana::make_transcriber(spec);
  t->healthcheck();
  const auto out = t->transcribe_batch(segments_named({"u1", "u2"}));
  REQUIRE(out.size() == 2);
  CHECK(out[0].ok());
  CHECK(out[0].candidate->text == "u1");
  CHECK(out[1].candidate->text == "u2");
}

TEST_CASE("http adapter flags replies missing from the response") {
  TestServer server(/*drop_second=*/true);
  TranscriberSpec spec;
  spec.id = "api";
  spec.kind = TranscriberSpec::Kind::http;
  spec.endpoint = server.endpoint();
  auto t = pramana::make_transcriber(spec);
  const auto out = t->transcribe_batch(segments_named({"u1", "u2"}));
  CHECK(out[0].ok());
  CHECK(!out[1].ok());
  CHECK(out[1].error == "incomplete batch: no reply in response: id 'u2'");
}

TEST_CASE("http adapter treats non-200 statuses as batch failures") {
  TestServer server(/*drop_second=*/false, /*status=*/500);
  TranscriberSpec spec;
  spec.id = "api";
  spec.kind = TranscriberSpec::Kind::http;
  spec.endpoint = server.endpoint();
  auto t = pramana::make_transcriber(spec);
  CHECK_THROWS_AS(t->transcribe_batch(segments_named({"u1"})),
                  pramana::TranscriberError);
}

TEST_CASE("http adapter reports unreachable endpoints") {
  TranscriberSpec spec;
  spec.id = "api";
  spec.kind = TranscriberSpec::Kind::http;
  spec.endpoint = "http://127.0.0.1:1";  // reserved port, nothing listens
  auto t = pramana::make_transcriber(spec);
  try {
    t->healthcheck();
    FAIL("expected DependencyError");
  } catch (const pramana::DependencyError& e) {
    CHECK(std::string(e.what()).find("connection refused") != std::string::npos);
  }
  CHECK_THROWS_AS(t->transcribe_batch(segments_named({"u1"})),
                  pramana::TranscriberError);
}
