#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "pramana/embeddings.hpp"
#include "pramana/errors.hpp"
#include "pramana/evaluators.hpp"
#include "test_util.hpp"

using nlohmann::json;
using pramana::AudioSegment;
using pramana::EmbeddingProviderSpec;

namespace {

EmbeddingProviderSpec mock_spec(const std::string& alphabet) {
  EmbeddingProviderSpec spec;
  spec.id = "mock";
  spec.kind = EmbeddingProviderSpec::Kind::mock_bag_of_chars;
  spec.alphabet = alphabet;
  return spec;
}

AudioSegment segment_with_reference(const std::string& id, const std::string& text) {
  AudioSegment seg;
  seg.id = id;
  seg.source_id = "src";
  seg.audio_path = "src.wav";
  seg.duration_s = 3.0;
  seg.reference_text = text;
  return seg;
}

}  // namespace

TEST_CASE("bag-of-chars mock produces normalized count vectors") {
  auto p = pramana::make_embedding_provider(mock_spec("ab"));
  const auto v = p->embed_text("aab");
  REQUIRE(v.size() == 2);
  const double n = std::sqrt(5.0);
  CHECK(v[0] == doctest::Approx(2.0 / n));
  CHECK(v[1] == doctest::Approx(1.0 / n));
  CHECK(p->embed_text("aab") == v);  // deterministic
  // Characters outside the alphabet are ignored.
  CHECK(p->embed_text("aab xyz!") == v);
  // Disjoint character sets are orthogonal.
  auto wide = pramana::make_embedding_provider(mock_spec("abcd"));
  CHECK(pramana::cosine_similarity(wide->embed_text("ab"), wide->embed_text("cd")) ==
        doctest::Approx(0.0));
  CHECK(pramana::cosine_similarity(wide->embed_text("abab"), wide->embed_text("ba")) ==
        doctest::Approx(1.0));
  CHECK(wide->embed_text("ab") == oracle::bag_of_chars(U"ab", U"abcd"));
}

TEST_CASE("bag-of-chars vector over no known characters is all zeros") {
  auto p = pramana::make_embedding_provider(mock_spec("ab"));
  const auto v = p->embed_text("xyz");
  CHECK(v == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_WITH_AS(pramana::cosine_similarity(v, p->embed_text("a")),
                       "zero vector", pramana::EvaluatorInputError);
}

TEST_CASE("bag-of-chars audio embedding uses the reference text") {
  auto p = pramana::make_embedding_provider(mock_spec("ab"));
  const auto seg = segment_with_reference("s1", "aab");
  CHECK(p->embed_audio(seg) == p->embed_text("aab"));
  AudioSegment blank;
  blank.id = "s2";
  CHECK_THROWS_AS(p->embed_audio(blank), pramana::EvaluatorInputError);
}

TEST_CASE("bag-of-chars spec validation") {
  auto bad = mock_spec("aba");  // duplicate character
  CHECK_THROWS_AS(pramana::make_embedding_provider(bad), pramana::ConfigError);
  auto mismatched = mock_spec("ab");
  mismatched.dimension = 5;
  CHECK_THROWS_AS(pramana::make_embedding_provider(mismatched), pramana::ConfigError);
  auto empty = mock_spec("");
  CHECK_THROWS_AS(pramana::make_embedding_provider(empty), pramana::ConfigError);
}

TEST_CASE("text keys are the documented hash of the utf-8 bytes") {
  // FNV-1a offset basis: the hash of the empty string.
  CHECK(pramana::text_embedding_key("") == "text:cbf29ce484222325");
  CHECK(pramana::text_embedding_key("hello") == pramana::text_embedding_key("hello"));
  CHECK(pramana::text_embedding_key("hello") != pramana::text_embedding_key("hellp"));
  CHECK(pramana::text_embedding_key("x").rfind("text:", 0) == 0);
}

TEST_CASE("replay provider returns stored vectors bit-exactly") {
  testutil::TempDir dir;
  const auto path = dir.file("emb.replay.jsonl");
  const std::vector<double> tv = {0.125, -0.5, 0.75};
  const std::vector<double> av = {1.0, 0.0, 0.0};
  json trow = {{"id", pramana::text_embedding_key("hello")}, {"vector", tv}};
  json arow = {{"id", "seg1"}, {"vector", av}};
  testutil::write_file(path, trow.dump() + "\n" + arow.dump() + "\n");

  EmbeddingProviderSpec spec;
  spec.id = "replay";
  spec.kind = EmbeddingProviderSpec::Kind::replay;
  spec.path = path;
  spec.dimension = 3;
  auto p = pramana::make_embedding_provider(spec);
  p->healthcheck();
  CHECK(p->embed_text("hello") == tv);
  CHECK(p->embed_audio(segment_with_reference("seg1", "ignored")) == av);

  CHECK_THROWS_AS(p->embed_text("absent"), pramana::EvaluatorInputError);
  AudioSegment ghost;
  ghost.id = "ghost";
  CHECK_THROWS_AS(p->embed_audio(ghost), pramana::EvaluatorInputError);
}

TEST_CASE("replay provider rejects unreadable tables") {
  testutil::TempDir dir;
  EmbeddingProviderSpec spec;
  spec.id = "replay";
  spec.kind = EmbeddingProviderSpec::Kind::replay;
  spec.path = dir.file("missing.jsonl");
  spec.dimension = 2;
  CHECK_THROWS_AS(pramana::make_embedding_provider(spec)->healthcheck(),
                  pramana::DependencyError);
}

TEST_CASE("subprocess provider round-trips and caches by key") {
  testutil::TempDir dir;
  const auto log = dir.file("requests.log");
  const auto script = dir.file("counting_child.sh");
  // A minimal wire-protocol child that logs every request it actually
  // receives, so the test can count provider round-trips.
  testutil::write_file(script,
                       "#!/bin/sh\n"
                       "read hello\n"
                       "printf '%s\\n' '{\"op\":\"hello\",\"version\":1}'\n"
                       "while read line; do\n"
                       "  printf '%s\\n' \"$line\" >> \"$1\"\n"
                       "  id=$(printf '%s' \"$line\" | sed -n 's/.*\"id\":\"\\([^\"]*\\)\".*/\\1/p')\n"
                       "  printf '%s\\n' \"{\\\"id\\\":\\\"$id\\\",\\\"vector\\\":[1.0,0.5]}\"\n"
                       "done\n");

  EmbeddingProviderSpec spec;
  spec.id = "sub";
  spec.kind = EmbeddingProviderSpec::Kind::subprocess;
  spec.command = "/bin/sh " + script + " " + log;
  spec.dimension = 2;
  auto p = pramana::make_embedding_provider(spec);
  p->healthcheck();

  const auto v1 = p->embed_text("alpha");
  CHECK(v1 == std::vector<double>{1.0, 0.5});
  CHECK(p->embed_text("alpha") == v1);   // served from the cache
  CHECK(p->embed_text("beta") == v1);    // new key, new round-trip
  const auto seg = segment_with_reference("seg9", "beta");
  CHECK(p->embed_audio(seg) == v1);      // audio keys are separate
  CHECK(p->embed_audio(seg) == v1);      // cached

  const auto logged = testutil::slurp(log);
  std::size_t lines = 0;
  for (char c : logged) lines += (c == '\n');
  CHECK(lines == 3);  // alpha, beta, audio seg9 — each exactly once
  CHECK(logged.find("\"kind\":\"text\"") != std::string::npos);
  CHECK(logged.find("\"kind\":\"audio\"") != std::string::npos);
}

TEST_CASE("subprocess provider enforces the declared dimension") {
  EmbeddingProviderSpec spec;
  spec.id = "sub";
  spec.kind = EmbeddingProviderSpec::Kind::subprocess;
  spec.command = std::string(ECHO_CHILD_PATH) + " --mode embed --dim 2";
  spec.dimension = 3;
  auto p = pramana::make_embedding_provider(spec);
  try {
    p->embed_text("anything");
    FAIL("expected DependencyError");
  } catch (const pramana::DependencyError& e) {
    CHECK(std::string(e.what()).find("dimension mismatch") != std::string::npos);
  }
}

TEST_CASE("subprocess provider vectors are stable across spawns") {
  EmbeddingProviderSpec spec;
  spec.id = "sub";
  spec.kind = EmbeddingProviderSpec::Kind::subprocess;
  spec.command = std::string(ECHO_CHILD_PATH) + " --mode embed --dim 4";
  spec.dimension = 4;
  auto a = pramana::make_embedding_provider(spec);
  auto b = pramana::make_embedding_provider(spec);
  CHECK(a->embed_text("stable") == b->embed_text("stable"));
  CHECK(a->embed_text("stable") != a->embed_text("other"));
}
