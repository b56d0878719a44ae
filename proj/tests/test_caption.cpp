#include <doctest.h>

#include "pestvl/caption.hpp"
#include "pestvl/mllm.hpp"
#include "pestvl/sha256.hpp"
#include "pestvl/textencoder.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

using namespace pestvl;
using namespace pestvl::caption;

namespace {

std::string tempPath(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "pestvl_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ExpertKnowledgeEntry rollerEntry() {
  return {"rice leaf roller",
          {{"color", "pale yellow body"}, {"markings", "dark wing bands"}}};
}

CotTemplate rollerTemplate() {
  CotTemplate t;
  t.steps = {"Identify the insect. Species hint: {species}.",
             "Check these field marks: {attributes}.",
             "Context: {image_context}"};
  t.version = "v1";
  return t;
}

// Spins up a local endpoint on a free port; handlers are installed by the
// constructor argument before the listener starts.
struct StubServer {
  httplib::Server svr;
  std::thread th;
  int port = 0;

  template <class F>
  explicit StubServer(F setup) {
    setup(svr);
    port = svr.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    th = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }
  ~StubServer() {
    svr.stop();
    th.join();
  }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port) + path;
  }
};

mllm::ClientConfig stubConfig(const StubServer& server) {
  mllm::ClientConfig cfg;
  cfg.url = server.url("/v1/caption");
  cfg.apiKey = "test-key";
  cfg.maxAttempts = 3;
  cfg.backoffBaseMs = 1;
  cfg.timeoutSeconds = 5;
  return cfg;
}

}  // namespace

TEST_CASE("prompt renders the template with knowledge and context") {
  const std::string prompt =
      buildPrompt(rollerEntry(), rollerTemplate(), "close-up on a rice leaf");
  CHECK(prompt ==
        "Identify the insect. Species hint: rice leaf roller.\n"
        "Check these field marks: color: pale yellow body; markings: dark "
        "wing bands.\n"
        "Context: close-up on a rice leaf");
  CHECK(promptHash(prompt) == hash::hex(hash::sha256(prompt)));
}

TEST_CASE("attribute rendering joins facets in order") {
  CHECK(renderAttributes(rollerEntry()) ==
        "color: pale yellow body; markings: dark wing bands");
  CHECK(renderAttributes({"x", {}}).empty());
}

TEST_CASE("unknown or broken placeholders are config errors") {
  CotTemplate bad = rollerTemplate();
  bad.steps[0] = "Hint: {speciess}.";
  CHECK_THROWS_WITH_AS(buildPrompt(rollerEntry(), bad, ""),
                       "unbound placeholder: speciess", ConfigError);
  bad.steps[0] = "Hint: {species.";
  CHECK_THROWS_AS(buildPrompt(rollerEntry(), bad, ""), ConfigError);
}

TEST_CASE("knowledge and template fixtures load from JSON") {
  const std::string kpath = tempPath("knowledge.json");
  {
    std::ofstream out(kpath);
    out << R"([{"species": "corn borer",
                "attributes": [{"facet": "color", "description": "tan"}]}])";
  }
  const auto entries = loadKnowledge(kpath);
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].speciesName == "corn borer");
  CHECK(entries[0].attributes ==
        std::vector<Attribute>{{"color", "tan"}});

  const std::string tpath = tempPath("template.json");
  {
    std::ofstream out(tpath);
    out << R"({"version": "v2", "steps": ["Look at {species}."]})";
  }
  const auto tmpl = loadTemplate(tpath);
  CHECK(tmpl.version == "v2");
  CHECK(tmpl.steps == std::vector<std::string>{"Look at {species}."});

  {
    std::ofstream out(kpath);
    out << R"([{"species": "corn borer", "attributes": []}])";
  }
  CHECK_THROWS_AS(loadKnowledge(kpath), ConfigError);
  {
    std::ofstream out(tpath);
    out << R"({"version": "v2", "steps": []})";
  }
  CHECK_THROWS_AS(loadTemplate(tpath), ConfigError);
}

TEST_CASE("caption store round-trips and rewrites byte identically") {
  std::vector<CaptionRecord> recs;
  recs.push_back({"img_0001", "rice leaf roller", "A slender moth.",
                  promptHash("p1"), "pest-captioner", 1700000000});
  recs.push_back({"img_0002", "corn borer", "A tan caterpillar.",
                  promptHash("p2"), "pest-captioner", 1700000060});
  const std::string p1 = tempPath("caps1.jsonl");
  const std::string p2 = tempPath("caps2.jsonl");
  saveRecords(p1, recs);
  const auto loaded = loadRecords(p1);
  CHECK(loaded == recs);
  saveRecords(p2, loaded);
  CHECK(slurp(p1) == slurp(p2));

  // Keys serialize in a fixed alphabetical order.
  const std::string line = toJsonLine(recs[0]);
  CHECK(line.find("\"caption\"") < line.find("\"imageId\""));
  CHECK(line.find("\"imageId\"") < line.find("\"modelId\""));
  CHECK(line.find("\"modelId\"") < line.find("\"promptHash\""));
  CHECK(line.find("\"promptHash\"") < line.find("\"speciesLabel\""));
  CHECK(line.find("\"speciesLabel\"") < line.find("\"timestamp\""));
}

TEST_CASE("corrupt caption store lines name their line number") {
  const std::string path = tempPath("caps_bad.jsonl");
  {
    std::ofstream out(path);
    out << toJsonLine({"a", "b", "c", "d", "e", 1}) << "\n";
    out << "{not json\n";
  }
  CHECK_THROWS_WITH_AS(loadRecords(path),
                       "caption store line 2 is not valid JSON", DataError);
  {
    std::ofstream out(path);
    out << "{\"imageId\": \"a\"}\n";
  }
  CHECK_THROWS_WITH_AS(loadRecords(path),
                       "caption store line 1 is missing required fields",
                       DataError);
  {
    std::ofstream out(path);
    out << toJsonLine({"a", "b", "", "d", "e", 1}) << "\n";
  }
  CHECK_THROWS_AS(loadRecords(path), DataError);
}

TEST_CASE("caption endpoint round-trips prompt and image") {
  std::atomic<int> hits{0};
  nlohmann::json seen;
  StubServer server([&](httplib::Server& svr) {
    svr.Post("/v1/caption", [&](const httplib::Request& req,
                                httplib::Response& res) {
      ++hits;
      seen = nlohmann::json::parse(req.body);
      CHECK(req.get_header_value("Authorization") == "Bearer test-key");
      res.set_content(R"({"caption": "A pale moth with banded wings."})",
                      "application/json");
    });
  });

  const std::string caption =
      mllm::requestCaption(stubConfig(server), "describe the pest", "pest");
  CHECK(caption == "A pale moth with banded wings.");
  CHECK(hits == 1);
  CHECK(seen.at("model") == "pest-captioner");
  CHECK(seen.at("prompt") == "describe the pest");
  CHECK(seen.at("image") == "cGVzdA==");  // base64("pest")
}

TEST_CASE("transient failures retry with backoff until success") {
  std::atomic<int> hits{0};
  StubServer server([&](httplib::Server& svr) {
    svr.Post("/v1/caption", [&](const httplib::Request&,
                                httplib::Response& res) {
      const int n = ++hits;
      if (n < 3) {
        res.status = 500;
        res.set_content("busy", "text/plain");
      } else {
        res.set_content(R"({"caption": "ok after retries"})",
                        "application/json");
      }
    });
  });

  CHECK(mllm::requestCaption(stubConfig(server), "p", "i") ==
        "ok after retries");
  CHECK(hits == 3);
}

TEST_CASE("persistent failures exhaust the retry budget") {
  std::atomic<int> hits{0};
  StubServer server([&](httplib::Server& svr) {
    svr.Post("/v1/caption", [&](const httplib::Request&,
                                httplib::Response& res) {
      ++hits;
      res.status = 503;
    });
  });

  auto cfg = stubConfig(server);
  cfg.maxAttempts = 2;
  CHECK_THROWS_AS(mllm::requestCaption(cfg, "p", "i"), TransportError);
  CHECK(hits == 2);
}

TEST_CASE("auth rejections fail immediately without retry") {
  std::atomic<int> hits{0};
  StubServer server([&](httplib::Server& svr) {
    svr.Post("/v1/caption", [&](const httplib::Request&,
                                httplib::Response& res) {
      ++hits;
      res.status = 401;
    });
  });

  CHECK_THROWS_AS(mllm::requestCaption(stubConfig(server), "p", "i"),
                  AuthError);
  CHECK(hits == 1);
}

TEST_CASE("malformed success bodies are not retried") {
  std::atomic<int> hits{0};
  std::string body = "not json";
  StubServer server([&](httplib::Server& svr) {
    svr.Post("/v1/caption", [&](const httplib::Request&,
                                httplib::Response& res) {
      ++hits;
      res.set_content(body, "application/json");
    });
  });

  CHECK_THROWS_AS(mllm::requestCaption(stubConfig(server), "p", "i"),
                  MalformedResponseError);
  CHECK(hits == 1);
  body = R"({"text": "wrong key"})";
  CHECK_THROWS_AS(mllm::requestCaption(stubConfig(server), "p", "i"),
                  MalformedResponseError);
  body = R"({"caption": ""})";
  CHECK_THROWS_AS(mllm::requestCaption(stubConfig(server), "p", "i"),
                  MalformedResponseError);
}

TEST_CASE("unreachable endpoints surface as transport errors") {
  mllm::ClientConfig cfg;
  cfg.url = "http://127.0.0.1:1/v1/caption";  // nothing listens here
  cfg.apiKey = "k";
  cfg.maxAttempts = 2;
  cfg.backoffBaseMs = 1;
  cfg.timeoutSeconds = 1;
  CHECK_THROWS_AS(mllm::requestCaption(cfg, "p", "i"), TransportError);
}

TEST_CASE("generated records carry the prompt hash and metadata") {
  StubServer server([&](httplib::Server& svr) {
    svr.Post("/v1/caption", [&](const httplib::Request&,
                                httplib::Response& res) {
      res.set_content(R"({"caption": "A banded moth."})", "application/json");
    });
  });

  const auto rec =
      mllm::generateCaption(stubConfig(server), "img_0042", rollerEntry(),
                            rollerTemplate(), "field photo", "bytes", 1712345678);
  CHECK(rec.imageId == "img_0042");
  CHECK(rec.speciesLabel == "rice leaf roller");
  CHECK(rec.caption == "A banded moth.");
  CHECK(rec.modelId == "pest-captioner");
  CHECK(rec.timestamp == 1712345678);
  CHECK(rec.promptHash ==
        promptHash(buildPrompt(rollerEntry(), rollerTemplate(), "field photo")));
}

TEST_CASE("offline captions are deterministic functions of the knowledge") {
  const auto a = mllm::offlineCaption("img_7", rollerEntry(), rollerTemplate(),
                                      "ctx");
  const auto b = mllm::offlineCaption("img_7", rollerEntry(), rollerTemplate(),
                                      "ctx");
  CHECK(a == b);
  CHECK(a.caption ==
        "A rice leaf roller with color: pale yellow body; markings: dark "
        "wing bands.");
  CHECK(a.modelId == "offline");
  CHECK(a.timestamp == 0);
  CHECK(a.promptHash ==
        promptHash(buildPrompt(rollerEntry(), rollerTemplate(), "ctx")));
}

TEST_CASE("remote text encoder round-trips embeddings and checks dims") {
  std::string payload = R"({"embedding": [0.5, -0.5, 0.25, 0.0]})";
  StubServer server([&](httplib::Server& svr) {
    svr.Post("/v1/embed", [&](const httplib::Request& req,
                              httplib::Response& res) {
      const auto j = nlohmann::json::parse(req.body);
      CHECK(j.at("model") == "text-encoder");
      CHECK(j.at("input") == "a caption");
      res.set_content(payload, "application/json");
    });
  });

  text::RemoteEncoderConfig cfg;
  cfg.url = server.url("/v1/embed");
  cfg.apiKey = "k";
  cfg.expectedDim = 4;
  cfg.backoffBaseMs = 1;
  text::RemoteEncoder enc(cfg);
  CHECK(enc.encode("a caption") ==
        std::vector<float>{0.5f, -0.5f, 0.25f, 0.0f});

  payload = R"({"embedding": [0.5, -0.5]})";
  CHECK_THROWS_AS(enc.encode("a caption"), MalformedResponseError);
  payload = R"({"vector": [1, 2, 3, 4]})";
  CHECK_THROWS_AS(enc.encode("a caption"), MalformedResponseError);
}

TEST_CASE("environment config requires both endpoint variables") {
  ::unsetenv("MLLM_API_URL");
  ::unsetenv("MLLM_API_KEY");
  CHECK_THROWS_AS(mllm::fromEnvironment(), ConfigError);
  ::setenv("MLLM_API_URL", "http://example.test/v1/caption", 1);
  CHECK_THROWS_AS(mllm::fromEnvironment(), ConfigError);
  ::setenv("MLLM_API_KEY", "secret", 1);
  const auto cfg = mllm::fromEnvironment();
  CHECK(cfg.url == "http://example.test/v1/caption");
  CHECK(cfg.apiKey == "secret");
  ::unsetenv("MLLM_API_URL");
  ::unsetenv("MLLM_API_KEY");
}
