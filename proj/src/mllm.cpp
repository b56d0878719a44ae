#include "pestvl/mllm.hpp"

#include "pestvl/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace pestvl::mllm {

namespace {

std::string base64(const std::string& bytes) {
  static const char* table =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 2 < bytes.size()) {
    const uint32_t v = (uint32_t(uint8_t(bytes[i])) << 16) |
                       (uint32_t(uint8_t(bytes[i + 1])) << 8) |
                       uint32_t(uint8_t(bytes[i + 2]));
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out.push_back(table[(v >> 6) & 63]);
    out.push_back(table[v & 63]);
    i += 3;
  }
  if (i + 1 == bytes.size()) {
    const uint32_t v = uint32_t(uint8_t(bytes[i])) << 16;
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const uint32_t v = (uint32_t(uint8_t(bytes[i])) << 16) |
                       (uint32_t(uint8_t(bytes[i + 1])) << 8);
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out.push_back(table[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

struct SplitUrl {
  std::string base;  // scheme://authority
  std::string path;  // leading slash
};

SplitUrl splitUrl(const std::string& url) {
  const size_t scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw ConfigError("endpoint URL needs a scheme: " + url);
  }
  const size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

ClientConfig fromEnvironment() {
  ClientConfig cfg;
  const char* url = std::getenv("MLLM_API_URL");
  const char* key = std::getenv("MLLM_API_KEY");
  if (!url || !*url) throw ConfigError("MLLM_API_URL is not set");
  if (!key || !*key) throw ConfigError("MLLM_API_KEY is not set");
  cfg.url = url;
  cfg.apiKey = key;
  return cfg;
}

std::string postJson(const std::string& url, const std::string& apiKey,
                     const std::string& body, int maxAttempts,
                     int backoffBaseMs, int timeoutSeconds) {
  if (maxAttempts < 1) throw ConfigError("maxAttempts must be at least 1");
  const SplitUrl split = splitUrl(url);
  httplib::Client cli(split.base);
  cli.set_connection_timeout(timeoutSeconds, 0);
  cli.set_read_timeout(timeoutSeconds, 0);
  const httplib::Headers headers = {{"Authorization", "Bearer " + apiKey}};

  std::string lastProblem = "no attempt made";
  for (int attempt = 1; attempt <= maxAttempts; ++attempt) {
    auto res = cli.Post(split.path, headers, body, "application/json");
    if (res) {
      if (res->status == 200) return res->body;
      if (res->status == 401 || res->status == 403) {
        throw AuthError("endpoint rejected credentials (HTTP " +
                        std::to_string(res->status) + ")");
      }
      lastProblem = "HTTP " + std::to_string(res->status);
    } else {
      lastProblem = "connection failed (" + httplib::to_string(res.error()) + ")";
    }
    if (attempt < maxAttempts) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(int64_t(backoffBaseMs) << (attempt - 1)));
    }
  }
  throw TransportError("request failed after " + std::to_string(maxAttempts) +
                       " attempts: " + lastProblem);
}

std::string requestCaption(const ClientConfig& cfg, const std::string& prompt,
                           const std::string& imageBytes) {
  const nlohmann::json req = {{"model", cfg.modelId},
                              {"prompt", prompt},
                              {"image", base64(imageBytes)}};
  const std::string body = postJson(cfg.url, cfg.apiKey, req.dump(),
                                    cfg.maxAttempts, cfg.backoffBaseMs,
                                    cfg.timeoutSeconds);
  nlohmann::json rep;
  try {
    rep = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw MalformedResponseError("caption response is not JSON");
  }
  if (!rep.contains("caption") || !rep["caption"].is_string()) {
    throw MalformedResponseError("caption response lacks a caption string");
  }
  const std::string caption = rep["caption"].get<std::string>();
  if (caption.empty()) throw MalformedResponseError("caption is empty");
  return caption;
}

caption::CaptionRecord generateCaption(const ClientConfig& cfg,
                                       const std::string& imageId,
                                       const caption::ExpertKnowledgeEntry& entry,
                                       const caption::CotTemplate& tmpl,
                                       const std::string& imageContext,
                                       const std::string& imageBytes,
                                       int64_t timestamp) {
  const std::string prompt = caption::buildPrompt(entry, tmpl, imageContext);
  caption::CaptionRecord rec;
  rec.imageId = imageId;
  rec.speciesLabel = entry.speciesName;
  rec.caption = requestCaption(cfg, prompt, imageBytes);
  rec.promptHash = caption::promptHash(prompt);
  rec.modelId = cfg.modelId;
  rec.timestamp = timestamp;
  return rec;
}

caption::CaptionRecord offlineCaption(const std::string& imageId,
                                      const caption::ExpertKnowledgeEntry& entry,
                                      const caption::CotTemplate& tmpl,
                                      const std::string& imageContext) {
  const std::string prompt = caption::buildPrompt(entry, tmpl, imageContext);
  caption::CaptionRecord rec;
  rec.imageId = imageId;
  rec.speciesLabel = entry.speciesName;
  rec.caption = "A " + entry.speciesName + " with " +
                caption::renderAttributes(entry) + ".";
  rec.promptHash = caption::promptHash(prompt);
  rec.modelId = "offline";
  rec.timestamp = 0;
  return rec;
}

}  // namespace pestvl::mllm
