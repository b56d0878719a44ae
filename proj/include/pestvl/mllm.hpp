#pragma once

// HTTP client for the captioning endpoint: bearer-authenticated JSON POST
// with bounded exponential-backoff retries. Failures map to one error type
// per category so batch drivers can branch (AuthError, TransportError,
// MalformedResponseError).

#include "pestvl/caption.hpp"

#include <string>

namespace pestvl::mllm {

struct ClientConfig {
  std::string url;  // http://host[:port]/path
  std::string apiKey;
  std::string modelId = "pest-captioner";
  int maxAttempts = 3;
  int backoffBaseMs = 200;  // doubles per retry
  int timeoutSeconds = 30;
};

// Reads MLLM_API_URL and MLLM_API_KEY; missing variables are a ConfigError.
ClientConfig fromEnvironment();

// Low-level call: POST {model, prompt, image (base64)} and return the
// caption string from the response body.
std::string requestCaption(const ClientConfig& cfg, const std::string& prompt,
                           const std::string& imageBytes);

// Shared transport for sibling endpoints (the remote text encoder): POST a
// JSON body, apply the retry policy, return the 200 response body.
std::string postJson(const std::string& url, const std::string& apiKey,
                     const std::string& body, int maxAttempts,
                     int backoffBaseMs, int timeoutSeconds);

// Renders the prompt, calls the endpoint, and assembles the stored record.
caption::CaptionRecord generateCaption(const ClientConfig& cfg,
                                       const std::string& imageId,
                                       const caption::ExpertKnowledgeEntry& entry,
                                       const caption::CotTemplate& tmpl,
                                       const std::string& imageContext,
                                       const std::string& imageBytes,
                                       int64_t timestamp);

// Deterministic on-device caption from the knowledge entry alone, used when
// no endpoint is configured; keeps the full pipeline runnable offline.
caption::CaptionRecord offlineCaption(const std::string& imageId,
                                      const caption::ExpertKnowledgeEntry& entry,
                                      const caption::CotTemplate& tmpl,
                                      const std::string& imageContext);

}  // namespace pestvl::mllm
