#include "pestvl/caption.hpp"

#include "pestvl/sha256.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace pestvl::caption {

namespace {

using nlohmann::json;

json parseFile(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + ": " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + " is not valid JSON: " + path + ": " +
                      e.what());
  }
}

std::string getString(const json& j, const char* key, const char* what) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ConfigError(std::string(what) + " needs string field '" + key + "'");
  }
  return j.at(key).get<std::string>();
}

}  // namespace

std::vector<ExpertKnowledgeEntry> loadKnowledge(const std::string& path) {
  const json j = parseFile(path, "expert knowledge file");
  if (!j.is_array()) {
    throw ConfigError("expert knowledge file must be a JSON array: " + path);
  }
  std::vector<ExpertKnowledgeEntry> out;
  out.reserve(j.size());
  for (const auto& item : j) {
    ExpertKnowledgeEntry e;
    e.speciesName = getString(item, "species", "knowledge entry");
    if (e.speciesName.empty()) {
      throw ConfigError("knowledge entry has an empty species name");
    }
    if (!item.contains("attributes") || !item.at("attributes").is_array() ||
        item.at("attributes").empty()) {
      throw ConfigError("knowledge entry for '" + e.speciesName +
                        "' needs at least one attribute");
    }
    for (const auto& a : item.at("attributes")) {
      e.attributes.push_back({getString(a, "facet", "attribute"),
                              getString(a, "description", "attribute")});
    }
    out.push_back(std::move(e));
  }
  return out;
}

CotTemplate loadTemplate(const std::string& path) {
  const json j = parseFile(path, "prompt template file");
  CotTemplate t;
  t.version = getString(j, "version", "prompt template");
  if (!j.contains("steps") || !j.at("steps").is_array() ||
      j.at("steps").empty()) {
    throw ConfigError("prompt template needs a non-empty steps array: " + path);
  }
  for (const auto& s : j.at("steps")) {
    if (!s.is_string()) {
      throw ConfigError("prompt template steps must be strings: " + path);
    }
    t.steps.push_back(s.get<std::string>());
  }
  return t;
}

std::string renderAttributes(const ExpertKnowledgeEntry& entry) {
  std::string out;
  for (size_t i = 0; i < entry.attributes.size(); ++i) {
    if (i) out += "; ";
    out += entry.attributes[i].facet + ": " + entry.attributes[i].description;
  }
  return out;
}

std::string buildPrompt(const ExpertKnowledgeEntry& entry,
                        const CotTemplate& tmpl,
                        const std::string& imageContext) {
  const std::string attributes = renderAttributes(entry);
  std::string out;
  for (size_t si = 0; si < tmpl.steps.size(); ++si) {
    if (si) out += '\n';
    const std::string& step = tmpl.steps[si];
    size_t pos = 0;
    while (pos < step.size()) {
      const size_t open = step.find('{', pos);
      if (open == std::string::npos) {
        out.append(step, pos, std::string::npos);
        break;
      }
      out.append(step, pos, open - pos);
      const size_t close = step.find('}', open);
      if (close == std::string::npos) {
        throw ConfigError("unterminated placeholder in template step " +
                          std::to_string(si + 1));
      }
      const std::string name = step.substr(open + 1, close - open - 1);
      if (name == "species") {
        out += entry.speciesName;
      } else if (name == "attributes") {
        out += attributes;
      } else if (name == "image_context") {
        out += imageContext;
      } else {
        throw ConfigError("unbound placeholder: " + name);
      }
      pos = close + 1;
    }
  }
  return out;
}

std::string promptHash(const std::string& prompt) {
  return hash::hex(hash::sha256(prompt));
}

std::string toJsonLine(const CaptionRecord& rec) {
  const json j = {{"imageId", rec.imageId},
                  {"speciesLabel", rec.speciesLabel},
                  {"caption", rec.caption},
                  {"promptHash", rec.promptHash},
                  {"modelId", rec.modelId},
                  {"timestamp", rec.timestamp}};
  return j.dump();
}

CaptionRecord fromJsonLine(const std::string& line, int lineNumber) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception&) {
    throw DataError("caption store line " + std::to_string(lineNumber) +
                    " is not valid JSON");
  }
  CaptionRecord rec;
  try {
    rec.imageId = j.at("imageId").get<std::string>();
    rec.speciesLabel = j.at("speciesLabel").get<std::string>();
    rec.caption = j.at("caption").get<std::string>();
    rec.promptHash = j.at("promptHash").get<std::string>();
    rec.modelId = j.at("modelId").get<std::string>();
    rec.timestamp = j.at("timestamp").get<int64_t>();
  } catch (const json::exception&) {
    throw DataError("caption store line " + std::to_string(lineNumber) +
                    " is missing required fields");
  }
  if (rec.caption.empty()) {
    throw DataError("caption store line " + std::to_string(lineNumber) +
                    " has an empty caption");
  }
  return rec;
}

void saveRecords(const std::string& path,
                 const std::vector<CaptionRecord>& recs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write caption store: " + path);
  for (const auto& r : recs) out << toJsonLine(r) << '\n';
  if (!out) throw DataError("failed writing caption store: " + path);
}

std::vector<CaptionRecord> loadRecords(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open caption store: " + path);
  std::vector<CaptionRecord> out;
  std::string line;
  int lineNumber = 0;
  while (std::getline(in, line)) {
    ++lineNumber;
    if (line.empty()) continue;
    out.push_back(fromJsonLine(line, lineNumber));
  }
  return out;
}

}  // namespace pestvl::caption
