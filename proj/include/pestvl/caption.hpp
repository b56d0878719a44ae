#pragma once

// Expert-knowledge prompt rendering and the caption record store. Prompts are
// pure string functions of (knowledge entry, template, image context), so
// their SHA-256 is reproducible anywhere; records persist as JSON Lines.

#include "pestvl/errors.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pestvl::caption {

struct Attribute {
  std::string facet;
  std::string description;
  bool operator==(const Attribute&) const = default;
};

struct ExpertKnowledgeEntry {
  std::string speciesName;
  std::vector<Attribute> attributes;  // color, markings, texture, shape, habitat...
  bool operator==(const ExpertKnowledgeEntry&) const = default;
};

struct CotTemplate {
  std::vector<std::string> steps;  // placeholders: {species} {attributes} {image_context}
  std::string version;
  bool operator==(const CotTemplate&) const = default;
};

struct CaptionRecord {
  std::string imageId;
  std::string speciesLabel;
  std::string caption;
  std::string promptHash;  // hex SHA-256 of the rendered prompt
  std::string modelId;
  int64_t timestamp = 0;  // UTC seconds
  bool operator==(const CaptionRecord&) const = default;
};

std::vector<ExpertKnowledgeEntry> loadKnowledge(const std::string& path);
CotTemplate loadTemplate(const std::string& path);

// "facet: description; facet: description" in attribute order.
std::string renderAttributes(const ExpertKnowledgeEntry& entry);

// Steps rendered in order, joined by newlines. An unknown placeholder is a
// ConfigError naming it.
std::string buildPrompt(const ExpertKnowledgeEntry& entry,
                        const CotTemplate& tmpl,
                        const std::string& imageContext);

std::string promptHash(const std::string& prompt);

std::string toJsonLine(const CaptionRecord& rec);
CaptionRecord fromJsonLine(const std::string& line, int lineNumber);
void saveRecords(const std::string& path, const std::vector<CaptionRecord>& recs);
std::vector<CaptionRecord> loadRecords(const std::string& path);

}  // namespace pestvl::caption
