#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "wt5/formatter.h"

namespace wt5 {

enum class PairFormat { kJsonl, kTsv };

PairFormat parse_pair_format(const std::string& text);

// JSONL lines are {"input": ..., "target": ...}. TSV lines are
// input<TAB>target with backslash escapes for tab, newline, CR and backslash.
void write_pairs(std::ostream& out, const std::vector<FormattedPair>& pairs,
                 PairFormat format);
void write_pairs(const std::filesystem::path& path,
                 const std::vector<FormattedPair>& pairs, PairFormat format);
// wants_explanation is recovered from the "explain " input prefix.
std::vector<FormattedPair> read_pairs(const std::filesystem::path& path,
                                      PairFormat format);

std::string tsv_escape(std::string_view s);
std::string tsv_unescape(std::string_view s);

struct Prediction {
  std::string id;
  std::string output;
};

// {"id": ..., "output": ...} per line. Ids must be unique.
std::vector<Prediction> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path,
                       const std::vector<Prediction>& predictions);

}  // namespace wt5
