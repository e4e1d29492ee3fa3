#include "wt5/pairs_io.h"

#include <fstream>
#include <set>

#include "json.hpp"
#include "wt5/errors.h"

namespace wt5 {

using json = nlohmann::json;

PairFormat parse_pair_format(const std::string& text) {
  if (text == "jsonl") return PairFormat::kJsonl;
  if (text == "tsv") return PairFormat::kTsv;
  throw DataError("unknown pair format '" + text + "' (jsonl or tsv)");
}

std::string tsv_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tsv_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    switch (s[++i]) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case '\\': out += '\\'; break;
      default:
        out += '\\';
        out += s[i];
    }
  }
  return out;
}

void write_pairs(std::ostream& out, const std::vector<FormattedPair>& pairs,
                 PairFormat format) {
  for (const auto& p : pairs) {
    if (format == PairFormat::kJsonl) {
      nlohmann::ordered_json j;
      j["input"] = p.input_text;
      j["target"] = p.target_text;
      out << j.dump() << '\n';
    } else {
      out << tsv_escape(p.input_text) << '\t' << tsv_escape(p.target_text)
          << '\n';
    }
  }
}

void write_pairs(const std::filesystem::path& path,
                 const std::vector<FormattedPair>& pairs, PairFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_pairs(out, pairs, format);
}

std::vector<FormattedPair> read_pairs(const std::filesystem::path& path,
                                      PairFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<FormattedPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    FormattedPair p;
    if (format == PairFormat::kJsonl) {
      try {
        json j = json::parse(line);
        p.input_text = j.at("input").get<std::string>();
        p.target_text = j.value("target", std::string());
      } catch (const json::exception& ex) {
        throw DataError(path.string() + ": line " + std::to_string(line_no) +
                        ": " + ex.what());
      }
    } else {
      auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw DataError(path.string() + ": line " + std::to_string(line_no) +
                        ": expected input<TAB>target");
      }
      p.input_text = tsv_unescape(std::string_view(line).substr(0, tab));
      p.target_text = tsv_unescape(std::string_view(line).substr(tab + 1));
    }
    p.wants_explanation = p.input_text.starts_with(kExplainPrefix);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Prediction> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Prediction p;
    try {
      json j = json::parse(line);
      p.id = j.at("id").get<std::string>();
      p.output = j.at("output").get<std::string>();
    } catch (const json::exception& ex) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      ": " + ex.what());
    }
    if (!seen.insert(p.id).second) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      ": duplicate prediction id " + p.id);
    }
    out.push_back(std::move(p));
  }
  return out;
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<Prediction>& predictions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& p : predictions) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["output"] = p.output;
    out << j.dump() << '\n';
  }
}

}  // namespace wt5
