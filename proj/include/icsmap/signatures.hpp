#pragma once
// Substring signature lists used to decide whether a banner belongs to an
// industrial control system. Two polarities: positive features certify ICS,
// negative features certify non-ICS. Matching is case-sensitive, byte-wise,
// with no tokenization; a feature may optionally be restricted to a port list.
//
// File format (UTF-8, one feature per line):
//   - '#' in column 0 marks a comment line;
//   - blank lines are ignored;
//   - only the trailing newline is stripped: leading and trailing spaces
//     inside a feature line are significant;
//   - an optional tab-separated second column holds a ';'-joined port list
//     restricting where the feature applies.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "icsmap/errors.hpp"
#include "icsmap/util.hpp"

namespace icsmap {

enum class Polarity : uint8_t { positive, negative };

struct Feature {
  std::string text;
  std::vector<uint16_t> ports;  // empty = applies to every port

  friend bool operator==(const Feature&, const Feature&) = default;
};

namespace detail {

inline std::vector<Feature> parse_signature_lines(std::string_view content,
                                                  const std::string& source) {
  std::vector<Feature> features;
  std::set<std::pair<std::string, std::vector<uint16_t>>> seen;
  size_t line_no = 0;
  size_t start = 0;
  while (start <= content.size()) {
    size_t end = content.find('\n', start);
    std::string_view line;
    if (end == std::string_view::npos) {
      if (start == content.size()) break;
      line = content.substr(start);
      start = content.size() + 1;
    } else {
      line = content.substr(start, end - start);
      start = end + 1;
    }
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    Feature f;
    const size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      f.text = std::string(line);
    } else {
      f.text = std::string(line.substr(0, tab));
      const std::string where = source + ":" + std::to_string(line_no);
      std::string_view ports = line.substr(tab + 1);
      for (const std::string& part : split(ports, ';')) {
        auto n = parse_uint(part);
        if (!n || *n < 1 || *n > 65535)
          throw ValidationError(where + ": invalid port '" + part + "'");
        f.ports.push_back(static_cast<uint16_t>(*n));
      }
    }
    if (f.text.empty())
      throw ValidationError(source + ":" + std::to_string(line_no) + ": empty feature");
    if (seen.insert({f.text, f.ports}).second) features.push_back(std::move(f));
  }
  return features;
}

inline std::string serialize_features(const std::vector<Feature>& features) {
  std::string out;
  for (const Feature& f : features) {
    out += f.text;
    if (!f.ports.empty()) {
      out += '\t';
      for (size_t i = 0; i < f.ports.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(f.ports[i]);
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace detail

class SignatureSet {
 public:
  SignatureSet() = default;

  // Duplicate (text, ports) entries are discarded, keeping first occurrence.
  // An empty positive list is rejected: without positive features nothing can
  // ever be classified as ICS and the whole pipeline is meaningless.
  static SignatureSet from_text(std::string_view positive_text, std::string_view negative_text,
                                const std::string& positive_source = "<positive>",
                                const std::string& negative_source = "<negative>") {
    SignatureSet set;
    set.positives_ = detail::parse_signature_lines(positive_text, positive_source);
    set.negatives_ = detail::parse_signature_lines(negative_text, negative_source);
    if (set.positives_.empty())
      throw ValidationError(positive_source + ": no positive features");
    return set;
  }

  static SignatureSet load(const std::filesystem::path& positive_path,
                           const std::filesystem::path& negative_path) {
    return from_text(read_file(positive_path), read_file(negative_path), positive_path.string(),
                     negative_path.string());
  }

  const std::vector<Feature>& positives() const { return positives_; }
  const std::vector<Feature>& negatives() const { return negatives_; }

  const std::vector<Feature>& features(Polarity polarity) const {
    return polarity == Polarity::positive ? positives_ : negatives_;
  }

  // Inverse of parsing: one feature per line with optional tab-separated port
  // list. load(serialize(load(f))) is a fixed point.
  std::string serialize(Polarity polarity) const {
    return detail::serialize_features(features(polarity));
  }

 private:
  std::vector<Feature> positives_;
  std::vector<Feature> negatives_;
};

// Every feature whose text occurs in `banner` as a byte-wise substring and
// whose port restriction (if any) admits `port`. Order follows the list.
inline std::vector<const Feature*> match_features(std::string_view banner,
                                                  const std::vector<Feature>& features,
                                                  std::optional<uint16_t> port = std::nullopt) {
  std::vector<const Feature*> matched;
  for (const Feature& f : features) {
    if (!contains(banner, f.text)) continue;
    if (!f.ports.empty()) {
      if (!port) continue;
      bool admitted = false;
      for (uint16_t p : f.ports)
        if (p == *port) {
          admitted = true;
          break;
        }
      if (!admitted) continue;
    }
    matched.push_back(&f);
  }
  return matched;
}

}  // namespace icsmap
