#pragma once
// Fingerprinting: derive manufacturer / product / version from a banner.
//
// A rule maps a banner substring (the pattern) to a manufacturer and product.
// The rule whose pattern is the longest substring of the banner wins; ties go
// to the earlier rule in the file. A rule may carry a version hint
// `after:<token>`: the version is extracted from the tokens following the
// first occurrence of <token> at or beyond the pattern match.
//
// The product catalog maps known products to manufacturers. Rules naming a
// cataloged product must agree with the catalog's manufacturer.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "icsmap/errors.hpp"
#include "icsmap/util.hpp"

namespace icsmap {

struct Fingerprint {
  std::optional<std::string> manufacturer;
  std::optional<std::string> product;
  std::optional<std::string> version;

  bool blank() const { return !manufacturer && !product && !version; }

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

class Catalog {
 public:
  Catalog() = default;

  static Catalog from_rows(std::vector<std::pair<std::string, std::string>> rows,
                           const std::string& source = "<memory>") {
    Catalog cat;
    for (auto& [product, manufacturer] : rows) {
      if (product.empty() || manufacturer.empty())
        throw ValidationError(source + ": empty product or manufacturer");
      auto [it, inserted] = cat.by_product_.emplace(product, manufacturer);
      if (!inserted && it->second != manufacturer)
        throw ValidationError(source + ": product '" + product +
                              "' mapped to two manufacturers");
    }
    cat.rows_ = std::move(rows);
    return cat;
  }

  static Catalog load(const std::filesystem::path& path) {
    static const std::vector<std::string> kHeader = {"product", "manufacturer"};
    std::vector<std::pair<std::string, std::string>> rows;
    for (const CsvRow& row : read_csv(path, kHeader)) rows.emplace_back(row.fields[0], row.fields[1]);
    return from_rows(std::move(rows), path.string());
  }

  size_t size() const { return by_product_.size(); }

  std::optional<std::string> manufacturer_for(std::string_view product) const {
    auto it = by_product_.find(std::string(product));
    return it == by_product_.end() ? std::nullopt : std::optional<std::string>(it->second);
  }

  // Distinct manufacturers, sorted.
  std::vector<std::string> manufacturers() const {
    std::map<std::string, bool> seen;
    for (const auto& [product, manufacturer] : by_product_) seen[manufacturer] = true;
    std::vector<std::string> out;
    for (const auto& [name, unused] : seen) out.push_back(name);
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
  std::map<std::string, std::string> by_product_;
};

struct FingerprintRule {
  std::string pattern;
  std::string manufacturer;
  std::string product;
  std::optional<std::string> after_token;  // version hint; nullopt = no version
};

namespace detail {

inline bool is_version_token(std::string_view tok) {
  if (tok.empty()) return false;
  bool all_alpha = true;
  for (char c : tok)
    if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'))) all_alpha = false;
  if (all_alpha) return true;
  if (tok[0] < '0' || tok[0] > '9') return false;
  for (char c : tok)
    if (!((c >= '0' && c <= '9') || c == '.')) return false;
  return true;
}

inline bool has_digit(std::string_view tok) {
  for (char c : tok)
    if (c >= '0' && c <= '9') return true;
  return false;
}

// Version = the maximal run of version-ish tokens (pure alphabetic, or a
// digit-led digits-and-dots token) after `from`, trimmed back to the last
// digit-bearing token. A run with no digits anywhere yields no version.
inline std::optional<std::string> version_after(std::string_view banner, size_t from) {
  std::vector<std::string> run;
  size_t i = from;
  while (i < banner.size()) {
    while (i < banner.size() && banner[i] == ' ') ++i;
    size_t start = i;
    while (i < banner.size() && banner[i] != ' ') ++i;
    if (i == start) break;
    std::string_view tok = banner.substr(start, i - start);
    if (!is_version_token(tok)) break;
    run.emplace_back(tok);
  }
  size_t last_digit = 0;
  for (size_t k = run.size(); k > 0; --k)
    if (has_digit(run[k - 1])) {
      last_digit = k;
      break;
    }
  if (last_digit == 0) return std::nullopt;
  run.resize(last_digit);
  return join(run, " ");
}

}  // namespace detail

class RuleSet {
 public:
  RuleSet() = default;

  static RuleSet from_rules(std::vector<FingerprintRule> rules, const Catalog* catalog = nullptr,
                            const std::string& source = "<memory>") {
    for (const FingerprintRule& r : rules) {
      if (r.pattern.empty()) throw ValidationError(source + ": empty pattern");
      if (r.manufacturer.empty() || r.product.empty())
        throw ValidationError(source + ": rule for pattern '" + r.pattern +
                              "' lacks manufacturer or product");
      if (catalog) {
        auto known = catalog->manufacturer_for(r.product);
        if (known && *known != r.manufacturer)
          throw ValidationError(source + ": rule for product '" + r.product +
                                "' names manufacturer '" + r.manufacturer +
                                "' but the catalog says '" + *known + "'");
      }
    }
    RuleSet set;
    set.rules_ = std::move(rules);
    return set;
  }

  static RuleSet load(const std::filesystem::path& path, const Catalog* catalog = nullptr) {
    static const std::vector<std::string> kHeader = {"product_pattern", "manufacturer", "product",
                                                     "version_hint"};
    std::vector<FingerprintRule> rules;
    for (const CsvRow& row : read_csv(path, kHeader)) {
      const std::string where = path.string() + ":" + std::to_string(row.line_no);
      FingerprintRule r;
      r.pattern = row.fields[0];
      r.manufacturer = row.fields[1];
      r.product = row.fields[2];
      const std::string& hint = row.fields[3];
      if (hint == "none") {
        r.after_token = std::nullopt;
      } else if (starts_with(hint, "after:") && hint.size() > 6) {
        r.after_token = hint.substr(6);
      } else {
        throw ValidationError(where + ": invalid version_hint '" + hint + "'");
      }
      rules.push_back(std::move(r));
    }
    return from_rules(std::move(rules), catalog, path.string());
  }

  size_t size() const { return rules_.size(); }
  const std::vector<FingerprintRule>& rules() const { return rules_; }

  // Longest pattern contained in the banner; ties go to the earlier rule.
  const FingerprintRule* best_match(std::string_view banner) const {
    const FingerprintRule* best = nullptr;
    for (const FingerprintRule& r : rules_) {
      if (!contains(banner, r.pattern)) continue;
      if (!best || r.pattern.size() > best->pattern.size()) best = &r;
    }
    return best;
  }

 private:
  std::vector<FingerprintRule> rules_;
};

// Empty banner or no matching rule yields a blank fingerprint.
inline Fingerprint extract_fingerprint(std::string_view banner, const RuleSet& rules) {
  Fingerprint fp;
  const FingerprintRule* rule = rules.best_match(banner);
  if (!rule) return fp;
  fp.manufacturer = rule->manufacturer;
  fp.product = rule->product;
  if (rule->after_token) {
    const size_t at = banner.find(rule->pattern);
    const size_t tok = banner.find(*rule->after_token, at);
    if (tok != std::string_view::npos)
      fp.version = detail::version_after(banner, tok + rule->after_token->size());
  }
  return fp;
}

}  // namespace icsmap
