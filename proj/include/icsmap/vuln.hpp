#pragma once
// Vulnerability correlation: match device fingerprints against a database of
// published vulnerabilities, bucket CVSS scores into severities, and compute
// per-CVE statistics, per-device exposure, and distribution tables.
//
// A database record matches a fingerprint when
//   - the fingerprint's manufacturer equals the record's manufacturer,
//   - the fingerprint's product contains the record's product_match substring,
//   - the version predicate accepts the fingerprint's version:
//       any     always (version may be absent)
//       exact   version present and byte-equal to the value
//       before  version present and byte-lexicographically less than the value
//       set     version present and a member of the ';'-joined value list
// An absent version satisfies only `any`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "icsmap/errors.hpp"
#include "icsmap/fingerprint.hpp"
#include "icsmap/util.hpp"

namespace icsmap {

// CVSS v2 base score buckets, computed at one-decimal granularity:
// low [0.0, 4.0), medium [4.0, 7.0), high [7.0, 10.0].
inline std::string severity_label(double score) {
  const long long tenths = std::llround(score * 10.0);
  if (tenths < 0 || tenths > 100)
    throw std::invalid_argument("cvss score out of range: " + std::to_string(score));
  if (tenths < 40) return "low";
  if (tenths < 70) return "medium";
  return "high";
}

enum class AttackVector : uint8_t { remote, local };

inline const char* to_string(AttackVector v) {
  return v == AttackVector::remote ? "remote" : "local";
}

inline std::optional<AttackVector> attack_vector_from_string(std::string_view s) {
  if (s == "remote") return AttackVector::remote;
  if (s == "local") return AttackVector::local;
  return std::nullopt;
}

struct VersionPredicate {
  enum class Kind : uint8_t { any, exact, before, set } kind = Kind::any;
  std::vector<std::string> values;  // exact/before: one value; set: members

  bool accepts(const std::optional<std::string>& version) const {
    switch (kind) {
      case Kind::any: return true;
      case Kind::exact: return version && *version == values[0];
      case Kind::before: return version && *version < values[0];
      case Kind::set:
        return version && std::find(values.begin(), values.end(), *version) != values.end();
    }
    return false;
  }

  friend bool operator==(const VersionPredicate&, const VersionPredicate&) = default;
};

struct VulnRecord {
  std::string cve;
  std::string manufacturer;
  std::string product_match;
  VersionPredicate predicate;
  double cvss = 0.0;
  AttackVector vector = AttackVector::remote;
  std::string severity;  // derived from cvss at load

  bool matches(const Fingerprint& fp) const {
    if (!fp.manufacturer || *fp.manufacturer != manufacturer) return false;
    if (!fp.product || !contains(*fp.product, product_match)) return false;
    return predicate.accepts(fp.version);
  }
};

class VulnDb {
 public:
  VulnDb() = default;

  static VulnDb from_records(std::vector<VulnRecord> records,
                             const std::string& source = "<memory>") {
    std::set<std::string> seen;
    for (VulnRecord& r : records) {
      if (r.cve.empty()) throw ValidationError(source + ": empty cve id");
      if (!seen.insert(r.cve).second)
        throw ValidationError(source + ": duplicate cve '" + r.cve + "'");
      if (r.manufacturer.empty() || r.product_match.empty())
        throw ValidationError(source + ": '" + r.cve + "' lacks manufacturer or product_match");
      r.severity = severity_label(r.cvss);  // also validates the score range
    }
    VulnDb db;
    db.records_ = std::move(records);
    return db;
  }

  static VulnDb load(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    nlohmann::json j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (!j.is_array()) throw ValidationError(path.string() + ": expected a json array");
    std::vector<VulnRecord> records;
    for (const nlohmann::json& e : j) {
      const std::string where = path.string();
      if (!e.is_object()) throw ValidationError(where + ": entry is not an object");
      VulnRecord r;
      auto str = [&](const char* key) -> std::string {
        auto it = e.find(key);
        if (it == e.end() || !it->is_string())
          throw ValidationError(where + ": missing or non-string '" + key + "'");
        return it->get<std::string>();
      };
      r.cve = str("cve");
      r.manufacturer = str("manufacturer");
      r.product_match = str("product_match");
      auto cvss = e.find("cvss");
      if (cvss == e.end() || !cvss->is_number())
        throw ValidationError(where + ": '" + r.cve + "' missing numeric cvss");
      r.cvss = cvss->get<double>();
      auto vec = attack_vector_from_string(str("vector"));
      if (!vec) throw ValidationError(where + ": '" + r.cve + "' has invalid vector");
      r.vector = *vec;
      auto pred = e.find("version_predicate");
      if (pred == e.end() || !pred->is_object())
        throw ValidationError(where + ": '" + r.cve + "' missing version_predicate");
      auto kind_it = pred->find("kind");
      if (kind_it == pred->end() || !kind_it->is_string())
        throw ValidationError(where + ": '" + r.cve + "' predicate lacks kind");
      const std::string kind = kind_it->get<std::string>();
      auto value_it = pred->find("value");
      std::optional<std::string> value;
      if (value_it != pred->end()) {
        if (!value_it->is_string())
          throw ValidationError(where + ": '" + r.cve + "' predicate value must be a string");
        value = value_it->get<std::string>();
      }
      if (kind == "any") {
        r.predicate.kind = VersionPredicate::Kind::any;
      } else {
        if (!value || value->empty())
          throw ValidationError(where + ": '" + r.cve + "' predicate '" + kind +
                                "' requires a value");
        if (kind == "exact") {
          r.predicate.kind = VersionPredicate::Kind::exact;
          r.predicate.values = {*value};
        } else if (kind == "before") {
          r.predicate.kind = VersionPredicate::Kind::before;
          r.predicate.values = {*value};
        } else if (kind == "set") {
          r.predicate.kind = VersionPredicate::Kind::set;
          r.predicate.values = split(*value, ';');
        } else {
          throw ValidationError(where + ": '" + r.cve + "' has unknown predicate kind '" + kind +
                                "'");
        }
      }
      records.push_back(std::move(r));
    }
    return from_records(std::move(records), path.string());
  }

  size_t size() const { return records_.size(); }
  const std::vector<VulnRecord>& records() const { return records_; }

  const VulnRecord* find(std::string_view cve) const {
    for (const VulnRecord& r : records_)
      if (r.cve == cve) return &r;
    return nullptr;
  }

 private:
  std::vector<VulnRecord> records_;
};

// Database records matching one fingerprint, in database order.
inline std::vector<const VulnRecord*> match_fingerprint(const Fingerprint& fp, const VulnDb& db) {
  std::vector<const VulnRecord*> out;
  for (const VulnRecord& r : db.records())
    if (r.matches(fp)) out.push_back(&r);
  return out;
}

struct ServiceFinding {
  size_t service_index = 0;  // into the device's service/fingerprint list
  const VulnRecord* record = nullptr;
};

// Match every service fingerprint of a device. Each (service, record) pair is
// one finding; the same CVE found on two services yields two findings.
inline std::vector<ServiceFinding> match_device(const std::vector<Fingerprint>& fingerprints,
                                                const VulnDb& db) {
  std::vector<ServiceFinding> findings;
  for (size_t i = 0; i < fingerprints.size(); ++i)
    for (const VulnRecord* r : match_fingerprint(fingerprints[i], db))
      findings.push_back({i, r});
  return findings;
}

enum class VulnStatus : uint8_t { vulnerable, not_vulnerable, unknown };

inline const char* to_string(VulnStatus s) {
  switch (s) {
    case VulnStatus::vulnerable: return "vulnerable";
    case VulnStatus::not_vulnerable: return "not_vulnerable";
    case VulnStatus::unknown: return "unknown";
  }
  return "?";
}

inline std::optional<VulnStatus> vuln_status_from_string(std::string_view s) {
  if (s == "vulnerable") return VulnStatus::vulnerable;
  if (s == "not_vulnerable") return VulnStatus::not_vulnerable;
  if (s == "unknown") return VulnStatus::unknown;
  return std::nullopt;
}

// A device with findings is vulnerable. A device whose every fingerprint is
// blank could not be assessed at all: unknown. Otherwise not vulnerable.
inline VulnStatus device_status(const std::vector<Fingerprint>& fingerprints,
                                const std::vector<ServiceFinding>& findings) {
  if (!findings.empty()) return VulnStatus::vulnerable;
  bool all_blank = true;
  for (const Fingerprint& fp : fingerprints)
    if (!fp.blank()) all_blank = false;
  return all_blank ? VulnStatus::unknown : VulnStatus::not_vulnerable;
}

enum class Exposure : uint8_t { remote, local_only, none };

inline const char* to_string(Exposure e) {
  switch (e) {
    case Exposure::remote: return "remote";
    case Exposure::local_only: return "local_only";
    case Exposure::none: return "none";
  }
  return "?";
}

inline std::optional<Exposure> exposure_from_string(std::string_view s) {
  if (s == "remote") return Exposure::remote;
  if (s == "local_only") return Exposure::local_only;
  if (s == "none") return Exposure::none;
  return std::nullopt;
}

// none without findings; remote when any finding is remotely exploitable;
// local_only when all findings are local.
inline Exposure device_exposure(const std::vector<ServiceFinding>& findings) {
  if (findings.empty()) return Exposure::none;
  for (const ServiceFinding& f : findings)
    if (f.record->vector == AttackVector::remote) return Exposure::remote;
  return Exposure::local_only;
}

}  // namespace icsmap
