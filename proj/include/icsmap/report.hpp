#pragma once
// Analysis bundle and report rendering.
//
// The bundle is the single artifact flowing between the correlation stage and
// the renderers: the discovery funnel, every ICS-classified device with its
// services, fingerprints, findings, status, exposure, and AS attribution, and
// the AS aggregates. Derived tables (CVE statistics, severity distribution,
// exposure, histogram, manufacturer/product counts) are recomputed from the
// bundle on every render, so a bundle that is parsed back from its JSON form
// re-renders to byte-identical output.
//
// Rendering is deterministic: same bundle, same bytes. JSON object keys are
// serialized in sorted order; every derived ordering is total.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "icsmap/asn.hpp"
#include "icsmap/classify.hpp"
#include "icsmap/errors.hpp"
#include "icsmap/fingerprint.hpp"
#include "icsmap/scan.hpp"
#include "icsmap/util.hpp"
#include "icsmap/vuln.hpp"

namespace icsmap {

inline constexpr int kSchemaVersion = 1;

// ------------------------------------------------------------- bundle

struct FindingRow {
  uint64_t service_index = 0;
  std::string cve;
  std::string manufacturer;
  double cvss = 0.0;
  std::string severity;
  AttackVector vector = AttackVector::remote;

  friend bool operator==(const FindingRow&, const FindingRow&) = default;
};

inline std::vector<FindingRow> finding_rows(const std::vector<ServiceFinding>& findings) {
  std::vector<FindingRow> rows;
  rows.reserve(findings.size());
  for (const ServiceFinding& f : findings)
    rows.push_back({f.service_index, f.record->cve, f.record->manufacturer, f.record->cvss,
                    f.record->severity, f.record->vector});
  return rows;
}

struct AnalyzedDevice {
  Ipv4 ip;
  std::vector<ScanRecord> services;           // sorted by (port, transport)
  std::vector<ServiceClass> service_classes;  // aligned with services
  std::vector<Fingerprint> fingerprints;      // aligned with services
  std::optional<AsInfo> as_info;
  VulnStatus status = VulnStatus::unknown;
  Exposure exposure = Exposure::none;
  std::vector<FindingRow> findings;
};

struct AnalysisBundle {
  int schema_version = kSchemaVersion;
  FunnelReport funnel;
  std::vector<AnalyzedDevice> devices;  // ICS devices, sorted by IP
  std::vector<AsAggregate> as_aggregates;
};

// Full correlation pass over a classified corpus: fingerprint every service of
// every ICS device, match the vulnerability database, attribute autonomous
// systems, and aggregate.
inline AnalysisBundle analyze(const std::vector<Device>& devices,
                              const CorpusClassification& classification, const RuleSet& rules,
                              const VulnDb& db, const AsTable& as_table,
                              bool as_table_only = false) {
  AnalysisBundle bundle;
  bundle.funnel = classification.funnel;
  std::vector<std::pair<std::optional<AsInfo>, bool>> attributions;
  for (size_t i = 0; i < devices.size(); ++i) {
    const ClassifiedDevice& cd = classification.devices[i];
    if (!cd.cls || *cd.cls != DeviceClass::ics) continue;
    AnalyzedDevice ad;
    ad.ip = devices[i].ip;
    ad.services = devices[i].services;
    for (const ServiceEvidence& ev : cd.evidence) ad.service_classes.push_back(ev.cls);
    for (const ScanRecord& s : ad.services)
      ad.fingerprints.push_back(extract_fingerprint(s.banner, rules));
    const std::vector<ServiceFinding> matched = match_device(ad.fingerprints, db);
    ad.findings = finding_rows(matched);
    ad.status = device_status(ad.fingerprints, matched);
    ad.exposure = device_exposure(matched);
    ad.as_info = attribute_device(devices[i], as_table, as_table_only);
    attributions.emplace_back(ad.as_info, ad.status == VulnStatus::vulnerable);
    bundle.devices.push_back(std::move(ad));
  }
  bundle.as_aggregates = aggregate_by_as(attributions);
  return bundle;
}

// ------------------------------------------------------------- tables

struct NamedCount {
  std::string name;
  uint64_t count = 0;
  friend bool operator==(const NamedCount&, const NamedCount&) = default;
};

// Rank by count descending, name ascending; keep the first n and pool the
// rest into a final "others" row. n < 1 is an argument error.
inline std::vector<NamedCount> top_n(std::vector<NamedCount> items, int n) {
  if (n < 1) throw std::invalid_argument("top_n requires n >= 1, got " + std::to_string(n));
  std::sort(items.begin(), items.end(), [](const NamedCount& a, const NamedCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.name < b.name;
  });
  if (items.size() <= static_cast<size_t>(n)) return items;
  uint64_t residual = 0;
  for (size_t i = static_cast<size_t>(n); i < items.size(); ++i) residual += items[i].count;
  items.resize(static_cast<size_t>(n));
  items.push_back({"others", residual});
  return items;
}

struct CveRow {
  std::string cve;
  std::string manufacturer;
  AttackVector vector = AttackVector::remote;
  double score = 0.0;
  std::string severity;
  uint64_t occurrences = 0;     // one per (device, service, cve) finding
  uint64_t unique_devices = 0;  // distinct devices carrying the cve

  friend bool operator==(const CveRow&, const CveRow&) = default;
};

// Per-CVE statistics over all findings, ordered by occurrences descending
// then CVE id ascending.
inline std::vector<CveRow> cve_table(const AnalysisBundle& bundle) {
  std::map<std::string, CveRow> by_cve;
  for (const AnalyzedDevice& d : bundle.devices) {
    std::set<std::string> seen_here;
    for (const FindingRow& f : d.findings) {
      CveRow& row = by_cve[f.cve];
      if (row.cve.empty()) {
        row.cve = f.cve;
        row.manufacturer = f.manufacturer;
        row.vector = f.vector;
        row.score = f.cvss;
        row.severity = f.severity;
      }
      row.occurrences += 1;
      if (seen_here.insert(f.cve).second) row.unique_devices += 1;
    }
  }
  std::vector<CveRow> rows;
  rows.reserve(by_cve.size());
  for (auto& [cve, row] : by_cve) rows.push_back(std::move(row));
  std::sort(rows.begin(), rows.end(), [](const CveRow& a, const CveRow& b) {
    if (a.occurrences != b.occurrences) return a.occurrences > b.occurrences;
    return a.cve < b.cve;
  });
  return rows;
}

struct SeverityCounts {
  uint64_t low = 0;
  uint64_t medium = 0;
  uint64_t high = 0;
  uint64_t total() const { return low + medium + high; }
  friend bool operator==(const SeverityCounts&, const SeverityCounts&) = default;
};

// Occurrence-weighted severity distribution: every finding counts once.
inline SeverityCounts severity_distribution(const AnalysisBundle& bundle) {
  SeverityCounts c;
  for (const AnalyzedDevice& d : bundle.devices)
    for (const FindingRow& f : d.findings) {
      if (f.severity == "low")
        c.low += 1;
      else if (f.severity == "medium")
        c.medium += 1;
      else
        c.high += 1;
    }
  return c;
}

struct ExposureCounts {
  uint64_t vulnerable = 0;
  uint64_t not_vulnerable = 0;
  uint64_t unknown = 0;
  uint64_t remote = 0;      // of the vulnerable devices
  uint64_t local_only = 0;  // of the vulnerable devices
  friend bool operator==(const ExposureCounts&, const ExposureCounts&) = default;
};

inline ExposureCounts exposure_counts(const AnalysisBundle& bundle) {
  ExposureCounts c;
  for (const AnalyzedDevice& d : bundle.devices) {
    switch (d.status) {
      case VulnStatus::vulnerable: c.vulnerable += 1; break;
      case VulnStatus::not_vulnerable: c.not_vulnerable += 1; break;
      case VulnStatus::unknown: c.unknown += 1; break;
    }
    if (d.status == VulnStatus::vulnerable) {
      if (d.exposure == Exposure::remote)
        c.remote += 1;
      else if (d.exposure == Exposure::local_only)
        c.local_only += 1;
    }
  }
  return c;
}

struct HistogramRow {
  uint64_t findings = 0;  // distinct CVEs on the device
  uint64_t devices = 0;
  friend bool operator==(const HistogramRow&, const HistogramRow&) = default;
};

// Devices bucketed by how many distinct CVEs they carry (vulnerable only).
inline std::vector<HistogramRow> findings_histogram(const AnalysisBundle& bundle) {
  std::map<uint64_t, uint64_t> buckets;
  for (const AnalyzedDevice& d : bundle.devices) {
    if (d.status != VulnStatus::vulnerable) continue;
    std::set<std::string> distinct;
    for (const FindingRow& f : d.findings) distinct.insert(f.cve);
    buckets[distinct.size()] += 1;
  }
  std::vector<HistogramRow> rows;
  for (const auto& [findings, devices] : buckets) rows.push_back({findings, devices});
  return rows;
}

namespace detail {
inline std::vector<NamedCount> ranked_counts(std::map<std::string, uint64_t>& counts) {
  std::vector<NamedCount> rows;
  rows.reserve(counts.size());
  for (auto& [name, count] : counts) rows.push_back({name, count});
  std::sort(rows.begin(), rows.end(), [](const NamedCount& a, const NamedCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.name < b.name;
  });
  return rows;
}
}  // namespace detail

// Devices per manufacturer. A device counts once under every distinct
// manufacturer its fingerprints expose; a device exposing none counts under
// the "Unknown" sentinel.
inline std::vector<NamedCount> manufacturer_counts(const AnalysisBundle& bundle) {
  std::map<std::string, uint64_t> counts;
  for (const AnalyzedDevice& d : bundle.devices) {
    std::set<std::string> names;
    for (const Fingerprint& fp : d.fingerprints)
      if (fp.manufacturer) names.insert(*fp.manufacturer);
    if (names.empty())
      counts["Unknown"] += 1;
    else
      for (const std::string& n : names) counts[n] += 1;
  }
  return detail::ranked_counts(counts);
}

// Devices per product, same counting scheme as manufacturer_counts.
inline std::vector<NamedCount> product_counts(const AnalysisBundle& bundle) {
  std::map<std::string, uint64_t> counts;
  for (const AnalyzedDevice& d : bundle.devices) {
    std::set<std::string> names;
    for (const Fingerprint& fp : d.fingerprints)
      if (fp.product) names.insert(*fp.product);
    if (names.empty())
      counts["Unknown"] += 1;
    else
      for (const std::string& n : names) counts[n] += 1;
  }
  return detail::ranked_counts(counts);
}

// ------------------------------------------------------------- JSON

namespace detail {

inline nlohmann::json opt_string(const std::optional<std::string>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline double pct(uint64_t part, uint64_t whole, int digits) {
  if (whole == 0) return 0.0;
  return round_half_up(100.0 * static_cast<double>(part) / static_cast<double>(whole), digits);
}

inline nlohmann::json tables_json(const AnalysisBundle& bundle) {
  nlohmann::json tables;
  const uint64_t device_total = bundle.devices.size();

  nlohmann::json cves = nlohmann::json::array();
  for (const CveRow& r : cve_table(bundle)) {
    cves.push_back({{"cve", r.cve},
                    {"manufacturer", r.manufacturer},
                    {"occurrences", r.occurrences},
                    {"score", r.score},
                    {"severity", r.severity},
                    {"unique_devices", r.unique_devices},
                    {"vector", to_string(r.vector)}});
  }
  tables["cves"] = std::move(cves);

  const SeverityCounts sev = severity_distribution(bundle);
  tables["severity"] = {
      {"counts", {{"high", sev.high}, {"low", sev.low}, {"medium", sev.medium}}},
      {"percentages",
       {{"high", pct(sev.high, sev.total(), 1)},
        {"low", pct(sev.low, sev.total(), 1)},
        {"medium", pct(sev.medium, sev.total(), 1)}}}};

  const ExposureCounts exp = exposure_counts(bundle);
  nlohmann::json exposure = {
      {"counts",
       {{"not_vulnerable", exp.not_vulnerable},
        {"unknown", exp.unknown},
        {"vulnerable", exp.vulnerable}}},
      {"of_vulnerable", {{"local_only", exp.local_only}, {"remote", exp.remote}}},
      {"percentages",
       {{"not_vulnerable", pct(exp.not_vulnerable, device_total, 1)},
        {"unknown", pct(exp.unknown, device_total, 1)},
        {"vulnerable", pct(exp.vulnerable, device_total, 1)}}}};
  if (exp.vulnerable == 0) {
    exposure["vulnerable_percentages"] = {{"local_only", nullptr}, {"remote", nullptr}};
  } else {
    exposure["vulnerable_percentages"] = {
        {"local_only", pct(exp.local_only, exp.vulnerable, 1)},
        {"remote", pct(exp.remote, exp.vulnerable, 1)}};
  }
  tables["exposure"] = std::move(exposure);

  nlohmann::json histogram = nlohmann::json::array();
  for (const HistogramRow& r : findings_histogram(bundle))
    histogram.push_back({{"devices", r.devices}, {"findings", r.findings}});
  tables["histogram"] = std::move(histogram);

  nlohmann::json manufacturers = nlohmann::json::array();
  for (const NamedCount& r : manufacturer_counts(bundle))
    manufacturers.push_back({{"devices", r.count},
                             {"name", r.name},
                             {"percentage", pct(r.count, device_total, 2)}});
  tables["manufacturers"] = std::move(manufacturers);

  nlohmann::json products = nlohmann::json::array();
  for (const NamedCount& r : product_counts(bundle))
    products.push_back(
        {{"devices", r.count}, {"name", r.name}, {"percentage", pct(r.count, device_total, 2)}});
  tables["products"] = std::move(products);

  nlohmann::json ases = nlohmann::json::array();
  for (const AsAggregate& a : bundle.as_aggregates) {
    ases.push_back({{"asn", a.asn ? nlohmann::json(*a.asn) : nlohmann::json(nullptr)},
                    {"devices", a.device_count},
                    {"name", a.name},
                    {"percentage", pct(a.device_count, device_total, 2)},
                    {"vulnerable", a.vulnerable_device_count}});
  }
  tables["ases"] = std::move(ases);

  return tables;
}

}  // namespace detail

inline nlohmann::json bundle_to_json(const AnalysisBundle& bundle) {
  nlohmann::json root;
  root["schema_version"] = bundle.schema_version;

  const FunnelReport& f = bundle.funnel;
  root["funnel"] = {
      {"average_ics_services",
       f.ics_devices == 0
           ? 0.0
           : round_half_up(static_cast<double>(f.ics_services) / static_cast<double>(f.ics_devices),
                           1)},
      {"devices_with_ics_ports", f.devices_with_ics_ports},
      {"ics_devices", f.ics_devices},
      {"ics_services", f.ics_services},
      {"services_on_ics_port_devices", f.services_on_ics_port_devices},
      {"total_devices", f.total_devices},
      {"total_services", f.total_services}};

  nlohmann::json devices = nlohmann::json::array();
  for (const AnalyzedDevice& d : bundle.devices) {
    nlohmann::json services = nlohmann::json::array();
    for (size_t i = 0; i < d.services.size(); ++i) {
      const ScanRecord& s = d.services[i];
      services.push_back({{"banner", s.banner},
                          {"class", to_string(d.service_classes[i])},
                          {"country", s.country},
                          {"port", s.port},
                          {"transport", to_string(s.transport)},
                          {"ts", s.ts.raw}});
    }
    nlohmann::json fingerprints = nlohmann::json::array();
    for (const Fingerprint& fp : d.fingerprints)
      fingerprints.push_back({{"manufacturer", detail::opt_string(fp.manufacturer)},
                              {"product", detail::opt_string(fp.product)},
                              {"version", detail::opt_string(fp.version)}});
    nlohmann::json findings = nlohmann::json::array();
    for (const FindingRow& fr : d.findings)
      findings.push_back({{"cve", fr.cve},
                          {"cvss", fr.cvss},
                          {"manufacturer", fr.manufacturer},
                          {"service_index", fr.service_index},
                          {"severity", fr.severity},
                          {"vector", to_string(fr.vector)}});
    devices.push_back(
        {{"as_name", d.as_info ? nlohmann::json(d.as_info->name) : nlohmann::json(nullptr)},
         {"asn", d.as_info ? nlohmann::json(d.as_info->asn) : nlohmann::json(nullptr)},
         {"exposure", to_string(d.exposure)},
         {"findings", std::move(findings)},
         {"fingerprints", std::move(fingerprints)},
         {"ip", d.ip.text},
         {"services", std::move(services)},
         {"status", to_string(d.status)}});
  }
  root["devices"] = std::move(devices);

  nlohmann::json aggregates = nlohmann::json::array();
  for (const AsAggregate& a : bundle.as_aggregates)
    aggregates.push_back({{"asn", a.asn ? nlohmann::json(*a.asn) : nlohmann::json(nullptr)},
                          {"device_count", a.device_count},
                          {"name", a.name},
                          {"vulnerable_device_count", a.vulnerable_device_count}});
  root["as_aggregates"] = std::move(aggregates);

  root["tables"] = detail::tables_json(bundle);
  return root;
}

inline std::string render_json(const AnalysisBundle& bundle) {
  return bundle_to_json(bundle).dump(2) + "\n";
}

// Parse a bundle back from its JSON rendering. Derived tables are ignored —
// they are recomputed on the next render. Throws ValidationError on schema
// violations.
inline AnalysisBundle parse_bundle(std::string_view json_text) {
  nlohmann::json root = nlohmann::json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (root.is_discarded() || !root.is_object())
    throw ValidationError("bundle: not a json object");
  auto require = [](const nlohmann::json& j, const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(std::string("bundle: missing '") + key + "'");
    return *it;
  };

  const nlohmann::json& version = require(root, "schema_version");
  if (!version.is_number_integer() || version.get<int64_t>() != kSchemaVersion)
    throw ValidationError("bundle: unsupported schema_version " + version.dump());

  AnalysisBundle bundle;
  bundle.schema_version = kSchemaVersion;

  const nlohmann::json& funnel = require(root, "funnel");
  auto funnel_u64 = [&](const char* key) -> uint64_t {
    const nlohmann::json& v = require(funnel, key);
    if (!v.is_number_integer() || v.get<int64_t>() < 0)
      throw ValidationError(std::string("bundle: funnel '") + key + "' must be a non-negative integer");
    return v.get<uint64_t>();
  };
  bundle.funnel.total_devices = funnel_u64("total_devices");
  bundle.funnel.total_services = funnel_u64("total_services");
  bundle.funnel.devices_with_ics_ports = funnel_u64("devices_with_ics_ports");
  bundle.funnel.services_on_ics_port_devices = funnel_u64("services_on_ics_port_devices");
  bundle.funnel.ics_devices = funnel_u64("ics_devices");
  bundle.funnel.ics_services = funnel_u64("ics_services");

  const nlohmann::json& devices = require(root, "devices");
  if (!devices.is_array()) throw ValidationError("bundle: 'devices' must be an array");
  for (const nlohmann::json& dj : devices) {
    AnalyzedDevice d;
    const nlohmann::json& ip = require(dj, "ip");
    if (!ip.is_string()) throw ValidationError("bundle: device ip must be a string");
    IpParseResult parsed = parse_ipv4(ip.get_ref<const std::string&>());
    if (parsed.status != IpParseStatus::ok)
      throw ValidationError("bundle: invalid device ip '" + ip.get<std::string>() + "'");
    d.ip = parsed.ip;

    const nlohmann::json& asn = require(dj, "asn");
    const nlohmann::json& as_name = require(dj, "as_name");
    if (!asn.is_null()) {
      if (!asn.is_number_integer() || !as_name.is_string())
        throw ValidationError("bundle: device asn/as_name malformed");
      d.as_info = AsInfo{asn.get<uint32_t>(), as_name.get<std::string>()};
    }

    auto status = vuln_status_from_string(require(dj, "status").get<std::string>());
    if (!status) throw ValidationError("bundle: invalid device status");
    d.status = *status;
    auto exposure = exposure_from_string(require(dj, "exposure").get<std::string>());
    if (!exposure) throw ValidationError("bundle: invalid device exposure");
    d.exposure = *exposure;

    const nlohmann::json& services = require(dj, "services");
    if (!services.is_array()) throw ValidationError("bundle: device services must be an array");
    for (const nlohmann::json& sj : services) {
      ScanRecord s;
      s.ip = d.ip;
      const nlohmann::json& banner = require(sj, "banner");
      const nlohmann::json& country = require(sj, "country");
      const nlohmann::json& port = require(sj, "port");
      const nlohmann::json& transport = require(sj, "transport");
      const nlohmann::json& ts = require(sj, "ts");
      if (!banner.is_string() || !country.is_string() || !port.is_number_integer() ||
          !transport.is_string() || !ts.is_string())
        throw ValidationError("bundle: malformed service entry");
      s.banner = banner.get<std::string>();
      s.country = country.get<std::string>();
      const int64_t port_value = port.get<int64_t>();
      if (port_value < 1 || port_value > 65535)
        throw ValidationError("bundle: service port out of range");
      s.port = static_cast<uint16_t>(port_value);
      const std::string& t = transport.get_ref<const std::string&>();
      if (t == "tcp")
        s.transport = Transport::tcp;
      else if (t == "udp")
        s.transport = Transport::udp;
      else
        throw ValidationError("bundle: invalid service transport '" + t + "'");
      auto parsed_ts = parse_rfc3339(ts.get_ref<const std::string&>());
      if (!parsed_ts)
        throw ValidationError("bundle: invalid service timestamp '" + ts.get<std::string>() + "'");
      s.ts = std::move(*parsed_ts);
      auto cls = service_class_from_string(require(sj, "class").get<std::string>());
      if (!cls) throw ValidationError("bundle: invalid service class");
      d.service_classes.push_back(*cls);
      d.services.push_back(std::move(s));
    }

    const nlohmann::json& fingerprints = require(dj, "fingerprints");
    if (!fingerprints.is_array() || fingerprints.size() != d.services.size())
      throw ValidationError("bundle: fingerprints must align with services");
    for (const nlohmann::json& fj : fingerprints) {
      Fingerprint fp;
      auto opt = [&](const char* key) -> std::optional<std::string> {
        const nlohmann::json& v = require(fj, key);
        if (v.is_null()) return std::nullopt;
        if (!v.is_string()) throw ValidationError("bundle: fingerprint fields must be strings");
        return v.get<std::string>();
      };
      fp.manufacturer = opt("manufacturer");
      fp.product = opt("product");
      fp.version = opt("version");
      d.fingerprints.push_back(std::move(fp));
    }

    const nlohmann::json& findings = require(dj, "findings");
    if (!findings.is_array()) throw ValidationError("bundle: findings must be an array");
    for (const nlohmann::json& fj : findings) {
      FindingRow fr;
      const nlohmann::json& cve = require(fj, "cve");
      const nlohmann::json& manufacturer = require(fj, "manufacturer");
      const nlohmann::json& cvss = require(fj, "cvss");
      const nlohmann::json& severity = require(fj, "severity");
      const nlohmann::json& service_index = require(fj, "service_index");
      if (!cve.is_string() || !manufacturer.is_string() || !cvss.is_number() ||
          !severity.is_string() || !service_index.is_number_integer())
        throw ValidationError("bundle: malformed finding entry");
      fr.cve = cve.get<std::string>();
      fr.manufacturer = manufacturer.get<std::string>();
      fr.cvss = cvss.get<double>();
      fr.severity = severity.get<std::string>();
      fr.service_index = service_index.get<uint64_t>();
      if (fr.service_index >= d.services.size())
        throw ValidationError("bundle: finding service_index out of range");
      auto vec = attack_vector_from_string(require(fj, "vector").get<std::string>());
      if (!vec) throw ValidationError("bundle: invalid finding vector");
      fr.vector = *vec;
      d.findings.push_back(std::move(fr));
    }

    bundle.devices.push_back(std::move(d));
  }

  const nlohmann::json& aggregates = require(root, "as_aggregates");
  if (!aggregates.is_array()) throw ValidationError("bundle: 'as_aggregates' must be an array");
  for (const nlohmann::json& aj : aggregates) {
    AsAggregate a;
    const nlohmann::json& asn = require(aj, "asn");
    if (!asn.is_null()) {
      if (!asn.is_number_integer()) throw ValidationError("bundle: aggregate asn malformed");
      a.asn = asn.get<uint32_t>();
    }
    const nlohmann::json& name = require(aj, "name");
    const nlohmann::json& device_count = require(aj, "device_count");
    const nlohmann::json& vulnerable = require(aj, "vulnerable_device_count");
    if (!name.is_string() || !device_count.is_number_integer() || !vulnerable.is_number_integer())
      throw ValidationError("bundle: malformed as_aggregate entry");
    a.name = name.get<std::string>();
    a.device_count = device_count.get<uint64_t>();
    a.vulnerable_device_count = vulnerable.get<uint64_t>();
    bundle.as_aggregates.push_back(std::move(a));
  }

  return bundle;
}

// --------------------------------------------------------- markdown / CSV

namespace detail {

inline std::string pct_cell(uint64_t part, uint64_t whole, int digits) {
  if (whole == 0) return "n/a";
  return format_fixed(100.0 * static_cast<double>(part) / static_cast<double>(whole), digits) +
         "%";
}

inline std::string capitalized(std::string_view s) {
  std::string out(s);
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z')
    out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

// Markdown table cells: escape pipes so arbitrary banner-derived names cannot
// break the table grid.
inline std::string md_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += ' ';
    else out += c;
  }
  return out;
}

}  // namespace detail

inline std::string render_markdown(const AnalysisBundle& bundle) {
  using detail::md_cell;
  using detail::pct_cell;
  const uint64_t device_total = bundle.devices.size();
  std::string out;
  out += "# ICS/SCADA Exposure Report\n\n";

  const FunnelReport& f = bundle.funnel;
  out += "## Discovery funnel\n\n";
  out += "| Metric | Value |\n|---|---:|\n";
  out += "| Total devices | " + std::to_string(f.total_devices) + " |\n";
  out += "| Total services | " + std::to_string(f.total_services) + " |\n";
  out += "| Devices with ICS ports | " + std::to_string(f.devices_with_ics_ports) + " |\n";
  out += "| Services on those devices | " + std::to_string(f.services_on_ics_port_devices) +
         " |\n";
  out += "| ICS devices | " + std::to_string(f.ics_devices) + " |\n";
  out += "| ICS services | " + std::to_string(f.ics_services) + " |\n";
  out += "| Average ICS services per ICS device | " +
         (f.ics_devices == 0
              ? std::string("n/a")
              : format_fixed(static_cast<double>(f.ics_services) / static_cast<double>(f.ics_devices),
                             1)) +
         " |\n\n";

  out += "## Manufacturers\n\n";
  out += "| Manufacturer | Devices | Percentage |\n|---|---:|---:|\n";
  for (const NamedCount& r : top_n(manufacturer_counts(bundle), 10))
    out += "| " + md_cell(r.name) + " | " + std::to_string(r.count) + " | " +
           pct_cell(r.count, device_total, 2) + " |\n";
  out += "\n";

  out += "## Products\n\n";
  out += "| Product | Devices | Percentage |\n|---|---:|---:|\n";
  for (const NamedCount& r : top_n(product_counts(bundle), 10))
    out += "| " + md_cell(r.name) + " | " + std::to_string(r.count) + " | " +
           pct_cell(r.count, device_total, 2) + " |\n";
  out += "\n";

  out += "## Autonomous systems\n\n";
  out += "| AS number | AS name | Devices | Vulnerable | Percentage |\n|---|---|---:|---:|---:|\n";
  {
    // Top 10 aggregates plus a pooled residual row, mirroring top_n.
    const std::vector<AsAggregate>& all = bundle.as_aggregates;
    const size_t shown = std::min<size_t>(all.size(), 10);
    for (size_t i = 0; i < shown; ++i) {
      const AsAggregate& a = all[i];
      out += "| " + (a.asn ? "AS" + std::to_string(*a.asn) : std::string()) + " | " +
             md_cell(a.name) + " | " + std::to_string(a.device_count) + " | " +
             std::to_string(a.vulnerable_device_count) + " | " +
             pct_cell(a.device_count, device_total, 2) + " |\n";
    }
    if (all.size() > shown) {
      uint64_t rest_devices = 0, rest_vulnerable = 0;
      for (size_t i = shown; i < all.size(); ++i) {
        rest_devices += all[i].device_count;
        rest_vulnerable += all[i].vulnerable_device_count;
      }
      out += "| | others | " + std::to_string(rest_devices) + " | " +
             std::to_string(rest_vulnerable) + " | " + pct_cell(rest_devices, device_total, 2) +
             " |\n";
    }
  }
  out += "\n";

  out += "## Vulnerabilities\n\n";
  out += "| Vulnerability | Manufacturer | Type | Score | Severity | Occurrences | Unique "
         "Devices |\n|---|---|---|---:|---|---:|---:|\n";
  for (const CveRow& r : cve_table(bundle))
    out += "| " + md_cell(r.cve) + " | " + md_cell(r.manufacturer) + " | " +
           detail::capitalized(to_string(r.vector)) + " | " + format_fixed(r.score, 1) + " | " +
           r.severity + " | " + std::to_string(r.occurrences) + " | " +
           std::to_string(r.unique_devices) + " |\n";
  out += "\n";

  const SeverityCounts sev = severity_distribution(bundle);
  out += "## Severity distribution\n\n";
  out += "| Severity | Occurrences | Percentage |\n|---|---:|---:|\n";
  out += "| high | " + std::to_string(sev.high) + " | " + pct_cell(sev.high, sev.total(), 1) +
         " |\n";
  out += "| medium | " + std::to_string(sev.medium) + " | " +
         pct_cell(sev.medium, sev.total(), 1) + " |\n";
  out += "| low | " + std::to_string(sev.low) + " | " + pct_cell(sev.low, sev.total(), 1) +
         " |\n\n";

  const ExposureCounts exp = exposure_counts(bundle);
  out += "## Exposure\n\n";
  out += "| Status | Devices | Percentage |\n|---|---:|---:|\n";
  out += "| vulnerable | " + std::to_string(exp.vulnerable) + " | " +
         pct_cell(exp.vulnerable, device_total, 1) + " |\n";
  out += "| not vulnerable | " + std::to_string(exp.not_vulnerable) + " | " +
         pct_cell(exp.not_vulnerable, device_total, 1) + " |\n";
  out += "| unknown | " + std::to_string(exp.unknown) + " | " +
         pct_cell(exp.unknown, device_total, 1) + " |\n\n";
  out += "Of the vulnerable devices:\n\n";
  out += "| Exposure | Devices | Percentage |\n|---|---:|---:|\n";
  out += "| remotely exploitable | " + std::to_string(exp.remote) + " | " +
         pct_cell(exp.remote, exp.vulnerable, 1) + " |\n";
  out += "| local only | " + std::to_string(exp.local_only) + " | " +
         pct_cell(exp.local_only, exp.vulnerable, 1) + " |\n\n";

  out += "## Findings per device\n\n";
  out += "| Findings | Devices |\n|---:|---:|\n";
  for (const HistogramRow& r : findings_histogram(bundle))
    out += "| " + std::to_string(r.findings) + " | " + std::to_string(r.devices) + " |\n";

  return out;
}

inline std::map<std::string, std::string> render_csv(const AnalysisBundle& bundle) {
  using detail::pct_cell;
  std::map<std::string, std::string> files;
  const uint64_t device_total = bundle.devices.size();

  {
    const FunnelReport& f = bundle.funnel;
    std::string csv = "metric,value\n";
    csv += "total_devices," + std::to_string(f.total_devices) + "\n";
    csv += "total_services," + std::to_string(f.total_services) + "\n";
    csv += "devices_with_ics_ports," + std::to_string(f.devices_with_ics_ports) + "\n";
    csv += "services_on_ics_port_devices," + std::to_string(f.services_on_ics_port_devices) +
           "\n";
    csv += "ics_devices," + std::to_string(f.ics_devices) + "\n";
    csv += "ics_services," + std::to_string(f.ics_services) + "\n";
    csv += "average_ics_services," +
           (f.ics_devices == 0
                ? std::string("n/a")
                : format_fixed(
                      static_cast<double>(f.ics_services) / static_cast<double>(f.ics_devices), 1)) +
           "\n";
    files["tables/funnel.csv"] = std::move(csv);
  }

  {
    std::string csv = "cve,manufacturer,vector,score,severity,occurrences,unique_devices\n";
    for (const CveRow& r : cve_table(bundle))
      csv += csv_escape(r.cve) + "," + csv_escape(r.manufacturer) + "," + to_string(r.vector) +
             "," + format_fixed(r.score, 1) + "," + r.severity + "," +
             std::to_string(r.occurrences) + "," + std::to_string(r.unique_devices) + "\n";
    files["tables/cves.csv"] = std::move(csv);
  }

  {
    const SeverityCounts sev = severity_distribution(bundle);
    std::string csv = "severity,occurrences,percentage\n";
    csv += "high," + std::to_string(sev.high) + "," + pct_cell(sev.high, sev.total(), 1) + "\n";
    csv += "medium," + std::to_string(sev.medium) + "," + pct_cell(sev.medium, sev.total(), 1) +
           "\n";
    csv += "low," + std::to_string(sev.low) + "," + pct_cell(sev.low, sev.total(), 1) + "\n";
    files["tables/severity.csv"] = std::move(csv);
  }

  {
    const ExposureCounts exp = exposure_counts(bundle);
    std::string csv = "metric,devices,percentage\n";
    csv += "vulnerable," + std::to_string(exp.vulnerable) + "," +
           pct_cell(exp.vulnerable, device_total, 1) + "\n";
    csv += "not_vulnerable," + std::to_string(exp.not_vulnerable) + "," +
           pct_cell(exp.not_vulnerable, device_total, 1) + "\n";
    csv += "unknown," + std::to_string(exp.unknown) + "," +
           pct_cell(exp.unknown, device_total, 1) + "\n";
    csv += "remote," + std::to_string(exp.remote) + "," +
           pct_cell(exp.remote, exp.vulnerable, 1) + "\n";
    csv += "local_only," + std::to_string(exp.local_only) + "," +
           pct_cell(exp.local_only, exp.vulnerable, 1) + "\n";
    files["tables/exposure.csv"] = std::move(csv);
  }

  {
    std::string csv = "findings,devices\n";
    for (const HistogramRow& r : findings_histogram(bundle))
      csv += std::to_string(r.findings) + "," + std::to_string(r.devices) + "\n";
    files["tables/histogram.csv"] = std::move(csv);
  }

  {
    std::string csv = "name,devices,percentage\n";
    for (const NamedCount& r : top_n(manufacturer_counts(bundle), 10))
      csv += csv_escape(r.name) + "," + std::to_string(r.count) + "," +
             pct_cell(r.count, device_total, 2) + "\n";
    files["tables/manufacturers.csv"] = std::move(csv);
  }

  {
    std::string csv = "name,devices,percentage\n";
    for (const NamedCount& r : top_n(product_counts(bundle), 10))
      csv += csv_escape(r.name) + "," + std::to_string(r.count) + "," +
             pct_cell(r.count, device_total, 2) + "\n";
    files["tables/products.csv"] = std::move(csv);
  }

  {
    std::string csv = "asn,name,devices,vulnerable,percentage\n";
    const std::vector<AsAggregate>& all = bundle.as_aggregates;
    const size_t shown = std::min<size_t>(all.size(), 10);
    for (size_t i = 0; i < shown; ++i) {
      const AsAggregate& a = all[i];
      csv += (a.asn ? std::to_string(*a.asn) : std::string()) + "," + csv_escape(a.name) + "," +
             std::to_string(a.device_count) + "," + std::to_string(a.vulnerable_device_count) +
             "," + pct_cell(a.device_count, device_total, 2) + "\n";
    }
    if (all.size() > shown) {
      uint64_t rest_devices = 0, rest_vulnerable = 0;
      for (size_t i = shown; i < all.size(); ++i) {
        rest_devices += all[i].device_count;
        rest_vulnerable += all[i].vulnerable_device_count;
      }
      csv += ",others," + std::to_string(rest_devices) + "," + std::to_string(rest_vulnerable) +
             "," + pct_cell(rest_devices, device_total, 2) + "\n";
    }
    files["tables/ases.csv"] = std::move(csv);
  }

  return files;
}

// Render to the named format. Returns {relative path -> bytes}.
// Formats: json, markdown, csv, all.
inline std::map<std::string, std::string> render(const AnalysisBundle& bundle,
                                                 std::string_view format) {
  std::map<std::string, std::string> files;
  if (format == "json" || format == "all") files["report.json"] = render_json(bundle);
  if (format == "markdown" || format == "all") files["report.md"] = render_markdown(bundle);
  if (format == "csv" || format == "all") {
    for (auto& [name, bytes] : render_csv(bundle)) files[name] = std::move(bytes);
  }
  if (files.empty()) throw std::invalid_argument("unknown format: " + std::string(format));
  return files;
}

}  // namespace icsmap
