#pragma once
// Deterministic fixture corpora for analysis-level tests.
//
// `reference_bundle` builds a 989-device population whose per-CVE statistics,
// severity distribution, and exposure split are frozen in
// tests/data/cve_reference.json and asserted in the analysis tests and the
// acceptance suite. The population is constructed from fingerprints so every
// expected number is forced by design, not by the code under test.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <icsmap/icsmap.hpp>

#include "helpers.hpp"

namespace fixtures {

struct DeviceSpec {
  std::optional<std::string> manufacturer;
  std::optional<std::string> product;
  std::optional<std::string> version;
  int service_count = 1;
};

// The 63 devices that carry at least one vulnerability match.
inline std::vector<DeviceSpec> vulnerable_specs() {
  std::vector<DeviceSpec> specs;
  auto add = [&](int n, const char* manufacturer, const char* product,
                 std::optional<std::string> version = std::nullopt, int services = 1) {
    for (int i = 0; i < n; ++i)
      specs.push_back({std::string(manufacturer), std::string(product), version, services});
  };
  // Siemens S7-300 family. The first device exposes the same module string on
  // two services, so its findings count twice in occurrences but once in
  // unique-device tallies.
  add(1, "Siemens", "SIMATIC S7-300 CPU 315 CPU 317 CP 443", std::nullopt, 2);
  add(14, "Siemens", "SIMATIC S7-300 CPU 315 CPU 317 CP 443");
  add(1, "Siemens", "SIMATIC S7-300 CPU 315 CPU 317");
  add(1, "Siemens", "SIMATIC S7-300 CPU 315 CP 443");
  add(1, "Siemens", "SIMATIC S7-300 CPU 317 CP 443");
  add(1, "Siemens", "Simatic S7-300 CPU 315 CPU 317 CP 443");  // mixed-case variant
  add(1, "Siemens", "SIMATIC S7-300 PN/DP SCALANCE M-800");
  add(3, "Siemens", "Simatic S7-300 PN/DP");  // only local-vector findings
  // Omron CJ2 series.
  add(23, "Omron", "CJ2M CPU Unit");
  add(2, "Omron", "CJ2H CPU Unit");
  // Rockwell MicroLogix.
  add(8, "Rockwell", "MicroLogix 1400", std::string("FRN 21"));
  // Schneider.
  add(4, "Schneider", "TM221CE40R");
  add(1, "Schneider", "BMX P34 2020");
  // Tridium.
  add(1, "Tridium", "NiagaraAX Station", std::string("3.5"));
  add(1, "Tridium", "NiagaraAX Station", std::string("3.6"));
  return specs;
}

// Fingerprinted products that match nothing in the vulnerability database.
inline const std::array<std::pair<const char*, const char*>, 8>& benign_products() {
  static const std::array<std::pair<const char*, const char*>, 8> products = {{
      {"Moxa", "NPort 5110"},
      {"Phoenix Contact", "ILC 151 GSM/GPRS"},
      {"Omron", "PLC Web Interface"},
      {"3S-Smart Software Solutions", "CODESYS Webserver"},
      {"Honeywell", "E-DDC 3.0"},
      {"Lantronix", "XPort"},
      {"Moxa", "MoxaHttp 1.0"},
      {"Sauter", "EY-AS525F001"},
  }};
  return products;
}

inline icsmap::AnalyzedDevice make_device(uint32_t index, const DeviceSpec& spec,
                                          const icsmap::VulnDb& db) {
  using namespace icsmap;
  AnalyzedDevice d;
  d.ip = ipv4_from_value(0x0A000000u + index);  // 10.x.y.z, ascending with index
  for (int s = 0; s < spec.service_count; ++s) {
    ScanRecord r;
    r.ip = d.ip;
    r.port = static_cast<uint16_t>(102 + 400 * s);
    r.transport = Transport::tcp;
    r.ts = *parse_rfc3339("2018-05-28T12:00:00Z");
    r.banner = spec.product ? *spec.product : std::string("connection established");
    r.country = "NL";
    d.services.push_back(std::move(r));
    d.service_classes.push_back(ServiceClass::ics);
    d.fingerprints.push_back(Fingerprint{spec.manufacturer, spec.product, spec.version});
  }
  const std::vector<ServiceFinding> matched = match_device(d.fingerprints, db);
  d.findings = finding_rows(matched);
  d.status = device_status(d.fingerprints, matched);
  d.exposure = device_exposure(matched);
  return d;
}

// 989 ICS devices: 63 vulnerable, 72 with no fingerprint at all (unknown),
// 854 fingerprinted but matching nothing (not vulnerable).
inline icsmap::AnalysisBundle reference_bundle(const icsmap::VulnDb& db) {
  using namespace icsmap;
  AnalysisBundle bundle;
  uint32_t index = 1;
  for (const DeviceSpec& spec : vulnerable_specs())
    bundle.devices.push_back(make_device(index++, spec, db));
  for (int i = 0; i < 72; ++i)
    bundle.devices.push_back(make_device(index++, DeviceSpec{}, db));
  const auto& benign = benign_products();
  for (int i = 0; i < 854; ++i) {
    const auto& [manufacturer, product] = benign[static_cast<size_t>(i) % benign.size()];
    bundle.devices.push_back(make_device(
        index++, DeviceSpec{std::string(manufacturer), std::string(product), std::nullopt, 1},
        db));
  }

  uint64_t services = 0;
  for (const AnalyzedDevice& d : bundle.devices) services += d.services.size();
  bundle.funnel.total_devices = bundle.devices.size();
  bundle.funnel.total_services = services;
  bundle.funnel.devices_with_ics_ports = bundle.devices.size();
  bundle.funnel.services_on_ics_port_devices = services;
  bundle.funnel.ics_devices = bundle.devices.size();
  bundle.funnel.ics_services = services;

  std::vector<std::pair<std::optional<AsInfo>, bool>> attributions;
  attributions.reserve(bundle.devices.size());
  for (const AnalyzedDevice& d : bundle.devices)
    attributions.emplace_back(d.as_info, d.status == VulnStatus::vulnerable);
  bundle.as_aggregates = aggregate_by_as(attributions);
  return bundle;
}

inline const icsmap::VulnDb& bundled_vulndb() {
  static const icsmap::VulnDb db = icsmap::VulnDb::load(testutil::data_dir() / "table41.json");
  return db;
}

inline const icsmap::AnalysisBundle& cached_reference_bundle() {
  static const icsmap::AnalysisBundle bundle = reference_bundle(bundled_vulndb());
  return bundle;
}

// Rows of a frozen CSV: (name, devices, percentage-text).
struct CountRow {
  std::string name;
  uint64_t devices = 0;
  std::string percentage;
};

inline std::vector<CountRow> load_manufacturer_counts() {
  const auto rows = icsmap::read_csv(testutil::test_data_dir() / "manufacturer_counts.csv",
                                     {"name", "devices", "percentage"});
  std::vector<CountRow> out;
  for (const icsmap::CsvRow& r : rows)
    out.push_back({r.fields[0], *icsmap::parse_uint(r.fields[1]), r.fields[2]});
  return out;
}

struct AsCountRow {
  uint32_t asn = 0;
  std::string name;
  uint64_t devices = 0;
  std::string percentage;
};

inline std::vector<AsCountRow> load_as_counts() {
  const auto rows = icsmap::read_csv(testutil::test_data_dir() / "as_counts.csv",
                                     {"asn", "name", "devices", "percentage"});
  std::vector<AsCountRow> out;
  for (const icsmap::CsvRow& r : rows)
    out.push_back({static_cast<uint32_t>(*icsmap::parse_uint(r.fields[0])), r.fields[1],
                   *icsmap::parse_uint(r.fields[2]), r.fields[3]});
  return out;
}

// A bundle whose manufacturer table reproduces a frozen per-manufacturer
// device census (one single-service device per counted unit).
inline icsmap::AnalysisBundle manufacturer_census_bundle(const std::vector<CountRow>& rows,
                                                         const icsmap::VulnDb& db) {
  icsmap::AnalysisBundle bundle;
  uint32_t index = 1;
  for (const CountRow& row : rows) {
    for (uint64_t i = 0; i < row.devices; ++i) {
      DeviceSpec spec{row.name, row.name + " unit", std::nullopt, 1};
      bundle.devices.push_back(make_device(index++, spec, db));
    }
  }
  bundle.funnel.total_devices = bundle.devices.size();
  bundle.funnel.total_services = bundle.devices.size();
  bundle.funnel.devices_with_ics_ports = bundle.devices.size();
  bundle.funnel.services_on_ics_port_devices = bundle.devices.size();
  bundle.funnel.ics_devices = bundle.devices.size();
  bundle.funnel.ics_services = bundle.devices.size();
  return bundle;
}

}  // namespace fixtures
