#pragma once
// Pipeline stages and the on-disk interchange formats between them.
//
// The pipeline is ingest -> classify -> correlate -> render. Each stage can
// run in-process (the `stage_*` functions) or as a separate CLI invocation
// that communicates through files:
//
//   records.ndjson  accepted scan records, canonical NDJSON (sorted keys)
//   rejects.txt     one "<source>:<line>: <reason>" line per rejected input
//   devices.ndjson  grouped devices with classification evidence
//   analysis.json   the analysis bundle (see report.hpp)
//
// Serialization is canonical and self-inverse: parsing a file this module
// wrote and re-serializing it yields the same bytes, so a staged run and a
// single-process run produce identical artifacts. Re-parsing is strict —
// a stage does not accept from a file what it would not have produced.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "icsmap/classify.hpp"
#include "icsmap/errors.hpp"
#include "icsmap/protocol_registry.hpp"
#include "icsmap/scan.hpp"
#include "icsmap/signatures.hpp"
#include "icsmap/util.hpp"

namespace icsmap {

// ------------------------------------------------------ records.ndjson

inline nlohmann::json record_to_json(const ScanRecord& record) {
  nlohmann::json j = {{"banner", record.banner}, {"country", record.country},
                      {"ip", record.ip.text},    {"port", record.port},
                      {"transport", to_string(record.transport)}, {"ts", record.ts.raw}};
  if (record.asn) j["asn"] = *record.asn;
  if (record.as_name) j["as_name"] = *record.as_name;
  return j;
}

inline std::string serialize_records(const std::vector<ScanRecord>& records) {
  std::string out;
  for (const ScanRecord& r : records) out += record_to_json(r).dump() + "\n";
  return out;
}

inline std::string serialize_rejects(const std::vector<RejectedLine>& rejects,
                                     std::string_view source) {
  std::string out;
  for (const RejectedLine& r : rejects)
    out += std::string(source) + ":" + std::to_string(r.line_no) + ": " + r.reason + "\n";
  return out;
}

// Parse NDJSON produced by this pipeline; any rejected line is a hard error.
inline std::vector<ScanRecord> parse_records_strict(std::string_view ndjson,
                                                    std::string_view source) {
  ParseResult result = parse_records(ndjson);
  if (!result.rejects.empty()) {
    const RejectedLine& first = result.rejects.front();
    throw ValidationError(std::string(source) + ":" + std::to_string(first.line_no) + ": " +
                          first.reason);
  }
  return result.records;
}

// ------------------------------------------------------ devices.ndjson

namespace detail {

inline nlohmann::json device_to_json(const Device& device, const ClassifiedDevice& classified) {
  nlohmann::json services = nlohmann::json::array();
  for (size_t i = 0; i < device.services.size(); ++i) {
    const ScanRecord& s = device.services[i];
    nlohmann::json sj = {{"banner", s.banner}, {"country", s.country},
                         {"port", s.port},     {"transport", to_string(s.transport)},
                         {"ts", s.ts.raw}};
    if (s.asn) sj["asn"] = *s.asn;
    if (s.as_name) sj["as_name"] = *s.as_name;
    if (classified.cls) {
      const ServiceEvidence& ev = classified.evidence[i];
      sj["class"] = to_string(ev.cls);
      sj["positive"] = ev.positive;
      sj["negative"] = ev.negative;
    }
    services.push_back(std::move(sj));
  }
  nlohmann::json j = {{"has_ics_port", device.has_ics_port},
                      {"ip", device.ip.text},
                      {"services", std::move(services)}};
  if (classified.cls) j["class"] = to_string(*classified.cls);
  return j;
}

}  // namespace detail

inline std::string serialize_devices(const std::vector<Device>& devices,
                                     const CorpusClassification& classification) {
  std::string out;
  for (size_t i = 0; i < devices.size(); ++i)
    out += detail::device_to_json(devices[i], classification.devices[i]).dump() + "\n";
  return out;
}

struct ClassifiedCorpus {
  std::vector<Device> devices;
  CorpusClassification classification;
};

// Parse devices.ndjson back into devices plus classification. The funnel is
// recomputed from the recorded per-device data. Throws ValidationError on any
// deviation from the format serialize_devices writes.
inline ClassifiedCorpus parse_devices(std::string_view ndjson, std::string_view source) {
  ClassifiedCorpus corpus;
  size_t line_no = 0;
  size_t start = 0;
  auto fail = [&](const std::string& reason) -> ValidationError {
    return ValidationError(std::string(source) + ":" + std::to_string(line_no) + ": " + reason);
  };
  while (start < ndjson.size()) {
    size_t end = ndjson.find('\n', start);
    if (end == std::string_view::npos) end = ndjson.size();
    std::string_view line = ndjson.substr(start, end - start);
    start = end + 1;
    line_no += 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) throw fail("not a json object");
    auto require = [&](const nlohmann::json& obj, const char* key) -> const nlohmann::json& {
      auto it = obj.find(key);
      if (it == obj.end()) throw fail(std::string("missing field: ") + key);
      return *it;
    };

    Device device;
    ClassifiedDevice classified;

    const nlohmann::json& ip = require(j, "ip");
    if (!ip.is_string()) throw fail("invalid ip");
    IpParseResult parsed_ip = parse_ipv4(ip.get_ref<const std::string&>());
    if (parsed_ip.status != IpParseStatus::ok) throw fail("invalid ip");
    device.ip = parsed_ip.ip;

    const nlohmann::json& has_ics = require(j, "has_ics_port");
    if (!has_ics.is_boolean()) throw fail("invalid has_ics_port");
    device.has_ics_port = has_ics.get<bool>();

    if (auto it = j.find("class"); it != j.end()) {
      if (!it->is_string()) throw fail("invalid class");
      auto cls = device_class_from_string(it->get_ref<const std::string&>());
      if (!cls) throw fail("invalid class");
      classified.cls = *cls;
    }
    if (device.has_ics_port != classified.cls.has_value())
      throw fail("class must be present exactly when has_ics_port is true");

    const nlohmann::json& services = require(j, "services");
    if (!services.is_array() || services.empty()) throw fail("invalid services");
    for (const nlohmann::json& sj : services) {
      if (!sj.is_object()) throw fail("invalid service");
      ScanRecord s;
      s.ip = device.ip;
      const nlohmann::json& banner = require(sj, "banner");
      const nlohmann::json& country = require(sj, "country");
      const nlohmann::json& port = require(sj, "port");
      const nlohmann::json& transport = require(sj, "transport");
      const nlohmann::json& ts = require(sj, "ts");
      if (!banner.is_string() || !country.is_string()) throw fail("invalid service");
      s.banner = banner.get<std::string>();
      s.country = country.get<std::string>();
      if (!port.is_number_integer()) throw fail("invalid port");
      const int64_t port_value = port.get<int64_t>();
      if (port_value < 1 || port_value > 65535) throw fail("port out of range");
      s.port = static_cast<uint16_t>(port_value);
      if (!transport.is_string()) throw fail("invalid transport");
      const std::string& t = transport.get_ref<const std::string&>();
      if (t == "tcp")
        s.transport = Transport::tcp;
      else if (t == "udp")
        s.transport = Transport::udp;
      else
        throw fail("invalid transport");
      if (!ts.is_string()) throw fail("invalid timestamp");
      auto parsed_ts = parse_rfc3339(ts.get_ref<const std::string&>());
      if (!parsed_ts) throw fail("invalid timestamp");
      s.ts = std::move(*parsed_ts);
      if (auto it = sj.find("asn"); it != sj.end()) {
        if (!it->is_number_unsigned()) throw fail("invalid asn");
        s.asn = it->get<uint32_t>();
      }
      if (auto it = sj.find("as_name"); it != sj.end()) {
        if (!it->is_string()) throw fail("invalid as_name");
        s.as_name = it->get<std::string>();
      }

      if (classified.cls) {
        ServiceEvidence ev;
        const nlohmann::json& cls = require(sj, "class");
        if (!cls.is_string()) throw fail("invalid service class");
        auto parsed_cls = service_class_from_string(cls.get_ref<const std::string&>());
        if (!parsed_cls) throw fail("invalid service class");
        ev.cls = *parsed_cls;
        auto string_list = [&](const char* key) {
          const nlohmann::json& v = require(sj, key);
          if (!v.is_array()) throw fail(std::string("invalid ") + key);
          std::vector<std::string> out;
          for (const nlohmann::json& item : v) {
            if (!item.is_string()) throw fail(std::string("invalid ") + key);
            out.push_back(item.get<std::string>());
          }
          return out;
        };
        ev.positive = string_list("positive");
        ev.negative = string_list("negative");
        classified.evidence.push_back(std::move(ev));
      }
      device.services.push_back(std::move(s));
    }

    corpus.devices.push_back(std::move(device));
    corpus.classification.devices.push_back(std::move(classified));
  }

  // Recompute the funnel from the recorded devices.
  FunnelReport& f = corpus.classification.funnel;
  f.total_devices = corpus.devices.size();
  for (size_t i = 0; i < corpus.devices.size(); ++i) {
    const Device& d = corpus.devices[i];
    const ClassifiedDevice& c = corpus.classification.devices[i];
    f.total_services += d.services.size();
    if (d.has_ics_port) {
      f.devices_with_ics_ports += 1;
      f.services_on_ics_port_devices += d.services.size();
    }
    if (c.cls && *c.cls == DeviceClass::ics) {
      f.ics_devices += 1;
      for (const ServiceEvidence& ev : c.evidence)
        if (ev.cls == ServiceClass::ics) f.ics_services += 1;
    }
  }
  return corpus;
}

// --------------------------------------------------------------- stages

struct IngestOutput {
  std::vector<ScanRecord> records;  // deduplicated, filtered, key-sorted
  std::vector<RejectedLine> rejects;
};

// Parse raw scan NDJSON, deduplicate by (ip, port, transport) keeping the
// newest observation, and keep only records for the given country.
inline IngestOutput stage_ingest(std::string_view ndjson, const std::string& country) {
  ParseResult parsed = parse_records(ndjson);
  IngestOutput out;
  out.rejects = std::move(parsed.rejects);
  out.records = filter_country(dedup_records(parsed.records), country);
  return out;
}

// Group records into devices and classify everything behind the port
// prefilter.
inline ClassifiedCorpus stage_classify(const std::vector<ScanRecord>& records,
                                       const ProtocolRegistry& registry,
                                       const SignatureSet& signatures) {
  ClassifiedCorpus corpus;
  corpus.devices = group_devices(records, registry);
  corpus.classification = classify_corpus(corpus.devices, signatures);
  return corpus;
}

}  // namespace icsmap
