#pragma once
// Scan record ingestion: NDJSON parsing with per-line reject collection,
// deduplication on (ip, port, transport) keeping the freshest observation,
// country filtering, and grouping records into devices by IP.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "icsmap/errors.hpp"
#include "icsmap/protocol_registry.hpp"
#include "icsmap/util.hpp"

namespace icsmap {

struct ScanRecord {
  Ipv4 ip;
  uint16_t port = 0;
  Transport transport = Transport::tcp;  // records are tcp or udp, never "either"
  Timestamp ts;
  std::string banner;
  std::string country;
  std::optional<uint32_t> asn;
  std::optional<std::string> as_name;

  std::tuple<uint32_t, uint16_t, Transport> key() const { return {ip.value, port, transport}; }

  friend bool operator==(const ScanRecord& a, const ScanRecord& b) {
    return a.ip == b.ip && a.port == b.port && a.transport == b.transport && a.ts == b.ts &&
           a.banner == b.banner && a.country == b.country && a.asn == b.asn &&
           a.as_name == b.as_name;
  }
};

struct RejectedLine {
  size_t line_no = 0;  // 1-based
  std::string reason;
  friend bool operator==(const RejectedLine&, const RejectedLine&) = default;
};

struct ParseResult {
  std::vector<ScanRecord> records;  // stream order
  std::vector<RejectedLine> rejects;
};

namespace detail {

// Parses one already-decoded JSON object into a record; returns a reason on failure.
inline std::optional<std::string> record_from_json(const nlohmann::json& j, ScanRecord& out) {
  if (!j.is_object()) return "not a json object";

  auto field = [&](const char* name) -> const nlohmann::json* {
    auto it = j.find(name);
    return it == j.end() ? nullptr : &*it;
  };

  const nlohmann::json* ip = field("ip");
  if (!ip) return "missing field: ip";
  if (!ip->is_string()) return "invalid ip";
  IpParseResult parsed = parse_ipv4(ip->get_ref<const std::string&>());
  if (parsed.status == IpParseStatus::ipv6_unsupported) return "ipv6 address unsupported";
  if (parsed.status != IpParseStatus::ok) return "invalid ip";
  out.ip = parsed.ip;

  const nlohmann::json* port = field("port");
  if (!port) return "missing field: port";
  if (!port->is_number_integer() || port->is_boolean()) return "invalid port";
  const int64_t port_value = port->get<int64_t>();
  if (port_value < 1 || port_value > 65535) return "port out of range";
  out.port = static_cast<uint16_t>(port_value);

  const nlohmann::json* transport = field("transport");
  if (!transport) return "missing field: transport";
  if (!transport->is_string()) return "invalid transport";
  const std::string& t = transport->get_ref<const std::string&>();
  if (t == "tcp")
    out.transport = Transport::tcp;
  else if (t == "udp")
    out.transport = Transport::udp;
  else
    return "invalid transport";

  const nlohmann::json* ts = field("ts");
  if (!ts) return "missing field: ts";
  if (!ts->is_string()) return "invalid timestamp";
  auto parsed_ts = parse_rfc3339(ts->get_ref<const std::string&>());
  if (!parsed_ts) return "invalid timestamp";
  out.ts = std::move(*parsed_ts);

  const nlohmann::json* banner = field("banner");
  if (!banner) return "missing field: banner";
  if (!banner->is_string()) return "invalid banner";
  out.banner = banner->get<std::string>();

  const nlohmann::json* country = field("country");
  if (!country) return "missing field: country";
  if (!country->is_string()) return "invalid country";
  const std::string& cc = country->get_ref<const std::string&>();
  if (cc.size() != 2 || cc[0] < 'A' || cc[0] > 'Z' || cc[1] < 'A' || cc[1] > 'Z')
    return "invalid country";
  out.country = cc;

  if (const nlohmann::json* asn = field("asn")) {
    if (!asn->is_number_integer() || asn->get<int64_t>() < 0 ||
        asn->get<int64_t>() > 4294967295LL)
      return "invalid asn";
    out.asn = static_cast<uint32_t>(asn->get<int64_t>());
  }
  if (const nlohmann::json* as_name = field("as_name")) {
    if (!as_name->is_string()) return "invalid as_name";
    out.as_name = as_name->get<std::string>();
  }
  // Unknown keys are deliberately ignored: upstream exports evolve.
  return std::nullopt;
}

}  // namespace detail

// Parse newline-delimited JSON. Malformed lines never abort the parse: they
// are collected as rejects with a stable reason string. Blank lines are
// skipped without comment.
inline ParseResult parse_records(std::string_view ndjson) {
  ParseResult result;
  size_t line_no = 0;
  size_t start = 0;
  while (start <= ndjson.size()) {
    size_t end = ndjson.find('\n', start);
    std::string_view line;
    if (end == std::string_view::npos) {
      if (start == ndjson.size()) break;
      line = ndjson.substr(start);
      start = ndjson.size() + 1;
    } else {
      line = ndjson.substr(start, end - start);
      start = end + 1;
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      result.rejects.push_back({line_no, "invalid json"});
      continue;
    }
    ScanRecord record;
    if (auto reason = detail::record_from_json(j, record)) {
      result.rejects.push_back({line_no, std::move(*reason)});
      continue;
    }
    result.records.push_back(std::move(record));
  }
  return result;
}

// Deduplicate on (ip, port, transport). The record with the latest timestamp
// wins; on an exact timestamp tie the record appearing later in the stream
// wins. Output is sorted by (ip, port, transport).
inline std::vector<ScanRecord> dedup_records(const std::vector<ScanRecord>& records) {
  std::map<std::tuple<uint32_t, uint16_t, Transport>, size_t> best;
  for (size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] = best.try_emplace(records[i].key(), i);
    if (!inserted && !(records[i].ts < records[it->second].ts)) it->second = i;
  }
  std::vector<ScanRecord> out;
  out.reserve(best.size());
  for (const auto& [key, idx] : best) out.push_back(records[idx]);  // map order == key order
  return out;
}

// Keep records whose country equals `cc` exactly. `cc` must be exactly two
// uppercase ASCII letters; anything else is an argument error.
inline std::vector<ScanRecord> filter_country(const std::vector<ScanRecord>& records,
                                              std::string_view cc) {
  if (cc.size() != 2 || cc[0] < 'A' || cc[0] > 'Z' || cc[1] < 'A' || cc[1] > 'Z')
    throw std::invalid_argument("country code must be two uppercase letters, got '" +
                                std::string(cc) + "'");
  std::vector<ScanRecord> out;
  for (const ScanRecord& r : records)
    if (r.country == cc) out.push_back(r);
  return out;
}

struct Device {
  Ipv4 ip;
  std::vector<ScanRecord> services;  // sorted by (port, transport)
  bool has_ics_port = false;         // any service on a registry port
};

// Group records into devices by IP. Devices are sorted by IP; services within
// a device by (port, transport). `has_ics_port` is true when any service sits
// on a port claimed by a registry protocol.
inline std::vector<Device> group_devices(const std::vector<ScanRecord>& records,
                                         const ProtocolRegistry& registry) {
  std::map<uint32_t, Device> by_ip;
  for (const ScanRecord& r : records) {
    Device& d = by_ip[r.ip.value];
    if (d.services.empty()) d.ip = r.ip;
    d.services.push_back(r);
  }
  std::vector<Device> devices;
  devices.reserve(by_ip.size());
  for (auto& [value, d] : by_ip) {
    std::sort(d.services.begin(), d.services.end(), [](const ScanRecord& a, const ScanRecord& b) {
      return std::tuple(a.port, a.transport, a.ts) < std::tuple(b.port, b.transport, b.ts);
    });
    for (const ScanRecord& s : d.services)
      if (registry.is_ics_port(s.port)) {
        d.has_ics_port = true;
        break;
      }
    devices.push_back(std::move(d));
  }
  return devices;
}

}  // namespace icsmap
