#pragma once
// Registry of industrial protocols: name, default ports, transport, and
// which public scan engines probe them. Backed by a CSV file with header
//   name,ports,transport,shodan,censys
// where `ports` is a ';'-separated list and shodan/censys are yes/no.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "icsmap/errors.hpp"
#include "icsmap/util.hpp"

namespace icsmap {

enum class Transport : uint8_t { tcp, udp, either };

inline const char* to_string(Transport t) {
  switch (t) {
    case Transport::tcp: return "tcp";
    case Transport::udp: return "udp";
    case Transport::either: return "either";
  }
  return "?";
}

inline std::optional<Transport> transport_from_string(std::string_view s) {
  if (s == "tcp") return Transport::tcp;
  if (s == "udp") return Transport::udp;
  if (s == "either") return Transport::either;
  return std::nullopt;
}

struct Protocol {
  std::string name;
  std::vector<uint16_t> ports;  // file order
  Transport transport = Transport::either;
  bool shodan = false;
  bool censys = false;
};

struct EngineCoverage {
  bool shodan = false;
  bool censys = false;
  friend bool operator==(const EngineCoverage&, const EngineCoverage&) = default;
};

class ProtocolRegistry {
 public:
  ProtocolRegistry() = default;

  static ProtocolRegistry from_protocols(std::vector<Protocol> protocols,
                                         const std::string& source = "<memory>") {
    ProtocolRegistry reg;
    std::set<std::string> seen;
    for (Protocol& p : protocols) {
      if (p.name.empty()) throw ValidationError(source + ": empty protocol name");
      if (!seen.insert(p.name).second)
        throw ValidationError(source + ": duplicate protocol name '" + p.name + "'");
      if (p.ports.empty())
        throw ValidationError(source + ": protocol '" + p.name + "' has no ports");
      std::set<uint16_t> port_seen;
      for (uint16_t port : p.ports) {
        if (!port_seen.insert(port).second)
          throw ValidationError(source + ": protocol '" + p.name + "' lists port " +
                                std::to_string(port) + " twice");
      }
    }
    reg.protocols_ = std::move(protocols);
    for (size_t i = 0; i < reg.protocols_.size(); ++i)
      for (uint16_t port : reg.protocols_[i].ports) reg.by_port_[port].push_back(i);
    return reg;
  }

  static ProtocolRegistry load(const std::filesystem::path& path) {
    static const std::vector<std::string> kHeader = {"name", "ports", "transport", "shodan",
                                                     "censys"};
    std::vector<Protocol> protocols;
    for (const CsvRow& row : read_csv(path, kHeader)) {
      const std::string where = path.string() + ":" + std::to_string(row.line_no);
      Protocol p;
      p.name = row.fields[0];
      for (const std::string& part : split(row.fields[1], ';')) {
        auto n = parse_uint(part);
        if (!n || *n < 1 || *n > 65535)
          throw ValidationError(where + ": invalid port '" + part + "'");
        p.ports.push_back(static_cast<uint16_t>(*n));
      }
      auto transport = transport_from_string(row.fields[2]);
      if (!transport)
        throw ValidationError(where + ": invalid transport '" + row.fields[2] + "'");
      p.transport = *transport;
      auto parse_bool = [&](const std::string& s) -> bool {
        if (s == "yes") return true;
        if (s == "no") return false;
        throw ValidationError(where + ": expected yes/no, got '" + s + "'");
      };
      p.shodan = parse_bool(row.fields[3]);
      p.censys = parse_bool(row.fields[4]);
      protocols.push_back(std::move(p));
    }
    return from_protocols(std::move(protocols), path.string());
  }

  size_t size() const { return protocols_.size(); }
  const std::vector<Protocol>& protocols() const { return protocols_; }

  const Protocol* find(std::string_view name) const {
    for (const Protocol& p : protocols_)
      if (p.name == name) return &p;
    return nullptr;
  }

  // Names of all protocols claiming `port`, in file order.
  std::vector<std::string> protocols_for_port(uint16_t port) const {
    std::vector<std::string> names;
    auto it = by_port_.find(port);
    if (it == by_port_.end()) return names;
    for (size_t idx : it->second) names.push_back(protocols_[idx].name);
    return names;
  }

  bool is_ics_port(uint16_t port) const { return by_port_.count(port) != 0; }

  std::set<uint16_t> ics_ports() const {
    std::set<uint16_t> ports;
    for (const auto& [port, idx] : by_port_) ports.insert(port);
    return ports;
  }

  std::optional<EngineCoverage> engine_coverage(std::string_view name) const {
    const Protocol* p = find(name);
    if (!p) return std::nullopt;
    return EngineCoverage{p->shodan, p->censys};
  }

 private:
  std::vector<Protocol> protocols_;
  std::map<uint16_t, std::vector<size_t>> by_port_;
};

}  // namespace icsmap
