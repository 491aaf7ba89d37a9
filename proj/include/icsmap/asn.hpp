#pragma once
// Autonomous-system attribution. Devices are attributed from inline AS fields
// on their scan records when present, falling back to a longest-prefix lookup
// in an offline prefix table. Aggregation ranks autonomous systems by device
// count (descending), breaking ties by ascending AS number; devices that
// could not be attributed are pooled under the synthetic "unmapped" entry,
// which sorts after every real AS at equal count.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "icsmap/errors.hpp"
#include "icsmap/scan.hpp"
#include "icsmap/util.hpp"

namespace icsmap {

struct AsInfo {
  uint32_t asn = 0;
  std::string name;
  friend bool operator==(const AsInfo&, const AsInfo&) = default;
};

class AsTable {
 public:
  AsTable() = default;

  struct Entry {
    uint32_t network = 0;  // host-order, host bits zero
    int bits = 0;
    uint32_t asn = 0;
    std::string name;
  };

  static AsTable from_entries(std::vector<Entry> entries, const std::string& source = "<memory>") {
    AsTable table;
    std::map<std::pair<uint32_t, int>, bool> seen;
    for (const Entry& e : entries) {
      if (e.bits < 0 || e.bits > 32)
        throw ValidationError(source + ": invalid prefix length " + std::to_string(e.bits));
      if ((e.network & ~mask(e.bits)) != 0)
        throw ValidationError(source + ": prefix " + ipv4_from_value(e.network).text + "/" +
                              std::to_string(e.bits) + " has host bits set");
      if (!seen.emplace(std::make_pair(e.network, e.bits), true).second)
        throw ValidationError(source + ": duplicate prefix " + ipv4_from_value(e.network).text +
                              "/" + std::to_string(e.bits));
    }
    table.entries_ = std::move(entries);
    return table;
  }

  static AsTable load(const std::filesystem::path& path) {
    static const std::vector<std::string> kHeader = {"prefix", "asn", "name"};
    std::vector<Entry> entries;
    for (const CsvRow& row : read_csv(path, kHeader)) {
      const std::string where = path.string() + ":" + std::to_string(row.line_no);
      const std::vector<std::string> parts = split(row.fields[0], '/');
      if (parts.size() != 2) throw ValidationError(where + ": invalid prefix '" + row.fields[0] + "'");
      IpParseResult ip = parse_ipv4(parts[0]);
      if (ip.status != IpParseStatus::ok)
        throw ValidationError(where + ": invalid prefix address '" + parts[0] + "'");
      auto bits = parse_uint(parts[1]);
      if (!bits || *bits > 32)
        throw ValidationError(where + ": invalid prefix length '" + parts[1] + "'");
      auto asn = parse_uint(row.fields[1]);
      if (!asn || *asn > 4294967295ULL)
        throw ValidationError(where + ": invalid asn '" + row.fields[1] + "'");
      Entry e;
      e.network = ip.ip.value;
      e.bits = static_cast<int>(*bits);
      e.asn = static_cast<uint32_t>(*asn);
      e.name = row.fields[2];
      entries.push_back(std::move(e));
    }
    return from_entries(std::move(entries), path.string());
  }

  size_t size() const { return entries_.size(); }

  // Longest matching prefix, or nullopt when nothing covers the address.
  std::optional<AsInfo> lookup(const Ipv4& ip) const {
    const Entry* best = nullptr;
    for (const Entry& e : entries_) {
      if ((ip.value & mask(e.bits)) != e.network) continue;
      if (!best || e.bits > best->bits) best = &e;
    }
    if (!best) return std::nullopt;
    return AsInfo{best->asn, best->name};
  }

 private:
  static uint32_t mask(int bits) {
    return bits == 0 ? 0u : ~uint32_t{0} << (32 - bits);
  }

  std::vector<Entry> entries_;
};

// Inline AS fields win over the table unless `table_only` is set. A record
// carrying an AS number without a name is reported under "undefined", the
// sentinel used for unnamed autonomous systems.
inline std::optional<AsInfo> attribute_device(const Device& device, const AsTable& table,
                                              bool table_only = false) {
  if (!table_only) {
    for (const ScanRecord& s : device.services)
      if (s.asn) return AsInfo{*s.asn, s.as_name.value_or("undefined")};
  }
  return table.lookup(device.ip);
}

struct AsAggregate {
  std::optional<uint32_t> asn;  // nullopt = unmapped pool
  std::string name;             // "unmapped" for the pool
  uint64_t device_count = 0;
  uint64_t vulnerable_device_count = 0;

  friend bool operator==(const AsAggregate&, const AsAggregate&) = default;
};

// Aggregate per-device attributions. When the same AS number appears with
// several names (inconsistent inline data), the first name seen wins.
inline std::vector<AsAggregate> aggregate_by_as(
    const std::vector<std::pair<std::optional<AsInfo>, bool>>& attributed_vulnerable) {
  std::map<uint32_t, AsAggregate> by_asn;
  AsAggregate unmapped;
  unmapped.asn = std::nullopt;
  unmapped.name = "unmapped";
  for (const auto& [info, is_vulnerable] : attributed_vulnerable) {
    AsAggregate* agg = nullptr;
    if (info) {
      auto [it, inserted] = by_asn.try_emplace(info->asn);
      if (inserted) {
        it->second.asn = info->asn;
        it->second.name = info->name;
      }
      agg = &it->second;
    } else {
      agg = &unmapped;
    }
    agg->device_count += 1;
    if (is_vulnerable) agg->vulnerable_device_count += 1;
  }
  std::vector<AsAggregate> out;
  out.reserve(by_asn.size() + 1);
  for (auto& [asn, agg] : by_asn) out.push_back(std::move(agg));
  if (unmapped.device_count > 0) out.push_back(std::move(unmapped));
  std::stable_sort(out.begin(), out.end(), [](const AsAggregate& a, const AsAggregate& b) {
    if (a.device_count != b.device_count) return a.device_count > b.device_count;
    if (a.asn && b.asn) return *a.asn < *b.asn;
    return a.asn.has_value() && !b.asn.has_value();  // real ASNs before unmapped
  });
  return out;
}

}  // namespace icsmap
