#pragma once
// Banner classification. A service is ICS when any positive feature matches,
// regardless of negative matches (positive precedence); otherwise non-ICS
// when any negative feature matches; otherwise not classified. A device is
// ICS when any of its services is ICS, non-ICS when any service is non-ICS
// and none is ICS, and not classified otherwise.
//
// Classification runs only on devices that expose at least one registry port
// (the prefilter), so an ICS-classified device always has an ICS port.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "icsmap/scan.hpp"
#include "icsmap/signatures.hpp"

namespace icsmap {

enum class ServiceClass : uint8_t { ics, non_ics, not_classified };
enum class DeviceClass : uint8_t { ics, non_ics, not_classified };

inline const char* to_string(ServiceClass c) {
  switch (c) {
    case ServiceClass::ics: return "ics";
    case ServiceClass::non_ics: return "non_ics";
    case ServiceClass::not_classified: return "not_classified";
  }
  return "?";
}

inline const char* to_string(DeviceClass c) {
  switch (c) {
    case DeviceClass::ics: return "ics";
    case DeviceClass::non_ics: return "non_ics";
    case DeviceClass::not_classified: return "not_classified";
  }
  return "?";
}

inline std::optional<ServiceClass> service_class_from_string(std::string_view s) {
  if (s == "ics") return ServiceClass::ics;
  if (s == "non_ics") return ServiceClass::non_ics;
  if (s == "not_classified") return ServiceClass::not_classified;
  return std::nullopt;
}

inline std::optional<DeviceClass> device_class_from_string(std::string_view s) {
  if (s == "ics") return DeviceClass::ics;
  if (s == "non_ics") return DeviceClass::non_ics;
  if (s == "not_classified") return DeviceClass::not_classified;
  return std::nullopt;
}

struct ServiceEvidence {
  ServiceClass cls = ServiceClass::not_classified;
  std::vector<std::string> positive;  // matched positive feature texts, list order
  std::vector<std::string> negative;  // matched negative feature texts, list order

  friend bool operator==(const ServiceEvidence&, const ServiceEvidence&) = default;
};

inline ServiceEvidence classify_service(const ScanRecord& record, const SignatureSet& signatures) {
  ServiceEvidence ev;
  for (const Feature* f : match_features(record.banner, signatures.positives(), record.port))
    ev.positive.push_back(f->text);
  for (const Feature* f : match_features(record.banner, signatures.negatives(), record.port))
    ev.negative.push_back(f->text);
  if (!ev.positive.empty())
    ev.cls = ServiceClass::ics;
  else if (!ev.negative.empty())
    ev.cls = ServiceClass::non_ics;
  else
    ev.cls = ServiceClass::not_classified;
  return ev;
}

inline DeviceClass device_class_of(const std::vector<ServiceEvidence>& services) {
  bool any_non_ics = false;
  for (const ServiceEvidence& s : services) {
    if (s.cls == ServiceClass::ics) return DeviceClass::ics;
    if (s.cls == ServiceClass::non_ics) any_non_ics = true;
  }
  return any_non_ics ? DeviceClass::non_ics : DeviceClass::not_classified;
}

struct ClassifiedDevice {
  std::optional<DeviceClass> cls;         // set only when the device was prefiltered in
  std::vector<ServiceEvidence> evidence;  // aligned with device services; empty when skipped
};

struct FunnelReport {
  uint64_t total_devices = 0;
  uint64_t total_services = 0;
  uint64_t devices_with_ics_ports = 0;
  uint64_t services_on_ics_port_devices = 0;
  uint64_t ics_devices = 0;
  uint64_t ics_services = 0;  // ICS-classified services on ICS-classified devices

  friend bool operator==(const FunnelReport&, const FunnelReport&) = default;
};

struct CorpusClassification {
  std::vector<ClassifiedDevice> devices;  // aligned with the input device list
  FunnelReport funnel;
};

// Classify a grouped corpus. Only devices exposing a registry port are fed to
// the classifier; the rest keep an unset class, which guarantees the funnel
// invariant ics_devices <= devices_with_ics_ports.
inline CorpusClassification classify_corpus(const std::vector<Device>& devices,
                                            const SignatureSet& signatures) {
  CorpusClassification out;
  out.devices.resize(devices.size());
  out.funnel.total_devices = devices.size();
  for (size_t i = 0; i < devices.size(); ++i) {
    const Device& d = devices[i];
    out.funnel.total_services += d.services.size();
    if (!d.has_ics_port) continue;
    out.funnel.devices_with_ics_ports += 1;
    out.funnel.services_on_ics_port_devices += d.services.size();
    ClassifiedDevice& cd = out.devices[i];
    cd.evidence.reserve(d.services.size());
    for (const ScanRecord& s : d.services) cd.evidence.push_back(classify_service(s, signatures));
    cd.cls = device_class_of(cd.evidence);
    if (*cd.cls == DeviceClass::ics) {
      out.funnel.ics_devices += 1;
      for (const ServiceEvidence& ev : cd.evidence)
        if (ev.cls == ServiceClass::ics) out.funnel.ics_services += 1;
    }
  }
  return out;
}

}  // namespace icsmap
