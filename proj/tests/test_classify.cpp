// Service/device classification and banner fingerprinting.

#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include <icsmap/icsmap.hpp>

#include "helpers.hpp"
#include "oracle.hpp"

using namespace icsmap;

namespace {

const SignatureSet& bundled_signatures() {
  static const SignatureSet set =
      SignatureSet::load(testutil::data_dir() / "signatures_positive.txt",
                         testutil::data_dir() / "signatures_negative.txt");
  return set;
}

const ProtocolRegistry& bundled_registry() {
  static const ProtocolRegistry registry =
      ProtocolRegistry::load(testutil::data_dir() / "registry.csv");
  return registry;
}

ScanRecord make_record(const char* ip, uint16_t port, const char* banner,
                       const char* ts = "2018-05-28T12:00:00Z") {
  ScanRecord r;
  r.ip = parse_ipv4(ip).ip;
  r.port = port;
  r.transport = Transport::tcp;
  r.ts = *parse_rfc3339(ts);
  r.banner = banner;
  r.country = "NL";
  return r;
}

}  // namespace

// -------------------------------------------------------------- [classify]

TEST_CASE("positive evidence outranks negative evidence", "[classify]") {
  // "Tridium Niagara httpd" contains the negative feature "http" as a
  // substring, but its positive matches must dominate.
  const ServiceEvidence ev =
      classify_service(make_record("10.0.0.1", 80, "Tridium Niagara httpd"), bundled_signatures());
  CHECK(ev.cls == ServiceClass::ics);
  CHECK_FALSE(ev.positive.empty());
  CHECK_FALSE(ev.negative.empty());  // "http" did match; it just lost
  bool found = false;
  for (const std::string& p : ev.positive)
    if (p == "Tridium Niagara httpd") found = true;
  CHECK(found);
}

TEST_CASE("negative-only evidence marks a service as non-ICS", "[classify]") {
  const ServiceEvidence ev =
      classify_service(make_record("10.0.0.1", 80, "nginx/1.14.0 welcome"), bundled_signatures());
  CHECK(ev.cls == ServiceClass::non_ics);
  CHECK(ev.positive.empty());
  CHECK_FALSE(ev.negative.empty());
}

TEST_CASE("unmatched banners stay unclassified", "[classify]") {
  const ServiceEvidence ev =
      classify_service(make_record("10.0.0.1", 102, "connection established"), bundled_signatures());
  CHECK(ev.cls == ServiceClass::not_classified);
  CHECK(ev.positive.empty());
  CHECK(ev.negative.empty());

  const ServiceEvidence empty =
      classify_service(make_record("10.0.0.1", 102, ""), bundled_signatures());
  CHECK(empty.cls == ServiceClass::not_classified);
}

TEST_CASE("matching is case-sensitive", "[classify]") {
  CHECK(classify_service(make_record("10.0.0.1", 80, "niagara web server"), bundled_signatures())
            .cls != ServiceClass::ics);
  CHECK(classify_service(make_record("10.0.0.1", 80, "Niagara Web Server"), bundled_signatures())
            .cls == ServiceClass::ics);
}

TEST_CASE("evidence preserves signature list order", "[classify]") {
  const SignatureSet set = SignatureSet::from_text("alpha\nbeta\ngamma\n", "zeta\nyankee\n");
  const ServiceEvidence ev =
      classify_service(make_record("10.0.0.1", 1, "gamma beta alpha zeta yankee"), set);
  CHECK(ev.positive == std::vector<std::string>{"alpha", "beta", "gamma"});
  CHECK(ev.negative == std::vector<std::string>{"zeta", "yankee"});
}

TEST_CASE("port-restricted features classify only on their ports", "[classify]") {
  const SignatureSet set = SignatureSet::from_text("ENIP\t44818\n", "HTTP\n");
  CHECK(classify_service(make_record("10.0.0.1", 44818, "ENIP ready"), set).cls ==
        ServiceClass::ics);
  CHECK(classify_service(make_record("10.0.0.1", 2222, "ENIP ready"), set).cls ==
        ServiceClass::not_classified);
}

TEST_CASE("device class follows the strongest service", "[classify]") {
  auto ev = [](ServiceClass c) {
    ServiceEvidence e;
    e.cls = c;
    return e;
  };
  using SC = ServiceClass;
  CHECK(device_class_of({ev(SC::ics)}) == DeviceClass::ics);
  CHECK(device_class_of({ev(SC::non_ics), ev(SC::ics)}) == DeviceClass::ics);
  CHECK(device_class_of({ev(SC::not_classified), ev(SC::ics), ev(SC::non_ics)}) ==
        DeviceClass::ics);
  CHECK(device_class_of({ev(SC::non_ics)}) == DeviceClass::non_ics);
  CHECK(device_class_of({ev(SC::non_ics), ev(SC::not_classified)}) == DeviceClass::non_ics);
  CHECK(device_class_of({ev(SC::not_classified)}) == DeviceClass::not_classified);
  CHECK(device_class_of({}) == DeviceClass::not_classified);
}

TEST_CASE("corpus funnel counts a handcrafted population", "[classify]") {
  // Device 1: ICS port, positive banner -> ics (2 services, 1 ics service).
  // Device 2: ICS port, negative banner -> non_ics.
  // Device 3: no ICS port, positive banner -> skipped by the prefilter.
  // Device 4: ICS port, silent banner -> not_classified.
  const std::vector<ScanRecord> records = {
      make_record("10.0.0.1", 1911, "Niagara Fox station"),
      make_record("10.0.0.1", 80, "plain banner"),
      make_record("10.0.0.2", 102, "nginx"),
      make_record("10.0.0.3", 8080, "Niagara Fox station"),
      make_record("10.0.0.4", 502, "connection established"),
  };
  const std::vector<Device> devices = group_devices(records, bundled_registry());
  REQUIRE(devices.size() == 4);
  const CorpusClassification out = classify_corpus(devices, bundled_signatures());

  CHECK(out.funnel.total_devices == 4);
  CHECK(out.funnel.total_services == 5);
  CHECK(out.funnel.devices_with_ics_ports == 3);
  CHECK(out.funnel.services_on_ics_port_devices == 4);
  CHECK(out.funnel.ics_devices == 1);
  CHECK(out.funnel.ics_services == 1);

  REQUIRE(out.devices.size() == 4);
  REQUIRE(out.devices[0].cls.has_value());
  CHECK(*out.devices[0].cls == DeviceClass::ics);
  REQUIRE(out.devices[0].evidence.size() == 2);
  CHECK(out.devices[0].evidence[0].cls == ServiceClass::not_classified);  // port 80 banner
  CHECK(out.devices[0].evidence[1].cls == ServiceClass::ics);
  REQUIRE(out.devices[1].cls.has_value());
  CHECK(*out.devices[1].cls == DeviceClass::non_ics);
  CHECK_FALSE(out.devices[2].cls.has_value());  // prefiltered out
  CHECK(out.devices[2].evidence.empty());
  REQUIRE(out.devices[3].cls.has_value());
  CHECK(*out.devices[3].cls == DeviceClass::not_classified);
}

TEST_CASE("classifier agrees with a brute-force reference on the golden corpus", "[classify]") {
  const ParseResult parsed =
      parse_records(testutil::slurp(testutil::test_data_dir() / "golden_corpus.ndjson"));
  REQUIRE(parsed.rejects.empty());
  const SignatureSet& signatures = bundled_signatures();
  size_t checked = 0;
  for (const ScanRecord& r : parsed.records) {
    const ServiceEvidence fast = classify_service(r, signatures);
    const std::string slow =
        oracle::classify(r.banner, r.port, signatures.positives(), signatures.negatives());
    REQUIRE(std::string(to_string(fast.cls)) == slow);
    // Re-derive the evidence lists feature by feature.
    std::vector<std::string> expect_pos, expect_neg;
    for (const Feature& f : signatures.positives())
      if (oracle::feature_hits(r.banner, f, r.port)) expect_pos.push_back(f.text);
    for (const Feature& f : signatures.negatives())
      if (oracle::feature_hits(r.banner, f, r.port)) expect_neg.push_back(f.text);
    REQUIRE(fast.positive == expect_pos);
    REQUIRE(fast.negative == expect_neg);
    ++checked;
  }
  CHECK(checked == 500);
}

// ------------------------------------------------------------ [fingerprint]

TEST_CASE("product catalog loads and answers lookups", "[fingerprint]") {
  const Catalog catalog = Catalog::load(testutil::data_dir() / "catalog.csv");
  CHECK(catalog.size() == 59);
  CHECK(catalog.manufacturer_for("CJ2M") == "Omron");
  CHECK(catalog.manufacturer_for("Simatic S7-300") == "Siemens");
  CHECK(catalog.manufacturer_for("Niagara Fox") == "Tridium");
  CHECK_FALSE(catalog.manufacturer_for("No Such Product"));
  const std::vector<std::string> manufacturers = catalog.manufacturers();
  CHECK(std::is_sorted(manufacturers.begin(), manufacturers.end()));
  CHECK(std::find(manufacturers.begin(), manufacturers.end(), "Siemens") != manufacturers.end());
}

TEST_CASE("catalog validation rejects contradictions", "[fingerprint]") {
  CHECK_NOTHROW(Catalog::from_rows({{"P", "A"}, {"P", "A"}}));  // repeat is harmless
  CHECK_THROWS_AS(Catalog::from_rows({{"P", "A"}, {"P", "B"}}), ValidationError);
  CHECK_THROWS_AS(Catalog::from_rows({{"", "A"}}), ValidationError);
  CHECK_THROWS_AS(Catalog::from_rows({{"P", ""}}), ValidationError);
}

TEST_CASE("bundled rules cross-check against the bundled catalog", "[fingerprint]") {
  const Catalog catalog = Catalog::load(testutil::data_dir() / "catalog.csv");
  const RuleSet rules = RuleSet::load(testutil::data_dir() / "rules.csv", &catalog);
  CHECK(rules.size() == 59);
}

TEST_CASE("rule validation rejects malformed tables", "[fingerprint]") {
  auto rule = [](const char* pattern, const char* manufacturer, const char* product) {
    FingerprintRule r;
    r.pattern = pattern;
    r.manufacturer = manufacturer;
    r.product = product;
    return r;
  };
  CHECK_THROWS_AS(RuleSet::from_rules({rule("", "M", "P")}), ValidationError);
  CHECK_THROWS_AS(RuleSet::from_rules({rule("x", "", "P")}), ValidationError);
  CHECK_THROWS_AS(RuleSet::from_rules({rule("x", "M", "")}), ValidationError);

  const Catalog catalog = Catalog::from_rows({{"CJ2M", "Omron"}});
  CHECK_THROWS_AS(RuleSet::from_rules({rule("CJ2M", "Siemens", "CJ2M")}, &catalog),
                  ValidationError);
  CHECK_NOTHROW(RuleSet::from_rules({rule("CJ2M", "Omron", "CJ2M")}, &catalog));
  // Products missing from the catalog are allowed under any manufacturer.
  CHECK_NOTHROW(RuleSet::from_rules({rule("XPort", "Lantronix", "XPort")}, &catalog));

  testutil::TempDir dir;
  const auto path = dir.path / "rules.csv";
  testutil::spit(path, "product_pattern,manufacturer,product,version_hint\nx,M,P,sometimes\n");
  CHECK_THROWS_AS(RuleSet::load(path), ValidationError);
  testutil::spit(path, "product_pattern,manufacturer,product,version_hint\nx,M,P,after:\n");
  CHECK_THROWS_AS(RuleSet::load(path), ValidationError);
  testutil::spit(path, "product_pattern,manufacturer,product,version_hint\nx,M,P,none\n");
  CHECK_NOTHROW(RuleSet::load(path));
}

TEST_CASE("longest pattern wins; ties go to the earlier rule", "[fingerprint]") {
  auto rule = [](const char* pattern, const char* product) {
    FingerprintRule r;
    r.pattern = pattern;
    r.manufacturer = "M";
    r.product = product;
    return r;
  };
  const RuleSet rules = RuleSet::from_rules({
      rule("S7", "short"),
      rule("S7-300", "long"),
      rule("aaaa", "tie-first"),
      rule("bbbb", "tie-second"),
  });
  REQUIRE(rules.best_match("Siemens S7-300 module") != nullptr);
  CHECK(rules.best_match("Siemens S7-300 module")->product == "long");
  CHECK(rules.best_match("device S7 only")->product == "short");
  CHECK(rules.best_match("aaaa bbbb")->product == "tie-first");
  CHECK(rules.best_match("bbbb then aaaa")->product == "tie-first");  // file order, not banner order
  CHECK(rules.best_match("nothing relevant") == nullptr);
}

TEST_CASE("version extraction follows the hint token", "[fingerprint]") {
  const Catalog catalog = Catalog::load(testutil::data_dir() / "catalog.csv");
  const RuleSet rules = RuleSet::load(testutil::data_dir() / "rules.csv", &catalog);

  const Fingerprint station = extract_fingerprint("NiagaraAX Station 3.6", rules);
  CHECK(station.manufacturer == "Tridium");
  CHECK(station.product == "NiagaraAX Station");
  CHECK(station.version == "3.6");

  const Fingerprint logix =
      extract_fingerprint("Allen-Bradley MicroLogix 1400 B FRN 21.2", rules);
  CHECK(logix.manufacturer == "Rockwell");
  CHECK(logix.product == "MicroLogix 1400");
  CHECK(logix.version == "B FRN 21.2");

  // A trailing run with no digit anywhere yields no version.
  const Fingerprint alpha_tail = extract_fingerprint("MicroLogix 1400 Series B", rules);
  CHECK(alpha_tail.product == "MicroLogix 1400");
  CHECK_FALSE(alpha_tail.version.has_value());

  // The run is trimmed back to the last digit-bearing token.
  const Fingerprint trimmed = extract_fingerprint("NiagaraAX Station 3.5 beta notes", rules);
  CHECK(trimmed.version == "3.5");

  // Non-version tokens stop the run.
  const Fingerprint stopped = extract_fingerprint("NiagaraAX Station 3.6 (build)", rules);
  CHECK(stopped.version == "3.6");

  // Punctuated tokens right after the hint stop the run before it starts.
  const Fingerprint none = extract_fingerprint("NiagaraAX Station (unknown)", rules);
  CHECK(none.product == "NiagaraAX Station");
  CHECK_FALSE(none.version.has_value());
}

TEST_CASE("hint token must appear at or after the pattern match", "[fingerprint]") {
  FingerprintRule r;
  r.pattern = "Widget";
  r.manufacturer = "M";
  r.product = "Widget";
  r.after_token = "ver";
  const RuleSet rules = RuleSet::from_rules({r});

  CHECK(extract_fingerprint("Widget ver 2.1", rules).version == "2.1");
  // The token occurs only before the pattern: no version.
  CHECK_FALSE(extract_fingerprint("ver 9.9 then Widget", rules).version.has_value());
  // Token entirely absent: manufacturer and product still extracted.
  const Fingerprint fp = extract_fingerprint("Widget without marker", rules);
  CHECK(fp.manufacturer == "M");
  CHECK_FALSE(fp.version.has_value());
}

TEST_CASE("unmatched and empty banners produce a blank fingerprint", "[fingerprint]") {
  const Catalog catalog = Catalog::load(testutil::data_dir() / "catalog.csv");
  const RuleSet rules = RuleSet::load(testutil::data_dir() / "rules.csv", &catalog);
  CHECK(extract_fingerprint("", rules).blank());
  CHECK(extract_fingerprint("connection established", rules).blank());
  CHECK_FALSE(extract_fingerprint("Simatic S7-300", rules).blank());
}

TEST_CASE("bundled rules fingerprint realistic banners", "[fingerprint]") {
  const Catalog catalog = Catalog::load(testutil::data_dir() / "catalog.csv");
  const RuleSet rules = RuleSet::load(testutil::data_dir() / "rules.csv", &catalog);

  const Fingerprint s7 = extract_fingerprint(
      "Copyright: Original Siemens Equipment, Simatic S7-300 CPU 315-2 PN/DP", rules);
  CHECK(s7.manufacturer == "Siemens");
  CHECK(s7.product == "Simatic S7-300");

  const Fingerprint cj2m = extract_fingerprint("Omron CJ2M CPU Unit responding", rules);
  CHECK(cj2m.manufacturer == "Omron");

  const Fingerprint fox = extract_fingerprint("Tridium Niagara httpd running", rules);
  CHECK(fox.manufacturer == "Tridium");
}
