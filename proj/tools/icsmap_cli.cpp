// icsmap command line interface.
//
// Subcommands mirror the pipeline stages — ingest, classify, correlate,
// report — plus `pipeline` to run all of them in one process and `fetch` to
// pull scan data from a paginated HTTP source. Staged runs and `pipeline`
// runs produce byte-identical artifacts.
//
// Exit codes: 0 success, 1 invalid input or configuration (including bad
// credentials), 2 I/O or transport failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "icsmap/icsmap.hpp"

namespace {

namespace fs = std::filesystem;

std::string data_dir() {
  if (const char* env = std::getenv("ICSMAP_DATA_DIR"); env && *env) return env;
  return ICSMAP_DATA_DIR;
}

struct DataPaths {
  std::string registry;
  std::string signatures_pos;
  std::string signatures_neg;
  std::string catalog;
  std::string rules;
  std::string vulndb;
  std::string astable;

  static DataPaths defaults() {
    const std::string dir = data_dir();
    return {dir + "/registry.csv",  dir + "/signatures_positive.txt",
            dir + "/signatures_negative.txt", dir + "/catalog.csv",
            dir + "/rules.csv",     dir + "/table41.json",
            dir + "/astable.csv"};
  }
};

void require_country_code(const std::string& country) {
  const bool ok = country.size() == 2 && country[0] >= 'A' && country[0] <= 'Z' &&
                  country[1] >= 'A' && country[1] <= 'Z';
  if (!ok)
    throw std::invalid_argument("country code must be two uppercase letters, got '" + country +
                                "'");
}

void write_output(const fs::path& out_dir, const std::string& relative,
                  std::string_view bytes) {
  const fs::path target = out_dir / relative;
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec)
    throw icsmap::IoError("cannot create directory: " + target.parent_path().string());
  icsmap::atomic_write(target, bytes);
}

// ------------------------------------------------------------- stages

struct IngestArgs {
  std::string scan;
  std::string country = "NL";
  std::string out = "out";
};

icsmap::IngestOutput run_ingest(const IngestArgs& args) {
  require_country_code(args.country);
  const std::string text = icsmap::read_file(args.scan);
  icsmap::IngestOutput result = icsmap::stage_ingest(text, args.country);
  write_output(args.out, "records.ndjson", icsmap::serialize_records(result.records));
  write_output(args.out, "rejects.txt",
               icsmap::serialize_rejects(result.rejects, fs::path(args.scan).filename().string()));
  std::cout << "ingest: " << result.records.size() << " records kept, "
            << result.rejects.size() << " lines rejected\n";
  return result;
}

struct ClassifyArgs {
  std::string records;
  std::string registry;
  std::string signatures_pos;
  std::string signatures_neg;
  std::string out = "out";
};

icsmap::ClassifiedCorpus run_classify(const ClassifyArgs& args,
                                      const std::vector<icsmap::ScanRecord>* records_in_memory) {
  const icsmap::ProtocolRegistry registry = icsmap::ProtocolRegistry::load(args.registry);
  const icsmap::SignatureSet signatures =
      icsmap::SignatureSet::load(args.signatures_pos, args.signatures_neg);
  std::vector<icsmap::ScanRecord> records;
  if (records_in_memory) {
    records = *records_in_memory;
  } else {
    const std::string text = icsmap::read_file(args.records);
    records = icsmap::parse_records_strict(text, fs::path(args.records).filename().string());
  }
  icsmap::ClassifiedCorpus corpus = icsmap::stage_classify(records, registry, signatures);
  write_output(args.out, "devices.ndjson",
               icsmap::serialize_devices(corpus.devices, corpus.classification));
  std::cout << "classify: " << corpus.classification.funnel.ics_devices << " of "
            << corpus.devices.size() << " devices classified as ICS\n";
  return corpus;
}

struct CorrelateArgs {
  std::string devices;
  std::string catalog;
  std::string rules;
  std::string vulndb;
  std::string astable;
  bool as_table_only = false;
  std::string out = "out";
};

icsmap::AnalysisBundle run_correlate(const CorrelateArgs& args,
                                     const icsmap::ClassifiedCorpus* corpus_in_memory) {
  const icsmap::Catalog catalog = icsmap::Catalog::load(args.catalog);
  const icsmap::RuleSet rules = icsmap::RuleSet::load(args.rules, &catalog);
  const icsmap::VulnDb vulndb = icsmap::VulnDb::load(args.vulndb);
  const icsmap::AsTable astable = icsmap::AsTable::load(args.astable);
  icsmap::ClassifiedCorpus loaded;
  const icsmap::ClassifiedCorpus* corpus = corpus_in_memory;
  if (!corpus) {
    const std::string text = icsmap::read_file(args.devices);
    loaded = icsmap::parse_devices(text, fs::path(args.devices).filename().string());
    corpus = &loaded;
  }
  icsmap::AnalysisBundle bundle = icsmap::analyze(corpus->devices, corpus->classification, rules,
                                                  vulndb, astable, args.as_table_only);
  write_output(args.out, "analysis.json", icsmap::render_json(bundle));
  uint64_t vulnerable = 0;
  for (const icsmap::AnalyzedDevice& d : bundle.devices)
    if (d.status == icsmap::VulnStatus::vulnerable) vulnerable += 1;
  std::cout << "correlate: " << bundle.devices.size() << " ICS devices, " << vulnerable
            << " vulnerable\n";
  return bundle;
}

struct ReportArgs {
  std::string analysis;
  std::string format = "json";
  std::string out = "out";
};

void run_report(const ReportArgs& args, const icsmap::AnalysisBundle* bundle_in_memory) {
  icsmap::AnalysisBundle loaded;
  const icsmap::AnalysisBundle* bundle = bundle_in_memory;
  if (!bundle) {
    const std::string text = icsmap::read_file(args.analysis);
    loaded = icsmap::parse_bundle(text);
    bundle = &loaded;
  }
  const std::map<std::string, std::string> files = icsmap::render(*bundle, args.format);
  for (const auto& [relative, bytes] : files) write_output(args.out, relative, bytes);
  std::cout << "report: wrote " << files.size() << " file" << (files.size() == 1 ? "" : "s")
            << " to " << args.out << "\n";
}

struct FetchArgs {
  std::string out = "out";
  uint32_t rate_limit = 0;
  int retries = 3;
  int backoff_ms = 100;
};

void run_fetch(const FetchArgs& args) {
  const char* url = std::getenv("ICSMAP_SOURCE_URL");
  if (!url || !*url)
    throw icsmap::ValidationError("ICSMAP_SOURCE_URL is not set; it must point to the scan export");
  icsmap::FetchConfig config;
  config.base_url = url;
  if (const char* key = std::getenv("ICSMAP_SOURCE_KEY"); key && *key) config.api_key = key;
  config.rate_limit_per_sec = args.rate_limit;
  config.max_retries = args.retries;
  config.backoff_initial_ms = args.backoff_ms;
  const std::string body = icsmap::fetch_scan(config);
  write_output(args.out, "scan.ndjson", body);
  std::cout << "fetch: wrote " << body.size() << " bytes to " << args.out << "/scan.ndjson\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"icsmap — map internet-scan data to ICS device exposure"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "icsmap 1.0.0");
  const DataPaths defaults = DataPaths::defaults();

  IngestArgs ingest_args;
  CLI::App* ingest = app.add_subcommand("ingest", "Parse, deduplicate, and filter scan records");
  ingest->add_option("--scan", ingest_args.scan, "Scan NDJSON file")->required();
  ingest->add_option("--country", ingest_args.country, "Two-letter uppercase country filter");
  ingest->add_option("--out", ingest_args.out, "Output directory");

  ClassifyArgs classify_args;
  classify_args.registry = defaults.registry;
  classify_args.signatures_pos = defaults.signatures_pos;
  classify_args.signatures_neg = defaults.signatures_neg;
  CLI::App* classify = app.add_subcommand("classify", "Group devices and classify them");
  classify->add_option("--records", classify_args.records, "records.ndjson from ingest")
      ->required();
  classify->add_option("--registry", classify_args.registry, "Protocol registry CSV");
  classify->add_option("--signatures-pos", classify_args.signatures_pos,
                       "Positive feature list");
  classify->add_option("--signatures-neg", classify_args.signatures_neg,
                       "Negative feature list");
  classify->add_option("--out", classify_args.out, "Output directory");

  CorrelateArgs correlate_args;
  correlate_args.catalog = defaults.catalog;
  correlate_args.rules = defaults.rules;
  correlate_args.vulndb = defaults.vulndb;
  correlate_args.astable = defaults.astable;
  CLI::App* correlate =
      app.add_subcommand("correlate", "Fingerprint devices and match vulnerabilities");
  correlate->add_option("--devices", correlate_args.devices, "devices.ndjson from classify")
      ->required();
  correlate->add_option("--catalog", correlate_args.catalog, "Product catalog CSV");
  correlate->add_option("--rules", correlate_args.rules, "Fingerprint rules CSV");
  correlate->add_option("--vulndb", correlate_args.vulndb, "Vulnerability database JSON");
  correlate->add_option("--astable", correlate_args.astable, "AS prefix table CSV");
  correlate->add_flag("--as-table-only", correlate_args.as_table_only,
                      "Ignore inline AS fields, use only the prefix table");
  correlate->add_option("--out", correlate_args.out, "Output directory");

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "Render an analysis bundle");
  report->add_option("--analysis", report_args.analysis, "analysis.json from correlate")
      ->required();
  report->add_option("--format", report_args.format, "json, markdown, csv, or all");
  report->add_option("--out", report_args.out, "Output directory");

  IngestArgs pl_ingest;
  ClassifyArgs pl_classify;
  pl_classify.registry = defaults.registry;
  pl_classify.signatures_pos = defaults.signatures_pos;
  pl_classify.signatures_neg = defaults.signatures_neg;
  CorrelateArgs pl_correlate;
  pl_correlate.catalog = defaults.catalog;
  pl_correlate.rules = defaults.rules;
  pl_correlate.vulndb = defaults.vulndb;
  pl_correlate.astable = defaults.astable;
  ReportArgs pl_report;
  pl_report.format = "all";
  CLI::App* pipeline = app.add_subcommand("pipeline", "Run all stages in one process");
  pipeline->add_option("--scan", pl_ingest.scan, "Scan NDJSON file")->required();
  pipeline->add_option("--country", pl_ingest.country, "Two-letter uppercase country filter");
  pipeline->add_option("--registry", pl_classify.registry, "Protocol registry CSV");
  pipeline->add_option("--signatures-pos", pl_classify.signatures_pos, "Positive feature list");
  pipeline->add_option("--signatures-neg", pl_classify.signatures_neg, "Negative feature list");
  pipeline->add_option("--catalog", pl_correlate.catalog, "Product catalog CSV");
  pipeline->add_option("--rules", pl_correlate.rules, "Fingerprint rules CSV");
  pipeline->add_option("--vulndb", pl_correlate.vulndb, "Vulnerability database JSON");
  pipeline->add_option("--astable", pl_correlate.astable, "AS prefix table CSV");
  pipeline->add_flag("--as-table-only", pl_correlate.as_table_only,
                     "Ignore inline AS fields, use only the prefix table");
  pipeline->add_option("--format", pl_report.format, "json, markdown, csv, or all");
  pipeline->add_option("--out", pl_ingest.out, "Output directory");

  FetchArgs fetch_args;
  CLI::App* fetch = app.add_subcommand("fetch", "Download scan pages from ICSMAP_SOURCE_URL");
  fetch->add_option("--out", fetch_args.out, "Output directory");
  fetch->add_option("--rate-limit", fetch_args.rate_limit, "Max requests per second (0 = off)");
  fetch->add_option("--retries", fetch_args.retries, "Retries per page on transient failure");
  fetch->add_option("--backoff-ms", fetch_args.backoff_ms, "Initial retry delay");

  try {
    app.parse(argc, argv);

    if (ingest->parsed()) {
      run_ingest(ingest_args);
    } else if (classify->parsed()) {
      run_classify(classify_args, nullptr);
    } else if (correlate->parsed()) {
      run_correlate(correlate_args, nullptr);
    } else if (report->parsed()) {
      run_report(report_args, nullptr);
    } else if (pipeline->parsed()) {
      pl_classify.out = pl_ingest.out;
      pl_correlate.out = pl_ingest.out;
      pl_report.out = pl_ingest.out;
      const icsmap::IngestOutput ingested = run_ingest(pl_ingest);
      const icsmap::ClassifiedCorpus corpus = run_classify(pl_classify, &ingested.records);
      const icsmap::AnalysisBundle bundle = run_correlate(pl_correlate, &corpus);
      run_report(pl_report, &bundle);
    } else if (fetch->parsed()) {
      run_fetch(fetch_args);
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const icsmap::AuthError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const icsmap::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const icsmap::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
