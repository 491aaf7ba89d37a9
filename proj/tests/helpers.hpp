#pragma once
// Shared test utilities: data locations, scratch directories, and a wrapper
// for running the installed CLI binary as a subprocess.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#ifndef _WIN32
#include <sys/wait.h>
#include <unistd.h>
#endif

namespace testutil {

inline std::filesystem::path data_dir() { return ICSMAP_DATA_DIR; }
inline std::filesystem::path test_data_dir() { return ICSMAP_TEST_DATA_DIR; }
inline std::string cli_path() { return ICSMAP_CLI_PATH; }

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("test helper cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void spit(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("test helper cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<uint64_t> counter{0};
    const uint64_t id = counter.fetch_add(1);
    path = std::filesystem::temp_directory_path() /
           ("icsmap_test_" + std::to_string(::getpid()) + "_" + std::to_string(id));
    std::filesystem::create_directories(path);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Run the CLI with the given argument string. `env_prefix` may hold
// space-separated VAR=value assignments applied to the child only.
inline CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  TempDir scratch;
  const std::filesystem::path out_file = scratch.path / "stdout.txt";
  const std::filesystem::path err_file = scratch.path / "stderr.txt";
  std::string command;
  if (!env_prefix.empty()) command += "env " + env_prefix + " ";
  command += cli_path() + " " + args + " > " + out_file.string() + " 2> " + err_file.string();
  const int status = std::system(command.c_str());
  CliResult result;
  if (status == -1) throw std::runtime_error("failed to spawn CLI");
#ifndef _WIN32
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
#else
  result.exit_code = status;
#endif
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

}  // namespace testutil
