#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace agt {

// SHA-256 of a file's contents, lowercase hex. Throws on unreadable files.
std::string sha256_file(const std::filesystem::path& file);

// Reproducibility record for one CLI run: the command, the full config
// snapshot, the seed, content hashes of every input file, and per-phase
// wall-clock timings. Written atomically (temp file + rename) as JSON.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_hashes;   // path -> sha256
  std::map<std::string, double> timings_seconds;     // phase -> seconds

  void add_input(const std::filesystem::path& file);
  void write(const std::filesystem::path& file) const;
};

}  // namespace agt
