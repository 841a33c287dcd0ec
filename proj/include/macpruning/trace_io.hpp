#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "macpruning/emsim.hpp"

namespace macp {

static_assert(std::endian::native == std::endian::little,
              "MACP writer assumes a little-endian host");

inline constexpr std::uint32_t kMacpVersion = 1;

// Magic "MACP", version u32, n_traces u32, trace_len u32, then float32
// little-endian samples, row-major.
inline void write_macp(const std::string& path, const TraceSet& traces) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
  out.write("MACP", 4);
  const std::uint32_t header[3] = {kMacpVersion, static_cast<std::uint32_t>(traces.size()),
                                   static_cast<std::uint32_t>(traces.trace_len)};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(traces.samples.data()),
            static_cast<std::streamsize>(traces.samples.size() * sizeof(float)));
  if (!out) throw std::runtime_error("trace file write failed: " + path);
}

[[nodiscard]] inline TraceSet read_macp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  char magic[4];
  std::uint32_t header[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || std::memcmp(magic, "MACP", 4) != 0)
    throw std::runtime_error("not a MACP trace file: " + path);
  if (header[0] != kMacpVersion) throw std::runtime_error("unsupported MACP version");
  TraceSet traces;
  traces.trace_len = static_cast<int>(header[2]);
  traces.samples.resize(static_cast<std::size_t>(header[1]) * header[2]);
  in.read(reinterpret_cast<char*>(traces.samples.data()),
          static_cast<std::streamsize>(traces.samples.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated MACP trace file: " + path);
  return traces;
}

// Structured-text sidecar: one key=value per line, keys in written order.
inline void write_sidecar(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open sidecar for writing: " + path);
  for (const auto& [key, value] : entries) out << key << "=" << value << "\n";
  if (!out) throw std::runtime_error("sidecar write failed: " + path);
}

[[nodiscard]] inline std::vector<std::pair<std::string, std::string>> read_sidecar(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sidecar: " + path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("malformed sidecar line: " + line);
    entries.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return entries;
}

}  // namespace macp
