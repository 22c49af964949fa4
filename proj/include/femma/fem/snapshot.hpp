#pragma once

// Snapshot files: one JSON header line, then the arrays it lists as raw
// little-endian float64 in header order.
//
//   {"format":"femma-snapshot","version":1,"arrays":[{"name":"u","count":N},...],...}\n
//   <N doubles> ...

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "femma/errors.hpp"

namespace femma::fem {

struct Snapshot {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, std::vector<double>> arrays;
};

namespace detail {

inline std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

}  // namespace detail

inline void write_snapshot(const std::string& path, const Snapshot& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open snapshot for writing: " + path);
  nlohmann::json header = {{"format", "femma-snapshot"}, {"version", 1}, {"meta", s.meta}};
  header["arrays"] = nlohmann::json::array();
  for (const auto& [name, v] : s.arrays) header["arrays"].push_back({{"name", name}, {"count", v.size()}});
  out << header.dump() << '\n';
  for (const auto& [name, v] : s.arrays)
    for (double d : v) {
      const std::uint64_t bits = detail::to_le(std::bit_cast<std::uint64_t>(d));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  if (!out) throw Error("failed writing snapshot: " + path);
}

inline Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open snapshot: " + path);
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad snapshot header: " + e.what());
  }
  if (header.value("format", "") != "femma-snapshot" || header.value("version", 0) != 1)
    throw ParseError(path + ": not a version-1 femma snapshot");
  Snapshot s;
  s.meta = header.value("meta", nlohmann::json::object());
  for (const auto& a : header.at("arrays")) {
    std::vector<double> v(a.at("count").get<std::size_t>());
    for (double& d : v) {
      std::uint64_t bits = 0;
      if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits))
        throw ParseError(path + ": truncated array '" + a.at("name").get<std::string>() + "'");
      d = std::bit_cast<double>(detail::to_le(bits));
    }
    s.arrays[a.at("name").get<std::string>()] = std::move(v);
  }
  return s;
}

}  // namespace femma::fem
