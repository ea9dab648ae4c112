#pragma once

#include <fstream>
#include <sstream>
#include <string>

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string program_path(const std::string& name) { return std::string(QCFLP_SOURCE_DIR) + "/programs/" + name; }

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}
