#pragma once

// JSON-lines reading and writing shared by the file formats.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "l2d/error.hpp"

namespace l2d {

using Json = nlohmann::ordered_json;

namespace io {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Calls `fn(record, line_number)` for every non-blank line. Exceptions
/// thrown by `fn` other than ParseError are rethrown as ParseError carrying
/// the line number.
inline void for_each_record(const std::filesystem::path& path,
                            const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ParseError(path.string(), line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object()) throw ParseError(path.string(), line_no, "record is not an object");
    try {
      fn(record, line_no);
    } catch (const ParseError&) {
      throw;
    } catch (const Json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    } catch (const Error& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
}

/// Writes `contents` to a sibling temp file, then renames over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace io
}  // namespace l2d
