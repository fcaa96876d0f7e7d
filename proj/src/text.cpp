#include "termeval/text.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace termeval {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string number_lines(std::string_view source) {
  std::string out;
  out.reserve(source.size() + source.size() / 8 + 16);
  std::size_t k = 1;
  std::size_t start = 0;
  while (start < source.size()) {
    out += std::to_string(k++);
    out += ": ";
    std::size_t nl = source.find('\n', start);
    if (nl == std::string_view::npos) {
      out.append(source.substr(start));
      break;
    }
    out.append(source.substr(start, nl - start + 1));
    start = nl + 1;
  }
  return out;
}

std::string strip_line_numbers(std::string_view numbered, bool* ok) {
  std::string out;
  out.reserve(numbered.size());
  std::size_t k = 1;
  std::size_t start = 0;
  while (start < numbered.size()) {
    std::string prefix = std::to_string(k++) + ":";
    if (numbered.substr(start, prefix.size()) != prefix) {
      if (ok) *ok = false;
      return std::string(numbered);
    }
    std::size_t pos = start + prefix.size();
    // "k: " is canonical; "k:" directly followed by the line end is the
    // trimmed form of an empty line.
    if (pos < numbered.size() && numbered[pos] == ' ') ++pos;
    std::size_t nl = numbered.find('\n', pos);
    if (nl == std::string_view::npos) {
      out.append(numbered.substr(pos));
      break;
    }
    out.append(numbered.substr(pos, nl - pos + 1));
    start = nl + 1;
  }
  if (ok) *ok = true;
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace termeval
