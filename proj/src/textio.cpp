#include "uit/textio.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "uit/error.hpp"
#include "uit/rng.hpp"

namespace uit {

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_fixed2(double v) {
  // half-up on the second decimal; callers pass non-negative percentages
  long long scaled = static_cast<long long>(std::floor(v * 100.0 + 0.5));
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%lld.%02lld", scaled / 100,
                scaled % 100 < 0 ? -(scaled % 100) : scaled % 100);
  return std::string(buf);
}

std::string fmt_sci2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return std::string(buf);
}

std::string fmt_fixed4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return std::string(buf);
}

double parse_double(const std::string& token, bool& ok) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto res = std::from_chars(first, last, value);
  ok = res.ec == std::errc() && res.ptr == last && !token.empty();
  return value;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(Errc::IoError, "short write to " + path);
}

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = detail::fnv1a64(bytes);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string digest_file(const std::string& path) {
  return fnv1a64_hex(read_file(path));
}

}  // namespace uit
