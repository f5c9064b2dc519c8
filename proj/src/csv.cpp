#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "adh/cli_io.hpp"
#include "adh/errors.hpp"
#include "json.hpp"

namespace adh::cli {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 16);
  std::string s(buf, res.ptr);
  // to_chars writes e+00 / e-05; drop the plus sign and leading zeros
  const auto e = s.find('e');
  std::string mant = s.substr(0, e);
  std::string exp = s.substr(e + 1);
  bool neg = false;
  if (exp[0] == '+' || exp[0] == '-') {
    neg = exp[0] == '-';
    exp.erase(0, 1);
  }
  const auto nz = exp.find_first_not_of('0');
  exp = nz == std::string::npos ? "0" : exp.substr(nz);
  return mant + "e" + (neg ? "-" : "") + exp;
}

namespace {
std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}
}  // namespace

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw std::invalid_argument("csv table needs at least one column");
}

CsvTable& CsvTable::add(double v) {
  row_.push_back(format_real(v));
  return *this;
}
CsvTable& CsvTable::add(const std::string& v) {
  row_.push_back(quote(v));
  return *this;
}

void CsvTable::end_row() {
  if (row_.size() != header_.size())
    throw std::logic_error("csv row has " + std::to_string(row_.size()) + " fields, header has " +
                           std::to_string(header_.size()));
  for (std::size_t i = 0; i < row_.size(); ++i) {
    if (i) body_ += ',';
    body_ += row_[i];
  }
  body_ += "\r\n";
  row_.clear();
  ++rows_;
}

std::string CsvTable::str() const {
  std::string out;
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) out += ',';
    out += quote(header_[i]);
  }
  out += "\r\n";
  return out + body_;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return out.str();
}

std::string emit_csv(const CsvTable& table, const std::filesystem::path& path) {
  const std::string bytes = table.str();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw std::runtime_error("write failed for " + path.string());
  return sha256_hex(bytes);
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["subcommand"] = subcommand;
  j["config_sha256"] = config_sha256;
  j["seed"] = seed;
  j["threads"] = threads;
  j["library_version"] = library_version;
  j["wall_clock_seconds"] = wall_clock_seconds;
  j["outputs"] = nlohmann::ordered_json::object();
  for (const auto& [name, sum] : outputs) j["outputs"][name] = sum;
  return j.dump(2) + "\n";
}

}  // namespace adh::cli
