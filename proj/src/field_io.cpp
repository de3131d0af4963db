#include "nonstat/field_io.hpp"

#include "nonstat/errors.hpp"

#include <json.hpp>

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace nonstat {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "NSF1";
const std::vector<std::string> kParamNames = {"xi1", "xi2", "theta", "sigma2", "tau2"};

void append_f64le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int b = 0; b < 8; ++b)
    buf[b] = char((bits >> (8 * b)) & 0xffu);
  out.append(buf, 8);
}

double read_f64le(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b)
    bits |= std::uint64_t(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

double parse_double(std::string_view s, const std::string& context) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t'))
    s.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError("payload", "cannot parse number '" + std::string(s) + "' in " + context);
  return v;
}

// Planes: `planes` vectors of length n each.
std::string serialize_planes(const json& header, const std::vector<const std::vector<double>*>& planes,
                             std::size_t n, Encoding encoding) {
  std::string out = header.dump();
  out.push_back('\n');
  if (encoding == Encoding::F64LE) {
    out.reserve(out.size() + planes.size() * n * 8);
    for (const auto* plane : planes)
      for (double v : *plane)
        append_f64le(out, v);
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t c = 0; c < planes.size(); ++c) {
        if (c)
          out.push_back(',');
        out += format_double((*planes[c])[k]);
      }
      out.push_back('\n');
    }
  }
  return out;
}

struct Parsed {
  json header;
  Grid grid;
  Encoding encoding = Encoding::F64LE;
  std::size_t payload_offset = 0;
};

template <class T>
T require(const json& h, const std::string& key) {
  if (!h.contains(key))
    throw FormatError(key, "missing key");
  try {
    return h.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(key, "wrong type");
  }
}

Parsed parse_header(const std::string& bytes) {
  auto eol = bytes.find('\n');
  if (eol == std::string::npos)
    throw FormatError("header", "missing header line");
  Parsed out;
  try {
    out.header = json::parse(bytes.substr(0, eol));
  } catch (const json::exception& e) {
    throw FormatError("header", std::string("not a JSON object: ") + e.what());
  }
  if (!out.header.is_object())
    throw FormatError("header", "not a JSON object");
  const auto& h = out.header;
  if (require<std::string>(h, "format") != kFormat)
    throw FormatError("format", "expected NSF1");
  out.grid.nx = require<int>(h, "nx");
  out.grid.ny = require<int>(h, "ny");
  out.grid.h1 = require<double>(h, "h1");
  out.grid.h2 = require<double>(h, "h2");
  if (out.grid.nx < 1)
    throw FormatError("nx", "must be positive");
  if (out.grid.ny < 1)
    throw FormatError("ny", "must be positive");
  if (!(out.grid.h1 > 0.0))
    throw FormatError("h1", "must be positive");
  if (!(out.grid.h2 > 0.0))
    throw FormatError("h2", "must be positive");
  if (require<std::string>(h, "order") != "row-major")
    throw FormatError("order", "only row-major is supported");
  const auto enc = require<std::string>(h, "encoding");
  if (enc == "f64le")
    out.encoding = Encoding::F64LE;
  else if (enc == "csv")
    out.encoding = Encoding::Csv;
  else
    throw FormatError("encoding", "unknown encoding '" + enc + "'");
  out.payload_offset = eol + 1;
  return out;
}

std::vector<std::vector<double>> parse_planes(const std::string& bytes, const Parsed& parsed,
                                              std::size_t nplanes) {
  const std::size_t n = parsed.grid.interior_size();
  std::vector<std::vector<double>> planes(nplanes, std::vector<double>(n));
  const std::size_t payload = bytes.size() - parsed.payload_offset;
  if (parsed.encoding == Encoding::F64LE) {
    const std::size_t expected = nplanes * n * 8;
    if (payload != expected)
      throw TruncationError("payload holds " + std::to_string(payload) + " bytes, header implies " +
                            std::to_string(expected));
    const char* p = bytes.data() + parsed.payload_offset;
    for (auto& plane : planes)
      for (auto& v : plane) {
        v = read_f64le(p);
        p += 8;
      }
    return planes;
  }
  std::size_t pos = parsed.payload_offset;
  std::size_t row = 0;
  while (pos < bytes.size()) {
    auto eol = bytes.find('\n', pos);
    if (eol == std::string::npos)
      eol = bytes.size();
    std::string_view line(bytes.data() + pos, eol - pos);
    pos = eol + 1;
    if (line.empty() || line == "\r")
      continue;
    if (row >= n)
      throw TruncationError("CSV payload has more than " + std::to_string(n) + " rows");
    std::size_t col = 0;
    std::size_t start = 0;
    while (true) {
      auto comma = line.find(',', start);
      auto cell = line.substr(start, comma == std::string_view::npos ? line.size() - start : comma - start);
      if (col >= nplanes)
        throw TruncationError("CSV row " + std::to_string(row) + " has too many columns");
      planes[col][row] = parse_double(cell, "row " + std::to_string(row));
      ++col;
      if (comma == std::string_view::npos)
        break;
      start = comma + 1;
    }
    if (col != nplanes)
      throw TruncationError("CSV row " + std::to_string(row) + " has " + std::to_string(col) +
                            " columns, expected " + std::to_string(nplanes));
    ++row;
  }
  if (row != n)
    throw TruncationError("CSV payload has " + std::to_string(row) + " rows, expected " +
                          std::to_string(n));
  return planes;
}

json base_header(const Grid& grid, Encoding encoding) {
  json h;
  h["format"] = kFormat;
  h["nx"] = grid.nx;
  h["ny"] = grid.ny;
  h["h1"] = grid.h1;
  h["h2"] = grid.h2;
  h["order"] = "row-major";
  h["encoding"] = encoding_name(encoding);
  return h;
}

} // namespace

std::string encoding_name(Encoding e) { return e == Encoding::F64LE ? "f64le" : "csv"; }

Encoding encoding_from(const std::string& name) {
  if (name == "f64le")
    return Encoding::F64LE;
  if (name == "csv")
    return Encoding::Csv;
  throw DomainError("unknown encoding '" + name + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string serialize_ensemble(const FieldEnsemble& ensemble, Encoding encoding) {
  ensemble.validate();
  auto h = base_header(ensemble.grid.interior(), encoding);
  h["p"] = ensemble.size();
  std::vector<const std::vector<double>*> planes;
  for (const auto& r : ensemble.replicates)
    planes.push_back(&r);
  return serialize_planes(h, planes, ensemble.grid.interior_size(), encoding);
}

FieldEnsemble parse_ensemble(const std::string& bytes) {
  auto parsed = parse_header(bytes);
  const int p = require<int>(parsed.header, "p");
  if (p < 1)
    throw FormatError("p", "must be at least 1");
  FieldEnsemble out;
  out.grid = parsed.grid;
  out.replicates = parse_planes(bytes, parsed, std::size_t(p));
  return out;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

void write_ensemble(const FieldEnsemble& ensemble, const std::filesystem::path& path,
                    Encoding encoding) {
  write_file_bytes(path, serialize_ensemble(ensemble, encoding));
}

FieldEnsemble read_ensemble(const std::filesystem::path& path) {
  return parse_ensemble(read_file_bytes(path));
}

void write_field(const Field& field, const std::filesystem::path& path, Encoding encoding) {
  FieldEnsemble e{field.grid, {field.values}};
  write_ensemble(e, path, encoding);
}

void write_param_fields(const ParamFields& fields, const std::filesystem::path& path,
                        Encoding encoding) {
  fields.validate();
  auto h = base_header(fields.grid.interior(), encoding);
  h["fields"] = kParamNames;
  h["nu"] = smoothness_value(fields.nu);
  const std::size_t n = fields.grid.interior_size();
  std::vector<std::vector<double>> planes(5, std::vector<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const auto& p = fields.params[k];
    planes[0][k] = p.xi1;
    planes[1][k] = p.xi2;
    planes[2][k] = p.theta;
    planes[3][k] = p.sigma2;
    planes[4][k] = p.tau2;
  }
  std::vector<const std::vector<double>*> ptrs;
  for (const auto& pl : planes)
    ptrs.push_back(&pl);
  write_file_bytes(path, serialize_planes(h, ptrs, n, encoding));
}

ParamFields read_param_fields(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  auto parsed = parse_header(bytes);
  if (require<std::vector<std::string>>(parsed.header, "fields") != kParamNames)
    throw FormatError("fields", "expected [xi1, xi2, theta, sigma2, tau2]");
  Smoothness nu;
  try {
    nu = smoothness_from(require<double>(parsed.header, "nu"));
  } catch (const DomainError& e) {
    throw FormatError("nu", e.what());
  }
  auto planes = parse_planes(bytes, parsed, 5);
  ParamFields out;
  out.grid = parsed.grid;
  out.nu = nu;
  const std::size_t n = parsed.grid.interior_size();
  out.params.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    out.params[k] = LocalParams{planes[0][k], planes[1][k], planes[2][k], planes[3][k], planes[4][k], nu};
  out.converged.assign(n, 1);
  out.estimated.assign(n, 1);
  out.validate();
  return out;
}

std::string content_hash(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace nonstat
