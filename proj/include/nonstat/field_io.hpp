#pragma once

// NSF1 field files.
//
// A single header line holds a JSON object with the keys
//   format ("NSF1"), nx, ny, h1, h2, p, order ("row-major"),
//   encoding ("f64le" | "csv")
// followed by the payload. Binary payloads are p*nx*ny little-endian IEEE
// doubles, replicate-major. CSV payloads carry one row per node and one column
// per replicate. Parameter-field files replace `p` with
//   fields: ["xi1","xi2","theta","sigma2","tau2"]
// plus the smoothness `nu`, and stack the five planes in that order.
//
// The writer emits a canonical header (sorted keys, no whitespace), so files
// produced here round-trip byte for byte.

#include "nonstat/fields.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace nonstat {

enum class Encoding { F64LE, Csv };

std::string encoding_name(Encoding e);
Encoding encoding_from(const std::string& name);

void write_ensemble(const FieldEnsemble& ensemble, const std::filesystem::path& path,
                    Encoding encoding = Encoding::F64LE);
FieldEnsemble read_ensemble(const std::filesystem::path& path);

/// Convenience for single fields (one-replicate files).
void write_field(const Field& field, const std::filesystem::path& path,
                 Encoding encoding = Encoding::F64LE);

void write_param_fields(const ParamFields& fields, const std::filesystem::path& path,
                        Encoding encoding = Encoding::F64LE);
/// Converged/estimated flags are not part of the file and come back as 1.
ParamFields read_param_fields(const std::filesystem::path& path);

/// In-memory variants used by the file functions.
std::string serialize_ensemble(const FieldEnsemble& ensemble, Encoding encoding);
FieldEnsemble parse_ensemble(const std::string& bytes);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);

/// 64-bit FNV-1a of the file contents, rendered as 16 hex digits.
std::string content_hash(const std::filesystem::path& path);

/// Shortest round-trip decimal rendering of a double.
std::string format_double(double v);

} // namespace nonstat
