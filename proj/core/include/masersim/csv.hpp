#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "masersim/magnetometry.hpp"
#include "masersim/spectrum.hpp"

namespace masersim {

// Writes content to <path>.tmp in one pass and renames it into place, so
// readers never observe a partially written artifact.
void atomic_write_text(const std::filesystem::path& path,
                       std::string_view content);

std::string read_text_file(const std::filesystem::path& path);

// FNV-1a 64-bit, used as the provenance checksum for input files.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t checksum_file(const std::filesystem::path& path);
std::string checksum_hex(std::uint64_t checksum);

// CSV conventions: comma delimiter, '.' decimal point, '#'-prefixed
// "key=value" metadata lines, one optional textual column-header row.
// Doubles are written with format_double, so write -> read is an identity
// at full precision. Malformed rows and non-monotone axes raise ParseError
// with the 1-based line number.
Spectrum load_spectrum_csv(const std::filesystem::path& path);
void write_spectrum_csv(const std::filesystem::path& path,
                        const Spectrum& spectrum);

TimeTrace load_trace_csv(const std::filesystem::path& path);
void write_trace_csv(const std::filesystem::path& path,
                     const TimeTrace& trace);

FieldResponse load_field_response_csv(const std::filesystem::path& path);
void write_field_response_csv(const std::filesystem::path& path,
                              const FieldResponse& data);

}  // namespace masersim
