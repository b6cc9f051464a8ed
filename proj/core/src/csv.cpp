#include "masersim/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "masersim/errors.hpp"
#include "masersim/json_writer.hpp"

namespace masersim {

void atomic_write_text(const std::filesystem::path& path,
                       std::string_view content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() +
                  ": " + ec.message());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return std::move(ss).str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::uint64_t checksum_file(const std::filesystem::path& path) {
  return fnv1a64(read_text_file(path));
}

std::string checksum_hex(std::uint64_t checksum) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[checksum & 0xf];
    checksum >>= 4;
  }
  return out;
}

namespace {

struct CsvData {
  std::vector<std::pair<std::string, std::string>> meta;  // '#' key=value lines
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> row_lines;  // 1-based source line of each row
};

bool parse_number(std::string_view tok, double& out) {
  // Trim surrounding spaces; from_chars demands a tight token.
  while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t'))
    tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' ||
                          tok.back() == '\r'))
    tok.remove_suffix(1);
  if (tok.empty()) return false;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc{} && ptr == end && std::isfinite(out);
}

// Parses the shared CSV shape: metadata, an optional one-line textual
// header, then numeric rows with a fixed column range.
CsvData parse_csv(const std::filesystem::path& path, std::size_t min_cols,
                  std::size_t max_cols) {
  const std::string text = read_text_file(path);
  CsvData data;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_header = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view body = line.substr(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      const std::size_t eq = body.find('=');
      if (eq != std::string_view::npos) {
        std::string key(body.substr(0, eq));
        std::string val(body.substr(eq + 1));
        while (!key.empty() && key.back() == ' ') key.pop_back();
        while (!val.empty() && val.front() == ' ') val.erase(0, 1);
        data.meta.emplace_back(std::move(key), std::move(val));
      }
      continue;
    }

    std::vector<double> row;
    bool numeric = true;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      const std::string_view tok =
          line.substr(start, comma == std::string_view::npos
                                 ? std::string_view::npos
                                 : comma - start);
      double v = 0.0;
      if (!parse_number(tok, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!numeric) {
      // One textual header row is tolerated before any data.
      if (!saw_header && data.rows.empty()) {
        saw_header = true;
        continue;
      }
      throw ParseError(path.string() + ": malformed row", line_no);
    }
    if (row.size() < min_cols || row.size() > max_cols)
      throw ParseError(path.string() + ": expected " +
                           std::to_string(min_cols) +
                           (max_cols != min_cols
                                ? ".." + std::to_string(max_cols)
                                : "") +
                           " columns, got " + std::to_string(row.size()),
                       line_no);
    data.rows.push_back(std::move(row));
    data.row_lines.push_back(line_no);
  }
  if (data.rows.empty())
    throw ParseError(path.string() + ": no data rows", std::max<std::size_t>(line_no, 1));
  return data;
}

const std::string* find_meta(const CsvData& data, std::string_view key) {
  for (const auto& [k, v] : data.meta)
    if (k == key) return &v;
  return nullptr;
}

double meta_number(const std::filesystem::path& path, const std::string& value,
                   std::string_view key) {
  double out = 0.0;
  if (!parse_number(value, out))
    throw ParseError(path.string() + ": metadata " + std::string(key) +
                         " is not a number",
                     1);
  return out;
}

}  // namespace

Spectrum load_spectrum_csv(const std::filesystem::path& path) {
  const CsvData data = parse_csv(path, 2, 2);
  Spectrum s;
  s.frequencies_MHz.reserve(data.rows.size());
  s.values.reserve(data.rows.size());
  for (const auto& row : data.rows) {
    s.frequencies_MHz.push_back(row[0]);
    s.values.push_back(row[1]);
  }
  if (const std::string* kind = find_meta(data, "value_kind"))
    s.value_kind = value_kind_from_string(*kind);
  for (std::size_t i = 1; i < s.frequencies_MHz.size(); ++i)
    if (!(s.frequencies_MHz[i] > s.frequencies_MHz[i - 1]))
      throw ParseError(path.string() + ": frequency axis not strictly increasing",
                       data.row_lines[i]);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return s;
}

void write_spectrum_csv(const std::filesystem::path& path,
                        const Spectrum& spectrum) {
  spectrum.validate();
  std::string out;
  out += "# value_kind=";
  out += to_string(spectrum.value_kind);
  out += "\nfrequency_MHz,value\n";
  for (std::size_t i = 0; i < spectrum.values.size(); ++i) {
    out += format_double(spectrum.frequencies_MHz[i]);
    out += ',';
    out += format_double(spectrum.values[i]);
    out += '\n';
  }
  atomic_write_text(path, out);
}

TimeTrace load_trace_csv(const std::filesystem::path& path) {
  const CsvData data = parse_csv(path, 2, 2);
  TimeTrace t;
  t.times_s.reserve(data.rows.size());
  t.volts.reserve(data.rows.size());
  for (const auto& row : data.rows) {
    t.times_s.push_back(row[0]);
    t.volts.push_back(row[1]);
  }
  if (const std::string* b0 = find_meta(data, "B0_T"))
    t.b0_T = meta_number(path, *b0, "B0_T");
  if (const std::string* fq = find_meta(data, "freq_MHz"))
    t.probe_freq_MHz = meta_number(path, *fq, "freq_MHz");
  for (std::size_t i = 1; i < t.times_s.size(); ++i)
    if (!(t.times_s[i] > t.times_s[i - 1]))
      throw ParseError(path.string() + ": time axis not strictly increasing",
                       data.row_lines[i]);
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return t;
}

void write_trace_csv(const std::filesystem::path& path,
                     const TimeTrace& trace) {
  trace.validate();
  std::string out;
  if (trace.b0_T) out += "# B0_T=" + format_double(*trace.b0_T) + "\n";
  if (trace.probe_freq_MHz)
    out += "# freq_MHz=" + format_double(*trace.probe_freq_MHz) + "\n";
  out += "time_s,volts\n";
  for (std::size_t i = 0; i < trace.volts.size(); ++i) {
    out += format_double(trace.times_s[i]);
    out += ',';
    out += format_double(trace.volts[i]);
    out += '\n';
  }
  atomic_write_text(path, out);
}

FieldResponse load_field_response_csv(const std::filesystem::path& path) {
  const CsvData data = parse_csv(path, 2, 4);
  FieldResponse fr;
  for (const auto& row : data.rows) {
    fr.fields_T.push_back(row[0]);
    fr.amplitudes_V.push_back(row[1]);
    fr.amp_errors_V.push_back(row.size() > 2 ? row[2] : 0.0);
    fr.field_errors_T.push_back(row.size() > 3 ? row[3] : 0.0);
  }
  for (std::size_t i = 1; i < fr.fields_T.size(); ++i)
    if (!(fr.fields_T[i] > fr.fields_T[i - 1]))
      throw ParseError(path.string() + ": field axis not strictly increasing",
                       data.row_lines[i]);
  try {
    fr.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return fr;
}

void write_field_response_csv(const std::filesystem::path& path,
                              const FieldResponse& data) {
  data.validate();
  std::string out = "field_T,amplitude_V,amp_error_V,field_error_T\n";
  for (std::size_t i = 0; i < data.fields_T.size(); ++i) {
    out += format_double(data.fields_T[i]);
    out += ',';
    out += format_double(data.amplitudes_V[i]);
    out += ',';
    out += format_double(data.amp_errors_V[i]);
    out += ',';
    out += format_double(data.field_errors_T[i]);
    out += '\n';
  }
  atomic_write_text(path, out);
}

}  // namespace masersim
