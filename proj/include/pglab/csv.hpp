#pragma once

// Run records and their CSV form.
//
//   experiment,seed,beta,t_or_steps,value,wall_ms
//
// `experiment` names the measured series (see experiment.hpp). `seed` is the
// run index within the experiment and is empty for across-run aggregates.
// Reals are written with 17 significant digits, so parsing a file back
// reproduces every record exactly.

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "pglab/errors.hpp"

namespace pglab {

struct RunRecord {
  std::string experiment;
  std::optional<std::uint64_t> seed;
  double beta = 0.0;
  std::int64_t t_or_steps = 0;
  double value = 0.0;
  double wall_ms = 0.0;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

inline constexpr const char* kCsvHeader = "experiment,seed,beta,t_or_steps,value,wall_ms";

namespace detail {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_real(const std::string& s, const std::string& context) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  // Underflow to a subnormal is fine; only overflow loses the value.
  if (s.empty() || end != s.c_str() + s.size() || (errno == ERANGE && std::isinf(v))) throw ConfigError(context + ": bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline std::string to_csv_line(const RunRecord& r) {
  std::string line = r.experiment;
  line += ',';
  if (r.seed) line += std::to_string(*r.seed);
  line += ',';
  line += detail::format_real(r.beta);
  line += ',';
  line += std::to_string(r.t_or_steps);
  line += ',';
  line += detail::format_real(r.value);
  line += ',';
  line += detail::format_real(r.wall_ms);
  return line;
}

inline std::string to_csv(const std::vector<RunRecord>& records) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : records) {
    out += to_csv_line(r);
    out += '\n';
  }
  return out;
}

inline void emit_csv(const std::vector<RunRecord>& records, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("emit_csv: cannot open " + path + " for writing");
  const std::string text = to_csv(records);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  f.close();
  if (!f) throw std::runtime_error("emit_csv: write to " + path + " failed");
}

inline std::vector<RunRecord> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ConfigError("csv: missing or unexpected header");
  std::vector<RunRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    const std::string ctx = "csv line " + std::to_string(lineno);
    if (f.size() != 6) throw ConfigError(ctx + ": expected 6 fields");
    RunRecord r;
    r.experiment = f[0];
    if (!f[1].empty()) r.seed = std::stoull(f[1]);
    r.beta = detail::parse_real(f[2], ctx);
    r.t_or_steps = std::stoll(f[3]);
    r.value = detail::parse_real(f[4], ctx);
    r.wall_ms = detail::parse_real(f[5], ctx);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<RunRecord> read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("read_csv: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str());
}

/// Canonical record order: series, beta, run, horizon.
inline void sort_records(std::vector<RunRecord>& records) {
  auto key = [](const RunRecord& r) {
    return std::make_tuple(r.experiment, r.beta, r.seed.has_value(), r.seed.value_or(0), r.t_or_steps);
  };
  std::stable_sort(records.begin(), records.end(),
                   [&](const RunRecord& a, const RunRecord& b) { return key(a) < key(b); });
}

}  // namespace pglab
