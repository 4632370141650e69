#include "udna/trace_io.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace udna {

namespace {

constexpr std::array<const char*, 11> kColumns = {
    "t",       "F",        "consensus_sq", "tracking_sq",
    "v_sq",    "P",        "opt_err",      "eps_stat",
    "volume",  "dx",       "gbar_norm"};

std::string version_line() {
  return std::string("# udna-trace v") + kTraceSchemaVersion;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, const std::string& path,
                    int line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                             ": not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

void write_trace_csv(const std::string& path,
                     const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  out << version_line() << "\n";
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    out << (i == 0 ? "" : ",") << kColumns[i];
  }
  out << "\n";
  for (const TraceRow& r : trace) {
    out << r.t << ',' << fmt(r.f) << ',' << fmt(r.consensus_sq) << ','
        << fmt(r.tracking_sq) << ',' << fmt(r.v_sq) << ','
        << fmt(r.potential) << ',' << fmt(r.opt_err) << ','
        << fmt(r.eps_stat) << ',' << r.volume << ',' << fmt(r.dx) << ','
        << fmt(r.gbar_norm) << "\n";
  }
  if (!out) {
    throw std::runtime_error("failed while writing " + path);
  }
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open trace file " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line != version_line()) {
    throw std::runtime_error(path + ": unsupported trace schema (expected '" +
                             version_line() + "')");
  }
  if (!std::getline(in, line)) {
    throw std::runtime_error(path + ": missing header row");
  }
  const std::vector<std::string> header = split_csv(line);
  if (header.size() != kColumns.size()) {
    for (const char* col : kColumns) {
      bool found = false;
      for (const std::string& h : header) {
        if (h == col) {
          found = true;
          break;
        }
      }
      if (!found) {
        throw std::runtime_error(path + ": trace is missing column '" +
                                 col + "'");
      }
    }
    throw std::runtime_error(path + ": unexpected extra trace columns");
  }
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (header[i] != kColumns[i]) {
      throw std::runtime_error(path + ": trace is missing column '" +
                               std::string(kColumns[i]) + "' at position " +
                               std::to_string(i + 1) + " (found '" +
                               header[i] + "')");
    }
  }

  std::vector<TraceRow> trace;
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != kColumns.size()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected " +
                               std::to_string(kColumns.size()) +
                               " cells, found " +
                               std::to_string(cells.size()));
    }
    TraceRow r;
    r.t = static_cast<int>(parse_double(cells[0], path, line_no));
    r.f = parse_double(cells[1], path, line_no);
    r.consensus_sq = parse_double(cells[2], path, line_no);
    r.tracking_sq = parse_double(cells[3], path, line_no);
    r.v_sq = parse_double(cells[4], path, line_no);
    r.potential = parse_double(cells[5], path, line_no);
    r.opt_err = parse_double(cells[6], path, line_no);
    r.eps_stat = parse_double(cells[7], path, line_no);
    r.volume = std::strtoll(cells[8].c_str(), nullptr, 10);
    r.dx = parse_double(cells[9], path, line_no);
    r.gbar_norm = parse_double(cells[10], path, line_no);
    trace.push_back(r);
  }
  return trace;
}

}  // namespace udna
