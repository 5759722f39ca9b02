#include "bpsa/trace.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bpsa/error.hpp"

namespace bpsa {

namespace {

void put(std::string& s, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  s += buf;
}

void put_vec(std::string& s, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    s += ',';
    put(s, v[i]);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string trace_to_csv(const std::vector<TraceRow>& rows, const std::vector<std::string>& candidates) {
  const Eigen::Index n = rows.empty() ? 2 : rows.front().q.size();
  std::string s = "t";
  for (const char* name : {"q", "qd"}) {
    for (Eigen::Index i = 1; i <= n; ++i) s += std::string(",") + name + std::to_string(i);
  }
  s += ",x,y";
  for (Eigen::Index i = 1; i <= n; ++i) s += ",u" + std::to_string(i);
  s += ",wx,wy,bp,barrier";
  for (const std::string& c : candidates) s += ",p_" + c;
  s += ",target\n";
  for (const TraceRow& r : rows) {
    put(s, r.t);
    put_vec(s, r.q);
    put_vec(s, r.qd);
    put_vec(s, r.x);
    put_vec(s, r.u);
    put_vec(s, r.w);
    s += ',' + std::to_string(r.bp) + ',';
    put(s, r.barrier);
    put_vec(s, r.belief);
    s += ',' + r.target + '\n';
  }
  return s;
}

void save_trace(const std::vector<TraceRow>& rows, const std::vector<std::string>& candidates,
                const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << trace_to_csv(rows, candidates);
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path);
}

std::vector<ForceSegment> parse_force_script(const std::string& text) {
  std::vector<ForceSegment> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    if (out.empty() && std::any_of(line.begin(), line.end(), [](unsigned char c) { return std::isalpha(c); })) {
      continue;  // header
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    ForceSegment seg;
    std::string rest;
    if (!(row >> seg.t_start >> seg.t_end >> seg.w.x() >> seg.w.y()) || (row >> rest)) {
      throw Error(ErrorCode::kParseError, "force script line " + std::to_string(lineno));
    }
    if (!(seg.t_end > seg.t_start) || !seg.w.allFinite()) {
      throw Error(ErrorCode::kValidationError,
                  "force script line " + std::to_string(lineno) + ": need t_end > t_start");
    }
    out.push_back(seg);
  }
  std::vector<ForceSegment> sorted = out;
  std::sort(sorted.begin(), sorted.end(),
            [](const ForceSegment& a, const ForceSegment& b) { return a.t_start < b.t_start; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].t_start < sorted[i - 1].t_end) {
      throw Error(ErrorCode::kValidationError, "force script: overlapping intervals");
    }
  }
  return sorted;
}

std::vector<ForceSegment> load_force_script(const std::string& path) {
  return parse_force_script(read_file(path));
}

}  // namespace bpsa
