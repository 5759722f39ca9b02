#pragma once

#include <string>
#include <vector>

#include "bpsa/executive.hpp"

namespace bpsa {

// CSV with a header row; doubles printed with 17 significant digits.
std::string trace_to_csv(const std::vector<TraceRow>& rows, const std::vector<std::string>& candidates);
void save_trace(const std::vector<TraceRow>& rows, const std::vector<std::string>& candidates,
                const std::string& path);

// Rows "t_start,t_end,fx,fy"; an optional header line is skipped.
// Throws ParseError on malformed rows and ValidationError on overlapping intervals.
std::vector<ForceSegment> parse_force_script(const std::string& text);
std::vector<ForceSegment> load_force_script(const std::string& path);

}  // namespace bpsa
