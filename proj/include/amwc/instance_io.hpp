#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "amwc/graph.hpp"

namespace amwc {

// Parse failure with the 1-based physical line number it occurred on.
class parse_error : public std::runtime_error {
 public:
  parse_error(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Node-labeled solution as stored on disk; edge cut flags are implied by the
// instance and not serialized.
struct Solution {
  int num_segments = 0;
  double objective = 0.0;
  std::vector<int> segment_id;     // z per node
  std::vector<int> node_class;     // x per node
  std::vector<int> segment_class;  // class of segment s at [s-1]
};

// Leading "# grid <h> <w>" comment, used by grid-aware tools.
struct GridDims {
  int height = 0, width = 0;
  bool present() const { return height > 0 && width > 0; }
};
GridDims scan_grid_comment(const std::string& text);
std::string grid_comment(int height, int width);

// Text formats round-trip bit-exactly: doubles are written with enough
// digits to reparse to the identical value.
std::string format_double(double v);

CostGraph parse_instance(std::istream& in);
CostGraph parse_instance_text(const std::string& text);
std::string serialize_instance(const CostGraph& g);

GroundTruth parse_ground_truth(std::istream& in);
GroundTruth parse_ground_truth_text(const std::string& text);
std::string serialize_ground_truth(const GroundTruth& gt);

Solution parse_solution(std::istream& in);
Solution parse_solution_text(const std::string& text);
std::string serialize_solution(const Labeling& lab);

}  // namespace amwc
