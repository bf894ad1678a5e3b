#include "amwc/instance_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <sstream>

namespace amwc {

namespace {

// Line reader that skips comment lines and tracks physical line numbers.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // next non-comment line; false at end of input
  bool next(std::string& out) {
    std::string raw;
    while (std::getline(in_, raw)) {
      ++line_;
      if (!raw.empty() && raw.back() == '\r') raw.pop_back();
      if (!raw.empty() && raw[0] == '#') continue;
      out = raw;
      return true;
    }
    return false;
  }

  std::string require(const char* what) {
    std::string s;
    if (!next(s)) throw parse_error(line_ + 1, std::string("missing ") + what);
    return s;
  }

  int line() const { return line_; }

 private:
  std::istream& in_;
  int line_ = 0;
};

struct Tokens {
  std::vector<std::string> toks;
  int line;

  size_t size() const { return toks.size(); }
  const std::string& operator[](size_t i) const { return toks[i]; }

  long long as_int(size_t i, const char* what) const {
    char* end = nullptr;
    const char* s = toks[i].c_str();
    long long v = std::strtoll(s, &end, 10);
    if (end == s || *end != '\0') throw parse_error(line, std::string("unparsable ") + what);
    return v;
  }
  double as_double(size_t i, const char* what) const {
    char* end = nullptr;
    const char* s = toks[i].c_str();
    double v = std::strtod(s, &end);
    if (end == s || *end != '\0') throw parse_error(line, std::string("unparsable ") + what);
    return v;
  }
};

Tokens split(const std::string& s, int line) {
  Tokens t;
  t.line = line;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) t.toks.push_back(tok);
  return t;
}

Tokens next_tokens(LineReader& r, const char* what) {
  std::string s = r.require(what);
  return split(s, r.line());
}

void expect_end(LineReader& r) {
  std::string s;
  while (r.next(s)) {
    if (split(s, r.line()).size() != 0) throw parse_error(r.line(), "unexpected trailing line");
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

GridDims scan_grid_comment(const std::string& text) {
  GridDims dims;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    if (raw.empty() || raw[0] != '#') break;
    std::istringstream iss(raw.substr(1));
    std::string key;
    int h = 0, w = 0;
    if (iss >> key >> h >> w && key == "grid" && h > 0 && w > 0) {
      dims.height = h;
      dims.width = w;
      return dims;
    }
  }
  return dims;
}

std::string grid_comment(int height, int width) {
  return "# grid " + std::to_string(height) + " " + std::to_string(width) + "\n";
}

CostGraph parse_instance(std::istream& in) {
  LineReader r(in);
  Tokens head = next_tokens(r, "header");
  if (head.size() != 4 || head[0] != "AMWC") throw parse_error(head.line, "malformed header");
  CostGraph g;
  g.num_nodes = (int)head.as_int(1, "node count");
  int num_edges = (int)head.as_int(2, "edge count");
  g.num_classes = (int)head.as_int(3, "class count");
  if (g.num_nodes < 1 || num_edges < 0 || g.num_classes < 1)
    throw parse_error(head.line, "malformed header");

  Tokens pline = next_tokens(r, "P line");
  if (pline.size() < 1 || pline[0] != "P") throw parse_error(pline.line, "malformed P line");
  g.partitionable.assign(g.num_classes + 1, 0);
  for (size_t i = 1; i < pline.size(); ++i) {
    long long k = pline.as_int(i, "class id");
    if (k < 1 || k > g.num_classes) throw parse_error(pline.line, "class out of range");
    g.partitionable[k] = 1;
  }

  g.node_costs.reserve((size_t)g.num_nodes * g.num_classes);
  for (int i = 0; i < g.num_nodes; ++i) {
    Tokens t = next_tokens(r, "node cost line");
    if (t.size() != (size_t)g.num_classes + 1 || t[0] != "N")
      throw parse_error(t.line, "wrong count on node cost line");
    for (int k = 0; k < g.num_classes; ++k) g.node_costs.push_back(t.as_double(k + 1, "cost"));
  }

  g.edges.reserve(num_edges);
  g.edge_costs.reserve(num_edges);
  for (int e = 0; e < num_edges; ++e) {
    Tokens t = next_tokens(r, "edge line");
    if (t.size() != 4 || t[0] != "E") throw parse_error(t.line, "wrong count on edge line");
    int i = (int)t.as_int(1, "node index");
    int j = (int)t.as_int(2, "node index");
    if (i < 0 || j < 0 || i >= g.num_nodes || j >= g.num_nodes)
      throw parse_error(t.line, "index out of range");
    if (i >= j) throw parse_error(t.line, "edge endpoints not ordered");
    g.edges.emplace_back(i, j);
    g.edge_costs.push_back(t.as_double(3, "cost"));
  }
  expect_end(r);
  return g;
}

CostGraph parse_instance_text(const std::string& text) {
  std::istringstream in(text);
  return parse_instance(in);
}

std::string serialize_instance(const CostGraph& g) {
  std::string out;
  out += "AMWC " + std::to_string(g.num_nodes) + " " + std::to_string(g.num_edges()) + " " +
         std::to_string(g.num_classes) + "\n";
  out += "P";
  for (int k = 1; k <= g.num_classes; ++k)
    if (g.is_partitionable(k)) out += " " + std::to_string(k);
  out += "\n";
  for (int i = 0; i < g.num_nodes; ++i) {
    out += "N";
    for (int k = 1; k <= g.num_classes; ++k) out += " " + format_double(g.node_cost(i, k));
    out += "\n";
  }
  for (size_t e = 0; e < g.edges.size(); ++e) {
    out += "E " + std::to_string(g.edges[e].first) + " " + std::to_string(g.edges[e].second) +
           " " + format_double(g.edge_costs[e]) + "\n";
  }
  return out;
}

GroundTruth parse_ground_truth(std::istream& in) {
  LineReader r(in);
  Tokens head = next_tokens(r, "header");
  if (head.size() != 3 || head[0] != "GT") throw parse_error(head.line, "malformed header");
  int num_nodes = (int)head.as_int(1, "node count");
  int num_segments = (int)head.as_int(2, "segment count");
  if (num_nodes < 1 || num_segments < 1) throw parse_error(head.line, "malformed header");

  GroundTruth gt;
  gt.segment_id.reserve(num_nodes);
  for (int i = 0; i < num_nodes; ++i) {
    Tokens t = next_tokens(r, "segment id line");
    if (t.size() != 1) throw parse_error(t.line, "wrong count on segment id line");
    long long s = t.as_int(0, "segment id");
    if (s < 1 || s > num_segments) throw parse_error(t.line, "segment id out of range");
    gt.segment_id.push_back((int)s);
  }

  gt.segment_class.assign(num_segments, 0);
  for (int s = 0; s < num_segments; ++s) {
    Tokens t = next_tokens(r, "segment class line");
    if (t.size() != 3 || t[0] != "S") throw parse_error(t.line, "malformed segment class line");
    long long id = t.as_int(1, "segment id");
    long long cls = t.as_int(2, "class id");
    if (id < 1 || id > num_segments) throw parse_error(t.line, "segment id out of range");
    if (cls < 1) throw parse_error(t.line, "class out of range");
    if (gt.segment_class[id - 1] != 0) throw parse_error(t.line, "duplicate segment class line");
    gt.segment_class[id - 1] = (int)cls;
  }

  std::string raw;
  while (r.next(raw)) {
    Tokens t = split(raw, r.line());
    if (t.size() == 0) continue;
    if (t.size() != 3 || t[0] != "T") throw parse_error(t.line, "malformed threshold line");
    long long cls = t.as_int(1, "class id");
    double thr = t.as_double(2, "threshold");
    if (cls < 1) throw parse_error(t.line, "class out of range");
    if (thr <= 0.0) throw parse_error(t.line, "threshold must be positive");
    if ((size_t)cls >= gt.area_threshold.size()) gt.area_threshold.resize(cls + 1, 0.0);
    gt.area_threshold[cls] = thr;
  }
  return gt;
}

GroundTruth parse_ground_truth_text(const std::string& text) {
  std::istringstream in(text);
  return parse_ground_truth(in);
}

std::string serialize_ground_truth(const GroundTruth& gt) {
  std::string out;
  out += "GT " + std::to_string(gt.segment_id.size()) + " " +
         std::to_string(gt.num_segments()) + "\n";
  for (int s : gt.segment_id) out += std::to_string(s) + "\n";
  for (int s = 1; s <= gt.num_segments(); ++s)
    out += "S " + std::to_string(s) + " " + std::to_string(gt.segment_class[s - 1]) + "\n";
  for (size_t cls = 1; cls < gt.area_threshold.size(); ++cls)
    if (gt.area_threshold[cls] > 0.0)
      out += "T " + std::to_string(cls) + " " + format_double(gt.area_threshold[cls]) + "\n";
  return out;
}

Solution parse_solution(std::istream& in) {
  LineReader r(in);
  Tokens head = next_tokens(r, "header");
  if (head.size() != 3 || head[0] != "SOL") throw parse_error(head.line, "malformed header");
  Solution sol;
  sol.num_segments = (int)head.as_int(1, "segment count");
  sol.objective = head.as_double(2, "objective");
  if (sol.num_segments < 1) throw parse_error(head.line, "malformed header");

  sol.segment_class.assign(sol.num_segments, 0);
  int seg_lines = 0;
  std::string raw;
  while (r.next(raw)) {
    Tokens t = split(raw, r.line());
    if (t.size() == 0) continue;
    if (t[0] == "S") {
      if (t.size() != 3) throw parse_error(t.line, "malformed segment class line");
      long long id = t.as_int(1, "segment id");
      long long cls = t.as_int(2, "class id");
      if (id < 1 || id > sol.num_segments) throw parse_error(t.line, "segment id out of range");
      if (cls < 1) throw parse_error(t.line, "class out of range");
      if (sol.segment_class[id - 1] != 0) throw parse_error(t.line, "duplicate segment class line");
      sol.segment_class[id - 1] = (int)cls;
      ++seg_lines;
      continue;
    }
    if (seg_lines > 0) throw parse_error(t.line, "node line after segment class lines");
    if (t.size() != 2) throw parse_error(t.line, "wrong count on node line");
    long long z = t.as_int(0, "segment id");
    long long x = t.as_int(1, "class id");
    if (z < 1 || z > sol.num_segments) throw parse_error(t.line, "segment id out of range");
    if (x < 1) throw parse_error(t.line, "class out of range");
    sol.segment_id.push_back((int)z);
    sol.node_class.push_back((int)x);
  }
  if (seg_lines != sol.num_segments) throw parse_error(r.line(), "wrong segment class line count");
  if (sol.segment_id.empty()) throw parse_error(r.line(), "no node lines");
  return sol;
}

Solution parse_solution_text(const std::string& text) {
  std::istringstream in(text);
  return parse_solution(in);
}

std::string serialize_solution(const Labeling& lab) {
  std::string out;
  out += "SOL " + std::to_string(lab.num_segments()) + " " + format_double(lab.objective) + "\n";
  for (size_t i = 0; i < lab.segment_id.size(); ++i)
    out += std::to_string(lab.segment_id[i]) + " " + std::to_string(lab.node_class[i]) + "\n";
  for (int s = 1; s <= lab.num_segments(); ++s)
    out += "S " + std::to_string(s) + " " + std::to_string(lab.segment_class[s - 1]) + "\n";
  return out;
}

}  // namespace amwc
