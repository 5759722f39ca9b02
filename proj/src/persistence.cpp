#include "bpsa/persistence.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <sstream>

#include "bpsa/config.hpp"
#include "bpsa/error.hpp"

namespace bpsa {

using nlohmann::json;

namespace {

// JSON has no inf/nan; those travel as strings.
json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double num(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw Error(ErrorCode::kParseError, "bad number " + s);
}

json vec(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

Vec vec(const json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = num(j[i]);
  return v;
}

json mat(const Mat& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(num(m(r, c)));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Mat mat(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error(ErrorCode::kParseError, "matrix size mismatch");
  }
  Mat m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = num(data[k++]);
  }
  return m;
}

json cert(const CertReport& c) {
  return {{"samples_used", c.samples_used},
          {"max_torque_on_boundary", num(c.max_torque_on_boundary)},
          {"min_decrease_margin", num(c.min_decrease_margin)},
          {"min_rate_margin", num(c.min_rate_margin)},
          {"max_containment", num(c.max_containment)},
          {"torque_ok", c.torque_ok},
          {"workspace_ok", c.workspace_ok},
          {"velocity_ok", c.velocity_ok},
          {"exclusion_ok", c.exclusion_ok},
          {"containment_ok", c.containment_ok},
          {"decrease_ok", c.decrease_ok},
          {"violations", c.violations}};
}

CertReport cert(const json& j) {
  CertReport c;
  c.samples_used = j.at("samples_used").get<int>();
  c.max_torque_on_boundary = num(j.at("max_torque_on_boundary"));
  c.min_decrease_margin = num(j.at("min_decrease_margin"));
  c.min_rate_margin = num(j.at("min_rate_margin"));
  c.max_containment = num(j.at("max_containment"));
  c.torque_ok = j.at("torque_ok").get<bool>();
  c.workspace_ok = j.at("workspace_ok").get<bool>();
  c.velocity_ok = j.at("velocity_ok").get<bool>();
  c.exclusion_ok = j.at("exclusion_ok").get<bool>();
  c.containment_ok = j.at("containment_ok").get<bool>();
  c.decrease_ok = j.at("decrease_ok").get<bool>();
  c.violations = j.at("violations").get<std::vector<std::string>>();
  return c;
}

json vertex(const BarrierPair& bp) {
  json gamma = json::array();
  for (double g : bp.witness.gamma) gamma.push_back(num(g));
  return {{"id", bp.id},
          {"q_e", vec(bp.q_e)},
          {"x_e", vec(Vec(bp.x_e))},
          {"Q", mat(bp.Q)},
          {"K", mat(bp.K)},
          {"eps0", num(bp.eps0)},
          {"alpha", num(bp.alpha)},
          {"w_bar", num(bp.w_bar)},
          {"contain", bp.contain},
          {"avoid", bp.avoid},
          {"cert", cert(bp.cert)},
          {"witness",
           {{"scale", vec(bp.witness.scale)},
            {"gamma", gamma},
            {"mu_x", num(bp.witness.mu_x)},
            {"mu_u", num(bp.witness.mu_u)},
            {"mu_w", num(bp.witness.mu_w)}}}};
}

BarrierPair vertex(const json& j) {
  BarrierPair bp;
  bp.id = j.at("id").get<int>();
  bp.q_e = vec(j.at("q_e"));
  const Vec x = vec(j.at("x_e"));
  if (x.size() != 2) throw Error(ErrorCode::kParseError, "x_e must have 2 entries");
  bp.x_e = x;
  bp.Q = mat(j.at("Q"));
  bp.K = mat(j.at("K"));
  bp.eps0 = num(j.at("eps0"));
  bp.alpha = num(j.at("alpha"));
  bp.w_bar = num(j.at("w_bar"));
  bp.contain = j.at("contain").get<std::string>();
  bp.avoid = j.at("avoid").get<std::vector<std::string>>();
  bp.cert = cert(j.at("cert"));
  const json& w = j.at("witness");
  bp.witness.scale = vec(w.at("scale"));
  for (const json& g : w.at("gamma")) bp.witness.gamma.push_back(num(g));
  bp.witness.mu_x = num(w.at("mu_x"));
  bp.witness.mu_u = num(w.at("mu_u"));
  bp.witness.mu_w = num(w.at("mu_w"));
  return bp;
}

}  // namespace

std::string graph_to_json(const BPGraph& g) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["kind"] = "bp_graph";
  doc["rng_seed"] = g.rng_seed;
  json vs = json::array();
  for (const BarrierPair& bp : g.vertices) vs.push_back(vertex(bp));
  doc["vertices"] = vs;
  json es = json::array();
  for (const GraphEdge& e : g.edges) {
    es.push_back({{"i", e.i},
                  {"j", e.j},
                  {"eps1", num(e.eps1)},
                  {"eps2", num(e.eps2)},
                  {"admissible", e.admissible}});
  }
  doc["edges"] = es;
  doc["anchors"] = g.anchors;
  json bs = json::array();
  for (const BuildRecord& b : g.builds) {
    bs.push_back(
        {{"from", b.from}, {"to", b.to}, {"attempts", b.attempts}, {"sequence", b.sequence}});
  }
  doc["builds"] = bs;
  return doc.dump(1);
}

BPGraph graph_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version") ||
      !doc["format_version"].is_number_integer() ||
      doc["format_version"].get<int>() != kFormatVersion) {
    throw Error(ErrorCode::kFormatVersionMismatch,
                "expected format_version " + std::to_string(kFormatVersion));
  }
  BPGraph g;
  try {
    if (doc.at("kind").get<std::string>() != "bp_graph") {
      throw Error(ErrorCode::kParseError, "not a graph file");
    }
    g.rng_seed = doc.at("rng_seed").get<std::uint64_t>();
    for (const json& v : doc.at("vertices")) g.vertices.push_back(vertex(v));
    for (std::size_t i = 0; i < g.vertices.size(); ++i) {
      if (g.vertices[i].id != static_cast<int>(i)) throw Error(ErrorCode::kParseError, "vertex ids out of order");
    }
    const int nv = static_cast<int>(g.vertices.size());
    for (const json& e : doc.at("edges")) {
      GraphEdge ge{e.at("i").get<int>(), e.at("j").get<int>(), num(e.at("eps1")),
                   num(e.at("eps2")), e.at("admissible").get<bool>()};
      if (ge.i < 0 || ge.i >= nv || ge.j < 0 || ge.j >= nv) {
        throw Error(ErrorCode::kParseError, "edge references a missing vertex");
      }
      g.edges.push_back(ge);
    }
    g.anchors = doc.at("anchors").get<std::map<std::string, int>>();
    for (const auto& [label, id] : g.anchors) {
      if (id < 0 || id >= nv) throw Error(ErrorCode::kParseError, "anchor " + label + " dangling");
    }
    for (const json& b : doc.at("builds")) {
      g.builds.push_back({b.at("from").get<std::string>(), b.at("to").get<std::string>(),
                          b.at("attempts").get<int>(), b.at("sequence").get<std::vector<int>>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  return g;
}

void save_graph(const BPGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << graph_to_json(g) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path);
}

BPGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return graph_from_json(ss.str());
}

}  // namespace bpsa
