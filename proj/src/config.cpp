#include "bpsa/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "bpsa/error.hpp"

namespace bpsa {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::kValidationError, path + ": " + msg);
}

// Reads one JSON object, remembering where it sits in the document.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) invalid(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& raw(const std::string& key) const {
    if (!has(key)) invalid(sub(key), "required field missing");
    return j_.at(key);
  }

  Node child(const std::string& key) const { return Node(raw(key), sub(key)); }
  Node child_or_empty(const std::string& key) const {
    static const json empty = json::object();
    return has(key) ? child(key) : Node(empty, sub(key));
  }

  double number(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) invalid(sub(key), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) invalid(sub(key), "expected an integer");
    return v.get<std::int64_t>();
  }
  std::string text(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_string()) invalid(sub(key), "expected a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }
  std::vector<double> numbers(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array()) invalid(sub(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) invalid(sub(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }
  std::vector<std::string> strings(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array()) invalid(sub(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) invalid(sub(key) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void require_positive(const Node& n, const std::string& key, const std::vector<double>& v,
                      std::size_t size) {
  if (v.size() != size) {
    invalid(n.sub(key), "expected " + std::to_string(size) + " entries");
  }
  for (double x : v) {
    if (!(x > 0.0)) invalid(n.sub(key), "entries must be positive");
  }
}

Vec2 point(const json& p, const std::string& path) {
  if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
    invalid(path, "expected [x, y]");
  }
  return Vec2(p[0].get<double>(), p[1].get<double>());
}

std::vector<std::pair<std::string, std::string>> pairs(const Node& n, const std::string& key,
                                                       std::vector<std::pair<std::string, std::string>> fallback) {
  if (!n.has(key)) return fallback;
  const json& v = n.raw(key);
  if (!v.is_array()) invalid(n.sub(key), "expected an array of [from, to] pairs");
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const json& p = v[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string()) {
      invalid(n.sub(key) + "[" + std::to_string(i) + "]", "expected [from, to]");
    }
    out.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
  }
  return out;
}

void read_robot(const Node& r, ScenarioConfig& cfg) {
  RobotModel& m = cfg.plan.model;
  m.link_lengths = r.numbers("link_lengths");
  const std::size_t n = m.link_lengths.size();
  if (n == 0) invalid(r.sub("link_lengths"), "need at least one link");
  require_positive(r, "link_lengths", m.link_lengths, n);
  m.point_masses = r.numbers("point_masses");
  require_positive(r, "point_masses", m.point_masses, n);
  m.torque_limits = r.numbers("torque_limits");
  require_positive(r, "torque_limits", m.torque_limits, n);
  if (r.has("base_position")) m.base_position = point(r.raw("base_position"), r.sub("base_position"));
  m.singular_threshold = r.number("singular_threshold", 0.05);
  if (!(m.singular_threshold > 0.0)) invalid(r.sub("singular_threshold"), "must be positive");
  const std::string elbow = r.text("elbow", "down");
  if (elbow == "down") {
    cfg.plan.settings.synth.branch = ElbowBranch::kDown;
  } else if (elbow == "up") {
    cfg.plan.settings.synth.branch = ElbowBranch::kUp;
  } else {
    invalid(r.sub("elbow"), "expected \"down\" or \"up\"");
  }
}

void read_regions(const Node& root, ScenarioConfig& cfg) {
  const json& list = root.raw("regions");
  if (!list.is_array() || list.empty()) invalid("regions", "expected a nonempty array");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Node r(list[i], "regions[" + std::to_string(i) + "]");
    const std::string id = r.text("id");
    RegionKind kind;
    try {
      kind = region_kind_from_string(r.text("kind"));
    } catch (const Error&) {
      invalid(r.sub("kind"), "expected task, obstacle or base");
    }
    for (const Region& other : cfg.plan.regions) {
      if (other.id == id) invalid(r.sub("id"), "duplicate region id " + id);
    }
    try {
      if (r.has("vertices")) {
        const json& vs = r.raw("vertices");
        if (!vs.is_array()) invalid(r.sub("vertices"), "expected an array of points");
        std::vector<Vec2> pts;
        for (std::size_t k = 0; k < vs.size(); ++k) {
          pts.push_back(point(vs[k], r.sub("vertices") + "[" + std::to_string(k) + "]"));
        }
        cfg.plan.regions.push_back(Region::make(id, kind, pts));
      } else {
        const Node sq = r.child("square");
        const double half = sq.number("half");
        if (!(half > 0.0)) invalid(sq.sub("half"), "must be positive");
        cfg.plan.regions.push_back(
            Region::square(id, kind, point(sq.raw("center"), sq.sub("center")), half));
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kValidationError) throw;
      invalid(r.sub("vertices"), e.what());
    }
  }
}

void read_synthesis(const Node& s, ScenarioConfig& cfg) {
  PlannerSettings& st = cfg.plan.settings;
  const std::size_t n = cfg.plan.model.link_lengths.size();
  st.eps0 = s.number("eps0", st.eps0);
  st.eps1 = s.number("eps1", st.eps1);
  if (!(st.eps0 > 0.0 && st.eps0 < 1.0)) invalid(s.sub("eps0"), "must lie in (0, 1)");
  if (!(st.eps1 > 0.0 && st.eps1 <= 1.0)) invalid(s.sub("eps1"), "must lie in (0, 1]");
  if (!(st.eps0 < 1.0 - st.eps1)) {
    std::ostringstream os;
    os << "eps0 < 1 - eps1 violated (" << st.eps0 << " >= " << 1.0 - st.eps1 << ")";
    invalid(s.sub("eps0"), os.str());
  }
  if (s.has("box_dq")) {
    const auto v = s.numbers("box_dq");
    require_positive(s, "box_dq", v, n);
    st.box_dq = to_vec(v);
  } else {
    st.box_dq = Vec::Constant(static_cast<Eigen::Index>(n), 0.2);
  }
  st.ldi_samples = static_cast<int>(s.integer("ldi_samples", st.ldi_samples));
  if (st.ldi_samples < 1) invalid(s.sub("ldi_samples"), "must be at least 1");
  st.ldi_margin = s.number("ldi_margin", st.ldi_margin);
  if (!(st.ldi_margin >= 0.0)) invalid(s.sub("ldi_margin"), "must be nonnegative");
  st.ldi_seed = static_cast<std::uint64_t>(s.integer("ldi_seed", static_cast<std::int64_t>(st.ldi_seed)));
  st.cert_samples = static_cast<int>(s.integer("cert_samples", st.cert_samples));
  if (st.cert_samples < 0) invalid(s.sub("cert_samples"), "must be nonnegative");
  st.synth.per_edge = static_cast<int>(s.integer("per_edge", st.synth.per_edge));
  if (st.synth.per_edge < 2) invalid(s.sub("per_edge"), "must be at least 2");

  const Node a = s.child_or_empty("alpha");
  AlphaPolicy& p = st.alpha;
  const std::string mode = a.text("mode", "search");
  if (mode == "pinned") {
    p.pinned = true;
    p.value = a.number("value");
    if (!(p.value > 0.0)) invalid(a.sub("value"), "must be positive");
  } else if (mode == "search") {
    p.pinned = false;
  } else {
    invalid(a.sub("mode"), "expected \"pinned\" or \"search\"");
  }
  p.lo = a.number("lo", p.lo);
  p.hi = a.number("hi", p.hi);
  p.resolution = a.number("resolution", p.resolution);
  if (!(p.lo > 0.0)) invalid(a.sub("lo"), "must be positive");
  if (!(p.hi >= p.lo)) invalid(a.sub("hi"), "must be at least lo");
  if (!(p.resolution > 0.0)) invalid(a.sub("resolution"), "must be positive");
}

void require_region(const ScenarioConfig& cfg, const std::string& id, const std::string& path,
                    bool task_only) {
  for (const Region& r : cfg.plan.regions) {
    if (r.id == id) {
      if (task_only && r.kind != RegionKind::kTask) invalid(path, id + " is not a task region");
      return;
    }
  }
  invalid(path, "unknown region " + id);
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  const Node root(doc, "");
  if (root.integer("format_version", -1) != kFormatVersion) {
    invalid("format_version", "expected " + std::to_string(kFormatVersion));
  }
  ScenarioConfig cfg;
  cfg.name = root.text("name", "scenario");
  read_robot(root.child("robot"), cfg);
  read_regions(root, cfg);

  const std::size_t n = cfg.plan.model.link_lengths.size();
  const Node c = root.child("constraints");
  const auto x_bar = c.numbers("x_bar");
  require_positive(c, "x_bar", x_bar, 2);
  const auto qd_bar = c.numbers("qd_bar");
  require_positive(c, "qd_bar", qd_bar, n);
  cfg.plan.bounds.x_bounds = to_vec(x_bar);
  cfg.plan.bounds.qd_bounds = to_vec(qd_bar);
  cfg.plan.bounds.u_bounds = to_vec(cfg.plan.model.torque_limits);
  cfg.plan.bounds.w_bar = c.number("w_bar");
  if (!(cfg.plan.bounds.w_bar > 0.0)) invalid(c.sub("w_bar"), "must be positive");

  read_synthesis(root.child_or_empty("synthesis"), cfg);

  const Node pl = root.child_or_empty("planner");
  PlannerSettings& st = cfg.plan.settings;
  st.max_iters = static_cast<int>(pl.integer("max_iters", st.max_iters));
  if (st.max_iters < 1) invalid(pl.sub("max_iters"), "must be at least 1");
  st.goal_bias = pl.number("goal_bias", st.goal_bias);
  if (!(st.goal_bias >= 0.0 && st.goal_bias < 1.0)) invalid(pl.sub("goal_bias"), "must lie in [0, 1)");
  st.sample_attempts = static_cast<int>(pl.integer("sample_attempts", st.sample_attempts));
  if (st.sample_attempts < 1) invalid(pl.sub("sample_attempts"), "must be at least 1");
  AnchorPlan& ap = cfg.anchors;
  ap.task_pairs = pairs(pl, "task_pairs", ap.task_pairs);
  if (pl.has("midway")) ap.midway = pl.strings("midway");
  ap.midway_pairs = pairs(pl, "midway_pairs", ap.midway_pairs);
  if (ap.midway.size() != ap.task_pairs.size()) {
    invalid(pl.sub("midway"), "one midway label per task pair");
  }
  for (std::size_t i = 0; i < ap.task_pairs.size(); ++i) {
    const std::string path = pl.sub("task_pairs") + "[" + std::to_string(i) + "]";
    require_region(cfg, ap.task_pairs[i].first, path, true);
    require_region(cfg, ap.task_pairs[i].second, path, true);
  }
  for (std::size_t i = 0; i < ap.midway_pairs.size(); ++i) {
    for (const std::string& id : {ap.midway_pairs[i].first, ap.midway_pairs[i].second}) {
      if (std::find(ap.midway.begin(), ap.midway.end(), id) == ap.midway.end()) {
        invalid(pl.sub("midway_pairs") + "[" + std::to_string(i) + "]", "unknown midway anchor " + id);
      }
    }
  }

  const Node in = root.child_or_empty("intent");
  IntentSettings& is = cfg.intent;
  if (in.has("candidates")) is.candidates = in.strings("candidates");
  if (is.candidates.empty()) invalid(in.sub("candidates"), "need at least one candidate");
  for (std::size_t i = 0; i < is.candidates.size(); ++i) {
    require_region(cfg, is.candidates[i], in.sub("candidates") + "[" + std::to_string(i) + "]", true);
  }
  is.beta1 = in.number("beta1", is.beta1);
  if (!(is.beta1 >= 0.0)) invalid(in.sub("beta1"), "must be nonnegative");
  is.threshold = in.number("threshold", is.threshold);
  if (!(is.threshold >= 0.0)) invalid(in.sub("threshold"), "must be nonnegative");
  is.rate_hz = in.number("rate_hz", is.rate_hz);
  if (!(is.rate_hz > 0.0)) invalid(in.sub("rate_hz"), "must be positive");
  is.switch_margin = in.number("switch_margin", is.switch_margin);
  if (!(is.switch_margin >= 0.0)) invalid(in.sub("switch_margin"), "must be nonnegative");

  const Node ex = root.child_or_empty("executive");
  ExecSettings& es = cfg.exec;
  es.dt = ex.number("dt", es.dt);
  if (!(es.dt > 0.0 && es.dt <= 0.01)) invalid(ex.sub("dt"), "must lie in (0, 0.01]");
  es.delta_switch = ex.number("delta_switch", es.delta_switch);
  if (!(es.delta_switch >= 0.0 && es.delta_switch < 1.0)) invalid(ex.sub("delta_switch"), "must lie in [0, 1)");
  es.breach = ex.number("breach", es.breach);
  if (!(es.breach >= 0.0)) invalid(ex.sub("breach"), "must be nonnegative");
  es.start = ex.text("start", is.candidates.front());
  require_region(cfg, es.start, ex.sub("start"), true);
  if (ex.has("adjacency")) {
    const Node adj = ex.child("adjacency");
    for (const auto& [k, v] : ex.raw("adjacency").items()) {
      (void)v;
      es.adjacency[k] = adj.strings(k);
    }
  }

  const Node sd = root.child_or_empty("seeds");
  cfg.seeds.plan = static_cast<std::uint64_t>(sd.integer("plan", 7));
  cfg.seeds.certify = static_cast<std::uint64_t>(sd.integer("certify", 11));
  cfg.seeds.sim = static_cast<std::uint64_t>(sd.integer("sim", 3));

  const Node sv = root.child_or_empty("serve");
  cfg.serve_rate_hz = sv.number("rate_hz", cfg.serve_rate_hz);
  if (!(cfg.serve_rate_hz > 0.0)) invalid(sv.sub("rate_hz"), "must be positive");
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParseError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace bpsa
