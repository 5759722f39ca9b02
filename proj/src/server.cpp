#include "bpsa/server.hpp"

#include <atomic>
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <future>
#include <iostream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <thread>

#include "bpsa/error.hpp"
#include "bpsa/regions.hpp"

namespace bpsa {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace ws = boost::beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

std::vector<Vec2> pair_outline(const BarrierPair& bp, const RobotModel& model, double radius,
                               int count) {
  const Eigen::Index n = bp.q_e.size();
  const Mat P = bp.Q.inverse().topLeftCorner(n, n);
  const Eigen::LLT<Mat> llt(0.5 * (P + P.transpose()));
  const Mat J = jacobian(model, bp.q_e);
  std::vector<Vec2> out;
  for (int k = 0; k < count; ++k) {
    const double th = 2.0 * M_PI * k / count;
    Vec u = Vec::Zero(n);
    u[0] = std::cos(th);
    if (n > 1) u[1] = std::sin(th);
    // dq^T P dq = radius^2 for dq = radius L^-T u
    const Vec dq = radius * llt.matrixU().solve(u);
    out.push_back(bp.x_e + J * dq);
  }
  return out;
}

Vec2 direction_force(int dir, double w_bar) {
  if (dir < 0 || dir > 7) throw Error(ErrorCode::kInvalidArgument, "direction " + std::to_string(dir));
  static const double c[8] = {1, M_SQRT1_2, 0, -M_SQRT1_2, -1, -M_SQRT1_2, 0, M_SQRT1_2};
  return w_bar * Vec2(c[dir], c[(dir + 6) % 8]);
}

namespace {

json points(const std::vector<Vec2>& ps) {
  json a = json::array();
  for (const Vec2& p : ps) a.push_back({p.x(), p.y()});
  return a;
}

json vec(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

std::string hello_frame(const BPGraph& g, const ScenarioConfig& cfg) {
  json regions = json::array();
  for (const Region& r : cfg.plan.regions) {
    regions.push_back({{"id", r.id}, {"kind", to_string(r.kind)}, {"vertices", points(r.vertices)}});
  }
  json pairs = json::array();
  for (const BarrierPair& bp : g.vertices) {
    pairs.push_back({{"id", bp.id},
                     {"q_e", vec(bp.q_e)},
                     {"x_e", {bp.x_e.x(), bp.x_e.y()}},
                     {"outline", points(pair_outline(bp, cfg.plan.model, 1.0))},
                     {"outline_eps0", points(pair_outline(bp, cfg.plan.model, bp.eps0))}});
  }
  json doc = {{"type", "hello"},
              {"format_version", kFormatVersion},
              {"scenario", cfg.name},
              {"link_lengths", cfg.plan.model.link_lengths},
              {"w_bar", cfg.plan.bounds.w_bar},
              {"rate_hz", cfg.serve_rate_hz},
              {"candidates", cfg.intent.candidates},
              {"graph",
               {{"vertices", g.vertices.size()}, {"edges", g.edges.size()}, {"anchors", g.anchors}}},
              {"regions", regions},
              {"pairs", pairs}};
  return doc.dump();
}

std::string state_frame(const ExecState& es, const Runtime& rt) {
  const BarrierPair& bp = rt.graph.vertices.at(static_cast<std::size_t>(es.active_vertex()));
  const Vec2 x = forward_kinematics(rt.config.plan.model, es.joint.q);
  const std::string target =
      es.target >= 0 ? es.belief.candidates[static_cast<std::size_t>(es.target)] : std::string();
  json doc = {{"type", "state"},
              {"t", es.t},
              {"q", vec(es.joint.q)},
              {"qd", vec(es.joint.qd)},
              {"x", {x.x(), x.y()}},
              {"w", {es.w.x(), es.w.y()}},
              {"belief", vec(es.belief.probs)},
              {"target", target},
              {"bp", bp.id},
              {"barrier", bp.barrier(es.joint)},
              {"destination", es.destination}};
  return doc.dump();
}

std::string role_frame(bool pilot, bool denied) {
  json doc = {{"type", "role"}, {"pilot", pilot}};
  if (denied) doc["denied"] = true;
  return doc.dump();
}

struct Server::Impl {
  class Session;

  const BPGraph& graph;
  const ScenarioConfig& config;
  ServeOptions opt;
  Runtime rt;
  std::string hello;

  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::thread io_thread, sim_thread;
  std::atomic<bool> running{false};
  std::mutex stop_mu;
  std::condition_variable stop_cv;

  // io thread only
  std::map<int, std::shared_ptr<Session>> sessions;
  int next_id = 0;

  mutable std::mutex force_mu;
  int pilot = -1;
  Vec2 force = Vec2::Zero();

  Impl(const BPGraph& g, const ScenarioConfig& cfg, ServeOptions o)
      : graph(g), config(cfg), opt(std::move(o)), rt(g, cfg), hello(hello_frame(g, cfg)) {}

  void log(const std::string& s) const {
    if (opt.verbose) std::cerr << "[serve] " << s << '\n';
  }

  class Session : public std::enable_shared_from_this<Session> {
   public:
    Session(tcp::socket sock, Impl& srv, int id) : ws_(std::move(sock)), srv_(srv), id_(id) {}

    void start() {
      ws_.set_option(ws::stream_base::timeout::suggested(beast::role_type::server));
      ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
        if (ec) return;
        self->srv_.sessions[self->id_] = self;
        self->srv_.log("client " + std::to_string(self->id_) + " connected");
        self->send(std::make_shared<const std::string>(self->srv_.hello));
        self->read();
      });
    }

    void send(std::shared_ptr<const std::string> msg) {
      if (closing_) return;
      // Slow readers lose the oldest queued frames, never the one in flight.
      if (queue_.size() > 128) queue_.erase(queue_.begin() + 1);
      queue_.push_back(std::move(msg));
      if (queue_.size() == 1) write();
    }

    void close(ws::close_code code) {
      if (closing_) return;
      closing_ = true;
      srv_.drop(id_);
      ws_.async_close(code, [self = shared_from_this()](beast::error_code) {});
    }

   private:
    void write() {
      ws_.text(true);
      ws_.async_write(net::buffer(*queue_.front()),
                      [self = shared_from_this()](beast::error_code ec, std::size_t) {
                        if (ec) return self->fail();
                        self->queue_.pop_front();
                        if (!self->queue_.empty() && !self->closing_) self->write();
                      });
    }

    void read() {
      ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) return self->fail();
        const std::string text = beast::buffers_to_string(self->buf_.data());
        self->buf_.consume(self->buf_.size());
        if (!self->srv_.handle(self->id_, text)) {
          self->srv_.log("client " + std::to_string(self->id_) + " protocol violation");
          return self->close(ws::close_code::policy_error);
        }
        if (!self->closing_) self->read();
      });
    }

    void fail() {
      if (closing_) return;
      closing_ = true;
      srv_.drop(id_);
    }

    ws::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buf_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    Impl& srv_;
    int id_;
    bool closing_ = false;
  };

  void drop(int id) {
    sessions.erase(id);
    std::lock_guard<std::mutex> lk(force_mu);
    if (pilot == id) {
      pilot = -1;
      force = Vec2::Zero();
    }
    log("client " + std::to_string(id) + " gone");
  }

  void reply(int id, std::string msg) {
    auto it = sessions.find(id);
    if (it != sessions.end()) it->second->send(std::make_shared<const std::string>(std::move(msg)));
  }

  // False on a protocol violation.
  bool handle(int id, const std::string& text) {
    const json msg = json::parse(text, nullptr, false);
    if (msg.is_discarded() || !msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      return false;
    }
    const std::string type = msg["type"].get<std::string>();
    const double w_bar = config.plan.bounds.w_bar;
    if (type == "claim_pilot") {
      bool granted;
      {
        std::lock_guard<std::mutex> lk(force_mu);
        granted = pilot < 0 || pilot == id;
        if (granted) pilot = id;
      }
      reply(id, role_frame(granted, !granted));
      return true;
    }
    if (type != "force" && type != "force_vec") return false;

    Vec2 w = Vec2::Zero();
    if (type == "force") {
      if (!msg.contains("dir")) return false;
      const json& d = msg["dir"];
      if (!d.is_null()) {
        if (!d.is_number_integer()) return false;
        const int dir = d.get<int>();
        if (dir < 0 || dir > 7) return false;
        w = direction_force(dir, w_bar);
      }
    } else {
      if (!msg.contains("fx") || !msg.contains("fy") || !msg["fx"].is_number() ||
          !msg["fy"].is_number()) {
        return false;
      }
      w = Vec2(msg["fx"].get<double>(), msg["fy"].get<double>());
      if (!w.allFinite()) return false;
      if (w.norm() > w_bar) w *= w_bar / w.norm();
    }
    bool is_pilot;
    {
      std::lock_guard<std::mutex> lk(force_mu);
      is_pilot = pilot == id;
      if (is_pilot) force = w;
    }
    if (!is_pilot) reply(id, role_frame(false));
    return true;
  }

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket sock) {
      if (ec) return;
      std::make_shared<Session>(std::move(sock), *this, next_id++)->start();
      accept();
    });
  }

  void broadcast(std::string msg) {
    auto shared = std::make_shared<const std::string>(std::move(msg));
    net::post(ioc, [this, shared] {
      for (auto& [id, s] : sessions) s->send(shared);
    });
  }

  void simulate() {
    AnchorFSM fsm = config.exec.adjacency.empty()
                        ? AnchorFSM::from_plan(config.anchors, config.exec.start)
                        : AnchorFSM(config.exec.adjacency, config.exec.start);
    const AnchorFSM fsm0 = fsm;
    ExecState es = initial_state(rt, fsm);
    const double dt = config.exec.dt;
    const auto period = std::chrono::duration<double>(1.0 / opt.rate_hz);
    const auto t0 = std::chrono::steady_clock::now();
    auto next = t0;
    long ticks = 0;
    while (running) {
      next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
      std::this_thread::sleep_until(next);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      // Bounded catch-up keeps a stalled host from spiralling.
      const long goal = std::min(static_cast<long>(wall / dt), ticks + 500);
      for (; ticks < goal; ++ticks) {
        Vec2 w;
        {
          std::lock_guard<std::mutex> lk(force_mu);
          w = force;
        }
        try {
          es = tick(es, rt, fsm, w);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kSafetyBreach) throw;
          std::cerr << "[serve] " << e.what() << ", episode reset\n";
          broadcast(json({{"type", "event"}, {"kind", "breach"}, {"message", e.what()}}).dump());
          const double t = es.t;
          fsm = fsm0;
          es = initial_state(rt, fsm);
          es.t = t;
          es.next_belief_t = t;
        }
      }
      broadcast(state_frame(es, rt));
    }
  }
};

Server::Server(const BPGraph& g, const ScenarioConfig& cfg, ServeOptions opt)
    : impl_(std::make_unique<Impl>(g, cfg, std::move(opt))) {
  for (const std::string& c : cfg.intent.candidates) g.anchor(c);
  g.anchor(cfg.exec.start);
  if (!(impl_->opt.rate_hz > 0.0)) throw Error(ErrorCode::kInvalidArgument, "rate must be positive");
}

Server::~Server() { stop(); }

void Server::start() {
  Impl& s = *impl_;
  beast::error_code ec;
  const tcp::endpoint ep(net::ip::make_address(s.opt.host, ec), s.opt.port);
  if (ec) throw Error(ErrorCode::kInvalidArgument, "bad host " + s.opt.host);
  s.acceptor.open(ep.protocol(), ec);
  if (!ec) s.acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) s.acceptor.bind(ep, ec);
  if (!ec) s.acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    s.acceptor.close();
    throw Error(ErrorCode::kPortInUse, s.opt.host + ":" + std::to_string(s.opt.port) + " " + ec.message());
  }
  s.running = true;
  s.accept();
  s.io_thread = std::thread([&s] { s.ioc.run(); });
  s.sim_thread = std::thread([&s] { s.simulate(); });
  s.log("listening on " + std::to_string(port()));
}

void Server::stop() {
  Impl& s = *impl_;
  if (!s.running.exchange(false)) return;
  if (s.sim_thread.joinable()) s.sim_thread.join();
  net::post(s.ioc, [&s] {
    beast::error_code ec;
    s.acceptor.close(ec);
    auto all = s.sessions;
    for (auto& [id, sess] : all) sess->close(ws::close_code::going_away);
  });
  // Give close frames a moment before tearing the loop down.
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  s.ioc.stop();
  if (s.io_thread.joinable()) s.io_thread.join();
  s.stop_cv.notify_all();
}

void Server::wait() {
  std::unique_lock<std::mutex> lk(impl_->stop_mu);
  impl_->stop_cv.wait(lk, [this] { return !impl_->running.load(); });
}

unsigned short Server::port() const {
  beast::error_code ec;
  return impl_->acceptor.local_endpoint(ec).port();
}

Vec2 Server::applied_force() const {
  std::lock_guard<std::mutex> lk(impl_->force_mu);
  return impl_->force;
}

int Server::clients() const {
  std::promise<int> p;
  auto f = p.get_future();
  net::post(impl_->ioc, [&] { p.set_value(static_cast<int>(impl_->sessions.size())); });
  return f.get();
}

}  // namespace bpsa
