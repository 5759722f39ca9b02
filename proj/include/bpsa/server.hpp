#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bpsa/config.hpp"
#include "bpsa/executive.hpp"

namespace bpsa {

struct ServeOptions {
  std::string host = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  double rate_hz = 60.0;       // state frames per second
  bool verbose = false;
};

// Workspace image of the joint-space slice {[dq; 0] : |.|_Q = radius} through
// the equilibrium Jacobian, `count` points.
std::vector<Vec2> pair_outline(const BarrierPair& bp, const RobotModel& model, double radius,
                               int count = 64);

// Direction index i -> w_bar at i * 45 degrees. Throws InvalidArgument outside 0..7.
Vec2 direction_force(int dir, double w_bar);

std::string hello_frame(const BPGraph& g, const ScenarioConfig& cfg);
std::string state_frame(const ExecState& es, const Runtime& rt);
std::string role_frame(bool pilot, bool denied = false);

// Live session host: one simulation loop, one network thread.
class Server {
 public:
  Server(const BPGraph& g, const ScenarioConfig& cfg, ServeOptions opt);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts both threads. Throws PortInUse.
  void start();
  void stop();
  // Blocks until stop() from another thread or a signal.
  void wait();

  unsigned short port() const;
  Vec2 applied_force() const;
  int clients() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace bpsa
