#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fusedec/scorer.hpp"
#include "fusedec/subprocess.hpp"

namespace fusedec::wire {

// Newline-delimited JSON, one request and one reply per line:
//
//   {"type":"hello"}                                   -> hello_ack {vocab_hash, name}
//   {"type":"open","session":s,"kind":"prompt_conditioned","prompt":...}
//   {"type":"open","session":s,"kind":"source_conditioned","source_ids":[...]}
//                                                      -> open_ack {session}
//   {"type":"score","session":s}                       -> dist {session, logprobs}
//   {"type":"append","session":s,"id":n}               -> append_ack {session}
//   {"type":"close","session":s}                       -> close_ack {session}
//
// Failures reply {"type":"error","session":...,"code":...,"msg":...}.
// Log-probabilities at or below -1e30 encode -inf. Unknown fields are ignored.

inline constexpr double kWireNegInf = -1e30;

nlohmann::json encode_logprobs(const std::vector<double>& logprobs);
/// Throws Error{ProtocolError} on non-numeric or NaN entries.
std::vector<double> decode_logprobs(const nlohmann::json& array);

/// Serves one request line against `backend`; always returns a reply line.
/// Session ids are namespaced with `session_prefix` on the backend side so
/// that independent connections cannot collide.
std::string handle_request(Scorer& backend, std::string_view line,
                           std::string_view session_prefix = {});

/// Request/reply loop until end of stream. Sessions opened through this
/// stream are closed when it ends.
void serve_stream(Scorer& backend, LineStream& stream, std::string_view session_prefix = {});

/// Accepts TCP connections and serves each on its own thread.
class TcpServer {
 public:
  /// Binds host:port; port 0 picks an ephemeral port.
  TcpServer(std::shared_ptr<Scorer> backend, const std::string& host, std::uint16_t port);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  /// Blocks until stop() is called.
  void run();
  /// run() on a background thread.
  void start();
  void stop();

 private:
  std::shared_ptr<Scorer> backend_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread background_;
  std::mutex mu_;
  std::vector<std::thread> connections_;
  std::vector<int> connection_fds_;
  std::atomic<std::uint64_t> next_connection_{0};
};

/// Client side of the protocol. Calls are serialized over the single
/// stream, so one RemoteScorer may be shared across threads. A timed-out
/// call leaves the stream out of step, so the scorer refuses further calls
/// with ScorerUnavailable.
class RemoteScorer final : public Scorer {
 public:
  /// Performs the hello handshake. Throws ScorerUnavailable, ScorerTimeout
  /// or ProtocolError.
  RemoteScorer(std::unique_ptr<ChildProcess> child, std::chrono::milliseconds timeout);
  RemoteScorer(std::unique_ptr<LineStream> stream, std::chrono::milliseconds timeout);
  ~RemoteScorer() override;

  std::string name() const override { return name_; }
  std::uint64_t vocab_hash() const override { return vocab_hash_; }

  void open(std::string_view session, const ConditioningSpec& conditioning) override;
  TokenDistribution score(std::string_view session) override;
  void append(std::string_view session, TokenId id) override;
  void close(std::string_view session) override;

 private:
  void handshake();
  nlohmann::json call(const nlohmann::json& request, std::string_view expected_type);

  std::unique_ptr<ChildProcess> child_;
  std::unique_ptr<LineStream> owned_stream_;
  LineStream* stream_ = nullptr;
  std::chrono::milliseconds timeout_;
  std::mutex mu_;
  bool broken_ = false;
  std::string name_;
  std::uint64_t vocab_hash_ = 0;
};

std::shared_ptr<RemoteScorer> connect_stdio(const std::vector<std::string>& argv,
                                            std::chrono::milliseconds timeout = default_scorer_timeout());
std::shared_ptr<RemoteScorer> connect_tcp(const std::string& host, std::uint16_t port,
                                          std::chrono::milliseconds timeout = default_scorer_timeout());

}  // namespace fusedec::wire
