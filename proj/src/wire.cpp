#include "fusedec/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <set>

#include "fusedec/error.hpp"
#include "fusedec/logmath.hpp"

namespace fusedec::wire {

using nlohmann::json;

json encode_logprobs(const std::vector<double>& logprobs) {
  json arr = json::array();
  for (double lp : logprobs) arr.push_back(lp <= kWireNegInf ? kWireNegInf : lp);
  return arr;
}

std::vector<double> decode_logprobs(const json& array) {
  if (!array.is_array()) throw Error(ErrorCode::ProtocolError, "logprobs must be an array");
  std::vector<double> out;
  out.reserve(array.size());
  for (const auto& v : array) {
    if (!v.is_number()) throw Error(ErrorCode::ProtocolError, "non-numeric log-probability");
    double lp = v.get<double>();
    if (std::isnan(lp)) throw Error(ErrorCode::ProtocolError, "NaN log-probability");
    out.push_back(lp <= kWireNegInf ? kNegInf : lp);
  }
  return out;
}

namespace {

json error_reply(const json& session, std::string_view code, const std::string& msg) {
  json r = {{"type", "error"}, {"code", code}, {"msg", msg}};
  r["session"] = session;
  return r;
}

std::string session_field(const json& req) {
  auto it = req.find("session");
  if (it == req.end() || !it->is_string()) {
    throw Error(ErrorCode::ProtocolError, "missing session field");
  }
  return it->get<std::string>();
}

json dispatch(Scorer& backend, const json& req, std::string_view prefix,
              std::set<std::string>* live) {
  const std::string type = req.value("type", "");
  if (type == "hello") {
    return {{"type", "hello_ack"}, {"vocab_hash", format_hash(backend.vocab_hash())},
            {"name", backend.name()}};
  }
  const std::string session = session_field(req);
  const std::string key = std::string(prefix) + session;

  if (type == "open") {
    ConditioningSpec spec;
    spec.kind = conditioning_kind_from_string(req.value("kind", ""));
    if (spec.kind == ConditioningKind::prompt_conditioned) {
      spec.prompt_text = req.value("prompt", "");
    } else {
      auto it = req.find("source_ids");
      if (it == req.end() || !it->is_array()) {
        throw Error(ErrorCode::ProtocolError, "source_conditioned open needs source_ids");
      }
      for (const auto& id : *it) {
        if (!id.is_number_integer()) throw Error(ErrorCode::ProtocolError, "source ids must be integers");
        spec.source_tokens.push_back(id.get<TokenId>());
      }
    }
    backend.open(key, spec);
    if (live) live->insert(key);
    return {{"type", "open_ack"}, {"session", session}};
  }
  if (type == "score") {
    auto dist = backend.score(key);
    return {{"type", "dist"}, {"session", session}, {"logprobs", encode_logprobs(dist.logprobs)}};
  }
  if (type == "append") {
    auto it = req.find("id");
    if (it == req.end() || !it->is_number_integer()) {
      throw Error(ErrorCode::ProtocolError, "append needs an integer id");
    }
    backend.append(key, it->get<TokenId>());
    return {{"type", "append_ack"}, {"session", session}};
  }
  if (type == "close") {
    backend.close(key);
    if (live) live->erase(key);
    return {{"type", "close_ack"}, {"session", session}};
  }
  throw Error(ErrorCode::ProtocolError, "unknown message type '" + type + "'");
}

std::string handle(Scorer& backend, std::string_view line, std::string_view prefix,
                   std::set<std::string>* live) {
  json req;
  try {
    req = json::parse(line);
  } catch (const json::parse_error& e) {
    return error_reply(nullptr, "ProtocolError", e.what()).dump();
  }
  if (!req.is_object()) return error_reply(nullptr, "ProtocolError", "request must be an object").dump();
  json session = req.contains("session") ? req["session"] : json(nullptr);
  try {
    return dispatch(backend, req, prefix, live).dump();
  } catch (const Error& e) {
    return error_reply(session, to_string(e.code()), e.what()).dump();
  } catch (const std::exception& e) {
    return error_reply(session, "ProtocolError", e.what()).dump();
  }
}

}  // namespace

std::string handle_request(Scorer& backend, std::string_view line, std::string_view session_prefix) {
  return handle(backend, line, session_prefix, nullptr);
}

void serve_stream(Scorer& backend, LineStream& stream, std::string_view session_prefix) {
  std::set<std::string> live;
  for (;;) {
    std::optional<std::string> line;
    try {
      line = stream.read_line(std::chrono::hours(24 * 365));
    } catch (const Error&) {
      break;
    }
    if (!line) break;
    if (line->find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      stream.write_line(handle(backend, *line, session_prefix, &live));
    } catch (const Error&) {
      break;
    }
  }
  for (const auto& key : live) {
    try {
      backend.close(key);
    } catch (...) {
    }
  }
}

// ---------------------------------------------------------------------------
// TcpServer

TcpServer::TcpServer(std::shared_ptr<Scorer> backend, const std::string& host, std::uint16_t port)
    : backend_(std::move(backend)) {
  ignore_sigpipe();
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::IoError, "socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string bind_host = host.empty() || host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw Error(ErrorCode::IoError, "cannot parse listen address '" + host + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 16) != 0) {
    int err = errno;
    ::close(listen_fd_);
    throw Error(ErrorCode::IoError, std::string("cannot listen: ") + std::strerror(err));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpServer::~TcpServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::run() {
  while (!stopping_) {
    int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR) continue;
      if (stopping_) break;
      continue;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    connection_fds_.push_back(fd);
    const std::string prefix = "c" + std::to_string(++next_connection_) + "/";
    connections_.emplace_back([this, fd, prefix] {
      {
        LineStream stream(fd, fd);
        serve_stream(*backend_, stream, prefix);
        std::lock_guard inner(mu_);
        std::erase(connection_fds_, fd);
      }
    });
  }
}

void TcpServer::start() {
  background_ = std::thread([this] { run(); });
}

void TcpServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (background_.joinable()) background_.join();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mu_);
    for (int fd : connection_fds_) ::shutdown(fd, SHUT_RDWR);
    threads.swap(connections_);
  }
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
}

// ---------------------------------------------------------------------------
// RemoteScorer

RemoteScorer::RemoteScorer(std::unique_ptr<ChildProcess> child, std::chrono::milliseconds timeout)
    : child_(std::move(child)), stream_(&child_->stream()), timeout_(timeout) {
  handshake();
}

RemoteScorer::RemoteScorer(std::unique_ptr<LineStream> stream, std::chrono::milliseconds timeout)
    : owned_stream_(std::move(stream)), stream_(owned_stream_.get()), timeout_(timeout) {
  handshake();
}

RemoteScorer::~RemoteScorer() {
  if (stream_) stream_->shutdown();
}

void RemoteScorer::handshake() {
  json reply = call({{"type", "hello"}}, "hello_ack");
  auto hash = parse_hash(reply.value("vocab_hash", ""));
  if (!hash) throw Error(ErrorCode::ProtocolError, "hello_ack carries no valid vocab_hash");
  vocab_hash_ = *hash;
  name_ = reply.value("name", "remote");
}

json RemoteScorer::call(const json& request, std::string_view expected_type) {
  std::lock_guard lock(mu_);
  if (broken_) throw Error(ErrorCode::ScorerUnavailable, "connection to " + name_ + " is unusable");
  std::optional<std::string> line;
  try {
    stream_->write_line(request.dump());
    line = stream_->read_line(timeout_);
  } catch (const Error&) {
    broken_ = true;
    throw;
  }
  if (!line) {
    broken_ = true;
    throw Error(ErrorCode::ScorerUnavailable, "scorer closed the connection");
  }
  json reply;
  try {
    reply = json::parse(*line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ProtocolError, std::string("malformed reply: ") + e.what());
  }
  if (!reply.is_object()) throw Error(ErrorCode::ProtocolError, "reply is not an object");
  const std::string type = reply.value("type", "");
  if (type == "error") {
    throw Error(error_code_from_string(reply.value("code", "")), reply.value("msg", "backend error"));
  }
  if (type != expected_type) {
    throw Error(ErrorCode::ProtocolError,
                "expected '" + std::string(expected_type) + "' reply, got '" + type + "'");
  }
  if (auto it = request.find("session"); it != request.end()) {
    if (reply.value("session", json(nullptr)) != *it) {
      throw Error(ErrorCode::ProtocolError, "reply for a different session");
    }
  }
  return reply;
}

void RemoteScorer::open(std::string_view session, const ConditioningSpec& conditioning) {
  json req = {{"type", "open"}, {"session", session}, {"kind", to_string(conditioning.kind)}};
  if (conditioning.kind == ConditioningKind::prompt_conditioned) {
    req["prompt"] = conditioning.prompt_text;
  } else {
    req["source_ids"] = conditioning.source_tokens;
  }
  call(req, "open_ack");
}

TokenDistribution RemoteScorer::score(std::string_view session) {
  json reply = call({{"type", "score"}, {"session", session}}, "dist");
  auto it = reply.find("logprobs");
  if (it == reply.end()) throw Error(ErrorCode::ProtocolError, "dist reply without logprobs");
  return TokenDistribution{decode_logprobs(*it)};
}

void RemoteScorer::append(std::string_view session, TokenId id) {
  call({{"type", "append"}, {"session", session}, {"id", id}}, "append_ack");
}

void RemoteScorer::close(std::string_view session) {
  call({{"type", "close"}, {"session", session}}, "close_ack");
}

std::shared_ptr<RemoteScorer> connect_stdio(const std::vector<std::string>& argv,
                                            std::chrono::milliseconds timeout) {
  return std::make_shared<RemoteScorer>(std::make_unique<ChildProcess>(argv), timeout);
}

std::shared_ptr<RemoteScorer> connect_tcp(const std::string& host, std::uint16_t port,
                                          std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorCode::ScorerUnavailable, "cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    throw Error(ErrorCode::ScorerUnavailable, "cannot connect to " + host + ":" + service);
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_shared<RemoteScorer>(std::make_unique<LineStream>(fd, fd), timeout);
}

}  // namespace fusedec::wire
