#include "fusedec/backends.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "fusedec/error.hpp"
#include "fusedec/toy/models.hpp"
#include "fusedec/wire.hpp"

namespace fusedec {

namespace {

bool split_host_port(std::string_view addr, std::string& host, std::uint16_t& port) {
  auto colon = addr.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == addr.size()) return false;
  std::string_view port_text = addr.substr(colon + 1);
  if (!std::all_of(port_text.begin(), port_text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    return false;
  }
  std::string_view host_text = addr.substr(0, colon);
  if (host_text.find_first_of(" \t/") != std::string_view::npos) return false;
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
  if (ec != std::errc() || value > 65535) return false;
  host = std::string(host_text);
  port = static_cast<std::uint16_t>(value);
  return true;
}

}  // namespace

std::shared_ptr<Scorer> connect_scorer(std::string_view address, std::chrono::milliseconds timeout) {
  if (address.substr(0, 4) == "toy:") {
    std::string_view rest = address.substr(4);
    auto colon = rest.find(':');
    if (colon == std::string_view::npos) {
      throw Error(ErrorCode::InvalidArgument, "toy scorer address must be toy:<kind>:<config>");
    }
    auto model = toy::load_toy_model(rest.substr(0, colon), std::string(rest.substr(colon + 1)));
    return std::make_shared<toy::LocalScorer>(model);
  }
  if (address.substr(0, 6) == "stdio:") {
    address.remove_prefix(6);
  } else {
    if (address.substr(0, 6) == "tcp://") address.remove_prefix(6);
    std::string host;
    std::uint16_t port = 0;
    if (split_host_port(address, host, port)) return wire::connect_tcp(host, port, timeout);
  }
  auto argv = split_command(address);
  if (argv.empty()) throw Error(ErrorCode::ScorerUnavailable, "empty scorer address");
  return wire::connect_stdio(argv, timeout);
}

}  // namespace fusedec
