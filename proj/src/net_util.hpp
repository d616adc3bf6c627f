#pragma once

#include <boost/asio.hpp>
#include <fmt/format.h>

#include "mocomp/errors.hpp"
#include "mocomp/service.hpp"

namespace mocomp::detail {

namespace net = boost::asio;
using tcp = net::ip::tcp;

inline tcp::endpoint resolve(net::io_context& ioc, const Endpoint& ep) {
  tcp::resolver resolver(ioc);
  boost::system::error_code ec;
  auto results = resolver.resolve(ep.host, std::to_string(ep.port), ec);
  if (ec || results.empty()) throw std::invalid_argument(fmt::format("cannot resolve {}: {}", ep.str(), ec.message()));
  return results.begin()->endpoint();
}

inline void listen_on(net::io_context& ioc, tcp::acceptor& acceptor, const Endpoint& ep) {
  const tcp::endpoint where = resolve(ioc, ep);
  boost::system::error_code ec;
  acceptor.open(where.protocol(), ec);
  if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(where, ec);
  if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec == net::error::address_in_use) throw PortInUse(fmt::format("port {} is already in use", ep.port));
  if (ec) throw IoError(fmt::format("cannot listen on {}: {}", ep.str(), ec.message()));
}

}  // namespace mocomp::detail
