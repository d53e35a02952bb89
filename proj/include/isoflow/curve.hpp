#pragma once

// Planar polyline curves in the (x, t) plane with unit normals, curvature
// samples and boundary flags.

#include <cmath>
#include <ostream>
#include <vector>

#include "isoflow/errors.hpp"
#include "isoflow/io.hpp"

namespace isoflow {

/// Nodes p_i = (x_i, t_i) with unit normals N_i = (-T_t, T_x) obtained by
/// rotating the tangent a quarter turn counter-clockwise, and curvature k_i.
struct DiscreteCurve {
  std::vector<double> x, t;
  std::vector<double> nx, nt;
  std::vector<double> k;
  bool closed = false;
  bool start_on_boundary = false;
  bool end_on_boundary = false;
  double step = 0.0;  // nominal spacing when the nodes are equally spaced

  std::size_t size() const { return x.size(); }
};

namespace detail {
inline void check_nodes(const std::vector<double>& x, const std::vector<double>& t, bool closed) {
  if (x.size() != t.size()) throw ValidationError("curve: coordinate arrays differ in length");
  if (x.size() < (closed ? 3u : 2u)) throw ValidationError("curve: too few nodes");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(t[i])) throw ValidationError("curve: non-finite node");
}
}  // namespace detail

/// Builds a curve from nodes. Tangents use centred differences (one-sided at
/// open ends); curvature is the turning rate of the discrete tangent.
inline DiscreteCurve make_curve(std::vector<double> x, std::vector<double> t, bool closed = false) {
  detail::check_nodes(x, t, closed);
  const std::size_t n = x.size();
  DiscreteCurve c;
  c.closed = closed;
  c.nx.resize(n);
  c.nt.resize(n);
  c.k.assign(n, 0.0);
  auto idx = [&](long i) -> std::size_t {
    const long m = static_cast<long>(n);
    return static_cast<std::size_t>(((i % m) + m) % m);
  };
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t a = i, b = i;
    if (closed) {
      a = idx(static_cast<long>(i) - 1);
      b = idx(static_cast<long>(i) + 1);
    } else {
      a = i == 0 ? 0 : i - 1;
      b = i + 1 == n ? n - 1 : i + 1;
    }
    const double dx = x[b] - x[a], dt = t[b] - t[a];
    const double len = std::hypot(dx, dt);
    if (!(len > 0.0)) throw ValidationError("curve: repeated nodes");
    c.nx[i] = -dt / len;
    c.nt[i] = dx / len;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!closed && (i == 0 || i + 1 == n)) continue;
    const std::size_t a = closed ? idx(static_cast<long>(i) - 1) : i - 1;
    const std::size_t b = closed ? idx(static_cast<long>(i) + 1) : i + 1;
    const double ax = x[i] - x[a], at = t[i] - t[a];
    const double bx = x[b] - x[i], bt = t[b] - t[i];
    const double turn = std::atan2(ax * bt - at * bx, ax * bx + at * bt);
    c.k[i] = 2.0 * turn / (std::hypot(ax, at) + std::hypot(bx, bt));
  }
  if (!closed && n > 2) {
    c.k.front() = c.k[1];
    c.k.back() = c.k[n - 2];
  }
  c.x = std::move(x);
  c.t = std::move(t);
  return c;
}

/// CSV with header x,t,Nx,Nt,k.
inline void write_curve_csv(std::ostream& os, const DiscreteCurve& c) {
  write_csv_header(os, {"x", "t", "Nx", "Nt", "k"});
  for (std::size_t i = 0; i < c.size(); ++i) write_csv_row(os, {c.x[i], c.t[i], c.nx[i], c.nt[i], c.k[i]});
}

}  // namespace isoflow
