#include "kcontact/stencil.hpp"

namespace kcontact {

Parity natural_parity(Boundary b) { return b == Boundary::Dirichlet ? Parity::Odd : Parity::Even; }

Parity flip(Parity p) { return p == Parity::Even ? Parity::Odd : Parity::Even; }

double neighbor(const Grid& g, std::span<const double> f, std::size_t flat, std::size_t axis, int shift,
                Parity parity) {
  const long n = static_cast<long>(g.points[axis]);
  const long s = static_cast<long>(g.stride(axis));
  const long i = static_cast<long>(g.axis_index(flat, axis));
  long j = i + shift;
  const long base = static_cast<long>(flat) - i * s;
  if (g.boundary == Boundary::Periodic) {
    j = ((j % n) + n) % n;
    return f[static_cast<std::size_t>(base + j * s)];
  }
  double sign = 1.0;
  if (j < 0) {
    j = -j;
    if (parity == Parity::Odd) sign = -1.0;
  } else if (j >= n) {
    j = 2 * (n - 1) - j;
    if (parity == Parity::Odd) sign = -1.0;
  }
  // Odd reflection about a wall node: the ghost is 2 f_wall - f_mirror, which
  // equals -f_mirror when the wall value vanishes.
  if (sign < 0) {
    long wall = shift < 0 ? 0 : n - 1;
    return 2.0 * f[static_cast<std::size_t>(base + wall * s)] - f[static_cast<std::size_t>(base + j * s)];
  }
  return f[static_cast<std::size_t>(base + j * s)];
}

double d1_at(const Grid& g, std::span<const double> f, std::size_t flat, std::size_t axis, Parity parity) {
  double h = g.spacing(axis);
  return (neighbor(g, f, flat, axis, 1, parity) - neighbor(g, f, flat, axis, -1, parity)) / (2.0 * h);
}

double d2_at(const Grid& g, std::span<const double> f, std::size_t flat, std::size_t axis, Parity parity) {
  double h = g.spacing(axis);
  return (neighbor(g, f, flat, axis, 1, parity) - 2.0 * f[flat] + neighbor(g, f, flat, axis, -1, parity)) /
         (h * h);
}

double d11_at(const Grid& g, std::span<const double> f, std::size_t flat, std::size_t a, std::size_t b,
              Parity parity) {
  if (a == b) return d2_at(g, f, flat, a, parity);
  // Differences of the neighbours along a, taken along b.
  const long sa = static_cast<long>(g.stride(a));
  auto shifted = [&](int da) -> std::size_t {
    long i = static_cast<long>(g.axis_index(flat, a)) + da;
    long n = static_cast<long>(g.points[a]);
    if (g.boundary == Boundary::Periodic) i = ((i % n) + n) % n;
    else if (i < 0) i = -i;
    else if (i >= n) i = 2 * (n - 1) - i;
    return static_cast<std::size_t>(static_cast<long>(flat) +
                                    (i - static_cast<long>(g.axis_index(flat, a))) * sa);
  };
  double hp = d1_at(g, f, shifted(1), b, parity);
  double hm = d1_at(g, f, shifted(-1), b, parity);
  return (hp - hm) / (2.0 * g.spacing(a));
}

void d1(const Grid& g, std::span<const double> f, std::size_t axis, Parity parity, std::span<double> out) {
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = d1_at(g, f, i, axis, parity);
}

void d2(const Grid& g, std::span<const double> f, std::size_t axis, Parity parity, std::span<double> out) {
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = d2_at(g, f, i, axis, parity);
}

}  // namespace kcontact
