#pragma once

#include <span>

#include "kcontact/phase_space.hpp"

namespace kcontact {

/// Reflection parity used for ghost values on Dirichlet and Neumann grids.
/// A field that is odd about the wall under Dirichlet conditions has an even
/// spatial derivative, and vice versa.
enum class Parity { Even, Odd };

Parity natural_parity(Boundary b);
Parity flip(Parity p);

/// Value at `flat` shifted by `shift` (-1 or +1, or +-2) along `axis`.
double neighbor(const Grid& g, std::span<const double> f, std::size_t flat, std::size_t axis, int shift,
                Parity parity);

/// Centered first difference (f[i+1] - f[i-1]) / (2h).
double d1_at(const Grid& g, std::span<const double> f, std::size_t flat, std::size_t axis, Parity parity);
/// Compact second difference (f[i+1] - 2 f[i] + f[i-1]) / h^2.
double d2_at(const Grid& g, std::span<const double> f, std::size_t flat, std::size_t axis, Parity parity);
/// Mixed difference d_a d_b with centered differences.
double d11_at(const Grid& g, std::span<const double> f, std::size_t flat, std::size_t a, std::size_t b,
              Parity parity);

void d1(const Grid& g, std::span<const double> f, std::size_t axis, Parity parity, std::span<double> out);
void d2(const Grid& g, std::span<const double> f, std::size_t axis, Parity parity, std::span<double> out);

}  // namespace kcontact
