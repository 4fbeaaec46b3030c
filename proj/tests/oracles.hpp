#pragma once

// Independent reference implementations used only by tests. Everything here
// is written as plain scalar loops over std::vector so it shares no code path
// with the tape-based implementations it checks.

#include "spmat/graph.hpp"
#include "spmat/structure.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix normalize_rows(const Matrix &z) {
  Matrix out = z;
  for (auto &row : out) {
    double s = 0;
    for (double v : row)
      s += v * v;
    const double n = std::sqrt(s);
    for (double &v : row)
      v /= n;
  }
  return out;
}

inline double dot(const std::vector<double> &a, const std::vector<double> &b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

/// -log(exp(s_ip) / sum_{a != i} exp(s_ia)) with the max over a != i factored out.
inline double anchor_term(const Matrix &s, std::size_t i, std::size_t p) {
  double m = -1e300;
  for (std::size_t a = 0; a < s.size(); ++a)
    if (a != i)
      m = std::max(m, s[i][a]);
  double denom = 0;
  for (std::size_t a = 0; a < s.size(); ++a)
    if (a != i)
      denom += std::exp(s[i][a] - m);
  return -(s[i][p] - m - std::log(denom));
}

inline Matrix similarity(const Matrix &z, double tau) {
  const Matrix n = normalize_rows(z);
  Matrix s(z.size(), std::vector<double>(z.size()));
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = 0; j < z.size(); ++j)
      s[i][j] = dot(n[i], n[j]) / tau;
  return s;
}

/// Rows 2k and 2k+1 are the two views of origin k.
inline double nt_xent(const Matrix &z, double tau) {
  const Matrix s = similarity(z, tau);
  double total = 0;
  for (std::size_t i = 0; i < z.size(); ++i)
    total += anchor_term(s, i, i % 2 == 0 ? i + 1 : i - 1);
  return total;
}

/// `labels` has one entry per row.
inline double supcon(const Matrix &z, const std::vector<int> &labels, double tau) {
  const Matrix s = similarity(z, tau);
  double total = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double acc = 0;
    int count = 0;
    for (std::size_t p = 0; p < z.size(); ++p)
      if (p != i && labels[p] == labels[i]) {
        acc += anchor_term(s, i, p);
        ++count;
      }
    total += acc / count;
  }
  return total;
}

struct BtParts {
  double on = 0;
  double off = 0;
};

inline BtParts barlow_twins(const Matrix &z1, const Matrix &z2) {
  const std::size_t b = z1.size(), d = z1[0].size();
  auto standardize = [&](const Matrix &z) {
    Matrix out = z;
    for (std::size_t c = 0; c < d; ++c) {
      double mean = 0;
      for (std::size_t r = 0; r < b; ++r)
        mean += z[r][c];
      mean /= static_cast<double>(b);
      double var = 0;
      for (std::size_t r = 0; r < b; ++r)
        var += (z[r][c] - mean) * (z[r][c] - mean);
      var /= static_cast<double>(b);
      for (std::size_t r = 0; r < b; ++r)
        out[r][c] = (z[r][c] - mean) / std::sqrt(var + 1e-12);
    }
    return out;
  };
  const Matrix a = standardize(z1), c = standardize(z2);
  BtParts parts;
  for (std::size_t p = 0; p < d; ++p)
    for (std::size_t q = 0; q < d; ++q) {
      double cpq = 0;
      for (std::size_t r = 0; r < b; ++r)
        cpq += a[r][p] * c[r][q];
      cpq /= static_cast<double>(b);
      if (p == q)
        parts.on += (1 - cpq) * (1 - cpq);
      else
        parts.off += cpq * cpq;
    }
  return parts;
}

struct SupBtParts {
  double same = 0;
  double diff = 0;
};

inline SupBtParts sup_bt(const Matrix &z1, const Matrix &z2, const std::vector<int> &labels,
                         bool divide_by_d) {
  const Matrix a = normalize_rows(z1), c = normalize_rows(z2);
  const double d = static_cast<double>(z1[0].size());
  SupBtParts parts;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t l = 0; l < a.size(); ++l) {
      double s = dot(a[k], c[l]);
      if (divide_by_d)
        s /= d;
      if (labels[k] == labels[l])
        parts.same += (1 - s) * (1 - s);
      else
        parts.diff += (1 + s) * (1 + s);
    }
  return parts;
}

struct Neighbor {
  int src;
  int dst;
  std::array<int, 3> image;
  double d;
};

/// Every pair over a 5x5x5 block of images, filtered to 0 < d <= R, ordered by
/// the library's published tie rule and truncated to M per anchor.
inline std::vector<Neighbor> brute_force_neighbors(const spmat::CrystalStructure &s, double r,
                                                   int m) {
  const auto &L = s.lattice;
  std::vector<spmat::Vec3> cart;
  for (const auto &site : s.sites) {
    spmat::Vec3 x{};
    for (int c = 0; c < 3; ++c)
      x[c] = site.frac[0] * L[0][c] + site.frac[1] * L[1][c] + site.frac[2] * L[2][c];
    cart.push_back(x);
  }
  std::vector<Neighbor> out;
  const int n = static_cast<int>(s.sites.size());
  for (int i = 0; i < n; ++i) {
    std::vector<Neighbor> cand;
    for (int j = 0; j < n; ++j)
      for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 2; ++b)
          for (int c = -2; c <= 2; ++c) {
            double dd = 0;
            for (int k = 0; k < 3; ++k) {
              const double delta = cart[j][k] + (a * L[0][k] + b * L[1][k] + c * L[2][k]) - cart[i][k];
              dd += delta * delta;
            }
            const double d = std::sqrt(dd);
            if (d > 0 && d <= r)
              cand.push_back({i, j, {a, b, c}, d});
          }
    std::sort(cand.begin(), cand.end(), [](const Neighbor &x, const Neighbor &y) {
      const auto kx = spmat::distance_sort_key(x.d), ky = spmat::distance_sort_key(y.d);
      return std::tie(kx, x.dst, x.image) < std::tie(ky, y.dst, y.image);
    });
    if (static_cast<int>(cand.size()) > m)
      cand.resize(static_cast<std::size_t>(m));
    out.insert(out.end(), cand.begin(), cand.end());
  }
  return out;
}

} // namespace oracle
