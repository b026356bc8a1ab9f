#pragma once

// Reference computations for the tests. Everything here is written from the
// defining formulas and shares no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

// Composite 8-point Gauss-Legendre. Nodes are interior, so a jump at a panel
// end never gets sampled.
inline double gauss(const std::function<double(double)>& f, double a, double b,
                    int panels = 64) {
  static const double x[4] = {0.1834346424956498, 0.5255324099163290,
                              0.7966664774136267, 0.9602898564975363};
  static const double w[4] = {0.3626837833783620, 0.3137066458778873,
                              0.2223810344533745, 0.1012285362903763};
  if (b <= a) return 0.0;
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int i = 0; i < panels; ++i) {
    double mid = a + (i + 0.5) * h, half = 0.5 * h;
    for (int k = 0; k < 4; ++k)
      sum += w[k] * half * (f(mid - half * x[k]) + f(mid + half * x[k]));
  }
  return sum;
}

// gauss() on every sub-interval cut by `cuts`.
inline double gauss_split(const std::function<double(double)>& f, double a, double b,
                            const std::vector<double>& cuts, int panels = 64) {
  std::vector<double> pts{a};
  for (double c : cuts)
    if (c > a && c < b) pts.push_back(c);
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    sum += gauss(f, pts[i], pts[i + 1], panels);
  return sum;
}

inline double bisect(const std::function<double(double)>& f, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (f(mid) > 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// Right-open step survival function with a tail mass.
struct Step {
  std::vector<double> grid;
  std::vector<double> values;
  double tail = 0.0;

  double H(double s) const {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (s >= grid[i] && s < grid[i + 1]) return values[i];
    return s < grid.front() ? 1.0 : 0.0;
  }
  double int_pow(double a, double b, int e) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      double lo = std::max(a, grid[i]), hi = std::min(b, grid[i + 1]);
      if (hi > lo) sum += std::pow(values[i], e) * (hi - lo);
    }
    return sum;
  }
  double G(double s) const { return int_pow(s, grid.back(), 1) + tail; }
  double K(double s, double hi) const { return int_pow(s, hi, 2); }

  double s2(double beta) const {
    return bisect([&](double s) { return (1 - beta) * s - beta * G(s); }, 0.0,
                  beta * G(0) / (1 - beta) + 1.0);
  }
  double q(double beta, double s2v, double s) const {
    if (s > s2v) return 0.0;
    double g = G(s);
    return (beta * (H(s) * g - K(s, s2v)) + (1 - beta) * G(s2v)) / (g * g);
  }
  std::vector<double> cuts() const { return grid; }
  double mass(double beta) const {
    double s2v = s2(beta);
    return gauss_split([&](double s) { return q(beta, s2v, s); }, 0.0, s2v, cuts(), 40);
  }
  double phi(double beta, double s) const {
    double s2v = s2(beta);
    auto integrand = [&](double p) {
      return (G(p) + H(p) * (p - s)) * q(beta, s2v, p);
    };
    double inner = s < s2v ? gauss_split(integrand, s, s2v, cuts(), 40) : 0.0;
    return (1 - beta) * s + inner - beta * G(s);
  }
  // Worst seller CDF for a curve with s2 = 1.
  double worst_cdf(double p) const {
    double j = gauss_split([&](double t) { return 1.0 / (G(t) * G(t)); }, 0.0, p,
                             cuts(), 40);
    return G(1.0) * (-H(p) * j + 1.0 / G(p));
  }
};

// Random decreasing step curve on [0, 1] with `cells` cells and H(0) = 1,
// tail (1 - beta) / beta so that s2 = 1.
inline Step random_step(std::mt19937_64& rng, int cells, double beta) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Step c;
  std::vector<double> cuts;
  for (int i = 0; i + 1 < cells; ++i) cuts.push_back(0.02 + 0.96 * u(rng));
  std::sort(cuts.begin(), cuts.end());
  c.grid.push_back(0.0);
  for (double x : cuts) c.grid.push_back(x);
  c.grid.push_back(1.0);
  std::vector<double> v;
  for (int i = 0; i < cells; ++i) v.push_back(u(rng));
  std::sort(v.rbegin(), v.rend());
  v[0] = 1.0;
  c.values = v;
  c.tail = (1 - beta) / beta;
  return c;
}

// Objective of a level sequence, recomputed from the definitions: segment i
// covers [(i-1)/n, i/n] with level l_i/L, K sums floor(l^2/L)/(nL) over later
// segments, G = tail + sum of later levels / (nL).
inline double level_objective(double beta, int n, int L, const std::vector<int>& lv) {
  double g1 = (1 - beta) / beta;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    long long X = 0, Y = 0;
    for (int j = i + 1; j < n; ++j) {
      X += static_cast<long long>(lv[j]) * lv[j] / L;
      Y += lv[j];
    }
    double z = static_cast<double>(lv[i]) / L;
    double g = static_cast<double>(Y) / (static_cast<double>(n) * L) + g1;
    double k = static_cast<double>(X) / (static_cast<double>(n) * L);
    total += (beta * (z * g - k) + (1 - beta) * g1) / (g * (g + z / n)) / n;
  }
  return total;
}

// All decreasing sequences of n integers in [0, L].
inline void for_each_levels(int n, int L, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> lv(n, 0);
  std::function<void(int, int)> rec = [&](int i, int cap) {
    if (i == n) {
      f(lv);
      return;
    }
    for (int l = 0; l <= cap; ++l) {
      lv[i] = l;
      rec(i + 1, l);
    }
  };
  rec(0, L);
}


// Smallest total mass of a feasible atomic measure with atoms on `prices`
// (ascending, last one >= s2) and masses in multiples of `quantum`, searched
// exhaustively up to `budget`. Feasible means
//   (1 - beta) s + sum_{p_j >= s} w_j (G(p_j) + H(p_j)(p_j - s)) - beta G(s) >= 0
// for every s >= 0. Between atoms and curve breakpoints that expression is
// linear in s, so checking those points (and right limits at atoms) is exact.
// Atoms are placed from the top down; a partial choice is dropped only when
// another one with the same mass is at least as large on the whole remaining
// range, which cannot lose a solution. Returns +inf when nothing fits.
inline double min_feasible_mass(const Step& c, double beta, const std::vector<double>& prices,
                                double quantum, int budget, double tol = 1e-12) {
  struct St {
    double A, B;
  };
  const int m = static_cast<int>(prices.size());
  auto slack = [&](double s, double A, double B) {
    return (1 - beta) * s + A - B * s - beta * c.G(s);
  };
  auto checks_in = [&](double lo, double hi) {
    std::vector<double> pts{hi};
    for (double g : c.grid)
      if (g > lo && g < hi) pts.push_back(g);
    return pts;
  };
  if (slack(prices.back(), 0, 0) < -tol) return INFINITY;

  std::vector<std::vector<St>> by_mass(budget + 1);
  by_mass[0].push_back({0.0, 0.0});
  for (int j = m - 1; j >= 0; --j) {
    const double p = prices[j];
    const double lo = j > 0 ? prices[j - 1] : -1.0;
    const double wa = c.G(p) + c.H(p) * p, wb = c.H(p);
    std::vector<std::vector<St>> next(budget + 1);
    for (int u = 0; u <= budget; ++u) {
      for (const St& st : by_mass[u]) {
        for (int w = 0; u + w <= budget; ++w) {
          St ns{st.A + w * quantum * wa, st.B + w * quantum * wb};
          bool ok = true;
          for (double s : checks_in(std::max(lo, 0.0), p))
            if (slack(s, ns.A, ns.B) < -tol) ok = false;
          if (j > 0 && slack(lo, ns.A, ns.B) < -tol) ok = false;
          if (j == 0 && p > 0.0 && slack(0.0, ns.A, ns.B) < -tol) ok = false;
          if (!ok) continue;
          // dominance on [0, lo]
          auto& bucket = next[u + w];
          double at_lo = ns.A - ns.B * std::max(lo, 0.0);
          bool dominated = false;
          for (const St& o : bucket)
            if (o.A >= ns.A && o.A - o.B * std::max(lo, 0.0) >= at_lo) dominated = true;
          if (dominated) continue;
          std::erase_if(bucket, [&](const St& o) {
            return ns.A >= o.A && at_lo >= o.A - o.B * std::max(lo, 0.0);
          });
          bucket.push_back(ns);
        }
      }
    }
    by_mass.swap(next);
  }
  for (int u = 0; u <= budget; ++u)
    if (!by_mass[u].empty()) return u * quantum;
  return INFINITY;
}

}  // namespace oracle
