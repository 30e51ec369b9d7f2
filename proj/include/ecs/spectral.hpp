#pragma once

// Z-spectral systems (m, k, E, J): integer data deciding which powers of q must
// form the spectrum of a unimodular integer matrix.

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecs/checks.hpp"

namespace ecs {

/// E and J are stored 1-based: index 0 is unused, indices 1..2m are live.
struct ZSpectralSystem {
  int m = 0;
  int k = 0;
  std::vector<long> E;
  std::vector<int> J;

  int size() const { return 2 * m; }

  /// S = J^{-1}(1), ascending.
  std::vector<int> selector() const {
    std::vector<int> s;
    for (int i = 1; i <= size(); ++i)
      if (J[i] == 1) s.push_back(i);
    return s;
  }

  /// Y = {-1} united with E(S).
  std::set<long> exponent_set() const {
    std::set<long> y{-1};
    for (int i : selector()) y.insert(E[i]);
    return y;
  }

  bool well_formed() const {
    return m >= 1 && static_cast<int>(E.size()) == size() + 1 && static_cast<int>(J.size()) == size() + 1;
  }

  friend bool operator==(const ZSpectralSystem&, const ZSpectralSystem&) = default;
};

using SpectralCertificate = CheckList;

/// The explicit family with m = 2r - 3, k = 2r - 1 (r >= 3); J(i) = 1 exactly
/// when E(i) is odd.
inline ZSpectralSystem build_theorem22(int r) {
  if (r < 3) throw std::invalid_argument("build_theorem22: r must be >= 3");
  ZSpectralSystem sys;
  sys.m = 2 * r - 3;
  sys.k = 2 * r - 1;
  sys.E.assign(static_cast<std::size_t>(2 * sys.m) + 1, 0);
  sys.J.assign(static_cast<std::size_t>(2 * sys.m) + 1, 0);
  const bool r_even = r % 2 == 0;
  for (int j = 1; j <= sys.m; ++j) {
    long odd_slot = 0;
    long even_slot = 0;
    if (j == 1) {
      odd_slot = r;
      even_slot = -r + 1;
    } else if (j < r - 1) {
      if (r_even) {
        odd_slot = j - 1;
        even_slot = -2 * r + j;
      } else {
        odd_slot = 2 * r + j - 2;
        even_slot = j - 1;
      }
    } else if (j == r - 1) {
      odd_slot = r - 1;
      even_slot = -r;
    } else if (j < sys.m) {
      if (r_even) {
        odd_slot = j + 1;
        even_slot = j - 2 * r + 2;
      } else {
        odd_slot = j - 2 * r + 2;
        even_slot = j - 4 * r + 3;
      }
    } else {
      odd_slot = r - 2;
      even_slot = -r - 1;
    }
    sys.E[2 * j - 1] = odd_slot;
    sys.E[2 * j] = even_slot;
  }
  for (int i = 1; i <= 2 * sys.m; ++i) sys.J[i] = (sys.E[i] % 2 != 0) ? 1 : 0;
  return sys;
}

/// Closed-form description of Y for the explicit family: odd integers in
/// [-2r+3, 2r-3] for even r, and in [-3r+4, -2r-1] u [-r, r] u [2r+1, 3r-4]
/// for odd r.
inline std::set<long> theorem22_exponents_closed_form(int r) {
  std::set<long> y;
  auto add_odd = [&](long lo, long hi) {
    for (long v = lo; v <= hi; ++v)
      if (v % 2 != 0) y.insert(v);
  };
  if (r % 2 == 0) {
    add_odd(-2 * r + 3, 2 * r - 3);
  } else {
    add_odd(-3 * r + 4, -2 * r - 1);
    add_odd(-r, r);
    add_odd(2 * r + 1, 3 * r - 4);
  }
  return y;
}

/// Per-axiom validation in exact integer arithmetic. Never throws on a
/// well-formed system; failures are reported in the certificate.
inline SpectralCertificate validate(const ZSpectralSystem& sys) {
  SpectralCertificate cert;
  auto add = [&](std::string name, bool pass, std::string detail = {}) {
    cert.exact(std::move(name), pass, std::move(detail));
  };
  if (!sys.well_formed()) {
    add("structure", false, "E and J must have 2m entries");
    return cert;
  }
  const int n = sys.size();
  add("m>=2,k>=2", sys.m >= 2 && sys.k >= 2);

  add("k+1=2E(1)", sys.k + 1 == 2 * sys.E[1],
      "k+1=" + std::to_string(sys.k + 1) + ", 2E(1)=" + std::to_string(2 * sys.E[1]));

  bool b_e = true, b_j = true;
  for (int i = 1; i <= n; ++i) {
    const int ip = 2 * sys.m + 1 - i;
    if (sys.E[i] + sys.E[ip] != -1) b_e = false;
    if (sys.J[i] == sys.J[ip]) b_j = false;
  }
  add("E(i)+E(i')=-1 for mirrored i", b_e);
  add("J(i)!=J(i') for mirrored i", b_j);

  bool c_e = true, c_j = true;
  for (int i = 1; i + 1 <= n; i += 2) {
    if (sys.E[i] - sys.E[i + 1] != sys.k) c_e = false;
    if (sys.J[i] == sys.J[i + 1]) c_j = false;
  }
  add("E(i)-E(i+1)=k for odd i", c_e);
  add("J(i)!=J(i+1) for odd i", c_j);

  const std::set<long> y = sys.exponent_set();
  const bool symmetric = std::all_of(y.begin(), y.end(), [&](long v) { return y.contains(-v); });
  add("Y symmetric about 0", symmetric);

  std::set<long> range(sys.E.begin() + 1, sys.E.end());
  add("E injective", static_cast<int>(range.size()) == n);
  add("-1 not in E(V)", !range.contains(-1));

  bool j_binary = std::all_of(sys.J.begin() + 1, sys.J.end(), [](int v) { return v == 0 || v == 1; });
  add("J binary", j_binary);

  const std::vector<int> s = sys.selector();
  std::set<long> es;
  for (int i : s) es.insert(sys.E[i]);
  add("|S|=|E(S)|=m", static_cast<int>(s.size()) == sys.m && static_cast<int>(es.size()) == sys.m,
      "|S|=" + std::to_string(s.size()) + ", |E(S)|=" + std::to_string(es.size()));
  add("|Y|=m+1", static_cast<int>(y.size()) == sys.m + 1, "|Y|=" + std::to_string(y.size()));
  return cert;
}

/// Exhaustive search for systems with a given m and odd k in [3, k_max].
///
/// The pairing axioms force E(2j) = E(2j-1) - k and E(2(m+1-j)-1) = k - 1 - E(2j-1),
/// so E is determined by the odd-slot values x_j = E(2j-1) for
/// j <= ceil(m/2), with x_1 = (k+1)/2 and, for odd m, the middle slot equal to
/// (k-1)/2. For m <= 5 at most one slot stays free; symmetry of Y then bounds
/// it by |x| <= 2k + 2, so the window below is exhaustive.
inline std::vector<ZSpectralSystem> search_systems(int m, int k_max) {
  if (m < 2 || m > 5) throw std::invalid_argument("search_systems: supported m is 2..5");
  if (k_max > 99) throw std::invalid_argument("search_systems: k_max must be <= 99");
  std::vector<ZSpectralSystem> found;
  const int n = 2 * m;
  for (int k = 3; k <= k_max; k += 2) {
    const int half = (m + 1) / 2;
    std::vector<int> free_slots;
    for (int j = 2; j <= half; ++j)
      if (!(m % 2 == 1 && j == half)) free_slots.push_back(j);
    const long bound = 2L * k + 2;

    std::vector<long> x(static_cast<std::size_t>(m) + 1, 0);
    x[1] = (k + 1) / 2;
    if (m % 2 == 1) x[half] = (k - 1) / 2;

    auto emit = [&]() {
      std::vector<long> xs = x;
      for (int j = 1; j <= half; ++j) xs[m + 1 - j] = k - 1 - xs[j];
      // The odd-m middle slot is its own mirror; k - 1 - x = x is required.
      if (m % 2 == 1 && xs[half] != k - 1 - xs[half]) return;
      if (xs[1] != (k + 1) / 2) return;
      ZSpectralSystem sys;
      sys.m = m;
      sys.k = k;
      sys.E.assign(static_cast<std::size_t>(n) + 1, 0);
      for (int j = 1; j <= m; ++j) {
        sys.E[2 * j - 1] = xs[j];
        sys.E[2 * j] = xs[j] - k;
      }
      // J must pick exactly one index from every pair (2j-1, 2j).
      for (unsigned mask = 0; mask < (1u << m); ++mask) {
        sys.J.assign(static_cast<std::size_t>(n) + 1, 0);
        for (int j = 1; j <= m; ++j) {
          const bool odd = ((mask >> (j - 1)) & 1u) != 0;
          sys.J[2 * j - 1] = odd ? 1 : 0;
          sys.J[2 * j] = odd ? 0 : 1;
        }
        if (validate(sys).pass()) found.push_back(sys);
      }
    };

    // Odometer over the free slots.
    std::function<void(std::size_t)> recurse = [&](std::size_t idx) {
      if (idx == free_slots.size()) {
        emit();
        return;
      }
      for (long v = -bound; v <= bound; ++v) {
        x[free_slots[idx]] = v;
        recurse(idx + 1);
      }
    };
    recurse(0);
  }
  return found;
}

}  // namespace ecs
