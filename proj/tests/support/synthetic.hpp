#pragma once

// Synthetic spectra with known structure, shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "pinball/spectrum.hpp"

namespace synthetic {

struct Planted {
  pinball::Spectrum spectrum;
  std::vector<std::pair<double, double>> clusters;  // (first λ, last λ) of each planted block
};

// Background frequencies every `spacing` on [start, stop], where a random
// subset is replaced by blocks of 2..4 frequencies `inner` apart.
inline Planted planted_clusters(std::uint64_t seed, double start, double stop, double spacing, double inner,
                                double plant_probability = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> size(2, 4);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::vector<double> l, a;
  Planted out;
  const auto steps = static_cast<int>(std::floor((stop - start) / spacing + 1e-9));
  for (int i = 0; i <= steps; ++i) {
    const double x = start + i * spacing;
    if (unit(rng) < plant_probability) {
      const int k = size(rng);
      for (int j = 0; j < k; ++j) {
        l.push_back(x + j * inner);
        a.push_back(coef(rng));
      }
      out.clusters.emplace_back(x, x + (k - 1) * inner);
    } else {
      l.push_back(x);
      a.push_back(coef(rng));
    }
  }
  out.spectrum = pinball::Spectrum::from_pairs(l, a, std::max(stop, l.back()));
  return out;
}

inline pinball::Spectrum uniform(double start, double stop, double spacing, double coefficient = 1.0) {
  std::vector<double> l, a;
  const auto steps = static_cast<int>(std::floor((stop - start) / spacing + 1e-9));
  for (int i = 0; i <= steps; ++i) {
    const double x = start + i * spacing;
    l.push_back(x);
    a.push_back(coefficient);
  }
  return pinball::Spectrum::from_pairs(l, a, std::max(stop, l.back()));
}

}  // namespace synthetic
