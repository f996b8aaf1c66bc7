#pragma once

#include "cachesec/model.hpp"

#include <random>
#include <vector>

namespace cachesec::testing {

/// Hand-built scenario: channel columns are given, positions are placed on a
/// line so that BS m is nearest to every user when m is smallest.
inline Scenario make_scenario(int num_bs, int nt, const std::vector<int>& files, const CMat& channels,
                              const CMat& eavesdropper, std::vector<double> backhaul, double noise_w = 1.0) {
  Scenario s;
  s.num_bs = num_bs;
  s.tx_antennas = nt;
  s.er_antennas = static_cast<int>(eavesdropper.cols());
  for (std::size_t k = 0; k < files.size(); ++k) s.requests.push_back({static_cast<int>(k), files[k], 0});
  s.channels = channels;
  s.eavesdropper = eavesdropper;
  s.backhaul_bps = std::move(backhaul);
  s.noise_w = noise_w;
  s.er_noise_w = noise_w;
  for (int m = 0; m < num_bs; ++m) s.bs_positions.push_back({100.0 * m, 0.0});
  for (std::size_t k = 0; k < files.size(); ++k) s.user_positions.push_back({-10.0, 0.0});
  s.er_position = {0.0, 500.0};
  return s;
}

inline CMat gaussian(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  CMat x(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) x(i, j) = scale * cd(n(rng), n(rng));
  return x;
}

}  // namespace cachesec::testing
