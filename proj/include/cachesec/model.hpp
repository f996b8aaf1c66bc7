#pragma once

// System model: configuration, content popularity, propagation, and
// randomized delivery snapshots.

#include "cachesec/errors.hpp"
#include "cachesec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace cachesec {

struct BackhaulLevel {
  double capacity_bps = 0.0;
  double probability = 0.0;
};

/// Static system parameters. Internally everything is SI (watts, bits, Hz).
struct SystemConfig {
  int num_bs = 3;
  int num_users = 2;
  int num_files = 4;
  int tx_antennas = 2;
  int er_antennas = 1;
  double bandwidth_hz = 10e6;
  double slot_duration_s = 0.01;
  double file_size_bits = 4e9;
  double subfiles_per_file = 2.7e5;
  double max_tx_power_w = dbm_to_watts(46.0);
  double noise_density_w_per_hz = dbm_to_watts(-172.6);
  double qos_rate_bps = 1.65e6;
  double secrecy_tolerance_bps = 150e3;
  double zipf_exponent = 1.1;
  double inter_bs_distance_m = 500.0;
  double min_rx_distance_m = 50.0;
  double cache_capacity_bits = 8e9;  // per BS
  std::vector<BackhaulLevel> backhaul_pmf{{0.0, 0.3}, {3e6, 0.4}, {6e6, 0.3}};

  /// Throws ConfigError describing the first violated invariant.
  void validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("invalid config: " + what); };
    if (num_bs < 1) fail("num_bs must be >= 1");
    if (num_users < 1) fail("num_users must be >= 1");
    if (num_files < 1) fail("num_files must be >= 1");
    if (tx_antennas < 1) fail("tx_antennas must be >= 1");
    if (er_antennas < 1) fail("er_antennas must be >= 1");
    const std::pair<const char*, double> positive[] = {
        {"bandwidth_hz", bandwidth_hz},
        {"slot_duration_s", slot_duration_s},
        {"file_size_bits", file_size_bits},
        {"subfiles_per_file", subfiles_per_file},
        {"max_tx_power", max_tx_power_w},
        {"noise_density", noise_density_w_per_hz},
        {"qos_rate_bps", qos_rate_bps},
        {"secrecy_tolerance_bps", secrecy_tolerance_bps},
        {"zipf_exponent", zipf_exponent},
        {"inter_bs_distance_m", inter_bs_distance_m},
        {"min_rx_distance_m", min_rx_distance_m},
    };
    for (const auto& [name, v] : positive)
      if (!(v > 0.0) || !std::isfinite(v)) fail(std::string(name) + " must be positive and finite");
    if (!(cache_capacity_bits >= 0.0)) fail("cache capacity must be non-negative");
    if (secrecy_tolerance_bps >= qos_rate_bps) fail("secrecy tolerance must be below the QoS rate");
    if (min_rx_distance_m >= inter_bs_distance_m / std::sqrt(3.0))
      fail("min_rx_distance_m must be smaller than the cell radius");
    if (backhaul_pmf.empty()) fail("backhaul_pmf must not be empty");
    double total = 0.0;
    for (const auto& lvl : backhaul_pmf) {
      if (!(lvl.capacity_bps >= 0.0)) fail("backhaul capacities must be non-negative");
      if (!(lvl.probability >= 0.0)) fail("backhaul probabilities must be non-negative");
      total += lvl.probability;
    }
    if (std::abs(total - 1.0) > 1e-12) fail("backhaul_pmf probabilities must sum to 1");
  }

  /// Small profile used for tests, oracles and the default CLI run.
  static SystemConfig desk() { return SystemConfig{}; }

  /// Full-size profile: 7 hexagonal cells, 4 transmit antennas, 2 ER antennas,
  /// 10 files of 500 MB, 5 users.
  static SystemConfig table1() {
    SystemConfig c;
    c.num_bs = 7;
    c.num_users = 5;
    c.num_files = 10;
    c.tx_antennas = 4;
    c.er_antennas = 2;
    c.cache_capacity_bits = 2000.0 * 8e6;
    return c;
  }
};

constexpr double kBitsPerMegabyte = 8e6;

// ---------------------------------------------------------------------------
// Popularity

struct PopularityProfile {
  std::vector<double> theta;
};

/// Zipf law: theta_f proportional to f^-exponent, f = 1..num_files.
inline PopularityProfile zipf_popularity(int num_files, double exponent) {
  if (num_files < 1) throw ConfigError("zipf_popularity: number of files must be >= 1");
  if (!(exponent > 0.0)) throw ConfigError("zipf_popularity: exponent must be positive");
  PopularityProfile p;
  p.theta.resize(num_files);
  for (int f = 0; f < num_files; ++f) p.theta[f] = std::pow(static_cast<double>(f + 1), -exponent);
  // Sum from the smallest term for accuracy.
  double total = 0.0;
  for (int f = num_files - 1; f >= 0; --f) total += p.theta[f];
  for (double& t : p.theta) t /= total;
  return p;
}

// ---------------------------------------------------------------------------
// Propagation and units

/// Macro-cell NLOS path loss, 128.1 + 37.6 log10(d / 1 km). Distances below
/// the minimum receiver distance are clamped with a warning.
inline double path_loss_db(double distance_m, double min_distance_m) {
  if (!(distance_m >= min_distance_m)) {
    std::ostringstream msg;
    msg << "path_loss_db: distance " << distance_m << " m below minimum " << min_distance_m << " m; clamped";
    log_warning(msg.str());
    distance_m = min_distance_m;
  }
  return 128.1 + 37.6 * std::log10(distance_m / 1000.0);
}

inline double noise_power(double density_w_per_hz, double bandwidth_hz) { return density_w_per_hz * bandwidth_hz; }

inline double noise_power_dbm(double density_dbm_per_hz, double bandwidth_hz) {
  return density_dbm_per_hz + 10.0 * std::log10(bandwidth_hz);
}

/// SINR threshold for a rate in bit/s over the given bandwidth (rates are
/// handled internally as spectral efficiency in bit/s/Hz).
inline double rate_to_sinr_threshold(double rate_bps, double bandwidth_hz) {
  if (rate_bps < 0.0) throw ConfigError("rate_to_sinr_threshold: negative rate");
  if (std::isinf(rate_bps)) return std::numeric_limits<double>::infinity();
  return std::exp2(rate_bps / bandwidth_hz) - 1.0;
}

/// Backhaul rate needed to fetch one subfile within one slot: V / (tau L).
inline double backhaul_load_rate(double file_size_bits, double slot_duration_s, double subfiles_per_file) {
  return file_size_bits / (slot_duration_s * subfiles_per_file);
}

inline double backhaul_load_rate(const SystemConfig& config, int file) {
  if (file < 0 || file >= config.num_files) throw ConfigError("backhaul_load_rate: file index out of range");
  return backhaul_load_rate(config.file_size_bits, config.slot_duration_s, config.subfiles_per_file);
}

// ---------------------------------------------------------------------------
// Geometry

struct Position {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Position& a, const Position& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// BS sites on a hexagonal lattice, centre first, then ring by ring.
inline std::vector<Position> hexagonal_layout(int num_bs, double inter_bs_distance) {
  struct Site {
    int ring;
    double angle;
    Position pos;
  };
  std::vector<Site> sites;
  int radius = 0;
  while (3 * radius * (radius + 1) + 1 < num_bs) ++radius;
  for (int q = -radius; q <= radius; ++q) {
    for (int r = std::max(-radius, -q - radius); r <= std::min(radius, -q + radius); ++r) {
      const int ring = (std::abs(q) + std::abs(r) + std::abs(q + r)) / 2;
      Position p{inter_bs_distance * (q + 0.5 * r), inter_bs_distance * (std::sqrt(3.0) / 2.0) * r};
      double ang = std::atan2(p.y, p.x);
      if (ang < -1e-12) ang += 2.0 * std::numbers::pi;
      sites.push_back({ring, ring == 0 ? 0.0 : ang, p});
    }
  }
  std::sort(sites.begin(), sites.end(), [](const Site& a, const Site& b) {
    if (a.ring != b.ring) return a.ring < b.ring;
    return a.angle < b.angle - 1e-12;
  });
  std::vector<Position> out;
  for (int i = 0; i < num_bs; ++i) out.push_back(sites[i].pos);
  return out;
}

/// True if p lies in the hexagonal cell of a site at the origin (flat sides
/// facing the six neighbours at distance inter_bs_distance).
inline bool in_hex_cell(const Position& p, double inter_bs_distance) {
  for (int k = 0; k < 6; ++k) {
    const double a = k * std::numbers::pi / 3.0;
    if (p.x * std::cos(a) + p.y * std::sin(a) > inter_bs_distance / 2.0) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Scenario

struct Request {
  int user = 0;
  int file = 0;
  long subfile = 0;
};

/// One delivery snapshot.
struct Scenario {
  int num_bs = 0;
  int tx_antennas = 0;
  int er_antennas = 0;
  std::vector<Request> requests;  // one per user, in user order
  CMat channels;                  // (num_bs * tx_antennas) x |S|, column rho is h_rho
  CMat eavesdropper;              // (num_bs * tx_antennas) x er_antennas
  std::vector<double> backhaul_bps;
  double noise_w = 0.0;
  double er_noise_w = 0.0;
  std::vector<Position> bs_positions;
  std::vector<Position> user_positions;
  Position er_position;

  int antenna_dim() const { return num_bs * tx_antennas; }

  /// Distinct requested files, ascending.
  std::vector<int> requested_files() const {
    std::vector<int> f;
    for (const auto& r : requests) f.push_back(r.file);
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
    return f;
  }

  void validate() const {
    if (channels.rows() != antenna_dim() || channels.cols() != static_cast<Eigen::Index>(requests.size()))
      throw InvalidProblem("scenario: channel matrix must be (M*Nt) x |S|");
    if (eavesdropper.rows() != antenna_dim() || eavesdropper.cols() != er_antennas)
      throw InvalidProblem("scenario: eavesdropper channel must be (M*Nt) x Ne");
    if (static_cast<int>(backhaul_bps.size()) != num_bs) throw InvalidProblem("scenario: one backhaul value per BS");
  }
};

namespace detail {

/// Independent, reproducible stream per (seed, purpose).
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), 0x5eedu};
  return std::mt19937_64(seq);
}

inline Position sample_receiver(std::mt19937_64& rng, const std::vector<Position>& sites, const SystemConfig& cfg) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(sites.size()) - 1);
  const double r = cfg.inter_bs_distance_m / std::sqrt(3.0);
  std::uniform_real_distribution<double> ux(-r, r);
  for (;;) {
    const int cell = pick(rng);
    Position local{ux(rng), ux(rng)};
    if (!in_hex_cell(local, cfg.inter_bs_distance_m)) continue;
    if (std::hypot(local.x, local.y) < cfg.min_rx_distance_m) continue;
    return {sites[cell].x + local.x, sites[cell].y + local.y};
  }
}

}  // namespace detail

/// Draws one snapshot. Geometry, requests, backhaul and fading use separate
/// streams, so changing antenna counts keeps positions and requests fixed.
inline Scenario generate_scenario(const SystemConfig& cfg, const PopularityProfile& popularity, std::uint64_t seed) {
  cfg.validate();
  if (static_cast<int>(popularity.theta.size()) != cfg.num_files)
    throw ConfigError("generate_scenario: popularity profile size differs from num_files");
  Scenario s;
  s.num_bs = cfg.num_bs;
  s.tx_antennas = cfg.tx_antennas;
  s.er_antennas = cfg.er_antennas;
  s.noise_w = noise_power(cfg.noise_density_w_per_hz, cfg.bandwidth_hz);
  s.er_noise_w = s.noise_w;
  s.bs_positions = hexagonal_layout(cfg.num_bs, cfg.inter_bs_distance_m);

  auto geo = detail::stream(seed, 1);
  for (int k = 0; k < cfg.num_users; ++k) s.user_positions.push_back(detail::sample_receiver(geo, s.bs_positions, cfg));
  s.er_position = detail::sample_receiver(geo, s.bs_positions, cfg);

  auto req = detail::stream(seed, 2);
  std::discrete_distribution<int> file_dist(popularity.theta.begin(), popularity.theta.end());
  std::uniform_int_distribution<long> subfile_dist(0, static_cast<long>(cfg.subfiles_per_file) - 1);
  for (int k = 0; k < cfg.num_users; ++k) {
    const int f = file_dist(req);
    s.requests.push_back({k, f, subfile_dist(req)});
  }

  auto bh = detail::stream(seed, 3);
  std::vector<double> probs;
  for (const auto& lvl : cfg.backhaul_pmf) probs.push_back(lvl.probability);
  std::discrete_distribution<int> level(probs.begin(), probs.end());
  for (int m = 0; m < cfg.num_bs; ++m) s.backhaul_bps.push_back(cfg.backhaul_pmf[level(bh)].capacity_bps);

  auto fading = detail::stream(seed, 4);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  auto draw_block = [&](const Position& rx, int bs) {
    const double gain = std::sqrt(db_to_linear(-path_loss_db(distance(rx, s.bs_positions[bs]), cfg.min_rx_distance_m)));
    CVec g(cfg.tx_antennas);
    for (int a = 0; a < cfg.tx_antennas; ++a) g(a) = gain * cd(gauss(fading), gauss(fading));
    return g;
  };
  const int n = s.antenna_dim();
  s.channels.resize(n, cfg.num_users);
  for (int k = 0; k < cfg.num_users; ++k)
    for (int m = 0; m < cfg.num_bs; ++m) s.channels.block(m * cfg.tx_antennas, k, cfg.tx_antennas, 1) = draw_block(s.user_positions[k], m);
  s.eavesdropper.resize(n, cfg.er_antennas);
  for (int e = 0; e < cfg.er_antennas; ++e)
    for (int m = 0; m < cfg.num_bs; ++m) s.eavesdropper.block(m * cfg.tx_antennas, e, cfg.tx_antennas, 1) = draw_block(s.er_position, m);
  return s;
}

// ---------------------------------------------------------------------------
// Cache placement and cooperation

/// Fractional cache placement c(f, m) in [0, 1].
struct CacheState {
  Eigen::MatrixXd c;  // num_files x num_bs

  static CacheState filled(int num_files, int num_bs, double value) {
    return {Eigen::MatrixXd::Constant(num_files, num_bs, value)};
  }
  int num_files() const { return static_cast<int>(c.rows()); }
  int num_bs() const { return static_cast<int>(c.cols()); }
};

/// Binary participation q(f, m) over requested files (rows, ascending file
/// id) and BSs (columns).
class Cooperation {
 public:
  Cooperation() = default;
  Cooperation(std::vector<int> files, int num_bs, bool value = false)
      : files_(std::move(files)), num_bs_(num_bs), bits_(files_.size() * num_bs, value ? 1 : 0) {}

  static Cooperation full(const Scenario& s) { return Cooperation(s.requested_files(), s.num_bs, true); }
  static Cooperation empty(const Scenario& s) { return Cooperation(s.requested_files(), s.num_bs, false); }

  int num_files() const { return static_cast<int>(files_.size()); }
  int num_bs() const { return num_bs_; }
  int size() const { return num_files() * num_bs_; }
  const std::vector<int>& files() const { return files_; }

  bool get(int row, int m) const { return bits_[index(row, m)] != 0; }
  void set(int row, int m, bool v) { bits_[index(row, m)] = v ? 1 : 0; }

  /// Row of a file id, or -1 if the file is not requested.
  int row_of(int file) const {
    auto it = std::lower_bound(files_.begin(), files_.end(), file);
    return (it != files_.end() && *it == file) ? static_cast<int>(it - files_.begin()) : -1;
  }

  int count() const {
    int n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  /// Bit (row * num_bs + m) of the mask is q(row, m).
  std::uint64_t mask() const {
    std::uint64_t out = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i]) out |= (std::uint64_t{1} << i);
    return out;
  }
  void set_mask(std::uint64_t mask) {
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] = (mask >> i) & 1u;
  }

  /// True if every pair of this plan is also in `other`.
  bool subset_of(const Cooperation& other) const {
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i] && !other.bits_[i]) return false;
    return true;
  }

  /// Number of BSs taking part in at least one file.
  int cooperating_bs() const {
    int n = 0;
    for (int m = 0; m < num_bs_; ++m) {
      for (int r = 0; r < num_files(); ++r) {
        if (get(r, m)) {
          ++n;
          break;
        }
      }
    }
    return n;
  }

  bool operator==(const Cooperation&) const = default;

 private:
  std::size_t index(int row, int m) const {
    if (row < 0 || row >= num_files() || m < 0 || m >= num_bs_) throw std::out_of_range("cooperation index");
    return static_cast<std::size_t>(row) * num_bs_ + m;
  }

  std::vector<int> files_;
  int num_bs_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace cachesec
