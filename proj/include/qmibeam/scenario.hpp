// SPDX-License-Identifier: Apache-2.0
//
// Simulation world: a uniform linear array, incoherently scattered
// sources described by angular power densities, and snapshot generation
// for sample covariance estimates.
//
// Scattered covariances are discretized integrals
//     R = sigma^2 * sum_g w_g a(theta_g) a(theta_g)^H,
// on a uniform midpoint grid over the density support with the weights
// normalized to unit mass, so tr(R) = sigma^2 * N exactly. Snapshots are
// drawn as R^{1/2} g with g circularly symmetric complex Gaussian from a
// per-call xoshiro256++ stream; nothing touches global state.

#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>

#include "qmibeam/hermitian.hpp"
#include "qmibeam/rng.hpp"

namespace qmibeam {

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ArrayGeometry {
  Eigen::Index n_sensors = 10;
  double spacing_wavelengths = 0.5;
};

/// Frozen eigenvalue threshold under which the scattered-source covariance
/// reproduces the reference rank progression 2..10 over the standard
/// spread grid; calibrated once against that sequence.
inline constexpr double kScatterRankTol = 1e-7;

inline double db_to_power(double db) { return std::pow(10.0, db / 10.0); }

/// Response of the array to a plane wave from theta (degrees, broadside
/// convention): entry k is exp(j 2 pi d k sin theta), so |a|^2 = N.
inline CVector steering_vector(double theta_deg, const ArrayGeometry& geom) {
  if (!(std::abs(theta_deg) <= 90.0))
    throw std::invalid_argument("steering_vector: angle must lie in [-90, 90] degrees");
  const double phase_step =
      2.0 * M_PI * geom.spacing_wavelengths * std::sin(theta_deg * M_PI / 180.0);
  CVector a(geom.n_sensors);
  for (Eigen::Index k = 0; k < geom.n_sensors; ++k)
    a[k] = std::polar(1.0, phase_step * double(k));
  return a;
}

struct AngularDensity {
  enum class Kind { Gaussian, Uniform, TruncatedLaplacian, Point };
  Kind kind = Kind::Gaussian;
  double central_deg = 0.0;
  // Gaussian: full angular spread in degrees (standard deviation is
  // spread/2, support truncated at +-2.5 standard deviations; this
  // convention is what reproduces the reference rank progression of the
  // scattered-source covariance). Uniform: full width in degrees.
  // TruncatedLaplacian: dimensionless scale applied to the angle in
  // radians. Point: unused.
  double spread = 0.0;
  std::optional<std::pair<double, double>> support_deg;

  std::pair<double, double> support() const {
    if (support_deg) return *support_deg;
    switch (kind) {
      case Kind::Gaussian:
        return {central_deg - 1.25 * spread, central_deg + 1.25 * spread};
      case Kind::Uniform:
        return {central_deg - 0.5 * spread, central_deg + 0.5 * spread};
      case Kind::TruncatedLaplacian:
        throw ScenarioError("truncated_laplacian density requires explicit support");
      case Kind::Point:
        return {central_deg, central_deg};
    }
    return {central_deg, central_deg};
  }

  double unnormalized(double theta_deg) const {
    switch (kind) {
      case Kind::Gaussian: {
        const double d = (theta_deg - central_deg) / (0.5 * spread);
        return std::exp(-0.5 * d * d);
      }
      case Kind::Uniform:
        return 1.0;
      case Kind::TruncatedLaplacian: {
        const double d = std::abs(theta_deg - central_deg) * M_PI / 180.0;
        return std::exp(-d / spread);
      }
      case Kind::Point:
        return 1.0;
    }
    return 0.0;
  }
};

/// Discretized scattered-source covariance with tr(R) = sigma^2 * N.
inline HermitianMatrix scattered_covariance(const AngularDensity& density, double power_db,
                                            const ArrayGeometry& geom,
                                            Eigen::Index grid_points = 2000) {
  const double sigma2 = db_to_power(power_db);
  if (density.kind == AngularDensity::Kind::Point) {
    const CVector a = steering_vector(density.central_deg, geom);
    return HermitianMatrix::Symmetrized(sigma2 * (a * a.adjoint()));
  }
  if (grid_points < 2)
    throw std::invalid_argument("scattered_covariance: need at least 2 grid points");
  auto [lo, hi] = density.support();
  lo = std::max(lo, -90.0);
  hi = std::min(hi, 90.0);
  if (!(lo < hi)) throw std::invalid_argument("scattered_covariance: empty angular support");

  const double step = (hi - lo) / double(grid_points);
  RVector weights(grid_points);
  for (Eigen::Index g = 0; g < grid_points; ++g)
    weights[g] = density.unnormalized(lo + (double(g) + 0.5) * step);
  const double mass = weights.sum();
  if (!(mass > 0.0)) throw std::invalid_argument("scattered_covariance: density vanishes");
  weights /= mass;

  CMatrix r = CMatrix::Zero(geom.n_sensors, geom.n_sensors);
  for (Eigen::Index g = 0; g < grid_points; ++g) {
    const CVector a = steering_vector(lo + (double(g) + 0.5) * step, geom);
    r += weights[g] * (a * a.adjoint());
  }
  return HermitianMatrix::Symmetrized(sigma2 * r);
}

struct SourceSpec {
  AngularDensity density;
  double power_db = 0.0;
};

struct Scenario {
  ArrayGeometry geometry;
  SourceSpec signal;
  std::vector<SourceSpec> interferers;
  double noise_power_db = 0.0;
  AngularDensity presumed_signal;
  Eigen::Index grid_points = 2000;

  HermitianMatrix true_signal_cov() const {
    return scattered_covariance(signal.density, signal.power_db, geometry, grid_points);
  }
  HermitianMatrix interference_noise_cov() const {
    CMatrix r = db_to_power(noise_power_db) *
                CMatrix::Identity(geometry.n_sensors, geometry.n_sensors);
    for (const SourceSpec& src : interferers)
      r += scattered_covariance(src.density, src.power_db, geometry, grid_points).mat();
    return HermitianMatrix::Symmetrized(r);
  }
  /// Presumed covariance: the presumed density shape at the signal power.
  HermitianMatrix presumed_signal_cov() const {
    return scattered_covariance(presumed_signal, signal.power_db, geometry, grid_points);
  }
};

struct SnapshotStreams {
  CMatrix signal;        // N x T
  CMatrix interference;  // N x T, all interferers summed
  CMatrix noise;         // N x T
};

/// Component streams drawn independently per snapshot in fixed order
/// (signal, interferers, noise); deterministic for a fixed seed.
inline SnapshotStreams generate_snapshots(const Scenario& scenario, Eigen::Index t_count,
                                          std::uint64_t seed) {
  if (t_count < 1) throw std::invalid_argument("generate_snapshots: need T >= 1");
  const Eigen::Index n = scenario.geometry.n_sensors;
  const CMatrix l_sig = sqrt_psd(scenario.true_signal_cov()).mat();
  std::vector<CMatrix> l_int;
  l_int.reserve(scenario.interferers.size());
  for (const SourceSpec& src : scenario.interferers)
    l_int.push_back(
        sqrt_psd(scattered_covariance(src.density, src.power_db, scenario.geometry,
                                      scenario.grid_points))
            .mat());
  const double noise_amp = std::sqrt(db_to_power(scenario.noise_power_db));

  Xoshiro256 rng(seed);
  SnapshotStreams out{CMatrix(n, t_count), CMatrix::Zero(n, t_count), CMatrix(n, t_count)};
  CVector g(n);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) g[i] = rng.complex_normal();
    out.signal.col(t) = l_sig * g;
    for (const CMatrix& l : l_int) {
      for (Eigen::Index i = 0; i < n; ++i) g[i] = rng.complex_normal();
      out.interference.col(t) += l * g;
    }
    for (Eigen::Index i = 0; i < n; ++i) g[i] = rng.complex_normal();
    out.noise.col(t) = noise_amp * g;
  }
  return out;
}

/// Sample covariance (1/T) sum y y^H of simulated snapshots.
inline HermitianMatrix simulate_snapshots(const Scenario& scenario, Eigen::Index t_count,
                                          std::uint64_t seed) {
  const SnapshotStreams streams = generate_snapshots(scenario, t_count, seed);
  const CMatrix y = streams.signal + streams.interference + streams.noise;
  return HermitianMatrix::Symmetrized((y * y.adjoint()) / double(t_count));
}

// ---------------------------------------------------------------------------
// flat key=value scenario files
// ---------------------------------------------------------------------------

namespace detail {

struct KeyValueFile {
  std::map<std::string, std::pair<std::string, int>> entries;  // value, line

  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  static KeyValueFile parse(std::istream& in, const std::string& origin) {
    KeyValueFile kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ScenarioError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty())
        throw ScenarioError(origin + ":" + std::to_string(lineno) + ": empty key");
      kv.entries[key] = {value, lineno};
    }
    return kv;
  }

  bool has(const std::string& key) const { return entries.count(key) > 0; }

  std::string require(const std::string& key, const std::string& origin) const {
    const auto it = entries.find(key);
    if (it == entries.end()) throw ScenarioError(origin + ": missing key '" + key + "'");
    return it->second.first;
  }

  double number(const std::string& key, const std::string& origin) const {
    const auto it = entries.find(key);
    if (it == entries.end()) throw ScenarioError(origin + ": missing key '" + key + "'");
    try {
      size_t pos = 0;
      const double v = std::stod(it->second.first, &pos);
      if (pos != it->second.first.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ScenarioError(origin + ":" + std::to_string(it->second.second) +
                          ": bad number for '" + key + "'");
    }
  }

  double number_or(const std::string& key, double fallback, const std::string& origin) const {
    return has(key) ? number(key, origin) : fallback;
  }
};

inline AngularDensity parse_density(const KeyValueFile& kv, const std::string& prefix,
                                    const std::string& origin) {
  AngularDensity d;
  const std::string kind = kv.require(prefix + ".kind", origin);
  if (kind == "gaussian") {
    d.kind = AngularDensity::Kind::Gaussian;
    d.spread = kv.number(prefix + ".spread_deg", origin);
  } else if (kind == "uniform") {
    d.kind = AngularDensity::Kind::Uniform;
    d.spread = kv.number(prefix + ".spread_deg", origin);
  } else if (kind == "truncated_laplacian") {
    d.kind = AngularDensity::Kind::TruncatedLaplacian;
    d.spread = kv.number(prefix + ".scale", origin);
  } else if (kind == "point") {
    d.kind = AngularDensity::Kind::Point;
  } else {
    throw ScenarioError(origin + ": unknown density kind '" + kind + "' for " + prefix);
  }
  d.central_deg = kv.number(prefix + ".central_deg", origin);
  if (kv.has(prefix + ".support_lo_deg") || kv.has(prefix + ".support_hi_deg")) {
    d.support_deg = {kv.number(prefix + ".support_lo_deg", origin),
                     kv.number(prefix + ".support_hi_deg", origin)};
  }
  return d;
}

}  // namespace detail

inline Scenario parse_scenario(std::istream& in, const std::string& origin = "<scenario>") {
  const auto kv = detail::KeyValueFile::parse(in, origin);
  Scenario sc;
  sc.geometry.n_sensors = static_cast<Eigen::Index>(kv.number("n_sensors", origin));
  if (sc.geometry.n_sensors < 1) throw ScenarioError(origin + ": n_sensors must be >= 1");
  sc.geometry.spacing_wavelengths = kv.number_or("spacing_wavelengths", 0.5, origin);
  sc.noise_power_db = kv.number_or("noise_power_db", 0.0, origin);
  sc.grid_points = static_cast<Eigen::Index>(kv.number_or("grid_points", 2000, origin));
  sc.signal.density = detail::parse_density(kv, "signal", origin);
  sc.signal.power_db = kv.number("signal.power_db", origin);
  sc.presumed_signal = detail::parse_density(kv, "presumed", origin);
  for (int idx = 1;; ++idx) {
    const std::string prefix = "interferer" + std::to_string(idx);
    if (!kv.has(prefix + ".kind")) break;
    SourceSpec src;
    src.density = detail::parse_density(kv, prefix, origin);
    src.power_db = kv.number(prefix + ".power_db", origin);
    sc.interferers.push_back(std::move(src));
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ScenarioError("cannot open scenario file: " + path);
  return parse_scenario(f, path);
}

}  // namespace qmibeam
