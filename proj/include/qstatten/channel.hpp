#pragma once

// Photon-loss and shot-noise pipeline.
//
// A source emits N photons (pairs) per measurement setting. Each survives the
// fiber(s) with probability exp(-sum(alpha_i L_i)/10) (base e, default) or
// 10^(-sum(alpha_i L_i)/10) (base 10). The surviving number is binomial; the
// measured count for setting k is Poisson with mean round_half_up(N~ Tr M_k rho).
//
// Stream layout: every call site owns an RngStream. draw_measured_counts
// derives child(k) for setting k (per_setting mode) or child(eta) for the
// single shared transmission draw (per_state mode); child(k) also feeds the
// Poisson draw of setting k.

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qstatten/povm.hpp"
#include "qstatten/qlinalg.hpp"

namespace qstatten {

enum class AttenuationBase { e, ten };
enum class TransmissionMode { per_setting, per_state };
enum class LossModel { binomial, none };
enum class ShotNoise { poisson, mean };

struct ChannelOptions {
  AttenuationBase attenuation_base = AttenuationBase::e;
  TransmissionMode transmission_mode = TransmissionMode::per_setting;
  LossModel loss = LossModel::binomial;
  ShotNoise shot_noise = ShotNoise::poisson;
};

/// One fiber: attenuation in dB/km and length in km.
struct FiberSpec {
  double alpha = 0.0;
  double length = 0.0;

  void validate() const {
    if (!std::isfinite(alpha) || !std::isfinite(length) || alpha < 0.0 || length < 0.0) {
      std::ostringstream os;
      os << "FiberSpec: alpha and length must be finite and non-negative (alpha=" << alpha << ", length=" << length
         << ")";
      throw std::invalid_argument(os.str());
    }
  }
};

struct TransmissionDraw {
  std::int64_t produced = 0;
  std::int64_t survived = 0;
  double survival_prob = 1.0;
};

struct CountVector {
  std::vector<std::int64_t> counts;

  int size() const { return static_cast<int>(counts.size()); }
  std::int64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }
  std::int64_t operator[](int k) const { return counts.at(static_cast<std::size_t>(k)); }
  bool operator==(const CountVector&) const = default;
};

/// floor(x + 0.5); the tie rule for fractional photon numbers.
inline double round_half_up(double x) { return std::floor(x + 0.5); }

/// SplitMix64 finalizer, used to derive engine seeds from (seed, stream).
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seeded random stream. Identical (seed, stream) pairs give identical
/// sequences; child(i) derives an independent stream deterministically.
class RngStream {
 public:
  using Engine = boost::random::mt19937_64;

  RngStream(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream), engine_(splitmix64(seed ^ splitmix64(stream))) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  RngStream child(std::uint64_t index) const {
    return RngStream(seed_, splitmix64(stream_ + 0x632BE59BD9B4E019ULL * (index + 1)));
  }

  Engine& engine() { return engine_; }

  double uniform(double lo, double hi) { return boost::random::uniform_real_distribution<double>(lo, hi)(engine_); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  Engine engine_;
};

inline double survival_probability(std::span<const FiberSpec> fibers,
                                   AttenuationBase base = AttenuationBase::e) {
  if (fibers.empty() || fibers.size() > 2) {
    throw std::invalid_argument("survival_probability: expected 1 or 2 fibers, got " + std::to_string(fibers.size()));
  }
  double exponent = 0.0;
  for (const FiberSpec& f : fibers) {
    f.validate();
    exponent += f.alpha * f.length;
  }
  exponent /= 10.0;
  return base == AttenuationBase::e ? std::exp(-exponent) : std::pow(10.0, -exponent);
}

inline double survival_probability(std::initializer_list<FiberSpec> fibers,
                                   AttenuationBase base = AttenuationBase::e) {
  return survival_probability(std::span<const FiberSpec>(fibers.begin(), fibers.size()), base);
}

inline TransmissionDraw draw_transmitted(std::int64_t produced, double p, RngStream& rng) {
  if (produced < 0) throw std::invalid_argument("draw_transmitted: produced must be non-negative");
  if (!(p >= 0.0 && p <= 1.0)) {
    std::ostringstream os;
    os << "draw_transmitted: survival probability " << p << " outside [0,1]";
    throw std::invalid_argument(os.str());
  }
  std::int64_t survived = produced;
  if (p == 0.0) {
    survived = 0;
  } else if (p < 1.0 && produced > 0) {
    survived = boost::random::binomial_distribution<std::int64_t, double>(produced, p)(rng.engine());
  }
  return {produced, survived, p};
}

inline std::int64_t draw_poisson(double mean, RngStream& rng) {
  if (!(mean > 0.0)) return 0;
  return boost::random::poisson_distribution<std::int64_t, double>(mean)(rng.engine());
}

namespace detail {

inline void require_matching_dims(const DensityMatrix& rho, const PovmSet& povm, const char* what) {
  if (rho.dim() != povm.dim()) {
    std::ostringstream os;
    os << what << ": state dimension " << rho.dim() << " does not match POVM dimension " << povm.dim();
    throw std::invalid_argument(os.str());
  }
}

inline std::int64_t rounded_count(double photons, double prob) {
  return static_cast<std::int64_t>(std::max(0.0, round_half_up(photons * prob)));
}

}  // namespace detail

/// e_k = round_half_up(N Tr(M_k rho)), clamped at zero.
inline CountVector expected_counts(const DensityMatrix& rho, const PovmSet& povm, std::int64_t produced) {
  detail::require_matching_dims(rho, povm, "expected_counts");
  if (produced < 0) throw std::invalid_argument("expected_counts: produced must be non-negative");
  const RealVector probs = povm.probabilities(rho.matrix());
  CountVector out;
  out.counts.reserve(static_cast<std::size_t>(povm.eta()));
  for (int k = 0; k < povm.eta(); ++k) out.counts.push_back(detail::rounded_count(static_cast<double>(produced), probs(k)));
  return out;
}

/// Simulated detector counts after fiber loss and shot noise. One fiber per
/// party: a single system takes one fiber, a bipartite system two.
inline CountVector draw_measured_counts(const DensityMatrix& rho_in, const PovmSet& povm, std::int64_t produced,
                                        std::span<const FiberSpec> fibers, RngStream& rng,
                                        const ChannelOptions& options = {}) {
  detail::require_matching_dims(rho_in, povm, "draw_measured_counts");
  if (produced < 0) throw std::invalid_argument("draw_measured_counts: produced must be non-negative");
  if (static_cast<int>(fibers.size()) != povm.parties()) {
    std::ostringstream os;
    os << "draw_measured_counts: " << fibers.size() << " fiber(s) given for a " << povm.parties() << "-party system";
    throw std::invalid_argument(os.str());
  }
  const double p = options.loss == LossModel::none ? 1.0 : survival_probability(fibers, options.attenuation_base);
  const RealVector probs = povm.probabilities(rho_in.matrix());
  const int eta = povm.eta();

  std::int64_t shared = produced;
  if (options.transmission_mode == TransmissionMode::per_state) {
    RngStream s = rng.child(static_cast<std::uint64_t>(eta));
    shared = draw_transmitted(produced, p, s).survived;
  }

  CountVector out;
  out.counts.reserve(static_cast<std::size_t>(eta));
  for (int k = 0; k < eta; ++k) {
    RngStream s = rng.child(static_cast<std::uint64_t>(k));
    const std::int64_t arrived =
        options.transmission_mode == TransmissionMode::per_state ? shared : draw_transmitted(produced, p, s).survived;
    const std::int64_t mean = detail::rounded_count(static_cast<double>(arrived), probs(k));
    out.counts.push_back(options.shot_noise == ShotNoise::mean ? mean
                                                               : draw_poisson(static_cast<double>(mean), s));
  }
  return out;
}

inline CountVector draw_measured_counts(const DensityMatrix& rho_in, const PovmSet& povm, std::int64_t produced,
                                        std::initializer_list<FiberSpec> fibers, RngStream& rng,
                                        const ChannelOptions& options = {}) {
  return draw_measured_counts(rho_in, povm, produced, std::span<const FiberSpec>(fibers.begin(), fibers.size()), rng,
                              options);
}

}  // namespace qstatten
