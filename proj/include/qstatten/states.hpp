#pragma once

// Deterministic input-state samples.

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "qstatten/qlinalg.hpp"

namespace qstatten {

struct StateSample {
  std::string label;
  std::vector<std::string> parameter_names;
  std::vector<PureState> states;
  std::vector<std::vector<double>> parameters;  // one row per state

  std::size_t size() const { return states.size(); }
};

/// cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>
inline PureState bloch_qubit(double theta, double phi) {
  ComplexVector a(2);
  a << std::cos(theta / 2.0), std::polar(1.0, phi) * std::sin(theta / 2.0);
  return PureState::normalized(std::move(a));
}

/// 220 points of a spherical Fibonacci lattice: z_i = 1 - (2i+1)/n,
/// azimuth i * golden angle (mod 2 pi).
inline StateSample qubit_sample(int count = 220) {
  StateSample out{"bloch" + std::to_string(count), {"theta", "phi"}, {}, {}};
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double theta = std::acos(z);
    const double phi = std::fmod(golden * i, 2.0 * std::numbers::pi);
    out.states.push_back(bloch_qubit(theta, phi));
    out.parameters.push_back({theta, phi});
  }
  return out;
}

/// (cos t1, sin t1 cos t2 e^{i p1}, sin t1 sin t2 e^{i p2})
inline PureState qutrit_state(double theta1, double theta2, double phi1, double phi2) {
  ComplexVector a(3);
  a << std::cos(theta1), std::sin(theta1) * std::cos(theta2) * std::polar(1.0, phi1),
      std::sin(theta1) * std::sin(theta2) * std::polar(1.0, phi2);
  return PureState::normalized(std::move(a));
}

/// 6 x 6 x 12 x 12 grid: theta in {(j + 1/2) pi / 12, j < 6}, phi in
/// {2 pi j / 12, j < 12}; theta1 outermost, phi2 innermost.
inline StateSample qutrit_grid() {
  StateSample out{"qutrit_grid", {"theta1", "theta2", "phi1", "phi2"}, {}, {}};
  out.states.reserve(5184);
  const double pi = std::numbers::pi;
  for (int a = 0; a < 6; ++a) {
    for (int b = 0; b < 6; ++b) {
      for (int c = 0; c < 12; ++c) {
        for (int e = 0; e < 12; ++e) {
          const double t1 = (a + 0.5) * pi / 12.0;
          const double t2 = (b + 0.5) * pi / 12.0;
          const double p1 = 2.0 * pi * c / 12.0;
          const double p2 = 2.0 * pi * e / 12.0;
          out.states.push_back(qutrit_state(t1, t2, p1, p2));
          out.parameters.push_back({t1, t2, p1, p2});
        }
      }
    }
  }
  return out;
}

/// (|00> + e^{i phi}|11>) / sqrt(2)
inline PureState phi_family(double phi) {
  ComplexVector a = ComplexVector::Zero(4);
  a(0) = 1.0 / std::numbers::sqrt2;
  a(3) = std::polar(1.0 / std::numbers::sqrt2, phi);
  return PureState::normalized(std::move(a));
}

/// (e^{i phi}|02> + |11> + e^{i phi}|20>) / sqrt(3), basis index 3a + b.
inline PureState theta_family(double phi) {
  const double amp = 1.0 / std::sqrt(3.0);
  ComplexVector a = ComplexVector::Zero(9);
  a(2) = std::polar(amp, phi);
  a(4) = amp;
  a(6) = std::polar(amp, phi);
  return PureState::normalized(std::move(a));
}

enum class PhaseFamily { phi, theta };

/// 100 states with phi_j = 2 pi j / 100.
inline StateSample phase_sample(PhaseFamily family, int count = 100) {
  StateSample out{family == PhaseFamily::phi ? "phi_family" : "theta_family", {"phi"}, {}, {}};
  for (int j = 0; j < count; ++j) {
    const double phi = 2.0 * std::numbers::pi * j / count;
    out.states.push_back(family == PhaseFamily::phi ? phi_family(phi) : theta_family(phi));
    out.parameters.push_back({phi});
  }
  return out;
}

/// One row per state: label, index, parameters, then (re, im) pairs.
inline void write_sample_table(std::ostream& os, const StateSample& sample) {
  os << "label,index";
  for (const auto& name : sample.parameter_names) os << ',' << name;
  const int dim = sample.states.empty() ? 0 : sample.states.front().dim();
  for (int k = 0; k < dim; ++k) os << ",re" << k << ",im" << k;
  os << '\n';
  for (std::size_t i = 0; i < sample.size(); ++i) {
    os << sample.label << ',' << i;
    for (double p : sample.parameters[i]) os << ',' << fmt::format("{:.17g}", p);
    for (int k = 0; k < dim; ++k) {
      const Complex z = sample.states[i].amplitudes()(k);
      os << ',' << fmt::format("{:.17g}", z.real()) << ',' << fmt::format("{:.17g}", z.imag());
    }
    os << '\n';
  }
}

}  // namespace qstatten
