#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "weaktrace/circuit.hpp"
#include "weaktrace/tsvf.hpp"

namespace weaktrace {

/// One-sided power spectrum. Bin k sits at k * resolution for k = 0..N/2;
/// the +f and -f halves of the DFT are folded into one bin.
struct Spectrum {
  double resolution = 0.0;  // bin spacing, cycles per unit time
  std::vector<double> power;

  double frequency(std::size_t bin) const { return static_cast<double>(bin) * resolution; }
  double nyquist() const { return frequency(power.size() - 1); }
  double total_power() const;
};

/// Direct DFT, no window. Normalized so that total power equals sum |x|^2 dt.
Spectrum power_spectrum(std::span<const double> series, double dt);

/// Same, for an explicit time grid; rejects grids that are not uniform.
Spectrum power_spectrum(std::span<const double> times, std::span<const double> series);

/// Power of the bin nearest to `f`.
double peak_power(const Spectrum& spectrum, double f);

struct PowerLawFit {
  double exponent = 0.0;
  double prefactor = 0.0;
  double r_squared = 0.0;
};

/// Least-squares line through (ln x, ln y).
PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points);

struct ArmSweep {
  std::string arm;
  std::vector<std::pair<double, double>> points;  // (epsilon, trace magnitude)
  PowerLawFit fit;
};

struct SweepResult {
  std::vector<double> epsilons;
  std::vector<ArmSweep> arms;
  std::string ratio_numerator;
  std::string ratio_denominator;
  std::vector<double> ratios;  // trace(numerator) / trace(denominator) per epsilon

  const ArmSweep& arm(std::string_view label) const;
};

/// Marks every arm with the same strength at each sweep point and fits the
/// trace magnitudes. `ratio` names the (numerator, denominator) arms to compare.
SweepResult leakage_sweep(const StagedModel& model, const SelectionPair& sel, std::span<const std::string> arms,
                          std::span<const double> epsilons, std::pair<std::string, std::string> ratio);

}  // namespace weaktrace
