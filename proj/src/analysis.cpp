#include "weaktrace/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "weaktrace/errors.hpp"
#include "weaktrace/meters.hpp"

namespace weaktrace {

double Spectrum::total_power() const { return std::accumulate(power.begin(), power.end(), 0.0); }

Spectrum power_spectrum(std::span<const double> series, double dt) {
  const std::size_t n = series.size();
  if (n < 2) throw ValidationError("power spectrum needs at least 2 samples");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("time step must be positive");

  // Twiddles indexed by (k * j) mod n keep every phase reduced exactly.
  std::vector<Complex> twiddle(n);
  for (std::size_t j = 0; j < n; ++j) twiddle[j] = std::polar(1.0, -2.0 * kPi * static_cast<double>(j) / static_cast<double>(n));

  const double duration = static_cast<double>(n) * dt;
  Spectrum out{1.0 / duration, std::vector<double>(n / 2 + 1, 0.0)};
  for (std::size_t k = 0; k <= n / 2; ++k) {
    Complex acc = 0.0;
    std::size_t idx = 0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += series[j] * twiddle[idx];
      idx += k;
      if (idx >= n) idx -= n;
    }
    const double p = std::norm(acc * dt) / duration;
    const bool self_paired = k == 0 || 2 * k == n;
    out.power[k] = self_paired ? p : 2.0 * p;
  }
  return out;
}

Spectrum power_spectrum(std::span<const double> times, std::span<const double> series) {
  if (times.size() != series.size()) throw ValidationError("time grid and series lengths differ");
  if (times.size() < 2) throw ValidationError("power spectrum needs at least 2 samples");
  const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (std::abs((times[i] - times[i - 1]) - dt) > 1e-9 * std::abs(dt))
      throw ValidationError("time grid is not uniform");
  }
  return power_spectrum(series, dt);
}

double peak_power(const Spectrum& spectrum, double f) {
  if (spectrum.power.empty()) throw ValidationError("empty spectrum");
  if (!(f >= 0.0 && f <= spectrum.nyquist())) throw ValidationError("frequency outside [0, Nyquist]");
  const auto bin = static_cast<std::size_t>(std::lround(f / spectrum.resolution));
  return spectrum.power[std::min(bin, spectrum.power.size() - 1)];
}

PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw ValidationError("power-law fit needs at least 3 points");
  const double n = static_cast<double>(points.size());
  double sx = 0, sy = 0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw ValidationError("power-law fit needs positive inputs");
    sx += std::log(x);
    sy += std::log(y);
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : points) {
    const double dx = std::log(x) - mx;
    const double dy = std::log(y) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw ValidationError("power-law fit needs at least two distinct abscissae");
  PowerLawFit fit;
  fit.exponent = sxy / sxx;
  fit.prefactor = std::exp(my - fit.exponent * mx);
  double ss_res = 0;
  for (const auto& [x, y] : points) {
    const double r = std::log(y) - (my + fit.exponent * (std::log(x) - mx));
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

const ArmSweep& SweepResult::arm(std::string_view label) const {
  for (const auto& a : arms) {
    if (a.arm == label) return a;
  }
  throw ValidationError("arm '" + std::string(label) + "' was not swept");
}

SweepResult leakage_sweep(const StagedModel& model, const SelectionPair& sel, std::span<const std::string> arms,
                          std::span<const double> epsilons, std::pair<std::string, std::string> ratio) {
  if (arms.empty()) throw ValidationError("leakage sweep needs at least one arm");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) throw ValidationError("sweep strengths must be positive");
    if (i > 0 && !(epsilons[i] > epsilons[i - 1])) throw ValidationError("sweep strengths must be strictly increasing");
  }
  auto index_of = [&](const std::string& label) {
    auto it = std::find(arms.begin(), arms.end(), label);
    if (it == arms.end()) throw ValidationError("ratio arm '" + label + "' is not marked");
    return static_cast<std::size_t>(it - arms.begin());
  };
  const std::size_t num = index_of(ratio.first);
  const std::size_t den = index_of(ratio.second);

  SweepResult out;
  out.epsilons.assign(epsilons.begin(), epsilons.end());
  out.ratio_numerator = ratio.first;
  out.ratio_denominator = ratio.second;
  for (const auto& a : arms) out.arms.push_back({a, {}, {}});

  for (double eps : epsilons) {
    MarkerSet markers;
    for (const auto& a : arms) markers.push_back({a, eps, std::nullopt});
    const auto traces = trace_magnitudes(attach_markers(model, std::move(markers)), sel);
    for (std::size_t i = 0; i < arms.size(); ++i) out.arms[i].points.emplace_back(eps, traces[i]);
    out.ratios.push_back(traces[num] / traces[den]);
  }
  if (epsilons.size() >= 3) {
    for (auto& a : out.arms) a.fit = fit_power_law(a.points);
  }
  return out;
}

}  // namespace weaktrace
