#pragma once

// Estimation utilities: running moments, radix-2 FFT autocovariance,
// batch-means errors, weighted least squares, envelope extraction, and the
// distribution-test statistics the checks rely on.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace liftlab {

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // unbiased
  std::size_t count = 0;
};

inline MeanVar mean_var(std::span<const double> xs) {
  MeanVar out;
  out.count = xs.size();
  if (xs.empty()) return out;
  double m = 0.0, m2 = 0.0;
  std::size_t k = 0;
  for (double x : xs) {
    ++k;
    double d = x - m;
    m += d / static_cast<double>(k);
    m2 += d * (x - m);
  }
  out.mean = m;
  out.var = xs.size() > 1 ? m2 / static_cast<double>(xs.size() - 1) : 0.0;
  return out;
}

// Iterative in-place radix-2 transform; length must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fft_radix2: length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double angle = 2.0 * std::numbers::pi / static_cast<double>(len);
    if (!inverse) angle = -angle;
    std::complex<double> wl(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

// Autocovariance of an analytically centered series (no empirical mean is
// subtracted): c[k] = (1/(N-k)) sum_i x_i x_{i+k}, for k < max_lag.
inline std::vector<double> autocovariance_fft(std::span<const double> x,
                                              std::size_t max_lag) {
  std::size_t n = x.size();
  if (n == 0) return {};
  max_lag = std::min(max_lag, n - 1);
  std::size_t m = 1;
  while (m < 2 * n) m <<= 1;
  std::vector<std::complex<double>> a(m);
  for (std::size_t i = 0; i < n; ++i) a[i] = x[i];
  fft_radix2(a, false);
  for (auto& v : a) v = std::complex<double>(std::norm(v), 0.0);
  fft_radix2(a, true);
  std::vector<double> c(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k)
    c[k] = a[k].real() / static_cast<double>(n - k);
  return c;
}

// Standard error of the series mean by non-overlapping batch means.
inline double batch_means_stderr(std::span<const double> x, int batches) {
  if (batches < 2) throw std::invalid_argument("batch_means_stderr: need >= 2 batches");
  std::size_t n = x.size();
  std::size_t per = n / static_cast<std::size_t>(batches);
  if (per == 0) throw std::invalid_argument("batch_means_stderr: series too short");
  std::vector<double> means(batches, 0.0);
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < per; ++i)
      s += x[static_cast<std::size_t>(b) * per + i];
    means[b] = s / static_cast<double>(per);
  }
  MeanVar mv = mean_var(means);
  return std::sqrt(mv.var / static_cast<double>(batches));
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double chi2 = 0.0;
  int points = 0;
};

// Weighted least squares for y = intercept + slope * x, weights 1/sigma^2.
// When the fit is poor (chi2/dof > 1) the reported errors are scaled by
// sqrt(chi2/dof) so model violation shows up in the uncertainty.
inline LinearFit wls_fit(std::span<const double> x, std::span<const double> y,
                         std::span<const double> w) {
  std::size_t n = x.size();
  if (y.size() != n || w.size() != n)
    throw std::invalid_argument("wls_fit: length mismatch");
  if (n < 2) throw std::invalid_argument("wls_fit: need at least 2 points");
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    swx += w[i] * x[i];
    swy += w[i] * y[i];
    swxx += w[i] * x[i] * x[i];
    swxy += w[i] * x[i] * y[i];
  }
  double det = sw * swxx - swx * swx;
  if (det <= 0.0 || sw <= 0.0) throw std::invalid_argument("wls_fit: degenerate design");
  LinearFit fit;
  fit.points = static_cast<int>(n);
  fit.slope = (sw * swxy - swx * swy) / det;
  fit.intercept = (swxx * swy - swx * swxy) / det;
  for (std::size_t i = 0; i < n; ++i) {
    double r = y[i] - fit.intercept - fit.slope * x[i];
    fit.chi2 += w[i] * r * r;
  }
  double var_slope = sw / det;
  double var_intercept = swxx / det;
  double inflate = 1.0;
  if (n > 2) {
    double reduced = fit.chi2 / static_cast<double>(n - 2);
    if (reduced > 1.0) inflate = reduced;
  }
  fit.slope_se = std::sqrt(var_slope * inflate);
  fit.intercept_se = std::sqrt(var_intercept * inflate);
  return fit;
}

// Interior local maxima of |values|; plateaus count once at their left edge.
inline std::vector<std::size_t> local_maxima_abs(std::span<const double> values) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 1; j + 1 < values.size(); ++j) {
    double a = std::abs(values[j - 1]);
    double b = std::abs(values[j]);
    double c = std::abs(values[j + 1]);
    if (b >= a && b > c) idx.push_back(j);
  }
  return idx;
}

// Kolmogorov-Smirnov statistic of samples against an analytic CDF.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(samples.begin(), samples.end());
  double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double f = cdf(samples[i]);
    double lo = static_cast<double>(i) / n;
    double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(std::abs(f - lo), std::abs(hi - f)));
  }
  return d;
}

// 5% critical value of the one-sample KS statistic (asymptotic).
inline double ks_critical_5pct(std::size_t n) {
  return 1.3581 / std::sqrt(static_cast<double>(n));
}

// 95th percentile of chi-square, df = 1..10.
inline double chi2_quantile_95(int df) {
  static constexpr double table[] = {
      3.841458820694124,  5.991464547107979,  7.814727903251179,
      9.487729036781154,  11.070497693516351, 12.591587243743977,
      14.067140449340169, 15.507313055865453, 16.918977604620448,
      18.307038053275146};
  if (df < 1 || df > 10)
    throw std::domain_error("chi2_quantile_95: df out of tabulated range");
  return table[df - 1];
}

// Pearson chi-square statistic for equiprobable cells.
inline double chi2_uniform_statistic(std::span<const std::uint64_t> counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (counts.empty() || total == 0)
    throw std::invalid_argument("chi2_uniform_statistic: empty counts");
  double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) {
    double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return stat;
}

}  // namespace liftlab
