#pragma once

// Observables evaluated on (profile, position) pairs, with their exact
// stationary means subtracted so correlation estimates need no empirical
// centering.

#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "liftlab/matrix.hpp"
#include "liftlab/spectral.hpp"

namespace liftlab {

struct Observable {
  enum class Kind { FourierMode, Potential, PositionIndicator, CustomLinear, CustomQuadratic };

  Kind kind = Kind::FourierMode;
  int index = 0;
  std::string name;
  Vec coeff;    // CustomLinear: f = coeff . profile
  Matrix qmat;  // CustomQuadratic: f = profile^T qmat profile - center

  static Observable fourier_mode(int k) {
    Observable o;
    o.kind = Kind::FourierMode;
    o.index = k;
    o.name = "mode:" + std::to_string(k);
    return o;
  }

  static Observable potential_observable() {
    Observable o;
    o.kind = Kind::Potential;
    o.name = "potential";
    return o;
  }

  static Observable position_indicator(int site) {
    Observable o;
    o.kind = Kind::PositionIndicator;
    o.index = site;
    o.name = "posind:" + std::to_string(site);
    return o;
  }

  static Observable custom_linear(std::string label, Vec v) {
    Observable o;
    o.kind = Kind::CustomLinear;
    o.name = std::move(label);
    o.coeff = std::move(v);
    return o;
  }

  static Observable custom_quadratic(std::string label, Matrix a) {
    Observable o;
    o.kind = Kind::CustomQuadratic;
    o.name = std::move(label);
    o.qmat = std::move(a);
    return o;
  }
};

// Observables bound to a lattice size: centering constants are resolved
// once, and evaluation becomes a cheap switch. Field observables can also
// be evaluated directly on mode coordinates, which the exactly-solvable
// samplers keep as their working representation.
struct BoundObservableSet {
  std::shared_ptr<const SpectralTable> table;
  std::vector<Observable> items;
  Vec centers;
  std::vector<Vec> coeff_modes;     // CustomLinear coefficients, mode basis
  std::vector<Matrix> qmat_modes;   // CustomQuadratic forms, mode basis

  int size() const { return static_cast<int>(items.size()); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& o : items) out.push_back(o.name);
    return out;
  }

  // position = -1 marks samplers with no walker (field-only state).
  double eval(int j, std::span<const double> profile, int position) const {
    const Observable& o = items[j];
    switch (o.kind) {
      case Observable::Kind::FourierMode:
        return table->mode_dot(o.index, profile);
      case Observable::Kind::Potential: {
        double u = 0.0;
        int n = table->lattice.n;
        for (int i = 0; i < n; ++i) {
          double d = profile[table->lattice.next(i)] - profile[i];
          u += d * d;
        }
        return 0.5 * u - centers[j];
      }
      case Observable::Kind::PositionIndicator:
        if (position < 0)
          throw std::invalid_argument(
              "observable " + o.name + ": sampler has no walker position");
        return (position == o.index ? 1.0 : 0.0) - centers[j];
      case Observable::Kind::CustomLinear:
        return dot(std::span<const double>(o.coeff), profile);
      case Observable::Kind::CustomQuadratic:
        return quad_form(profile, o.qmat, profile) - centers[j];
    }
    throw std::logic_error("eval: unknown observable kind");
  }

  // z[k] are coordinates in the eigenbasis (z[0] unused for mean-zero
  // fields). Walker-dependent observables have no meaning here.
  double eval_modes(int j, std::span<const double> z) const {
    const Observable& o = items[j];
    switch (o.kind) {
      case Observable::Kind::FourierMode:
        return z[o.index];
      case Observable::Kind::Potential: {
        double u = 0.0;
        int n = table->lattice.n;
        for (int k = 1; k < n; ++k)
          u += table->eigenvalues[k] * z[k] * z[k];
        return 0.5 * u - centers[j];
      }
      case Observable::Kind::PositionIndicator:
        throw std::invalid_argument(
            "observable " + o.name + ": sampler has no walker position");
      case Observable::Kind::CustomLinear:
        return dot(std::span<const double>(coeff_modes[j]), z);
      case Observable::Kind::CustomQuadratic:
        return quad_form(z, qmat_modes[j], z) - centers[j];
    }
    throw std::logic_error("eval_modes: unknown observable kind");
  }
};

inline BoundObservableSet bind_observables(
    std::shared_ptr<const SpectralTable> table, std::vector<Observable> items) {
  int n = table->lattice.n;
  BoundObservableSet set{table, std::move(items), {}, {}, {}};
  set.centers.assign(set.items.size(), 0.0);
  set.coeff_modes.resize(set.items.size());
  set.qmat_modes.resize(set.items.size());
  Matrix cov;
  bool have_cov = false;
  for (std::size_t j = 0; j < set.items.size(); ++j) {
    const Observable& o = set.items[j];
    switch (o.kind) {
      case Observable::Kind::FourierMode:
        if (o.index < 0 || o.index >= n)
          throw std::invalid_argument("fourier mode index out of range");
        break;
      case Observable::Kind::Potential:
        set.centers[j] = 0.5 * (n - 1);
        break;
      case Observable::Kind::PositionIndicator:
        if (o.index < 0 || o.index >= n)
          throw std::invalid_argument("position indicator site out of range");
        set.centers[j] = 1.0 / n;
        break;
      case Observable::Kind::CustomLinear: {
        if (static_cast<int>(o.coeff.size()) != n)
          throw std::invalid_argument("custom linear length mismatch");
        Vec cm(n, 0.0);
        for (int k = 0; k < n; ++k) cm[k] = table->mode_dot(k, o.coeff);
        set.coeff_modes[j] = std::move(cm);
        break;
      }
      case Observable::Kind::CustomQuadratic: {
        if (o.qmat.rows != n || o.qmat.cols != n)
          throw std::invalid_argument("custom quadratic shape mismatch");
        if (!have_cov) {
          cov = stationary_covariance(*table);
          have_cov = true;
        }
        // Stationary mean of the quadratic form: tr(sym(A)|_S C). C already
        // projects onto S on both sides, so plain tr(sym(A) C) suffices.
        Matrix sa = symmetrize(o.qmat);
        set.centers[j] = trace(matmul(sa, cov));
        // sym(A) conjugated into the eigenbasis: M^T sym(A) M.
        Matrix modes(n, n);
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k) modes(i, k) = table->modes[k][i];
        set.qmat_modes[j] = matmul(transpose(modes), matmul(sa, modes));
        break;
      }
    }
  }
  return set;
}

// Regular emission grid. spacing = +infinity means no emissions at all.
struct ObserverSchedule {
  double spacing = 0.0;
  BoundObservableSet set;

  static ObserverSchedule none() {
    return ObserverSchedule{std::numeric_limits<double>::infinity(), {}};
  }
};

// Column-light trajectory container; one row per emission.
struct TrajectorySeries {
  Vec times;
  std::vector<int> positions;            // -1 when the sampler has no walker
  std::vector<std::string> obs_names;
  std::vector<Vec> obs;                  // obs[j] is the series of observable j
  Vec work;                              // cumulative work units; empty if untracked

  std::size_t size() const { return times.size(); }
};

}  // namespace liftlab
