#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <list>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "trackforge/core.hpp"
#include "trackforge/features.hpp"

namespace trackforge {

struct ClassifierConfig {
  double C = 1.0;
  double gamma = 1.0 / kFeatureDim;
  double kkt_tolerance = 1e-3;
  // Iteration budget for the SMO solver, in sweeps of n working-set steps.
  int max_smo_passes = 100;
  int platt_max_iter = 100;
};

// RBF-kernel SVM with sigmoid probability calibration. Support vectors are
// stored scaled; predict applies the frozen scaler internally.
struct ClassifierModel {
  std::vector<FeatureVector> support_vectors;
  std::vector<double> coefficients;  // alpha_i * y_i
  double bias = 0.0;
  double platt_a = 0.0;
  double platt_b = 0.0;
  FeatureScaler scaler;
  int iteration = 0;
  ClassifierConfig config;

  bool trained() const { return !support_vectors.empty(); }
};

// Accumulates every labeled sample since scenario start; the 1:1 class ratio
// is enforced at training time, not here.
class SampleStore {
 public:
  void add(LabeledSample s) {
    if (s.label == BinaryLabel::Human)
      ++positives_;
    else
      ++negatives_;
    samples_.push_back(std::move(s));
  }

  void add(std::span<const LabeledSample> batch) {
    for (const auto& s : batch) add(s);
  }

  std::size_t size() const { return samples_.size(); }
  std::size_t positives() const { return positives_; }
  std::size_t negatives() const { return negatives_; }
  std::span<const LabeledSample> samples() const { return samples_; }

 private:
  std::vector<LabeledSample> samples_;
  std::size_t positives_ = 0;
  std::size_t negatives_ = 0;
};

namespace detail {

inline double rbf_kernel(const FeatureVector& a, const FeatureVector& b, double gamma) {
  double d2 = 0.0;
  for (int i = 0; i < kFeatureDim; ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

// LRU cache of kernel matrix rows, bounded by a byte budget.
class KernelCache {
 public:
  KernelCache(const std::vector<FeatureVector>& x, double gamma, std::size_t budget_bytes = 64u << 20)
      : x_(x), gamma_(gamma) {
    const std::size_t n = x.size();
    norms_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (int d = 0; d < kFeatureDim; ++d) s += x[i][d] * x[i][d];
      norms_[i] = s;
    }
    max_rows_ = std::max<std::size_t>(2, std::min(n, budget_bytes / (sizeof(double) * std::max<std::size_t>(n, 1))));
  }

  double diag(int i) const { return 1.0; }  // K(x,x) = 1 for RBF

  const std::vector<double>& row(int i) {
    if (auto it = index_.find(i); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    if (lru_.size() >= max_rows_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    lru_.emplace_front(i, compute_row(i));
    index_[i] = lru_.begin();
    return lru_.front().second;
  }

 private:
  std::vector<double> compute_row(int i) const {
    const std::size_t n = x_.size();
    std::vector<double> r(n);
    const FeatureVector& xi = x_[i];
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int d = 0; d < kFeatureDim; ++d) dot += xi[d] * x_[j][d];
      r[j] = std::exp(-gamma_ * (norms_[i] + norms_[j] - 2.0 * dot));
    }
    return r;
  }

  const std::vector<FeatureVector>& x_;
  double gamma_;
  std::vector<double> norms_;
  std::size_t max_rows_;
  std::list<std::pair<int, std::vector<double>>> lru_;
  std::unordered_map<int, std::list<std::pair<int, std::vector<double>>>::iterator> index_;
};

struct SmoSolution {
  std::vector<double> alpha;
  std::vector<double> gradient;  // G_i = y_i * s_i - 1 at the solution
  double rho = 0.0;
  long iterations = 0;
};

// Sequential minimal optimization for the C-SVC dual with second-order
// working-set selection. Stops when the maximal KKT violation drops to eps.
inline SmoSolution solve_smo(const std::vector<FeatureVector>& x, const std::vector<int>& y,
                             double C, double gamma, double eps, long max_iter) {
  const int n = static_cast<int>(x.size());
  constexpr double kTau = 1e-12;
  KernelCache cache(x, gamma);

  SmoSolution sol;
  sol.alpha.assign(n, 0.0);
  sol.gradient.assign(n, -1.0);
  auto& alpha = sol.alpha;
  auto& G = sol.gradient;

  const auto in_up = [&](int t) {
    return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0);
  };
  const auto in_low = [&](int t) {
    return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < C);
  };

  for (sol.iterations = 0; sol.iterations < max_iter; ++sol.iterations) {
    int i = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < n; ++t) {
      if (!in_up(t)) continue;
      const double v = -y[t] * G[t];
      if (v > gmax) {
        gmax = v;
        i = t;
      }
    }
    if (i < 0) break;

    const std::vector<double>& Ki = cache.row(i);
    int j = -1;
    double gmin = std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    for (int t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * G[t];
      gmin = std::min(gmin, v);
      const double b = gmax - v;
      if (b <= 0.0) continue;
      const double a = std::max(cache.diag(i) + cache.diag(t) - 2.0 * Ki[t], kTau);
      const double obj = -(b * b) / a;
      if (obj <= best_obj) {
        best_obj = obj;
        j = t;
      }
    }
    if (j < 0 || gmax - gmin <= eps) break;

    const std::vector<double>& Kj = cache.row(j);
    const double quad = std::max(cache.diag(i) + cache.diag(j) - 2.0 * Ki[j], kTau);
    const double old_ai = alpha[i];
    const double old_aj = alpha[j];

    if (y[i] != y[j]) {
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else {
        if (alpha[i] < 0) {
          alpha[i] = 0;
          alpha[j] = -diff;
        }
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = C + diff;
        }
      }
    } else {
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = sum;
        }
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else {
        if (alpha[i] < 0) {
          alpha[i] = 0;
          alpha[j] = sum;
        }
      }
    }

    const double dyi = y[i] * (alpha[i] - old_ai);
    const double dyj = y[j] * (alpha[j] - old_aj);
    for (int t = 0; t < n; ++t) G[t] += y[t] * (Ki[t] * dyi + Kj[t] * dyj);
  }

  // Bias from the KKT conditions; averaged over free vectors when any exist.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int nr_free = 0;
  for (int t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (alpha[t] >= C) {
      if (y[t] < 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else {
      ++nr_free;
      sum_free += yg;
    }
  }
  sol.rho = nr_free > 0 ? sum_free / nr_free : (ub + lb) / 2.0;
  return sol;
}

struct PlattParams {
  double a = 0.0;
  double b = 0.0;
};

// Newton fit of P(y=+1|f) = 1/(1+exp(a*f+b)) with the usual regularized
// targets, backtracking line search, and log-space evaluation.
inline PlattParams fit_platt(std::span<const double> decision_values, std::span<const int> labels,
                             int max_iter) {
  const std::size_t n = decision_values.size();
  double prior1 = 0, prior0 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] > 0)
      ++prior1;
    else
      ++prior0;
  }
  const double hi_target = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo_target = 1.0 / (prior0 + 2.0);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] > 0 ? hi_target : lo_target;

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));

  const auto objective = [&](double A, double B) {
    double fval = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fApB = decision_values[i] * A + B;
      if (fApB >= 0)
        fval += t[i] * fApB + std::log1p(std::exp(-fApB));
      else
        fval += (t[i] - 1.0) * fApB + std::log1p(std::exp(fApB));
    }
    return fval;
  };

  double fval = objective(a, b);
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;
  for (int it = 0; it < max_iter; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fApB = decision_values[i] * a + b;
      double p, q;
      if (fApB >= 0) {
        p = std::exp(-fApB) / (1.0 + std::exp(-fApB));
        q = 1.0 / (1.0 + std::exp(-fApB));
      } else {
        p = 1.0 / (1.0 + std::exp(fApB));
        q = std::exp(fApB) / (1.0 + std::exp(fApB));
      }
      const double d2 = p * q;
      h11 += decision_values[i] * decision_values[i] * d2;
      h22 += d2;
      h21 += decision_values[i] * d2;
      const double d1 = t[i] - p;
      g1 += decision_values[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;

    double stepsize = 1.0;
    while (stepsize >= 1e-10) {
      const double na = a + stepsize * da;
      const double nb = b + stepsize * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * stepsize * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      stepsize /= 2.0;
    }
    if (stepsize < 1e-10) break;
  }
  return {a, b};
}

inline double sigmoid_predict(double decision, double a, double b) {
  const double fApB = decision * a + b;
  if (fApB >= 0) return std::exp(-fApB) / (1.0 + std::exp(-fApB));
  return 1.0 / (1.0 + std::exp(fApB));
}

}  // namespace detail

// Decision value of the (already scaled) support-vector expansion for an
// unscaled input vector.
inline double decision_value(const ClassifierModel& model, const FeatureVector& v) {
  const FeatureVector x = apply_scaler(model.scaler, v);
  double f = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
    f += model.coefficients[i] * detail::rbf_kernel(model.support_vectors[i], x, model.config.gamma);
  return f;
}

// P(human | v), clamped to the open confidence band. An untrained model is
// the neutral scorer and returns 0.5 for every input.
inline double predict_proba(const ClassifierModel& model, const FeatureVector& v) {
  if (!model.trained()) return 0.5;
  const double f = decision_value(model, v);
  return clamp_confidence(detail::sigmoid_predict(f, model.platt_a, model.platt_b));
}

// Retrains from scratch on the store, balancing classes 1:1 by downsampling
// the majority class with rng (no draw happens when the classes are already
// balanced). The feature scaler is inherited from `previous` when given, so
// a scaler fitted on the first batch stays frozen across iterations.
inline ClassifierModel train(const SampleStore& store, const ClassifierConfig& config,
                             std::mt19937_64& rng, const ClassifierModel* previous = nullptr) {
  if (store.positives() == 0 || store.negatives() == 0)
    throw Error(Errc::SingleClass, "training requires at least one sample of each class");

  std::vector<std::size_t> pos_idx, neg_idx;
  pos_idx.reserve(store.positives());
  neg_idx.reserve(store.negatives());
  const auto all = store.samples();
  for (std::size_t i = 0; i < all.size(); ++i) {
    (all[i].label == BinaryLabel::Human ? pos_idx : neg_idx).push_back(i);
  }
  const std::size_t per_class = std::min(pos_idx.size(), neg_idx.size());
  const auto downsample = [&](std::vector<std::size_t>& idx) {
    if (idx.size() == per_class) return;
    std::vector<std::size_t> chosen;
    chosen.reserve(per_class);
    std::sample(idx.begin(), idx.end(), std::back_inserter(chosen), per_class, rng);
    idx = std::move(chosen);
  };
  downsample(pos_idx);
  downsample(neg_idx);

  std::vector<std::size_t> selected;
  selected.reserve(2 * per_class);
  selected.insert(selected.end(), pos_idx.begin(), pos_idx.end());
  selected.insert(selected.end(), neg_idx.begin(), neg_idx.end());
  std::sort(selected.begin(), selected.end());  // keep arrival order

  std::vector<FeatureVector> raw;
  std::vector<int> y;
  raw.reserve(selected.size());
  y.reserve(selected.size());
  for (const std::size_t i : selected) {
    raw.push_back(all[i].features);
    y.push_back(all[i].label == BinaryLabel::Human ? +1 : -1);
  }

  FeatureScaler scaler =
      (previous && previous->trained()) ? previous->scaler : fit_scaler(raw);

  std::vector<FeatureVector> x(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) x[i] = apply_scaler(scaler, raw[i]);

  bool all_identical = true;
  for (std::size_t i = 1; i < x.size() && all_identical; ++i) all_identical = x[i] == x[0];
  if (all_identical && x.size() > 1)
    throw Error(Errc::DegenerateFeatures, "all training vectors are identical after scaling");

  const long max_iter =
      std::max<long>(10000, static_cast<long>(config.max_smo_passes) * static_cast<long>(x.size()));
  detail::SmoSolution sol =
      detail::solve_smo(x, y, config.C, config.gamma, config.kkt_tolerance, max_iter);

  std::vector<double> decisions(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    decisions[i] = y[i] * (sol.gradient[i] + 1.0) - sol.rho;
  const detail::PlattParams platt = detail::fit_platt(decisions, y, config.platt_max_iter);

  ClassifierModel model;
  model.config = config;
  model.scaler = scaler;
  model.bias = -sol.rho;
  model.platt_a = platt.a;
  model.platt_b = platt.b;
  model.iteration = previous ? previous->iteration + 1 : 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (sol.alpha[i] > 0.0) {
      model.support_vectors.push_back(x[i]);
      model.coefficients.push_back(sol.alpha[i] * y[i]);
    }
  }
  return model;
}

// --- model serialization -----------------------------------------------
//
// Versioned little-endian binary blob:
//   magic "TFSVM001", u32 n_sv, u32 iteration,
//   doubles C, gamma, kkt_tolerance, i32 max_smo_passes, i32 platt_max_iter,
//   doubles bias, platt_a, platt_b, scaler min[61], scaler max[61],
//   then per support vector: coefficient + 61 feature doubles.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  bool exhausted() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t k) const {
    if (pos_ + k > data_.size()) throw Error(Errc::CorruptModel, "truncated model data");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline constexpr std::string_view kModelMagic = "TFSVM001";

inline std::string serialize_model(const ClassifierModel& m) {
  std::string out(kModelMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(m.support_vectors.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(m.iteration));
  detail::put_f64(out, m.config.C);
  detail::put_f64(out, m.config.gamma);
  detail::put_f64(out, m.config.kkt_tolerance);
  detail::put_u32(out, static_cast<std::uint32_t>(m.config.max_smo_passes));
  detail::put_u32(out, static_cast<std::uint32_t>(m.config.platt_max_iter));
  detail::put_f64(out, m.bias);
  detail::put_f64(out, m.platt_a);
  detail::put_f64(out, m.platt_b);
  for (int i = 0; i < kFeatureDim; ++i) detail::put_f64(out, m.scaler.min[i]);
  for (int i = 0; i < kFeatureDim; ++i) detail::put_f64(out, m.scaler.max[i]);
  for (std::size_t s = 0; s < m.support_vectors.size(); ++s) {
    detail::put_f64(out, m.coefficients[s]);
    for (int i = 0; i < kFeatureDim; ++i) detail::put_f64(out, m.support_vectors[s][i]);
  }
  return out;
}

inline ClassifierModel deserialize_model(std::string_view data) {
  if (data.size() < kModelMagic.size() || data.substr(0, kModelMagic.size()) != kModelMagic)
    throw Error(Errc::CorruptModel, "bad model magic");
  detail::ByteReader r(data.substr(kModelMagic.size()));
  ClassifierModel m;
  const std::uint32_t n_sv = r.u32();
  m.iteration = static_cast<int>(r.u32());
  m.config.C = r.f64();
  m.config.gamma = r.f64();
  m.config.kkt_tolerance = r.f64();
  m.config.max_smo_passes = static_cast<int>(r.u32());
  m.config.platt_max_iter = static_cast<int>(r.u32());
  m.bias = r.f64();
  m.platt_a = r.f64();
  m.platt_b = r.f64();
  for (int i = 0; i < kFeatureDim; ++i) m.scaler.min[i] = r.f64();
  for (int i = 0; i < kFeatureDim; ++i) m.scaler.max[i] = r.f64();
  m.support_vectors.resize(n_sv);
  m.coefficients.resize(n_sv);
  for (std::uint32_t s = 0; s < n_sv; ++s) {
    m.coefficients[s] = r.f64();
    for (int i = 0; i < kFeatureDim; ++i) m.support_vectors[s][i] = r.f64();
  }
  if (!r.exhausted()) throw Error(Errc::CorruptModel, "trailing bytes after model payload");
  return m;
}

}  // namespace trackforge
