#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace tsr::oracle {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// written straight from the loss definitions on probabilities
inline double reference_loss(const std::vector<double>& logits, const std::vector<double>& target, double n_r, double alpha,
                      double beta) {
  if (n_r == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = sigmoid(logits[i]);
    if (target[i] == 1.0)
      sum += std::pow(1 - p, alpha) * std::log(p);
    else
      sum += std::pow(1 - target[i], beta) * std::pow(p, alpha) * std::log(1 - p);
  }
  return -sum / n_r;
}

inline double focal(double logit, int label, double gamma, double alpha) {
  const double p = sigmoid(logit);
  if (label == 1) return -alpha * std::pow(1 - p, gamma) * std::log(p);
  return -(1 - alpha) * std::pow(p, gamma) * std::log(1 - p);
}

struct Layer {
  int start;
  std::vector<std::vector<double>> logits, c, t, b;  // [nq][np]
};

inline double line_loss(const std::vector<Layer>& layers, const std::vector<std::vector<double>>& gc,
                 const std::vector<std::vector<double>>& gt, const std::vector<std::vector<double>>& gb,
                 const std::vector<std::pair<int, int>>& pairs, double gamma, double alpha) {
  const double n_gt = std::max<double>(1.0, static_cast<double>(gc.size()));
  double total = 0.0;
  for (const auto& l : layers) {
    const std::size_t nq = l.logits.size();
    const std::size_t np = nq ? l.logits[0].size() : 0;
    double cls = 0.0, reg = 0.0;
    for (std::size_t j = 0; j < nq; ++j) {
      bool matched = false;
      for (const auto& pr : pairs) matched = matched || pr.first == static_cast<int>(j);
      for (std::size_t k = 0; k < np; ++k) cls += focal(l.logits[j][k], matched ? 1 : 0, gamma, alpha);
    }
    for (const auto& [p, g] : pairs)
      for (std::size_t k = 0; k < np; ++k) {
        const std::size_t kk = static_cast<std::size_t>(l.start) + k;
        reg += std::abs(l.c[p][k] - gc[g][kk]) + std::abs(l.t[p][k] - gt[g][kk]) + std::abs(l.b[p][k] - gb[g][kk]);
      }
    total += (cls + reg) / (n_gt * static_cast<double>(np));
  }
  return total;
}

inline double bce(const std::vector<double>& p, const std::vector<double>& y) {
  if (p.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::min(std::max(p[i], 1e-7), 1 - 1e-7);
    s += -(y[i] * std::log(q) + (1 - y[i]) * std::log(1 - q));
  }
  return s / static_cast<double>(p.size());
}

}  // namespace tsr::oracle
