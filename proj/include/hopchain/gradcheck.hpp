#pragma once

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "hopchain/rng.hpp"
#include "hopchain/tape.hpp"

// Central-difference verification of analytic gradients. The loss callable is
// evaluated with perturbed parameters, so it must rebuild its tape per call and
// must be deterministic: two calls on identical parameters have to return the
// exact same scalar, otherwise finite differences measure noise.

namespace hopchain::ad {

template <class Scalar>
struct GradCheckReport {
  Scalar max_rel_err = 0;
  std::string worst_param;
  Eigen::Index worst_row = -1;
  Eigen::Index worst_col = -1;
  Scalar worst_analytic = 0;
  Scalar worst_numeric = 0;
  std::size_t coords_checked = 0;
  bool deterministic = true;

  bool pass(Scalar tol) const { return deterministic && max_rel_err <= tol; }

  std::string summary() const {
    std::ostringstream os;
    if (!deterministic) {
      os << "loss is not deterministic; finite differences are meaningless";
      return os.str();
    }
    os << "max_rel_err=" << max_rel_err << " at " << worst_param << "(" << worst_row << ","
       << worst_col << ")" << " analytic=" << worst_analytic << " numeric=" << worst_numeric
       << " coords=" << coords_checked;
    return os.str();
  }
};

/// loss_fn signature: Scalar(ParamStore<Scalar>& params, GradMap<Scalar>* grads).
/// When grads is non-null the callable must also run a backward pass and store
/// the analytic gradients there.
template <class Scalar, class LossFn>
GradCheckReport<Scalar> grad_check(LossFn&& loss_fn, ParamStore<Scalar>& params, Scalar eps,
                                   std::size_t coords_per_group = 200,
                                   std::uint64_t seed = 0x6a09e667f3bcc908ull,
                                   Scalar denom_floor = Scalar(1e-6)) {
  GradCheckReport<Scalar> report;

  const Scalar l0 = loss_fn(params, nullptr);
  const Scalar l1 = loss_fn(params, nullptr);
  if (!(l0 == l1)) {
    report.deterministic = false;
    return report;
  }

  GradMap<Scalar> analytic;
  loss_fn(params, &analytic);

  Rng rng(seed);
  for (auto& [name, value] : params.items()) {
    auto git = analytic.find(name);
    if (git == analytic.end()) throw contract_error("gradient map is missing group: " + name);
    const Mat<Scalar>& grad = git->second;
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      throw contract_error("gradient shape mismatch for group: " + name);

    const std::size_t total = static_cast<std::size_t>(value.size());
    std::vector<std::size_t> coords(total);
    for (std::size_t i = 0; i < total; ++i) coords[i] = i;
    if (total > coords_per_group) {
      // Partial Fisher-Yates: the first coords_per_group entries become a
      // uniform sample without replacement.
      for (std::size_t i = 0; i < coords_per_group; ++i)
        std::swap(coords[i], coords[i + rng.index(total - i)]);
      coords.resize(coords_per_group);
    }

    for (std::size_t flat : coords) {
      const Eigen::Index r = static_cast<Eigen::Index>(flat) % value.rows();
      const Eigen::Index c = static_cast<Eigen::Index>(flat) / value.rows();
      const Scalar saved = value(r, c);
      value(r, c) = saved + eps;
      const Scalar lp = loss_fn(params, nullptr);
      value(r, c) = saved - eps;
      const Scalar lm = loss_fn(params, nullptr);
      value(r, c) = saved;

      const Scalar numeric = (lp - lm) / (Scalar(2) * eps);
      const Scalar a = grad(r, c);
      const Scalar denom = std::max({std::abs(a), std::abs(numeric), denom_floor});
      const Scalar rel = std::abs(a - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = name;
        report.worst_row = r;
        report.worst_col = c;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace hopchain::ad
