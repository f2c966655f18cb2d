#include "poseloop/neural/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace poseloop::neural {

GradCheckReport gradient_check(ParamStore& store,
                               const std::function<double()>& loss_and_grad, Rng& rng,
                               int min_coords, double h, double rel_tol) {
  store.zero_grads();
  loss_and_grad();

  struct Coord {
    Param* param;
    Eigen::Index idx;
    double analytic;
  };
  std::vector<Coord> coords;
  for (const auto& p : store.params())
    for (Eigen::Index i = 0; i < p->value.size(); ++i)
      coords.push_back({p.get(), i, p->grad.data()[i]});

  std::vector<Coord> picked;
  if (static_cast<int>(coords.size()) <= min_coords) {
    picked = coords;
  } else {
    rng.shuffle(coords);
    picked.assign(coords.begin(), coords.begin() + min_coords);
  }

  GradCheckReport report;
  report.coords_checked = static_cast<int>(picked.size());
  for (const Coord& c : picked) {
    double saved = c.param->value.data()[c.idx];
    c.param->value.data()[c.idx] = saved + h;
    double up = loss_and_grad();
    c.param->value.data()[c.idx] = saved - h;
    double down = loss_and_grad();
    c.param->value.data()[c.idx] = saved;
    double fd = (up - down) / (2.0 * h);
    double denom = std::max({std::abs(c.analytic), std::abs(fd), 1e-6});
    double rel = std::abs(c.analytic - fd) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_param = c.param->name + "[" + std::to_string(c.idx) + "]";
    }
  }
  report.pass = report.max_rel_err < rel_tol;
  return report;
}

}  // namespace poseloop::neural
