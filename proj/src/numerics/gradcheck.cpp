#include "afg/numerics/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace afg::nn {

// Central differences at h=1e-4 resolve gradients only to about 1e-11, so a
// group whose true gradient vanishes (attention key biases) would otherwise
// be scored as noise over noise.
constexpr double kNormFloor = 1e-6;

std::string GradcheckReport::format() const {
  std::ostringstream os;
  for (const auto& g : groups) {
    char line[256];
    std::snprintf(line, sizeof line, "%-32s n=%-6zu rel_err=%.3e max_abs_diff=%.3e\n",
                  g.name.c_str(), g.n_values, g.rel_err, g.max_abs_diff);
    os << line;
  }
  char tail[256];
  std::snprintf(tail, sizeof tail, "max_rel_err=%.3e worst=%s\n", max_rel_err,
                worst_param.c_str());
  os << tail;
  return os.str();
}

GradcheckReport gradcheck(ParamStore& store, const LossBuilder& build, double h) {
  store.clear_grads();
  {
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss, store);
  }
  auto eval_loss = [&]() {
    Tape tape;
    return build(tape).item();
  };

  GradcheckReport report;
  for (auto& [name, p] : store) {
    if (!p.trainable) continue;
    GradcheckGroup group;
    group.name = name;
    group.n_values = p.value.size();
    double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value.data[i];
      p.value.data[i] = saved + h;
      const double up = eval_loss();
      p.value.data[i] = saved - h;
      const double down = eval_loss();
      p.value.data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p.grad.data[i];
      diff_sq += (analytic - numeric) * (analytic - numeric);
      a_sq += analytic * analytic;
      n_sq += numeric * numeric;
      group.max_abs_diff = std::max(group.max_abs_diff, std::abs(analytic - numeric));
    }
    group.rel_err = std::sqrt(diff_sq) / std::max(std::sqrt(a_sq) + std::sqrt(n_sq), kNormFloor);
    if (group.rel_err >= report.max_rel_err) {
      report.max_rel_err = group.rel_err;
      report.worst_param = name;
    }
    report.groups.push_back(std::move(group));
  }
  store.clear_grads();
  return report;
}

}  // namespace afg::nn
