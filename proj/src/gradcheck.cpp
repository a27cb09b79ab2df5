#include "udg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace udg {

namespace {

double evaluate(const ScalarObjective& f, std::span<const Tensor> params) {
  Tape tape;
  const std::vector<Tensor> watched = tape.watch_all(params);
  return f(tape, watched).item();
}

}  // namespace

double finite_diff_check(const ScalarObjective& f, std::span<const Tensor> params, double step,
                         TapeMode mode) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");

  std::vector<Matrix> analytic;
  {
    Tape tape(mode);
    const std::vector<Tensor> watched = tape.watch_all(params);
    const Tensor loss = f(tape, watched);
    BackwardOptions opts;
    opts.allow_unused = true;
    opts.create_graph = false;
    for (const Tensor& g : tape.backward(loss, watched, opts)) analytic.push_back(g.value());
  }

  std::vector<Tensor> probe(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    const Tensor original = params[p].detach();
    for (Index i = 0; i < original.size(); ++i) {
      Matrix plus = original.value();
      Matrix minus = original.value();
      plus.data()[i] += step;
      minus.data()[i] -= step;
      probe[p] = Tensor(original.shape(), std::move(plus));
      const double f_plus = evaluate(f, probe);
      probe[p] = Tensor(original.shape(), std::move(minus));
      const double f_minus = evaluate(f, probe);
      const double central = (f_plus - f_minus) / (2.0 * step);
      const double err = std::abs(analytic[p].data()[i] - central) / (std::abs(central) + 1e-12);
      worst = std::max(worst, err);
    }
    probe[p] = original;
  }
  return worst;
}

}  // namespace udg
