#include "vicreg/gradcheck.hpp"

#include "vicreg/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace vicreg {

double gradient_error(double analytic, double numeric) {
  const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / scale;
}

double max_gradient_error(const Matrix& analytic, const Matrix& numeric) {
  require_same_shape(analytic, numeric, "max_gradient_error");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, gradient_error(analytic.data()[i], numeric.data()[i]));
  }
  return worst;
}

Matrix numerical_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                          double h) {
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double up = f(probe);
    probe.data()[i] = orig - h;
    const double down = f(probe);
    probe.data()[i] = orig;
    grad.data()[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

namespace {

Matrix random_batch(int n, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.3, 1.7);
  Matrix z(n, d);
  for (int j = 0; j < d; ++j) {
    const double s = scale(rng);
    for (int i = 0; i < n; ++i) z(i, j) = s * normal(rng);
  }
  return z;
}

bool near_hinge_kink(const Matrix& z, const LossCoefficients& c, double margin) {
  const RowVector s = regularized_column_stds(z, c.epsilon);
  return ((s.array() - c.gamma).abs() < margin).any();
}

bool near_rectifier_kink(const ForwardCache& cache, double margin) {
  for (const auto& l : cache.layers) {
    if (l.activation_input.size() && (l.activation_input.array().abs() < margin).any()) return true;
  }
  return false;
}

void record(GradcheckReport& report, GradcheckCase c) {
  if (c.skipped) {
    ++report.skipped;
  } else {
    ++report.checked;
    report.max_error = std::max(report.max_error, c.max_error);
  }
  report.cases.push_back(std::move(c));
}

// Pointers to every trainable scalar of a parameter set.
std::vector<double*> trainable_scalars(MlpParams& p) {
  std::vector<double*> out;
  for (auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) out.push_back(l.weight.data() + i);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) out.push_back(l.bias.data() + i);
    for (Eigen::Index i = 0; i < l.scale.size(); ++i) out.push_back(l.scale.data() + i);
    for (Eigen::Index i = 0; i < l.shift.size(); ++i) out.push_back(l.shift.data() + i);
  }
  return out;
}

std::vector<double> flatten(const MlpParams& g) {
  std::vector<double> out;
  for (const auto& l : g.layers) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    out.insert(out.end(), l.scale.data(), l.scale.data() + l.scale.size());
    out.insert(out.end(), l.shift.data(), l.shift.data() + l.shift.size());
  }
  return out;
}

}  // namespace

GradcheckReport check_loss_gradients(const GradcheckOptions& o) {
  GradcheckReport report;
  for (int n : o.batch_sizes) {
    for (int d : o.dims) {
      for (int k = 0; k < o.seeds_per_shape; ++k) {
        GradcheckCase c{"loss", n, d, mix_seed(o.seed ^ (static_cast<std::uint64_t>(n) << 32) ^
                                               (static_cast<std::uint64_t>(d) << 16) ^
                                               static_cast<std::uint64_t>(k))};
        std::mt19937_64 rng(c.seed);
        const Matrix z = random_batch(n, d, rng);
        const Matrix zp = random_batch(n, d, rng);
        if (near_hinge_kink(z, o.coeffs, o.kink_margin) ||
            near_hinge_kink(zp, o.coeffs, o.kink_margin)) {
          c.skipped = true;
          record(report, c);
          continue;
        }
        const LossGradients g = vicreg_loss_backward(z, zp, o.coeffs);
        const Matrix num_z = numerical_gradient(
            [&](const Matrix& m) { return vicreg_loss(m, zp, o.coeffs).total; }, z, o.step);
        const Matrix num_zp = numerical_gradient(
            [&](const Matrix& m) { return vicreg_loss(z, m, o.coeffs).total; }, zp, o.step);
        c.max_error = std::max(max_gradient_error(g.grad_z, num_z),
                               max_gradient_error(g.grad_z_prime, num_zp));
        record(report, c);
      }
    }
  }
  return report;
}

GradcheckReport check_pipeline_gradients(const GradcheckOptions& o) {
  GradcheckReport report;
  for (int n : o.batch_sizes) {
    for (int d : o.dims) {
      for (int k = 0; k < o.seeds_per_shape; ++k) {
        GradcheckCase c{"pipeline", n, d,
                        mix_seed(~o.seed ^ (static_cast<std::uint64_t>(n) << 32) ^
                                 (static_cast<std::uint64_t>(d) << 16) ^
                                 static_cast<std::uint64_t>(k))};
        std::mt19937_64 rng(c.seed);
        MlpSpec enc_spec = MlpSpec::uniform({3, 5, 4}, true, true);
        MlpSpec exp_spec = MlpSpec::uniform({4, 6, d}, true, true);
        MlpParams enc = init_params(enc_spec, rng());
        MlpParams exp = init_params(exp_spec, rng());
        // Move scale/shift away from their initial values so their gradients are exercised.
        std::uniform_real_distribution<double> jitter(-0.3, 0.3);
        for (auto* p : {&enc, &exp}) {
          for (auto& l : p->layers) {
            for (Eigen::Index i = 0; i < l.scale.size(); ++i) l.scale(i) += jitter(rng);
            for (Eigen::Index i = 0; i < l.shift.size(); ++i) l.shift(i) += jitter(rng);
            for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) += jitter(rng);
          }
        }
        const Matrix xa = random_batch(n, 3, rng);
        const Matrix xb = random_batch(n, 3, rng);

        auto loss_of = [&](const MlpParams& e, const MlpParams& x) {
          const Matrix za = forward(x, exp_spec, forward(e, enc_spec, xa, true).output, true).output;
          const Matrix zb = forward(x, exp_spec, forward(e, enc_spec, xb, true).output, true).output;
          return vicreg_loss(za, zb, o.coeffs).total;
        };

        // Analytical pass.
        const ForwardResult ea = forward(enc, enc_spec, xa, true);
        const ForwardResult eb = forward(enc, enc_spec, xb, true);
        const ForwardResult pa = forward(exp, exp_spec, ea.output, true);
        const ForwardResult pb = forward(exp, exp_spec, eb.output, true);
        if (near_hinge_kink(pa.output, o.coeffs, o.kink_margin) ||
            near_hinge_kink(pb.output, o.coeffs, o.kink_margin) ||
            near_rectifier_kink(ea.cache, o.kink_margin) ||
            near_rectifier_kink(eb.cache, o.kink_margin) ||
            near_rectifier_kink(pa.cache, o.kink_margin) ||
            near_rectifier_kink(pb.cache, o.kink_margin)) {
          c.skipped = true;
          record(report, c);
          continue;
        }
        const LossGradients lg = vicreg_loss_backward(pa.output, pb.output, o.coeffs);
        const BackwardResult ba = backward(exp, exp_spec, pa.cache, lg.grad_z);
        const BackwardResult bb = backward(exp, exp_spec, pb.cache, lg.grad_z_prime);
        const BackwardResult ga = backward(enc, enc_spec, ea.cache, ba.grad_in);
        const BackwardResult gb = backward(enc, enc_spec, eb.cache, bb.grad_in);
        std::vector<double> analytic = flatten(ga.param_grads);
        const std::vector<double> enc_b = flatten(gb.param_grads);
        for (std::size_t i = 0; i < analytic.size(); ++i) analytic[i] += enc_b[i];
        std::vector<double> exp_a = flatten(ba.param_grads);
        const std::vector<double> exp_b = flatten(bb.param_grads);
        for (std::size_t i = 0; i < exp_a.size(); ++i) exp_a[i] += exp_b[i];
        analytic.insert(analytic.end(), exp_a.begin(), exp_a.end());

        // Numerical pass over every trainable scalar.
        MlpParams enc_probe = enc;
        MlpParams exp_probe = exp;
        std::vector<double*> scalars = trainable_scalars(enc_probe);
        const std::vector<double*> exp_scalars = trainable_scalars(exp_probe);
        scalars.insert(scalars.end(), exp_scalars.begin(), exp_scalars.end());
        double worst = 0.0;
        for (std::size_t i = 0; i < scalars.size(); ++i) {
          const double orig = *scalars[i];
          *scalars[i] = orig + o.pipeline_step;
          const double up = loss_of(enc_probe, exp_probe);
          *scalars[i] = orig - o.pipeline_step;
          const double down = loss_of(enc_probe, exp_probe);
          *scalars[i] = orig;
          worst = std::max(worst, gradient_error(analytic[i], (up - down) / (2.0 * o.pipeline_step)));
        }
        c.max_error = worst;
        record(report, c);
      }
    }
  }
  return report;
}

}  // namespace vicreg
