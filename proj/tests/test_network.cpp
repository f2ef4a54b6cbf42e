#include "helpers.hpp"
#include "vicreg/checkpoint.hpp"
#include "vicreg/gradcheck.hpp"
#include "vicreg/network.hpp"

#include <doctest.h>

#include <sstream>

using namespace vicreg;
using testing_util::gaussian;

namespace {

bool params_equal(const MlpParams& a, const MlpParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& x = a.layers[l];
    const auto& y = b.layers[l];
    if (x.weight != y.weight || x.bias != y.bias || x.scale != y.scale || x.shift != y.shift ||
        x.running_mean != y.running_mean || x.running_var != y.running_var)
      return false;
  }
  return true;
}

// Loss used to probe gradients: a fixed random linear functional of the output.
double probe_loss(const MlpParams& p, const MlpSpec& s, const Matrix& x, const Matrix& w) {
  return forward(p, s, x, true).output.cwiseProduct(w).sum();
}

}  // namespace

TEST_CASE("init_params is deterministic and counts parameters") {
  const MlpSpec plain = MlpSpec::uniform({4, 8, 8, 16}, true, false);
  const MlpParams a = init_params(plain, 42);
  const MlpParams b = init_params(plain, 42);
  CHECK(params_equal(a, b));
  CHECK_FALSE(params_equal(a, init_params(plain, 43)));
  // 4*8+8 + 8*8+8 + 8*16+16.
  CHECK(parameter_count(a) == 256);

  const MlpSpec bn = MlpSpec::uniform({4, 8, 8, 16}, true, true);
  // Two standardized hidden layers of width 8, each with a scale and a shift.
  CHECK(parameter_count(init_params(bn, 1)) == 256 + 2 * (8 + 8));
  MlpSpec no_affine = bn;
  no_affine.learnable_affine = false;
  CHECK(parameter_count(init_params(no_affine, 1)) == 256);
}

TEST_CASE("forward trivial cases") {
  SUBCASE("zero parameters give zero output") {
    const MlpSpec s = MlpSpec::uniform({3, 5, 2}, true, false);
    MlpParams p = zeros_like(init_params(s, 0));
    CHECK(forward(p, s, gaussian(6, 3, 1), true).output.isZero(0.0));
  }
  SUBCASE("identity single layer") {
    const MlpSpec s = MlpSpec::uniform({4, 4}, false, false);
    MlpParams p = init_params(s, 0);
    p.layers[0].weight = Matrix::Identity(4, 4);
    p.layers[0].bias.setZero();
    const Matrix x = gaussian(5, 4, 2);
    CHECK(forward(p, s, x, true).output == x);
  }
  SUBCASE("rectifier blocks negative pre-activations and their gradient") {
    const MlpSpec s = MlpSpec::uniform({2, 3, 1}, true, false);
    MlpParams p = init_params(s, 0);
    p.layers[0].weight.setConstant(-1.0);
    p.layers[0].bias.setConstant(-0.5);
    const Matrix x = gaussian(4, 2, 3).cwiseAbs();
    const ForwardResult f = forward(p, s, x, true);
    CHECK(f.output.isApprox(Matrix::Constant(4, 1, p.layers[1].bias(0))));
    const BackwardResult b = backward(p, s, f.cache, Matrix::Ones(4, 1));
    CHECK(b.param_grads.layers[0].weight.isZero(0.0));
    CHECK(b.param_grads.layers[0].bias.isZero(0.0));
    CHECK(b.grad_in.isZero(0.0));
  }
}

TEST_CASE("backward with zero upstream gradient is zero") {
  const MlpSpec s = MlpSpec::uniform({3, 6, 4}, true, true);
  const MlpParams p = init_params(s, 5);
  const ForwardResult f = forward(p, s, gaussian(8, 3, 6), true);
  const BackwardResult b = backward(p, s, f.cache, Matrix::Zero(8, 4));
  CHECK(b.grad_in.isZero(0.0));
  for (const auto& l : b.param_grads.layers) {
    CHECK(l.weight.isZero(0.0));
    CHECK(l.bias.isZero(0.0));
    CHECK(l.scale.isZero(0.0));
    CHECK(l.shift.isZero(0.0));
  }
}

TEST_CASE("end-to-end gradcheck for widths [3,5,4]") {
  for (bool standardize : {false, true}) {
    CAPTURE(standardize);
    const MlpSpec s = MlpSpec::uniform({3, 5, 4}, true, standardize);
    const MlpParams p = init_params(s, 17);
    const Matrix x = gaussian(8, 3, 18);
    const Matrix w = gaussian(8, 4, 19);
    const ForwardResult f = forward(p, s, x, true);
    const BackwardResult b = backward(p, s, f.cache, w);

    auto fx = [&](const Matrix& xx) { return probe_loss(p, s, xx, w); };
    CHECK(max_gradient_error(b.grad_in, numerical_gradient(fx, x, 1e-6)) < 1e-6);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto fw = [&](const Matrix& m) {
        MlpParams q = p;
        q.layers[l].weight = m;
        return probe_loss(q, s, x, w);
      };
      CHECK(max_gradient_error(b.param_grads.layers[l].weight,
                               numerical_gradient(fw, p.layers[l].weight, 1e-6)) < 1e-6);
      auto fb = [&](const Matrix& m) {
        MlpParams q = p;
        q.layers[l].bias = m;
        return probe_loss(q, s, x, w);
      };
      CHECK(max_gradient_error(b.param_grads.layers[l].bias,
                               numerical_gradient(fb, p.layers[l].bias, 1e-6)) < 1e-6);
      if (p.layers[l].scale.size() > 0) {
        auto fs = [&](const Matrix& m) {
          MlpParams q = p;
          q.layers[l].scale = m;
          return probe_loss(q, s, x, w);
        };
        CHECK(max_gradient_error(b.param_grads.layers[l].scale,
                                 numerical_gradient(fs, p.layers[l].scale, 1e-6)) < 1e-6);
      }
    }
  }
}

TEST_CASE("duplicated row doubles its weight-gradient contribution") {
  const MlpSpec s = MlpSpec::uniform({3, 4, 2}, true, false);
  const MlpParams p = init_params(s, 8);
  const Matrix x = gaussian(3, 3, 9);
  const Matrix g = gaussian(3, 2, 10);
  Matrix x2(4, 3), g2(4, 2);
  x2 << x, x.row(1);
  g2 << g, g.row(1);
  const auto b1 = backward(p, s, forward(p, s, x, true).cache, g);
  const auto b2 = backward(p, s, forward(p, s, x2, true).cache, g2);
  const auto only = backward(p, s, forward(p, s, x.row(1), true).cache, g.row(1));
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const Matrix expected = b1.param_grads.layers[l].weight + only.param_grads.layers[l].weight;
    CHECK((b2.param_grads.layers[l].weight - expected).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("forward and backward leave parameters untouched") {
  const MlpSpec s = MlpSpec::uniform({4, 6, 6, 3}, true, true);
  const MlpParams p = init_params(s, 2);
  const MlpParams copy = p;
  const ForwardResult f = forward(p, s, gaussian(10, 4, 3), true);
  backward(p, s, f.cache, gaussian(10, 3, 4));
  forward(p, s, gaussian(10, 4, 5), false);
  CHECK(params_equal(p, copy));
}

TEST_CASE("standardized layers produce zero-mean unit-std columns before affine") {
  const MlpSpec s = MlpSpec::uniform({5, 7, 7, 2}, true, true);
  const MlpParams p = init_params(s, 12);
  const ForwardResult f = forward(p, s, gaussian(32, 5, 13, 3.0), true);
  int seen = 0;
  for (std::size_t l = 0; l < f.cache.layers.size(); ++l) {
    const Matrix& y = f.cache.layers[l].normalized;
    if (y.size() == 0) continue;
    ++seen;
    CHECK(column_means(y).cwiseAbs().maxCoeff() < 1e-10);
    // With epsilon 1e-5 in the divisor the std is slightly below one; compare
    // against the exact expectation sqrt(var / (var + eps)).
    const RowVector var = f.cache.layers[l].batch_var;
    const RowVector expected = (var.array() / (var.array() + s.standardize_epsilon)).sqrt();
    CHECK((column_stds(y) - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK(seen == 2);
}

TEST_CASE("evaluation mode uses running statistics") {
  const MlpSpec s = MlpSpec::uniform({3, 4, 2}, true, true);
  MlpParams p = init_params(s, 3);
  const Matrix x = gaussian(16, 3, 4, 2.0);
  // Fresh buffers (mean 0, var 1) differ from the batch statistics.
  const Matrix train_out = forward(p, s, x, true).output;
  const Matrix eval_out = forward(p, s, x, false).output;
  CHECK_FALSE(train_out.isApprox(eval_out, 1e-6));

  // Running averages converge to the batch statistics after many updates.
  for (int i = 0; i < 400; ++i) update_running_stats(p, s, forward(p, s, x, true).cache);
  // Running variance is tracked with the unbiased estimator, so the two modes
  // agree up to the n/(n-1) factor inside the square root.
  CHECK(forward(p, s, x, false).output.isApprox(train_out, 5e-2));
}

TEST_CASE("backward rejects a cache from a different batch") {
  const MlpSpec s = MlpSpec::uniform({3, 4, 2}, true, false);
  const MlpParams p = init_params(s, 3);
  const ForwardResult f = forward(p, s, gaussian(6, 3, 1), true);
  CHECK_THROWS(backward(p, s, f.cache, Matrix::Zero(5, 2)));
}

TEST_CASE("spec validation and shape checks") {
  MlpSpec s = MlpSpec::uniform({3, 4, 2}, true, false);
  s.hidden_activation.push_back(true);
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  const MlpSpec good = MlpSpec::uniform({3, 4, 2}, true, false);
  CHECK_THROWS_AS(forward(init_params(good, 0), good, gaussian(4, 5, 0), true), ShapeMismatchError);
  const MlpSpec other = MlpSpec::uniform({3, 5, 2}, true, false);
  CHECK_THROWS_AS(check_params(init_params(other, 0), good), ShapeMismatchError);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const MlpSpec a = MlpSpec::uniform({5, 7, 3}, true, true);
  const MlpSpec b = MlpSpec::uniform({3, 4, 4, 2}, true, false);
  MlpParams pa = init_params(a, 1);
  pa.layers[0].running_mean = gaussian(1, 7, 2);
  pa.layers[0].weight(0, 0) = 1.0 / 3.0;
  pa.layers[0].weight(1, 1) = -0.0;
  pa.layers[0].weight(2, 2) = 4.9e-324;
  const std::vector<NamedModule> mods = {{"encoder", a, pa}, {"expander", b, init_params(b, 2)}};
  std::stringstream ss;
  write_checkpoint(ss, mods);
  const auto back = read_checkpoint(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "encoder");
  CHECK(back[0].spec == a);
  CHECK(back[1].spec == b);
  CHECK(params_equal(back[0].params, pa));
  CHECK(params_equal(back[1].params, mods[1].params));
  CHECK(std::signbit(back[0].params.layers[0].weight(1, 1)));
  CHECK(&find_module(back, "expander") == &back[1]);
  CHECK_THROWS(find_module(back, "predictor"));
}

TEST_CASE("malformed checkpoints are rejected") {
  std::istringstream bad_magic("not-a-checkpoint 1\n");
  CHECK_THROWS_AS(read_checkpoint(bad_magic), CheckpointFormatError);

  const MlpSpec a = MlpSpec::uniform({2, 3, 1}, true, false);
  std::stringstream ss;
  write_checkpoint(ss, {{"encoder", a, init_params(a, 0)}});
  std::string text = ss.str();
  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_checkpoint(truncated), CheckpointFormatError);

  CHECK(parse_real(format_hex(0.1)) == 0.1);
  CHECK_THROWS(parse_real("zebra"));
}
