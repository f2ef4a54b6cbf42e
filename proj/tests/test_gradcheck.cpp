#include "helpers.hpp"
#include "vicreg/gradcheck.hpp"

#include <doctest.h>

using namespace vicreg;

TEST_CASE("gradient_error is relative above one and absolute below") {
  CHECK(gradient_error(100.0, 101.0) == doctest::Approx(1.0 / 101.0));
  CHECK(gradient_error(1e-3, 2e-3) == doctest::Approx(1e-3));
  CHECK(gradient_error(0.0, 0.0) == 0.0);
  CHECK(max_gradient_error(Matrix::Ones(2, 2), Matrix::Ones(2, 2)) == 0.0);
  CHECK_THROWS(max_gradient_error(Matrix::Ones(2, 2), Matrix::Ones(2, 3)));
}

TEST_CASE("numerical_gradient of a known function") {
  // f(X) = sum X^3 has gradient 3 X^2.
  const Matrix x = testing_util::gaussian(3, 4, 1);
  const Matrix g = numerical_gradient([](const Matrix& m) { return m.array().cube().sum(); }, x, 1e-5);
  CHECK((g - 3.0 * x.array().square().matrix()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("loss and pipeline suites cover enough cases below 1e-6") {
  const GradcheckReport loss = check_loss_gradients();
  const GradcheckReport pipe = check_pipeline_gradients();
  CHECK(loss.checked >= 100);
  CHECK(pipe.checked >= 100);
  CHECK(loss.max_error < 1e-6);
  CHECK(pipe.max_error < 1e-6);
  CHECK(static_cast<int>(loss.cases.size()) == loss.checked + loss.skipped);
  for (const auto& c : loss.cases) {
    CHECK(c.kind == "loss");
    CHECK((c.n == 4 || c.n == 8 || c.n == 16));
    CHECK((c.d == 2 || c.d == 5 || c.d == 8));
  }
}
