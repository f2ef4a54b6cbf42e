#include "vicreg/config.hpp"
#include "vicreg/experiment.hpp"
#include "vicreg/gradcheck.hpp"
#include "vicreg/linalg.hpp"
#include "vicreg/loss.hpp"
#include "vicreg/probe.hpp"
#include "vicreg/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace vicreg;

namespace {

LossCoefficients coefficients(double lambda, double mu, double nu, double gamma, double epsilon) {
  LossCoefficients c{lambda, mu, nu, gamma, epsilon};
  c.validate();
  return c;
}

py::dict breakdown_dict(const LossBreakdown& b) {
  py::dict d;
  d["inv"] = b.inv;
  d["var_a"] = b.var_a;
  d["var_b"] = b.var_b;
  d["cov_a"] = b.cov_a;
  d["cov_b"] = b.cov_b;
  d["total"] = b.total;
  return d;
}

py::dict metrics_dict(const MetricsRow& r) {
  py::dict d = breakdown_dict(r.loss);
  d["epoch"] = r.epoch;
  d["mean_repr_std"] = r.mean_repr_std;
  d["mean_embed_std"] = r.mean_embed_std;
  d["avg_corr_repr"] = r.avg_corr_repr;
  d["lr"] = r.lr;
  return d;
}

py::dict probe_dict(const ProbeResult& r) {
  py::dict d;
  d["accuracy"] = r.accuracy;
  d["n_correct"] = r.n_correct;
  d["n_eval"] = r.n_eval;
  d["protocol"] = to_string(r.protocol);
  d["predictions"] = r.predictions;
  return d;
}

py::dict gradcheck_dict(const GradcheckReport& r) {
  py::dict d;
  d["max_error"] = r.max_error;
  d["checked"] = r.checked;
  d["skipped"] = r.skipped;
  return d;
}

RunConfig config_from(const std::string& text, const std::map<std::string, std::string>& overrides) {
  RunConfig c = parse_config(text);
  for (const auto& [k, v] : overrides) set_config_value(c, k, v);
  c.validate();
  return c;
}

// Training output kept on the C++ side; Python sees metrics and can encode.
struct Trained {
  RunConfig config;
  RunOutcome outcome;
};

}  // namespace

PYBIND11_MODULE(_vicreg, m) {
  m.doc() = "VICReg objective, gradients, training and probes on synthetic data";

#define VICREG_COEFF_ARGS                                                                     \
  py::arg("lambda_") = 25.0, py::arg("mu") = 25.0, py::arg("nu") = 1.0, py::arg("gamma") = 1.0, \
      py::arg("epsilon") = 1e-4

  m.def("covariance_matrix", &covariance_matrix, py::arg("z"));
  m.def("standardize_columns", &standardize_columns, py::arg("z"), py::arg("epsilon") = 1e-4);
  m.def("l2_normalize_rows", &l2_normalize_rows, py::arg("z"));

  m.def(
      "variance_term",
      [](const Matrix& z, double gamma, double epsilon, bool use_variance) {
        return variance_term(z, gamma, epsilon, use_variance ? HingeStatistic::kVariance : HingeStatistic::kStd);
      },
      py::arg("z"), py::arg("gamma") = 1.0, py::arg("epsilon") = 1e-4, py::arg("use_variance") = false);
  m.def(
      "variance_term_backward",
      [](const Matrix& z, double gamma, double epsilon, bool use_variance) {
        return variance_term_backward(z, gamma, epsilon,
                                      use_variance ? HingeStatistic::kVariance : HingeStatistic::kStd);
      },
      py::arg("z"), py::arg("gamma") = 1.0, py::arg("epsilon") = 1e-4, py::arg("use_variance") = false);
  m.def("covariance_term", &covariance_term, py::arg("z"));
  m.def("covariance_term_backward", &covariance_term_backward, py::arg("z"));
  m.def("invariance_term", &invariance_term, py::arg("z"), py::arg("z_prime"));

  m.def(
      "vicreg_loss",
      [](const Matrix& z, const Matrix& zp, double l, double mu, double nu, double g, double e) {
        return breakdown_dict(vicreg_loss(z, zp, coefficients(l, mu, nu, g, e)));
      },
      py::arg("z"), py::arg("z_prime"), VICREG_COEFF_ARGS);
  m.def(
      "vicreg_loss_backward",
      [](const Matrix& z, const Matrix& zp, double l, double mu, double nu, double g, double e) {
        LossGradients grads = vicreg_loss_backward(z, zp, coefficients(l, mu, nu, g, e));
        return py::make_tuple(grads.grad_z, grads.grad_z_prime);
      },
      py::arg("z"), py::arg("z_prime"), VICREG_COEFF_ARGS);
  m.def(
      "algorithm1_loss",
      [](const Matrix& z, const Matrix& zp, double l, double mu, double nu, double g, double e) {
        return algorithm1_loss(z, zp, coefficients(l, mu, nu, g, e));
      },
      py::arg("z"), py::arg("z_prime"), VICREG_COEFF_ARGS);
  m.def("avg_correlation_coefficient", &avg_correlation_coefficient, py::arg("y"), py::arg("y_prime"),
        py::arg("epsilon") = 1e-4);
#undef VICREG_COEFF_ARGS

  m.def(
      "generate_dataset",
      [](int n_classes, int per_class, int d_latent, int d_in, std::uint64_t seed) {
        SyntheticDataset d = generate_dataset(n_classes, per_class, d_latent, d_in, seed);
        return py::make_tuple(d.x, d.labels);
      },
      py::arg("n_classes") = 8, py::arg("per_class") = 512, py::arg("d_latent") = 8, py::arg("d_in") = 64,
      py::arg("seed") = 0);

  m.def(
      "linear_probe",
      [](const Matrix& xtr, const std::vector<int>& ytr, const Matrix& xev, const std::vector<int>& yev,
         int epochs, double lr, std::uint64_t seed) {
        return probe_dict(linear_probe(xtr, ytr, xev, yev, epochs, lr, seed));
      },
      py::arg("train_reps"), py::arg("train_labels"), py::arg("eval_reps"), py::arg("eval_labels"),
      py::arg("epochs") = 500, py::arg("lr") = 0.5, py::arg("seed") = 0);
  m.def(
      "knn_classify",
      [](const Matrix& xtr, const std::vector<int>& ytr, const Matrix& xev, const std::vector<int>& yev, int k) {
        return probe_dict(knn_classify(xtr, ytr, xev, yev, k));
      },
      py::arg("train_reps"), py::arg("train_labels"), py::arg("eval_reps"), py::arg("eval_labels"),
      py::arg("k") = 20);

  m.def(
      "gradcheck",
      [](int seeds_per_shape) {
        GradcheckOptions o;
        o.seeds_per_shape = seeds_per_shape;
        py::dict d;
        d["loss"] = gradcheck_dict(check_loss_gradients(o));
        d["pipeline"] = gradcheck_dict(check_pipeline_gradients(o));
        return d;
      },
      py::arg("seeds_per_shape") = 12);

  m.def("default_config", [] { return serialize_config(RunConfig{}); });
  m.def("config_keys", &config_keys);

  py::class_<Trained>(m, "TrainedRun")
      .def_property_readonly("verdict", [](const Trained& t) { return to_string(t.outcome.verdict); })
      .def_property_readonly("config", [](const Trained& t) { return serialize_config(t.config); })
      .def_property_readonly("metrics",
                             [](const Trained& t) {
                               py::list rows;
                               for (const auto& r : t.outcome.result.metrics) rows.append(metrics_dict(r));
                               return rows;
                             })
      .def_property_readonly("probes",
                             [](const Trained& t) -> py::object {
                               if (!t.outcome.probes) return py::none();
                               py::dict d;
                               d["linear"] = probe_dict(t.outcome.probes->linear);
                               d["knn"] = probe_dict(t.outcome.probes->knn);
                               return d;
                             })
      .def(
          "encode", [](const Trained& t, const Matrix& x) { return encode(t.outcome.result.online, x); },
          py::arg("x"))
      .def("checkpoint", [](const Trained& t) {
        std::ostringstream os;
        write_checkpoint(os, checkpoint_modules(t.outcome.result));
        return os.str();
      });

  m.def(
      "train",
      [](const std::string& config_text, const std::map<std::string, std::string>& overrides, bool probes) {
        Trained t;
        t.config = config_from(config_text, overrides);
        const SyntheticDataset data = generate_dataset(t.config.data);
        {
          py::gil_scoped_release release;
          t.outcome = run_experiment(data, t.config, probes);
        }
        return t;
      },
      py::arg("config") = std::string(), py::arg("overrides") = std::map<std::string, std::string>{},
      py::arg("probes") = false);

  m.def(
      "dataset_from_config",
      [](const std::string& config_text, const std::map<std::string, std::string>& overrides) {
        const SyntheticDataset d = generate_dataset(config_from(config_text, overrides).data);
        return py::make_tuple(d.x, d.labels);
      },
      py::arg("config") = std::string(), py::arg("overrides") = std::map<std::string, std::string>{});
}
