#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <memory>
#include <optional>

#include "jvcqma/bandwidth.hpp"
#include "jvcqma/core_math.hpp"
#include "jvcqma/data_io.hpp"
#include "jvcqma/errors.hpp"
#include "jvcqma/evaluation.hpp"
#include "jvcqma/model_average.hpp"
#include "jvcqma/qr_core.hpp"
#include "jvcqma/sim_suite.hpp"

namespace py = pybind11;
using namespace jvcqma;

namespace {

Dataset to_dataset(Eigen::VectorXd y, Eigen::MatrixXd x, const std::vector<int>& discrete) {
  Dataset data = make_dataset(std::move(y), std::move(x));
  if (!discrete.empty()) {
    data.continuous_cols.clear();
    data.discrete_cols = discrete;
    std::sort(data.discrete_cols.begin(), data.discrete_cols.end());
    for (int c = 0; c < data.dims(); ++c) {
      if (!std::binary_search(data.discrete_cols.begin(), data.discrete_cols.end(), c)) {
        data.continuous_cols.push_back(c);
      }
    }
  }
  data.validate();
  return data;
}

py::dict sample_dict(const Dataset& d) {
  py::dict out;
  out["y"] = d.y;
  out["x"] = d.x;
  out["continuous_cols"] = d.continuous_cols;
  out["discrete_cols"] = d.discrete_cols;
  out["column_names"] = d.column_names;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Jackknife model averaging of varying-coefficient quantile regressions";

  // Translators run newest first, so the base class is registered first.
  auto& base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<UnderdeterminedLocalFit>(m, "UnderdeterminedLocalFit", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<StaleModel>(m, "StaleModel", base.ptr());

  m.def("check_loss", [](double tau, double u) { return check_loss(QuantileLevel(tau), u); }, py::arg("tau"),
        py::arg("u"));
  m.def("quantile_adjust_factor", [](double tau) { return quantile_adjust_factor(QuantileLevel(tau)); },
        py::arg("tau"));

  m.def(
      "solve_weighted_qr",
      [](Eigen::VectorXd y, Eigen::MatrixXd x, std::optional<Eigen::VectorXd> w, double tau) {
        const Eigen::Index n = y.size();
        WeightedQrProblem p{std::move(y), std::move(x), w ? *w : Eigen::VectorXd::Ones(n), QuantileLevel(tau)};
        const QrSolution sol = solve_weighted_qr(p);
        return py::make_tuple(sol.coefficients, sol.objective);
      },
      py::arg("y"), py::arg("x"), py::arg("weights") = py::none(), py::arg("tau") = 0.5,
      "Weighted linear quantile regression; returns (coefficients, objective).");

  m.def(
      "solve_simplex_weights",
      [](Eigen::VectorXd y, Eigen::MatrixXd predictions, double tau) {
        return solve_simplex_weights(SimplexWeightProblem{std::move(y), std::move(predictions), QuantileLevel(tau)})
            .values();
      },
      py::arg("y"), py::arg("predictions"), py::arg("tau") = 0.5);

  m.def(
      "simulate",
      [](int example, int error_case, int n, int p, int n_test, std::uint64_t seed, bool allow_any_pairing) {
        sim::SimDesign d;
        d.example = static_cast<sim::Example>(example);
        d.error_case = static_cast<sim::ErrorCase>(error_case);
        d.n = n;
        d.p = p;
        d.n_test = n_test;
        d.seed = seed;
        d.allow_any_pairing = allow_any_pairing;
        const auto s = sim::generate(d);
        return py::make_tuple(sample_dict(s.train), sample_dict(s.test));
      },
      py::arg("example") = 1, py::arg("error_case") = 1, py::arg("n") = 200, py::arg("p") = 5,
      py::arg("n_test") = 100, py::arg("seed") = 1, py::arg("allow_any_pairing") = false,
      "Returns (train, test) dicts with keys y, x, continuous_cols, discrete_cols, column_names.");

  m.def(
      "load_csv",
      [](const std::string& csv, const std::string& schema_path, bool standardize) {
        const io::Schema schema = io::load_schema(schema_path);
        Dataset data = io::load_csv(csv, schema);
        if (standardize) data = io::standardize(data, schema).first;
        return sample_dict(data);
      },
      py::arg("csv"), py::arg("schema"), py::arg("standardize") = true);

  py::class_<AveragedModel>(m, "AveragedModel")
      .def_property_readonly("weights", [](const AveragedModel& a) { return a.weights.values(); })
      .def_property_readonly("tau", [](const AveragedModel& a) { return a.tau.value(); })
      .def_property_readonly("scheme", [](const AveragedModel& a) { return std::string(scheme_name(a.scheme)); })
      .def_property_readonly("index_cols", [](const AveragedModel& a) { return a.bandwidths.index_cols; })
      .def_property_readonly("pilot_bandwidths", [](const AveragedModel& a) { return a.bandwidths.pilot; })
      .def_property_readonly("bandwidths", [](const AveragedModel& a) { return a.bandwidths.adjusted; })
      .def(
          "predict",
          [](const AveragedModel& a, const Eigen::MatrixXd& x, int threads) { return predict_averaged(a, x, threads); },
          py::arg("x"), py::arg("threads") = 1, py::call_guard<py::gil_scoped_release>())
      .def("to_json", [](const AveragedModel& a) { return model_to_json(a).dump(); });

  m.def(
      "fit",
      [](Eigen::VectorXd y, Eigen::MatrixXd x, double tau, const std::string& scheme, const std::string& kernel,
         std::vector<double> grid, std::vector<int> discrete_cols, int threads) {
        auto data = std::make_shared<const Dataset>(to_dataset(std::move(y), std::move(x), discrete_cols));
        const KernelKind kind = parse_kernel(kernel);
        py::gil_scoped_release release;
        const PilotBandwidths pilots = select_pilots(*data, grid, kind, threads);
        return fit_averaged_model(data, QuantileLevel(tau), pilots, parse_scheme(scheme), kind, threads);
      },
      py::arg("y"), py::arg("x"), py::arg("tau") = 0.5, py::arg("scheme") = "loocv", py::arg("kernel") = "gauss",
      py::arg("grid") = std::vector<double>{}, py::arg("discrete_cols") = std::vector<int>{}, py::arg("threads") = 1,
      "Selects pilot bandwidths and fits the averaged model at one quantile level.");

  m.def(
      "evaluate_simulation",
      [](int example, int error_case, int n, int p, int n_test, std::vector<double> taus, std::vector<std::string> methods,
         int reps, std::uint64_t seed, std::vector<double> grid, int threads) {
        sim::SimDesign d;
        d.example = static_cast<sim::Example>(example);
        d.error_case = static_cast<sim::ErrorCase>(error_case);
        d.n = n;
        d.p = p;
        d.n_test = n_test;
        std::vector<eval::Method> ms;
        if (methods.empty()) {
          ms = eval::all_methods(sim::generate(d).train);
        } else {
          for (const auto& name : methods) ms.push_back(eval::Method::parse(name));
        }
        eval::EvalOptions opts;
        opts.grid = std::move(grid);
        opts.threads = threads;
        py::gil_scoped_release release;
        const eval::RunResult r = eval::run_replications(d, taus, ms, reps, seed, opts);
        return std::make_pair(eval::report_to_json(r.report).dump(), eval::weights_to_json(r.weights).dump());
      },
      py::arg("example") = 1, py::arg("error_case") = 1, py::arg("n") = 200, py::arg("p") = 5,
      py::arg("n_test") = 100, py::arg("taus") = std::vector<double>{0.5}, py::arg("methods") = std::vector<std::string>{},
      py::arg("reps") = 1, py::arg("seed") = 1, py::arg("grid") = std::vector<double>{}, py::arg("threads") = 1,
      "Replicated FPE comparison; returns (report_json, weights_json) strings.");

  m.attr("__version__") = JVCQMA_VERSION;
}
