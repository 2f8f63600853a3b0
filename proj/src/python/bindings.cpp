#include "ada/bench.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>

namespace py = pybind11;
using namespace ada;

namespace {

std::string status_name(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::stopped_by_predicate: return "stopped_by_predicate";
    case RunStatus::max_iters_reached: return "max_iters_reached";
  }
  return "unknown";
}

py::dict trace_columns(const Trace& trace) {
  const auto n = static_cast<Index>(trace.size());
  Vec obj(n), res(n), dg(n), xr(n), fr(n);
  for (Index i = 0; i < n; ++i) {
    const auto& m = trace[static_cast<std::size_t>(i)];
    obj[i] = m.objective;
    res[i] = m.constraint_residual_norm;
    dg[i] = m.delta_g_norm_sq;
    xr[i] = m.x_rel_change;
    fr[i] = m.feas_rel;
  }
  py::dict d;
  d["objective"] = obj;
  d["residual"] = res;
  d["delta_g"] = dg;
  d["x_rel"] = xr;
  d["feas_rel"] = fr;
  return d;
}

// blocks: list of dicts with keys E (required), A / loss / data, l1 / l1_weights, lo / hi.
Problem make_problem(const py::list& blocks, const Vec& q) {
  std::vector<BlockSpec> specs;
  for (const auto& item : blocks) {
    const auto d = item.cast<py::dict>();
    BlockSpec b;
    Mat E = d["E"].cast<Mat>();
    b.n = E.cols();
    b.E = CouplingMatrix::dense(std::move(E));
    if (d.contains("A")) {
      SmoothPart s;
      s.A = DesignMatrix(d["A"].cast<Mat>());
      const std::string loss = d.contains("loss") ? d["loss"].cast<std::string>() : "least_squares";
      if (loss == "least_squares") s.loss = SmoothLoss::least_squares;
      else if (loss == "logistic") s.loss = SmoothLoss::logistic;
      else if (loss == "quadratic") s.loss = SmoothLoss::quadratic;
      else throw ParameterError("unknown loss '" + loss + "'");
      if (d.contains("data")) s.data = d["data"].cast<Vec>();
      b.objective.smooth = std::move(s);
    }
    if (d.contains("l1")) {
      L1Part l1{d["l1"].cast<double>(), Vec()};
      if (d.contains("l1_weights")) l1.weights = d["l1_weights"].cast<Vec>();
      b.objective.l1 = std::move(l1);
    }
    if (d.contains("lo") || d.contains("hi")) {
      const double inf = std::numeric_limits<double>::infinity();
      Box box{Vec::Constant(b.n, -inf), Vec::Constant(b.n, inf)};
      if (d.contains("lo")) box.lo = d["lo"].cast<Vec>();
      if (d.contains("hi")) box.hi = d["hi"].cast<Vec>();
      b.box = std::move(box);
    }
    specs.push_back(std::move(b));
  }
  return Problem(std::move(specs), q);
}

InexactSchedule schedule(double eps0, double gamma, double E_norm) {
  InexactSchedule s;
  s.eps0 = eps0;
  s.gamma = gamma;
  s.E_norm = E_norm;
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Alternating direction decomposition solvers (ADA / iADA) and baselines.";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ParameterError", error.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", error.ptr());

  py::class_<Problem>(m, "Problem")
      .def_property_readonly("num_blocks", &Problem::num_blocks)
      .def_property_readonly("m", &Problem::m)
      .def_property_readonly("q", &Problem::q)
      .def_property_readonly("block_sizes", [](const Problem& p) {
        std::vector<Index> n;
        for (const auto& b : p.blocks()) n.push_back(b.n);
        return n;
      });

  m.def("make_problem", &make_problem, py::arg("blocks"), py::arg("q"));
  m.def("lasso_problem", &lasso_problem, py::arg("A"), py::arg("b"), py::arg("lam"));
  m.def(
      "gen_lasso",
      [](Index n, Index d, std::uint64_t seed) {
        LassoInstance inst = gen_lasso(n, d, seed);
        py::dict out;
        out["A"] = inst.A;
        out["b"] = inst.b;
        out["x0"] = inst.x0;
        out["lam"] = inst.lambda;
        out["problem"] = std::move(inst.problem);
        return out;
      },
      py::arg("n"), py::arg("d"), py::arg("seed") = 1);
  m.def(
      "gen_exchange",
      [](std::size_t K, Index n, Index p, std::uint64_t seed) {
        ExchangeInstance inst = gen_exchange(K, n, p, seed);
        return py::make_tuple(std::move(inst.problem), inst.x_star);
      },
      py::arg("K"), py::arg("n"), py::arg("p"), py::arg("seed") = 1);
  m.def(
      "gen_logreg_data",
      [](Index n, Index d, std::uint64_t seed) {
        LabeledData data = gen_logreg_data(n, d, seed);
        return py::make_tuple(data.A.to_dense(), data.labels);
      },
      py::arg("n"), py::arg("d"), py::arg("seed") = 1);
  m.def(
      "logreg_consensus_problem",
      [](const Mat& A, const Vec& labels, std::size_t N, double lam) {
        return build_logreg_consensus(partition_rows(DesignMatrix(A), labels, N), lam);
      },
      py::arg("A"), py::arg("labels"), py::arg("N"), py::arg("lam"));

  m.def("project_onto_W", &project_onto_W, py::arg("v"));
  m.def("project_onto_Wperp", &project_onto_Wperp, py::arg("v"));
  m.def("g_norm_sq", &g_norm_sq, py::arg("dw"), py::arg("dx"), py::arg("deta"), py::arg("dzeta"),
        py::arg("rho"), py::arg("c"));
  m.def("soft_threshold", py::overload_cast<const Vec&, double>(&soft_threshold), py::arg("a"),
        py::arg("kappa"));
  m.def("objective", &objective, py::arg("x"), py::arg("problem"));
  m.def("constraint_residual", &constraint_residual, py::arg("x"), py::arg("problem"));
  m.def("kkt_residual", &kkt_residual, py::arg("x"), py::arg("y"), py::arg("problem"));
  m.def("consensus_ratio", &consensus_ratio, py::arg("x"));
  m.def("spectral_norm", [](const Mat& E) { return spectral_norm(E); }, py::arg("E"));
  m.def("spectral_norm", [](const Problem& p) { return spectral_norm(p); }, py::arg("problem"));
  m.def(
      "criterion_A_threshold",
      [](std::size_t nu, double eps0, double gamma, double E_norm, double rho, double c, std::size_t K) {
        return criterion_A_threshold(nu, schedule(eps0, gamma, E_norm), rho, c, K);
      },
      py::arg("nu"), py::arg("eps0"), py::arg("gamma"), py::arg("E_norm"), py::arg("rho"), py::arg("c"),
      py::arg("K"));
  m.def(
      "criterion_B_threshold",
      [](std::size_t nu, double eps0, double gamma, double E_norm, double rho, double c, std::size_t K,
         double step) { return criterion_B_threshold(nu, schedule(eps0, gamma, E_norm), rho, c, K, step); },
      py::arg("nu"), py::arg("eps0"), py::arg("gamma"), py::arg("E_norm"), py::arg("rho"), py::arg("c"),
      py::arg("K"), py::arg("x_step_norm"));

  m.def(
      "solve",
      [](const Problem& problem, const std::string& config_json) {
        const ExperimentConfig config = parse_config(config_json);
        SolveOutcome out;
        {
          py::gil_scoped_release release;
          out = solve(problem, config);
        }
        py::dict r;
        r["x"] = out.x;
        r["multiplier"] = out.multiplier;
        r["status"] = status_name(out.status);
        r["iterations"] = out.trace.size();
        r["trace"] = trace_columns(out.trace);
        r["E_norm"] = out.E_norm;
        return r;
      },
      py::arg("problem"), py::arg("config_json"));
  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ExperimentConfig config = parse_config(config_json);
        ExperimentResult res;
        {
          py::gil_scoped_release release;
          res = run_experiment(config);
        }
        py::dict r;
        r["exit_code"] = res.exit_code;
        r["wall_seconds"] = res.wall_seconds;
        r["iterations"] = res.outcome.trace.size();
        r["f_star"] = res.f_star ? py::object(py::float_(*res.f_star)) : py::object(py::none());
        r["rate_report"] = to_json(res.report);
        return r;
      },
      py::arg("config_json"));

  m.def(
      "load_libsvm",
      [](const std::string& path) {
        LibsvmData d = load_libsvm(path);
        return py::make_tuple(std::move(d.A), std::move(d.labels));
      },
      py::arg("path"));
  m.def(
      "write_libsvm",
      [](const std::string& path, const SparseMat& A, const Vec& labels) {
        std::ofstream f(path);
        if (!f) throw Error("cannot write " + path);
        write_libsvm(f, A, labels);
      },
      py::arg("path"), py::arg("A"), py::arg("labels"));
}
