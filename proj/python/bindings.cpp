#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "trustroute/cli.hpp"
#include "trustroute/collector.hpp"
#include "trustroute/decision.hpp"
#include "trustroute/evalkit.hpp"
#include "trustroute/scorer.hpp"

namespace py = pybind11;
using namespace trustroute;

namespace {

// One embedder for the whole interpreter; it is stateless and thread-safe.
HashingEmbedder& hashing_embedder() {
  static HashingEmbedder emb;
  return emb;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of trustroute";

  // Translators registered later are tried first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);

  py::class_<TrustScores>(m, "TrustScores")
      .def_readonly("t_ret", &TrustScores::t_ret)
      .def_readonly("t_llm", &TrustScores::t_llm)
      .def("__repr__", [](const TrustScores& t) {
        return "TrustScores(t_ret=" + std::to_string(t.t_ret) + ", t_llm=" + std::to_string(t.t_llm) + ")";
      });

  m.def(
      "trust_scores",
      [](double r_p, double s2, double s3) { return trust_scores({r_p, 1.0 - r_p, ""}, {0, s2, s3, 0}); },
      py::arg("r_p"), py::arg("s2"), py::arg("s3"), "Retriever and generator trust for a bias and S2/S3.");

  m.def(
      "detect_conflict", [](double s1, double s4) { return detect_conflict({s1, 0, 0, s4}); }, py::arg("s1"),
      py::arg("s4"), "True when internal and external sources agree strongly enough to answer from both.");

  m.def(
      "decide",
      [](double r_p, double s1, double s2, double s3, double s4, double alpha, double beta, int max_reflections,
         int reflections_used) {
        const Thresholds thr{alpha, beta, max_reflections};
        thr.validate();
        const auto v = decide({r_p, 1.0 - r_p, ""}, {s1, s2, s3, s4}, thr, reflections_used);
        py::list trace;
        for (const auto& f : v.trace) trace.append(py::make_tuple(f.rule, f.detail));
        py::dict d;
        d["outcome"] = std::string(to_string(v.outcome));
        d["t_ret"] = v.trust.t_ret;
        d["t_llm"] = v.trust.t_llm;
        d["trace"] = trace;
        return d;
      },
      py::arg("r_p"), py::arg("s1"), py::arg("s2"), py::arg("s3"), py::arg("s4"), py::arg("alpha") = 0.5,
      py::arg("beta") = 1.1, py::arg("max_reflections") = 3, py::arg("reflections_used") = 0,
      "Run the decision tree for one question; returns outcome, trust scores and the rule trace.");

  m.def(
      "pair_score",
      [](const std::string& a, const std::string& b, std::tuple<double, double, double> w) {
        return pair_score(a, b, hashing_embedder(), {std::get<0>(w), std::get<1>(w), std::get<2>(w)});
      },
      py::arg("a"), py::arg("b"), py::arg("weights") = std::make_tuple(0.2, 0.4, 0.4),
      "Sparse/dense/late-interaction similarity under the in-tree hashing embedder.");

  m.def("allocation_count", &allocation_count, py::arg("p"), py::arg("n"), "ceil(p * n), clamped to [0, n].");

  m.def(
      "normalize_bias",
      [](double r, double g) {
        const auto b = normalize_bias(r, g);
        return py::make_tuple(b.r_p, b.g_p);
      },
      py::arg("r"), py::arg("g"));

  m.def("efficiency", &efficiency, py::arg("accuracy_pct"), py::arg("avg_calls"));
  m.def("normalize_answer", [](const std::string& s) { return normalize_answer(s); }, py::arg("text"));
  m.def(
      "exact_match", [](const std::string& p, const std::vector<std::string>& g) { return exact_match(p, g); },
      py::arg("prediction"), py::arg("golds"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "trustroute");
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
