#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <sstream>

#include "fkmad/cli.hpp"
#include "fkmad/config.hpp"
#include "fkmad/data.hpp"
#include "fkmad/errors.hpp"
#include "fkmad/scoring.hpp"
#include "fkmad/verify.hpp"

namespace py = pybind11;
using namespace fkmad;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.vec().begin(), t.vec().end(), out.mutable_data());
  return out;
}

Tensor matrix(const Array& a, const char* what) {
  if (a.ndim() == 1) return Tensor({static_cast<std::size_t>(a.shape(0)), 1}, std::vector<double>(a.data(), a.data() + a.size()));
  if (a.ndim() != 2) throw ShapeError(std::string(what) + ": expected a 1-d or 2-d array");
  return to_tensor(a);
}

std::vector<int> to_labels(const py::array_t<int, py::array::c_style | py::array::forcecast>& y) {
  return std::vector<int>(y.data(), y.data() + y.size());
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["precision"] = r.precision;
  d["recall"] = r.recall;
  d["f1"] = r.f1;
  d["pa_precision"] = r.pa_precision;
  d["pa_recall"] = r.pa_recall;
  d["pa_f1"] = r.pa_f1;
  d["threshold"] = r.threshold;
  d["predicted"] = r.predicted;
  d["positives"] = r.positives;
  d["degenerate_labels"] = r.degenerate_labels;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of fkmad";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def(
      "synth_benchmark",
      [](const std::string& kind, std::size_t T, std::size_t D, const std::vector<std::string>& anomalies,
         double density, double amplitude, double noise, std::size_t tones, double clean_fraction,
         std::uint64_t seed) {
        SynthSpec sp;
        sp.kind = parse_synth_kind(kind);
        sp.T = T;
        sp.D = D;
        sp.anomalies.clear();
        for (const std::string& a : anomalies) sp.anomalies.push_back(parse_anomaly_type(a));
        sp.density = density;
        sp.amplitude = amplitude;
        sp.noise = noise;
        sp.tones = tones;
        sp.clean_fraction = clean_fraction;
        sp.seed = seed;
        const LabeledSeries s = synth_benchmark(sp);
        py::array_t<int> labels(static_cast<py::ssize_t>(s.labels.size()));
        std::copy(s.labels.begin(), s.labels.end(), labels.mutable_data());
        return py::make_tuple(to_array(s.values), labels);
      },
      py::arg("kind") = "multisine", py::arg("T") = 4000, py::arg("D") = 4,
      py::arg("anomalies") = std::vector<std::string>{"spike"}, py::arg("density") = 0.01,
      py::arg("amplitude") = 10.0, py::arg("noise") = 0.1, py::arg("tones") = 3, py::arg("clean_fraction") = 0.0,
      py::arg("seed") = 0, "Labelled synthetic series as (values [T, D], labels [T]).");

  m.def(
      "hfr", [](const Array& x, double cutoff) { return hfr(matrix(x, "hfr"), cutoff); }, py::arg("x"),
      py::arg("cutoff") = 0.5, "Share of spectral power at or above `cutoff` of Nyquist, pooled over columns.");
  m.def(
      "energy", [](const Array& x) { return energy(std::span<const double>(x.data(), x.size())); }, py::arg("x"));
  m.def(
      "similarity_matrix", [](const Array& x) { return to_array(similarity_matrix(matrix(x, "similarity_matrix"))); },
      py::arg("x"), "Cosine similarity between the rows of x.");
  m.def(
      "locality", [](const Array& s, std::size_t band) { return locality(to_tensor(s), band); }, py::arg("S"),
      py::arg("band"));
  m.def(
      "zscore_scores", [](const Array& x) { return zscore_scores(matrix(x, "zscore_scores")); }, py::arg("values"));
  m.def("percentile", &percentile, py::arg("values"), py::arg("q"));

  m.def(
      "evaluate",
      [](const std::vector<double>& scores, const py::array_t<int, py::array::c_style | py::array::forcecast>& labels,
         std::optional<double> top_k, std::optional<double> threshold) {
        if (top_k && threshold) throw ConfigError("evaluate: give top_k or threshold, not both");
        const std::vector<int> y = to_labels(labels);
        const ThresholdPolicy policy = threshold ? ThresholdPolicy::fixed(*threshold)
                                                 : ThresholdPolicy::top_k(top_k ? *top_k : label_ratio(y));
        return report_dict(evaluate(scores, y, policy));
      },
      py::arg("scores"), py::arg("labels"), py::kw_only(), py::arg("top_k") = py::none(),
      py::arg("threshold") = py::none(),
      "Raw and point-adjusted metrics; the default policy flags the top label-ratio share.");

  m.def(
      "verify",
      [](const std::string& suite, std::uint64_t seed) {
        verify::Options o;
        o.seed = seed;
        py::list out;
        for (const verify::CheckResult& r : verify::run_suite(suite, o)) {
          py::dict d;
          d["suite"] = r.suite;
          d["name"] = r.name;
          d["passed"] = r.passed;
          d["measured"] = r.measured;
          d["tolerance"] = r.tolerance;
          d["detail"] = r.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("suite") = "all", py::arg("seed") = 1);

  m.def("default_config", [] { return format_config(RunConfig()); });
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one fkmad command; returns (exit code, stdout, stderr).");
}
