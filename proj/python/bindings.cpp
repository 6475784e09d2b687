#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "mfbalance/config.hpp"
#include "mfbalance/sim.hpp"

namespace py = pybind11;
using namespace mfbalance;

namespace {

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw py::value_error("expected a one-dimensional array");
  return {a.data(), a.data() + a.size()};
}

py::dict curve_dict(const HurstCurve& c) {
  py::dict d;
  d["q"] = py::cast([&] {
    std::vector<double> q;
    for (const auto& [k, v] : c.points) q.push_back(k);
    return q;
  }());
  d["h"] = py::cast([&] {
    std::vector<double> h;
    for (const auto& [k, v] : c.points) h.push_back(v);
    return h;
  }());
  d["h2"] = c.h2();
  d["delta_h"] = c.delta_h;
  d["dropped_windows"] = c.dropped_windows;
  return d;
}

py::dict summary_dict(const RunSummary& s) {
  py::dict d;
  d["equilibrium_time"] = s.equilibrium_time;
  d["imb_tot_final"] = s.imb_tot_final;
  d["processing_period_system"] = s.processing_period_system;
  d["efficiency"] = s.efficiency;
  d["admitted"] = s.admitted;
  d["dropped"] = s.dropped;
  d["completed"] = s.completed;
  return d;
}

py::dict result_dict(const RunResult& r) {
  std::vector<double> t, cpu, ram, net, tot;
  for (const auto& rep : r.reports) {
    t.push_back(rep.t);
    cpu.push_back(rep.imb_cpu);
    ram.push_back(rep.imb_ram);
    net.push_back(rep.imb_net);
    tot.push_back(rep.imb_tot);
  }
  py::dict d;
  d["t"] = py::array(py::cast(t));
  d["imb_cpu"] = py::array(py::cast(cpu));
  d["imb_ram"] = py::array(py::cast(ram));
  d["imb_net"] = py::array(py::cast(net));
  d["imb_tot"] = py::array(py::cast(tot));
  d["summary"] = summary_dict(r.summary);
  d["achieved"] = curve_dict(r.trace.achieved);
  return d;
}

Scenario scenario_for(double h, double delta_h, std::uint64_t seed, const std::string& policy,
                      const std::optional<std::string>& config) {
  Scenario s = config ? load_config(*config).scenario : default_scenario(h, delta_h, seed);
  if (config) {
    s.traffic.target_h = h;
    s.traffic.target_delta_h = delta_h;
    s.seed = seed;
  }
  s.policy.kind = parse_policy(policy);
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Load imbalance under multifractal traffic";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  m.def(
      "hurst_curve",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& series,
         std::optional<std::vector<double>> q, bool dyadic) {
        const auto v = to_vector(series);
        const QGrid grid = q ? QGrid(*q) : QGrid::standard();
        const ScaleGrid scales = dyadic ? ScaleGrid::dyadic(v.size()) : ScaleGrid::log_spaced(v.size());
        return curve_dict(estimate_hurst_curve(v, grid, scales));
      },
      py::arg("series"), py::arg("q") = py::none(), py::arg("dyadic") = false,
      "Generalized Hurst exponents h(q) of a series.");

  m.def(
      "fgn", [](double h, std::size_t n, std::uint64_t seed) { return py::array(py::cast(generate_fgn(h, n, seed))); },
      py::arg("h"), py::arg("n"), py::arg("seed") = 1, "Fractional Gaussian noise, unit variance.");

  m.def(
      "generate",
      [](double h, double delta_h, std::uint64_t seed, std::size_t length) {
        MultifractalSpec spec;
        spec.target_h = h;
        spec.target_delta_h = delta_h;
        spec.seed = seed;
        spec.length = length;
        bool calibrated = true;
        TrafficTrace trace;
        try {
          trace = generate_traffic(spec);
        } catch (const CalibrationError& e) {
          trace = e.best();
          calibrated = false;
        }
        py::dict d;
        d["slots"] = py::array(py::cast(trace.slots));
        d["achieved"] = curve_dict(trace.achieved);
        d["calibrated"] = calibrated;
        return d;
      },
      py::arg("h"), py::arg("delta_h"), py::arg("seed") = 1, py::arg("length") = 4096,
      "Calibrated arrival-intensity trace.");

  m.def(
      "imbalance",
      [](const std::vector<std::array<double, 3>>& util,
         const std::vector<std::array<double, 3>>& capacity, std::array<double, 3> weights) {
        if (util.size() != capacity.size()) throw py::value_error("util and capacity differ in length");
        std::vector<ServerSnapshot> servers;
        for (std::size_t i = 0; i < util.size(); ++i) {
          const Resources c{capacity[i][0], capacity[i][1], capacity[i][2]};
          const Resources u{util[i][0], util[i][1], util[i][2]};
          servers.push_back({static_cast<int>(i + 1), c, {u.cpu * c.cpu, u.ram * c.ram, u.net * c.net}, u});
        }
        const auto r = imbalance_report(0, servers, Weights{weights[0], weights[1], weights[2]});
        py::dict d;
        d["averages"] = std::array<double, 3>{r.averages.cpu_all, r.averages.ram_all, r.averages.net_all};
        d["imb_cpu"] = r.imb_cpu;
        d["imb_ram"] = r.imb_ram;
        d["imb_net"] = r.imb_net;
        std::vector<double> per;
        for (const auto& [id, v] : r.per_server) per.push_back(v);
        d["per_server"] = per;
        d["imb_tot"] = r.imb_tot;
        return d;
      },
      py::arg("util"), py::arg("capacity"), py::arg("weights") = std::array<double, 3>{1.0 / 3, 1.0 / 3, 1.0 / 3},
      "Imbalance metrics of one cluster state; rows are servers, columns cpu, ram, net.");

  m.def(
      "simulate",
      [](double h, double delta_h, std::uint64_t seed, const std::string& policy,
         std::optional<std::string> config) {
        const Scenario s = scenario_for(h, delta_h, seed, policy, config);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run(s);
        }
        return result_dict(r);
      },
      py::arg("h") = 0.8, py::arg("delta_h") = 2.0, py::arg("seed") = 1,
      py::arg("policy") = "min_imbalance", py::arg("config") = py::none(),
      "One simulated run; returns the report series and the run summary.");

  m.def(
      "sweep",
      [](std::size_t seeds, std::uint64_t seed, const std::string& policy,
         std::optional<std::vector<std::pair<double, double>>> cells) {
        std::vector<SweepCell> grid;
        if (cells)
          for (const auto& [h, dh] : *cells) grid.push_back({h, dh});
        else
          grid = table1_grid();
        Scenario base = default_scenario(0.8, 2.0, seed);
        base.policy.kind = parse_policy(policy);
        std::vector<SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = sweep(grid, base, {seeds, 0});
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["h"] = r.cell.target_h;
          d["delta_h"] = r.cell.target_delta_h;
          d["t_eq"] = r.t_eq;
          d["t_eq_censored"] = r.t_eq_censored;
          d["imb_tot_final"] = r.imb_tot_final;
          d["seeds"] = r.seeds;
          d["calibration_misses"] = r.calibration_misses;
          out.append(d);
        }
        return out;
      },
      py::arg("seeds") = 10, py::arg("seed") = 1, py::arg("policy") = "min_imbalance",
      py::arg("cells") = py::none(), "Grid of (H, delta_h) cells; the 4 x 4 table grid by default.");
}
