#include "mfbalance/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "mfbalance/csv.hpp"

namespace mfbalance {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

class Section {
 public:
  Section(std::string name, const pt::ptree& tree) : name_(std::move(name)), tree_(tree) {}

  const std::string& name() const { return name_; }
  const pt::ptree& tree() const { return tree_; }

  std::optional<std::string> text(const std::string& key) {
    known_.insert(key);
    const auto it = tree_.find(key);
    if (it == tree_.not_found()) return std::nullopt;
    return trim(it->second.data());
  }

  void real(const std::string& key, double& target) {
    if (auto v = text(key)) target = parse_real(*v, key);
  }
  void integer(const std::string& key, std::uint64_t& target) {
    if (auto v = text(key)) target = parse_uint(*v, key);
  }
  void flag(const std::string& key, bool& target) {
    if (auto v = text(key)) {
      if (*v == "true" || *v == "1" || *v == "yes") target = true;
      else if (*v == "false" || *v == "0" || *v == "no") target = false;
      else fail(key, "expected true or false, got '" + *v + "'");
    }
  }

  double parse_real(const std::string& s, const std::string& key) const {
    const auto slash = s.find('/');
    if (slash != std::string::npos)
      return parse_real(s.substr(0, slash), key) / parse_real(s.substr(slash + 1), key);
    double v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
      fail(key, "expected a number, got '" + s + "'");
    return v;
  }
  std::uint64_t parse_uint(const std::string& s, const std::string& key) const {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
      fail(key, "expected a nonnegative integer, got '" + s + "'");
    return v;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError("[" + name_ + "] " + key + ": " + what);
  }

  // Rejects keys nobody asked for, which are almost always typos.
  void check_unknown() const {
    for (const auto& [key, value] : tree_)
      if (!known_.count(key)) fail(key, "unknown key");
  }

 private:
  std::string name_;
  const pt::ptree& tree_;
  std::set<std::string> known_;
};

void read_cluster(Section& s, RunConfig& c) {
  s.real("os_overhead", c.scenario.os_overhead);
  std::vector<ServerSpec> servers;
  for (const auto& [key, value] : s.tree()) {
    if (key.rfind("server.", 0) != 0) continue;
    s.text(key);
    const std::string id_text = key.substr(7);
    const auto w = words(value.data());
    if (w.size() != 4) s.fail(key, "expected '<cluster> <cpu> <ram> <net>'");
    ServerSpec spec;
    spec.id = static_cast<int>(s.parse_uint(id_text, key));
    spec.cluster = static_cast<int>(s.parse_uint(w[0], key));
    spec.capacity = {s.parse_real(w[1], key), s.parse_real(w[2], key), s.parse_real(w[3], key)};
    servers.push_back(spec);
  }
  if (!servers.empty()) c.scenario.cluster = std::move(servers);
}

void read_classes(Section& s, RunConfig& c) {
  std::vector<FlowClass> classes;
  for (const auto& [key, value] : s.tree()) {
    s.text(key);
    const auto w = words(value.data());
    if (w.size() != 5) s.fail(key, "expected '<cpu> <ram> <net> <mean duration> <weight>'");
    FlowClass f;
    f.id = key;
    f.cpu_demand = s.parse_real(w[0], key);
    f.ram_demand = s.parse_real(w[1], key);
    f.net_demand = s.parse_real(w[2], key);
    f.mean_duration = s.parse_real(w[3], key);
    f.weight = s.parse_real(w[4], key);
    classes.push_back(f);
  }
  if (!classes.empty()) c.scenario.classes = std::move(classes);
}

void read_traffic(Section& s, RunConfig& c) {
  auto& t = c.scenario.traffic;
  s.real("h", t.target_h);
  s.real("delta_h", t.target_delta_h);
  std::uint64_t length = t.length;
  s.integer("length", length);
  t.length = static_cast<std::size_t>(length);
  s.real("mean_rate", t.mean_rate);
  if (s.text("slot_duration")) {
    s.real("slot_duration", t.slot_duration);
    c.slot_duration_set = true;
  }
}

void read_policy(Section& s, RunConfig& c) {
  auto& p = c.scenario.policy;
  if (auto v = s.text("name")) p.kind = parse_policy(*v);
  s.real("a", p.weights.a);
  s.real("b", p.weights.b);
  s.real("c", p.weights.c);
  s.flag("random_ties", p.random_ties);
}

void read_monitoring(Section& s, RunConfig& c) {
  auto& m = c.scenario.monitoring;
  if (auto v = s.text("mode")) m.kind = parse_monitoring(*v);
  s.real("interval", m.interval);
  s.real("min_interval", m.min_interval);
  s.real("max_interval", m.max_interval);
  s.real("cv_threshold", m.cv_threshold);
  s.real("cv_window", m.cv_window);
  if (auto v = s.text("view")) c.scenario.view = parse_dispatch_view(*v);
}

std::vector<SweepCell> parse_grid(Section& s, const std::string& text) {
  std::vector<SweepCell> grid;
  for (const auto& w : words(text)) {
    const auto colon = w.find(':');
    if (colon == std::string::npos) s.fail("grid", "expected cells written as H:delta_h");
    grid.push_back({s.parse_real(w.substr(0, colon), "grid"),
                    s.parse_real(w.substr(colon + 1), "grid")});
  }
  return grid;
}

void read_run(Section& s, RunConfig& c) {
  auto& sc = c.scenario;
  s.real("run_length", sc.run_length);
  s.real("tick", sc.tick);
  s.integer("seed", sc.seed);
  s.flag("reject_when_saturated", sc.reject_when_saturated);
  s.real("equilibrium_window", sc.equilibrium.window);
  s.real("epsilon", sc.equilibrium.epsilon);
  s.real("final_window", sc.final_window);
  std::uint64_t seeds = c.seeds;
  s.integer("seeds", seeds);
  c.seeds = static_cast<std::size_t>(seeds);
  if (auto v = s.text("grid")) c.grid = parse_grid(s, *v);
  if (auto v = s.text("out")) c.out_dir = *v;
  if (auto v = s.text("formats")) c.formats = words(*v);
  std::uint64_t verbosity = static_cast<std::uint64_t>(c.verbosity);
  s.integer("verbosity", verbosity);
  c.verbosity = static_cast<int>(verbosity);
}

std::string join(const std::vector<std::string>& w) {
  std::string out;
  for (const auto& s : w) out += (out.empty() ? "" : " ") + s;
  return out;
}

}  // namespace

void sync_slot_duration(RunConfig& config) {
  if (config.slot_duration_set) return;
  auto& t = config.scenario.traffic;
  if (t.length > 0) t.slot_duration = config.scenario.run_length / static_cast<double>(t.length);
}

void RunConfig::validate() const {
  scenario.validate();
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  for (const auto& cell : grid) {
    if (!(cell.target_h > 0.0 && cell.target_h < 1.0))
      throw ConfigError("grid H must lie in (0, 1)");
    if (!(cell.target_delta_h >= 0.0)) throw ConfigError("grid delta_h must be nonnegative");
  }
  if (seeds == 0) throw ConfigError("seeds per cell must be positive");
  for (const auto& f : formats)
    if (f != "csv") throw ConfigError("unsupported output format '" + f + "'");
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(source, e.line(), e.message());
  }

  RunConfig config;
  static const std::map<std::string, void (*)(Section&, RunConfig&)> readers = {
      {"cluster", read_cluster}, {"classes", read_classes},       {"traffic", read_traffic},
      {"policy", read_policy},   {"monitoring", read_monitoring}, {"run", read_run},
  };
  for (const auto& [name, body] : tree) {
    const auto it = readers.find(name);
    if (it == readers.end()) throw ConfigError("unknown section [" + name + "]");
    if (body.empty() && !body.data().empty())
      throw ConfigError("key '" + name + "' must belong to a section");
    Section section(name, body);
    it->second(section, config);
    section.check_unknown();
    config.sections.insert(name);
  }
  sync_slot_duration(config);
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in, path.string());
}

void write_config(std::ostream& out, const RunConfig& c) {
  const auto& sc = c.scenario;
  const auto n = [](double v) { return format_number(v); };
  out << "[cluster]\n";
  for (const auto& s : sc.cluster)
    out << "server." << s.id << " = " << s.cluster << ' ' << n(s.capacity.cpu) << ' '
        << n(s.capacity.ram) << ' ' << n(s.capacity.net) << '\n';
  out << "os_overhead = " << n(sc.os_overhead) << "\n\n[classes]\n";
  for (const auto& f : sc.classes)
    out << f.id << " = " << n(f.cpu_demand) << ' ' << n(f.ram_demand) << ' ' << n(f.net_demand)
        << ' ' << n(f.mean_duration) << ' ' << n(f.weight) << '\n';
  const auto& t = sc.traffic;
  out << "\n[traffic]\nh = " << n(t.target_h) << "\ndelta_h = " << n(t.target_delta_h)
      << "\nlength = " << t.length << "\nmean_rate = " << n(t.mean_rate) << '\n';
  if (c.slot_duration_set) out << "slot_duration = " << n(t.slot_duration) << '\n';
  const auto& p = sc.policy;
  out << "\n[policy]\nname = " << policy_name(p.kind) << "\na = " << n(p.weights.a)
      << "\nb = " << n(p.weights.b) << "\nc = " << n(p.weights.c)
      << "\nrandom_ties = " << (p.random_ties ? "true" : "false") << '\n';
  const auto& m = sc.monitoring;
  out << "\n[monitoring]\nmode = " << monitoring_name(m.kind) << "\ninterval = " << n(m.interval)
      << "\nmin_interval = " << n(m.min_interval) << "\nmax_interval = " << n(m.max_interval)
      << "\ncv_threshold = " << n(m.cv_threshold) << "\ncv_window = " << n(m.cv_window)
      << "\nview = " << dispatch_view_name(sc.view) << '\n';
  out << "\n[run]\nrun_length = " << n(sc.run_length) << "\ntick = " << n(sc.tick)
      << "\nseed = " << sc.seed
      << "\nreject_when_saturated = " << (sc.reject_when_saturated ? "true" : "false")
      << "\nequilibrium_window = " << n(sc.equilibrium.window)
      << "\nepsilon = " << n(sc.equilibrium.epsilon) << "\nfinal_window = " << n(sc.final_window)
      << "\nseeds = " << c.seeds << "\ngrid =";
  for (const auto& g : c.grid) out << ' ' << n(g.target_h) << ':' << n(g.target_delta_h);
  out << "\nout = " << c.out_dir.string() << "\nformats = " << join(c.formats)
      << "\nverbosity = " << c.verbosity << '\n';
}

}  // namespace mfbalance
