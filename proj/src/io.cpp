#include "histfun/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "histfun/error.hpp"

namespace histfun::io {

namespace {

double parse_number(const std::string& field, const std::string& path, std::size_t line) {
  std::size_t begin = field.find_first_not_of(" \t\r");
  std::size_t end = field.find_last_not_of(" \t\r");
  if (begin == std::string::npos) {
    throw DataError(path + ":" + std::to_string(line) + ": empty field");
  }
  const std::string token = field.substr(begin, end - begin + 1);
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw DataError(path + ":" + std::to_string(line) + ": not a number: '" + token + "'");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidConfig("cannot open '" + path + "' for writing");
  return out;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

FunctionalSample read_sample_csv(const std::string& path, CurveRole role) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) row.push_back(parse_number(field, path, line_no));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(rows.front().size()) +
                      " columns, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw DataError(path + ": need a grid row and at least one curve");
  const auto q = static_cast<Eigen::Index>(rows.front().size());
  Eigen::VectorXd grid = Eigen::Map<const Eigen::VectorXd>(rows.front().data(), q);
  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size() - 1), q);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    values.row(static_cast<Eigen::Index>(i - 1)) = Eigen::Map<const Eigen::RowVectorXd>(rows[i].data(), q);
  }
  return FunctionalSample(std::move(grid), std::move(values), role);
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_sample_csv(const std::string& path, const FunctionalSample& sample) {
  auto out = open_out(path);
  auto write_row = [&](const auto& row) {
    for (Eigen::Index q = 0; q < row.size(); ++q) out << (q ? "," : "") << format_number(row[q]);
    out << '\n';
  };
  write_row(sample.grid);
  for (int i = 0; i < sample.num_curves(); ++i) write_row(sample.values.row(i));
}

const char* to_string(LagConvention convention) {
  return convention == LagConvention::kGroupIndex ? "index" : "support";
}

LagConvention lag_convention_from_string(const std::string& name) {
  if (name == "index") return LagConvention::kGroupIndex;
  if (name == "support") return LagConvention::kSupportBoundary;
  throw InvalidConfig("unknown lag convention '" + name + "' (expected 'index' or 'support')");
}

json omega_to_json(const SmoothnessWeights& omega) {
  return {{"horizontal", omega.horizontal}, {"vertical", omega.vertical}, {"diagonal", omega.diagonal}};
}

SmoothnessWeights omega_from_json(const json& j) {
  return {j.at("horizontal").get<double>(), j.at("vertical").get<double>(), j.at("diagonal").get<double>()};
}

json mesh_to_json(const TriangularMesh& mesh) {
  json nodes = json::array();
  for (const Point& p : mesh.nodes()) nodes.push_back({p.s, p.t});
  json triangles = json::array();
  for (const Triangle& tri : mesh.triangles()) triangles.push_back({tri[0], tri[1], tri[2]});
  return {{"M", mesh.subdivisions()}, {"T", mesh.horizon()}, {"nodes", nodes}, {"triangles", triangles}};
}

json scenario_to_json(const Scenario& sc) {
  json holes = json::array();
  for (const Hole& h : sc.holes) holes.push_back({{"s", h.s}, {"t", h.t}, {"radius", h.radius}});
  return {{"scenario", sc.id},   {"delta", sc.delta},         {"epsilon", sc.epsilon},
          {"T", sc.horizon},     {"amplitude", sc.amplitude}, {"holes", holes}};
}

Scenario scenario_from_json(const json& j) {
  Scenario sc;
  sc.id = j.at("scenario").get<int>();
  sc.delta = j.at("delta").get<double>();
  sc.epsilon = j.at("epsilon").get<double>();
  sc.horizon = j.at("T").get<double>();
  sc.amplitude = j.value("amplitude", 10.0);
  for (const auto& h : j.value("holes", json::array())) {
    sc.holes.push_back({h.at("s").get<double>(), h.at("t").get<double>(), h.at("radius").get<double>()});
  }
  sc.validate();
  return sc;
}

json fit_to_json(const FitResult& fit, const std::optional<BootstrapResult>& ci) {
  const auto& mesh = fit.beta_hat.mesh();
  json j;
  j["delta_hat"] = fit.lag.delta;
  j["lag_group"] = fit.lag.group;
  j["lag_convention"] = to_string(fit.options.lag_convention);
  j["ci"] = ci ? json{{"lower", ci->lower}, {"upper", ci->upper}, {"level", ci->level}} : json(nullptr);
  j["lambda"] = fit.options.bridge.lambda;
  j["omega"] = omega_to_json(fit.options.omega);
  j["gamma"] = fit.options.bridge.gamma;
  j["M"] = mesh.subdivisions();
  j["T"] = mesh.horizon();
  j["K"] = mesh.num_nodes();
  j["bic"] = fit.bic;
  j["df"] = fit.df;
  j["rss"] = fit.rss;
  j["b"] = vector_to_json(fit.beta_hat.coefficients());
  j["b_bridge"] = vector_to_json(fit.b_bridge.coefficients());
  j["alpha"] = vector_to_json(fit.alpha_hat);
  j["grid"] = vector_to_json(fit.grid);
  j["c"] = vector_to_json(fit.c);
  j["adaptive_weights"] = fit.options.adaptive_weights;
  j["objective_trace"] = fit.objective_trace;
  j["iterations"] = fit.log.size();
  return j;
}

FitSpec fit_spec_from_json(const json& j) {
  try {
    FitSpec spec;
    spec.subdivisions = j.at("M").get<int>();
    spec.horizon = j.at("T").get<double>();
    spec.options.bridge.lambda = j.at("lambda").get<double>();
    spec.options.bridge.gamma = j.at("gamma").get<double>();
    spec.options.omega = omega_from_json(j.at("omega"));
    spec.options.lag_convention = lag_convention_from_string(j.value("lag_convention", "index"));
    spec.options.adaptive_weights = j.value("adaptive_weights", true);
    spec.delta_hat = j.at("delta_hat").get<double>();
    spec.b = vector_from_json(j.at("b"));
    return spec;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed fit JSON: ") + e.what());
  }
}

json ci_to_json(const BootstrapResult& ci, double delta_hat, int replications, std::uint64_t seed) {
  return {{"delta_hat", delta_hat},       {"lower", ci.lower},       {"upper", ci.upper},
          {"level", ci.level},            {"B", replications},       {"seed", seed},
          {"successful", ci.deltas.size()}, {"failed", ci.failed}};
}

void write_beta_grid(const std::string& path, const CoefficientSurface& surface, int points) {
  if (points < 2) throw InvalidConfig("beta grid needs at least 2 points per axis");
  const double horizon = surface.mesh().horizon();
  auto out = open_out(path);
  out << "s,t,beta\n";
  for (int a = 0; a < points; ++a) {
    const double s = horizon * a / (points - 1);
    for (int c = 0; c < points; ++c) {
      const double t = horizon * c / (points - 1);
      const double v = s <= t ? surface(s, t) : 0.0;
      out << format_number(s) << ',' << format_number(t) << ',' << format_number(v) << '\n';
    }
  }
}

void write_tuning_csv(const std::string& path, const TuningGrid& grid) {
  auto out = open_out(path);
  out << "lambda,omega_h,omega_v,omega_p,df,bic,delta_hat,rss,ok,error\n";
  for (const auto& r : grid.records) {
    std::string error = r.error;
    for (char& ch : error) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    out << format_number(r.lambda) << ',' << format_number(r.omega.horizontal) << ','
        << format_number(r.omega.vertical) << ',' << format_number(r.omega.diagonal) << ',' << format_number(r.df)
        << ',' << format_number(r.bic) << ',' << format_number(r.delta_hat) << ',' << format_number(r.rss) << ','
        << (r.ok ? 1 : 0) << ',' << error << '\n';
  }
}

void write_fit_log(const std::string& path, const std::vector<IterationRecord>& log) {
  auto out = open_out(path);
  for (const auto& rec : log) {
    out << json{{"iteration", rec.iteration}, {"objective", rec.objective}, {"change", rec.change},
                {"active", rec.active},       {"dead_groups", rec.dead_groups}, {"lasso_sweeps", rec.lasso_sweeps}}
               .dump()
        << '\n';
  }
}

void write_deltas_csv(const std::string& path, const std::vector<double>& deltas) {
  auto out = open_out(path);
  out << "replicate,delta\n";
  for (std::size_t r = 0; r < deltas.size(); ++r) out << r << ',' << format_number(deltas[r]) << '\n';
}

void write_metrics_csv(const std::string& path, const std::vector<std::pair<int, MetricsReport>>& reports) {
  auto out = open_out(path);
  out << "scenario,delta,replications,rmse,pct_bias,sd,rise_mean,rise_sd\n";
  for (const auto& [id, m] : reports) {
    out << id << ',' << format_number(m.delta_true) << ',' << m.replications.size() << ','
        << format_number(m.rmse_delta) << ',' << format_number(m.pct_bias_delta) << ',' << format_number(m.sd_delta)
        << ',' << format_number(m.rise_mean) << ',' << format_number(m.rise_sd) << '\n';
  }
}

json metrics_to_json(const MetricsReport& m) {
  json reps = json::array();
  for (const auto& r : m.replications) reps.push_back({{"delta_hat", r.delta_hat}, {"rise", r.rise}});
  return {{"delta", m.delta_true},       {"rmse", m.rmse_delta},     {"bias", m.bias_delta},
          {"pct_bias", m.pct_bias_delta}, {"sd", m.sd_delta},        {"rise_mean", m.rise_mean},
          {"rise_sd", m.rise_sd},         {"replications", reps}};
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

}  // namespace histfun::io
