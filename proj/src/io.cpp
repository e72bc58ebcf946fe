#include "edreg/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace edreg::io {

namespace {

using nlohmann::ordered_json;

double parse_field(const std::string& text, const std::string& context) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw IoError(context + ": malformed numeric field '" + text + "'");
  return value;
}

void reject_unknown_keys(const ordered_json& obj, const std::string& where,
                         std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known) throw IoError("config: unknown key '" + item.key() + "' in " + where);
  }
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

PointCloud read_point_cloud_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ','))
      row.push_back(parse_field(field, path));
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path + ": inconsistent field count at row " +
                    std::to_string(rows.size() + 1));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path + ": empty point cloud");
  Matrix points(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = 0; j < points.cols(); ++j)
      points(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return PointCloud(points);
}

void write_point_cloud_csv(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);  // LF line endings everywhere
  if (!out) throw IoError("cannot write '" + path + "'");
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    for (Eigen::Index j = 0; j < cloud.dim(); ++j) {
      if (j) out << ',';
      out << format_double(cloud.points(i, j));
    }
    out << '\n';
  }
}

RegistrationConfig parse_registration_config(const ordered_json& doc) {
  RegistrationConfig cfg;
  reject_unknown_keys(doc, "config",
                      {"kernel", "loss", "mode", "kernel_projections", "T", "k_max",
                       "epsilon", "rho_init", "rho_growth", "rho_cap", "regularization",
                       "seed", "inner"});

  if (doc.contains("kernel")) {
    const ordered_json& k = doc.at("kernel");
    reject_unknown_keys(k, "kernel", {"kind", "sigma", "m", "s", "polynomial_degree"});
    const std::string kind = k.at("kind");
    if (kind == "energy_distance") {
      cfg.kernel = KernelSpec::energy_distance();
    } else if (kind == "gaussian") {
      cfg.kernel = KernelSpec::gaussian(k.at("sigma").get<double>());
    } else if (kind == "ms_spline") {
      cfg.kernel = KernelSpec::ms_spline(k.at("m").get<int>(), k.at("s").get<double>());
    } else {
      throw IoError("config: unknown kernel kind '" + kind + "'");
    }
    if (k.contains("polynomial_degree"))
      cfg.kernel.polynomial_degree = k.at("polynomial_degree").get<int>();
  }

  if (doc.contains("loss")) {
    const ordered_json& l = doc.at("loss");
    reject_unknown_keys(l, "loss", {"kind", "projections", "sigma"});
    const std::string kind = l.at("kind");
    if (kind == "exact_ed") {
      cfg.loss = LossSpec::exact_ed();
    } else if (kind == "sliced_ed") {
      cfg.loss = LossSpec::sliced_ed(l.value("projections", 200));
    } else if (kind == "gaussian_mmd") {
      cfg.loss = LossSpec::gaussian_mmd(l.at("sigma").get<double>());
    } else {
      throw IoError("config: unknown loss kind '" + kind + "'");
    }
  }

  if (doc.contains("mode")) {
    const std::string mode = doc.at("mode");
    if (mode == "exact") {
      cfg.mode = FlowMode::Kind::Exact;
    } else if (mode == "sliced") {
      cfg.mode = FlowMode::Kind::Sliced;
    } else {
      throw IoError("config: mode must be 'exact' or 'sliced'");
    }
  }
  cfg.kernel_projections = doc.value("kernel_projections", 64);
  cfg.T = doc.value("T", 16);
  cfg.k_max = doc.value("k_max", 50);
  cfg.epsilon = doc.value("epsilon", 1e-3);
  cfg.rho_init = doc.value("rho_init", 1.0);
  cfg.rho_growth = doc.value("rho_growth", 1.2);
  cfg.rho_cap = doc.value("rho_cap", 1e8);
  cfg.seed = doc.value("seed", std::uint64_t{0});

  if (doc.contains("regularization")) {
    const ordered_json& r = doc.at("regularization");
    reject_unknown_keys(r, "regularization", {"kind", "beta", "lambda_m"});
    const std::string kind = r.at("kind");
    if (kind == "none") {
      cfg.regularization = Regularization::none();
    } else if (kind == "tv_squared") {
      cfg.regularization = Regularization::tv_squared(r.at("beta").get<double>());
    } else if (kind == "l2_momentum") {
      cfg.regularization = Regularization::l2_momentum(r.at("lambda_m").get<double>());
    } else {
      throw IoError("config: unknown regularization kind '" + kind + "'");
    }
  }

  if (doc.contains("inner")) {
    const ordered_json& i = doc.at("inner");
    reject_unknown_keys(i, "inner",
                        {"lbfgs_memory", "max_inner_iters", "armijo_c1",
                         "backtrack_factor", "grad_tol"});
    cfg.inner.memory = i.value("lbfgs_memory", 10);
    cfg.inner.max_iters = i.value("max_inner_iters", 50);
    cfg.inner.armijo_c1 = i.value("armijo_c1", 1e-4);
    cfg.inner.backtrack_factor = i.value("backtrack_factor", 0.5);
    cfg.inner.grad_tol = i.value("grad_tol", 1e-8);
  }

  cfg.validate();
  return cfg;
}

RegistrationConfig load_registration_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  ordered_json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("config '" + path + "': " + e.what());
  }
  return parse_registration_config(doc);
}

}  // namespace edreg::io
