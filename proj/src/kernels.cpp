#include "lfm/kernels.hpp"

#include <cmath>

namespace lfm {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kSqrtPi = 1.7724538509055160273;

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ConfigError(std::string(what) + " must be strictly positive, got " +
                      std::to_string(v));
}

void check_channel_count(const KernelSpec& k, int p, int q) {
  const int nc = k.num_channels();
  if (nc == 0) return;
  if (p < 0 || p >= nc || q < 0 || q >= nc)
    throw QueryError("channel index out of range for " + k.type_name() +
                     " kernel with Q=" + std::to_string(nc));
}

// GaussConv single-force value; symmetric in (p,t) <-> (q,t').
double gauss_conv_single(const GaussConvKernel& g, int r, int p, double t,
                         int q, double tp) {
  const double l = g.force_lengthscale[r];
  const double wp = g.widths[p];
  const double wq = g.widths[q];
  const double v = wp * wp + wq * wq + l * l;
  const double amp = 2.0 * kSqrtPi * l * std::sqrt(wp * wq) / std::sqrt(v);
  const double d = t - tp;
  return amp * std::exp(-d * d / (2.0 * v));
}
}  // namespace

LfmParams LfmOdeKernel::as_params() const {
  LfmParams p;
  p.decay = decay;
  p.sensitivity = sensitivity;
  p.force_lengthscale = force_lengthscale;
  p.offset = Eigen::VectorXd::Zero(decay.size());
  p.noise_std = Eigen::VectorXd::Zero(decay.size());
  return p;
}

int KernelSpec::num_channels() const {
  return std::visit(
      [](const auto& k) -> int {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, RbfKernel> ||
                      std::is_same_v<T, PeriodicKernel>) {
          return 0;
        } else if constexpr (std::is_same_v<T, SumKernel>) {
          int nc = 0;
          for (const auto& term : k.terms)
            nc = std::max(nc, term.num_channels());
          return nc;
        } else if constexpr (std::is_same_v<T, LmcKernel>) {
          return static_cast<int>(k.mixing.rows());
        } else if constexpr (std::is_same_v<T, GaussConvKernel>) {
          return static_cast<int>(k.widths.size());
        } else {
          return static_cast<int>(k.decay.size());
        }
      },
      node);
}

int KernelSpec::num_forces() const {
  return std::visit(
      [](const auto& k) -> int {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, GaussConvKernel>) {
          return static_cast<int>(k.force_lengthscale.size());
        } else if constexpr (std::is_same_v<T, LfmOdeKernel>) {
          return static_cast<int>(k.force_lengthscale.size());
        } else {
          return 0;
        }
      },
      node);
}

std::string KernelSpec::type_name() const {
  return std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, RbfKernel>) return "rbf";
        if constexpr (std::is_same_v<T, PeriodicKernel>) return "periodic";
        if constexpr (std::is_same_v<T, SumKernel>) return "sum";
        if constexpr (std::is_same_v<T, LmcKernel>) return "lmc";
        if constexpr (std::is_same_v<T, GaussConvKernel>) return "gauss_conv";
        if constexpr (std::is_same_v<T, LfmOdeKernel>) return "lfm_first_order";
      },
      node);
}

void KernelSpec::validate() const {
  std::visit(
      [](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, RbfKernel>) {
          check_positive(k.lengthscale, "rbf.lengthscale");
          check_positive(k.amplitude, "rbf.amplitude");
        } else if constexpr (std::is_same_v<T, PeriodicKernel>) {
          check_positive(k.period, "periodic.period");
          check_positive(k.lengthscale, "periodic.lengthscale");
          check_positive(k.amplitude, "periodic.amplitude");
        } else if constexpr (std::is_same_v<T, SumKernel>) {
          if (k.terms.empty()) throw ConfigError("sum kernel must be non-empty");
          for (const auto& t : k.terms) t.validate();
        } else if constexpr (std::is_same_v<T, LmcKernel>) {
          if (k.base.empty()) throw ConfigError("lmc needs R >= 1 base kernels");
          if (k.mixing.cols() != static_cast<Eigen::Index>(k.base.size()))
            throw ConfigError("lmc mixing must be Q x R");
          if (k.mixing.rows() < 1) throw ConfigError("lmc needs Q >= 1");
          if (!k.mixing.allFinite())
            throw ConfigError("lmc mixing must be finite");
          for (const auto& b : k.base) {
            if (b.num_channels() != 0)
              throw ConfigError("lmc base kernels must be single-output");
            b.validate();
          }
        } else if constexpr (std::is_same_v<T, GaussConvKernel>) {
          if (k.widths.size() < 1) throw ConfigError("gauss_conv needs Q >= 1");
          if (k.force_lengthscale.size() < 1)
            throw ConfigError("gauss_conv needs R >= 1");
          if (k.sensitivity.rows() != k.force_lengthscale.size() ||
              k.sensitivity.cols() != k.widths.size())
            throw ConfigError("gauss_conv sensitivity must be R x Q");
          for (Eigen::Index i = 0; i < k.widths.size(); ++i)
            check_positive(k.widths[i], "gauss_conv.widths");
          for (Eigen::Index i = 0; i < k.force_lengthscale.size(); ++i)
            check_positive(k.force_lengthscale[i],
                           "gauss_conv.force_lengthscale");
          if (!k.sensitivity.allFinite())
            throw ConfigError("gauss_conv sensitivity must be finite");
        } else {
          k.as_params().validate();
        }
      },
      node);
}

double eval(const KernelSpec& spec, int p, double t, int q, double tp) {
  check_channel_count(spec, p, q);
  const double value = std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, RbfKernel>) {
          const double d = t - tp;
          return k.amplitude *
                 std::exp(-d * d / (2.0 * k.lengthscale * k.lengthscale));
        } else if constexpr (std::is_same_v<T, PeriodicKernel>) {
          const double s = std::sin(kPi * (t - tp) / k.period);
          return k.amplitude *
                 std::exp(-2.0 * s * s / (k.lengthscale * k.lengthscale));
        } else if constexpr (std::is_same_v<T, SumKernel>) {
          double acc = 0.0;
          for (const auto& term : k.terms) acc += eval(term, p, t, q, tp);
          return acc;
        } else if constexpr (std::is_same_v<T, LmcKernel>) {
          double acc = 0.0;
          for (std::size_t r = 0; r < k.base.size(); ++r) {
            const double a = k.mixing(p, static_cast<Eigen::Index>(r)) *
                             k.mixing(q, static_cast<Eigen::Index>(r));
            if (a == 0.0) continue;
            acc += a * eval(k.base[r], 0, t, 0, tp);
          }
          return acc;
        } else if constexpr (std::is_same_v<T, GaussConvKernel>) {
          double acc = 0.0;
          for (int r = 0; r < k.force_lengthscale.size(); ++r) {
            const double s = k.sensitivity(r, p) * k.sensitivity(r, q);
            if (s == 0.0) continue;
            acc += s * gauss_conv_single(k, r, p, t, q, tp);
          }
          return acc;
        } else {
          return lfm_kernel(k.as_params(), p, t, q, tp);
        }
      },
      spec.node);
  return value;
}

double cross_eval(const KernelSpec& spec, int q, double t, int r, double s) {
  check_channel_count(spec, q, q);
  const int nf = spec.num_forces();
  if (nf == 0)
    throw QueryError("kernel '" + spec.type_name() +
                     "' has no latent forces to query");
  if (r < 0 || r >= nf)
    throw QueryError("force index out of range: " + std::to_string(r));
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, GaussConvKernel>) {
          const double l = k.force_lengthscale[r];
          const double w = k.widths[q];
          const double v = w * w + l * l;
          // c_q * sqrt(2 pi w^2 l^2 / v), c_q = (sqrt(pi) w)^{-1/2}
          const double amp = std::sqrt(2.0) * std::pow(kPi, 0.25) *
                             std::sqrt(w) * l / std::sqrt(v);
          const double d = t - s;
          return k.sensitivity(r, q) * amp * std::exp(-d * d / (2.0 * v));
        } else if constexpr (std::is_same_v<T, LfmOdeKernel>) {
          return lfm_cross_kernel(k.as_params(), q, t, r, s);
        } else {
          return 0.0;  // unreachable
        }
      },
      spec.node);
}

double force_prior(const KernelSpec& spec, int r, double s, double sp) {
  const int nf = spec.num_forces();
  if (nf == 0)
    throw QueryError("kernel '" + spec.type_name() +
                     "' has no latent forces to query");
  if (r < 0 || r >= nf)
    throw QueryError("force index out of range: " + std::to_string(r));
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, GaussConvKernel>) {
          const double d = (s - sp) / k.force_lengthscale[r];
          return std::exp(-0.5 * d * d);
        } else if constexpr (std::is_same_v<T, LfmOdeKernel>) {
          return lfm_force_prior(k.as_params(), r, s, sp);
        } else {
          return 0.0;  // unreachable
        }
      },
      spec.node);
}

namespace {
nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
nlohmann::json mat_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}
Eigen::VectorXd vec_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + ": expected array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ConfigError(std::string(what) + ": expected numeric array");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}
Eigen::MatrixXd mat_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw ConfigError(std::string(what) + ": expected non-empty 2-d array");
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw ConfigError(std::string(what) + ": ragged 2-d array");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          j[i][c].get<double>();
  }
  return m;
}
}  // namespace

nlohmann::json kernel_to_json(const KernelSpec& spec) {
  nlohmann::json j;
  j["type"] = spec.type_name();
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, RbfKernel>) {
          j["lengthscale"] = k.lengthscale;
          j["amplitude"] = k.amplitude;
        } else if constexpr (std::is_same_v<T, PeriodicKernel>) {
          j["period"] = k.period;
          j["lengthscale"] = k.lengthscale;
          j["amplitude"] = k.amplitude;
        } else if constexpr (std::is_same_v<T, SumKernel>) {
          nlohmann::json terms = nlohmann::json::array();
          for (const auto& t : k.terms) terms.push_back(kernel_to_json(t));
          j["terms"] = terms;
        } else if constexpr (std::is_same_v<T, LmcKernel>) {
          nlohmann::json base = nlohmann::json::array();
          for (const auto& b : k.base) base.push_back(kernel_to_json(b));
          j["base"] = base;
          j["mixing"] = mat_to_json(k.mixing);
        } else if constexpr (std::is_same_v<T, GaussConvKernel>) {
          j["widths"] = vec_to_json(k.widths);
          j["force_lengthscale"] = vec_to_json(k.force_lengthscale);
          j["sensitivity"] = mat_to_json(k.sensitivity);
        } else {
          j["decay"] = vec_to_json(k.decay);
          j["sensitivity"] = mat_to_json(k.sensitivity);
          j["force_lengthscale"] = vec_to_json(k.force_lengthscale);
        }
      },
      spec.node);
  return j;
}

KernelSpec kernel_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type"))
    throw ConfigError("kernel: expected object with 'type'");
  const std::string type = j.at("type").get<std::string>();
  KernelSpec spec;
  if (type == "rbf") {
    spec.node = RbfKernel{j.at("lengthscale").get<double>(),
                          j.value("amplitude", 1.0)};
  } else if (type == "periodic") {
    spec.node =
        PeriodicKernel{j.at("period").get<double>(),
                       j.at("lengthscale").get<double>(),
                       j.value("amplitude", 1.0)};
  } else if (type == "sum") {
    SumKernel s;
    for (const auto& t : j.at("terms")) s.terms.push_back(kernel_from_json(t));
    spec.node = std::move(s);
  } else if (type == "lmc") {
    LmcKernel l;
    for (const auto& b : j.at("base")) l.base.push_back(kernel_from_json(b));
    l.mixing = mat_from_json(j.at("mixing"), "lmc.mixing");
    spec.node = std::move(l);
  } else if (type == "gauss_conv") {
    GaussConvKernel g;
    g.widths = vec_from_json(j.at("widths"), "gauss_conv.widths");
    g.force_lengthscale = vec_from_json(j.at("force_lengthscale"),
                                        "gauss_conv.force_lengthscale");
    g.sensitivity = mat_from_json(j.at("sensitivity"),
                                  "gauss_conv.sensitivity");
    spec.node = std::move(g);
  } else if (type == "lfm_first_order") {
    LfmOdeKernel l;
    l.decay = vec_from_json(j.at("decay"), "lfm.decay");
    l.sensitivity = mat_from_json(j.at("sensitivity"), "lfm.sensitivity");
    l.force_lengthscale = vec_from_json(j.at("force_lengthscale"),
                                        "lfm.force_lengthscale");
    spec.node = std::move(l);
  } else {
    throw ConfigError("unknown kernel type: " + type);
  }
  spec.validate();
  return spec;
}

}  // namespace lfm
