#include "topoforge/problem.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace topoforge {

namespace {

using Params = std::map<std::string, double>;

Params defaults(const std::string& name) {
  if (name == "example1" || name == "example2") {
    const bool nonlinear = name == "example2";
    return {
        {"alpha1", 1.0},        {"alpha2", 2.0},
        {"beta1", 1.0},         {"beta2", 2.0},
        {"alpha_tilde1", 1.0},  {"alpha_tilde2", 2.0},
        {"beta_tilde1", nonlinear ? 1.0 : 0.0},
        {"beta_tilde2", nonlinear ? 2.0 : 0.0},
        {"gamma_tilde", nonlinear ? 1.0 : 0.0},
        {"b1x", 1.0},           {"b1y", 0.0},
        {"b2x", 0.0},           {"b2y", 1.0},
        {"f1", 1.0},            {"f2", 2.0},
        {"M1x", nonlinear ? 1.0 : 0.0}, {"M1y", 0.0},
        {"M2x", 0.0},           {"M2y", nonlinear ? 1.0 : 0.0},
        {"gN_scale", 1.0},
        {"nu0", 1e7 / (4 * std::numbers::pi)},
        {"omega_cx", 0.0},      {"omega_cy", -0.5},  {"omega_r", 0.3},
        {"z_x", 0.0},           {"z_y", 0.5},
    };
  }
  if (name == "example4" || name == "example5") {
    const bool nonlinear = name == "example5";
    return {
        {"E1", 0.1},
        {"E2", 1000.0},
        {"nu1", nonlinear ? 0.3 : 1.0 / 3.0},
        {"nu2", nonlinear ? 0.3 : 1.0 / 3.0},
        {"gN_x", 0.0},
        {"gN_y", nonlinear ? -20.0 : -1.0},
        {"f1x", 0.0},
        {"f1y", 0.0},
        {"f2x", 0.0},
        {"f2y", nonlinear ? -5.0 : 0.0},
        {"neumann_literal", 0.0},
        {"load_steps", nonlinear ? 20.0 : 1.0},
        {"corrector_damping", nonlinear ? 0.002 : 1.0},
        {"z_x", 1.2},
        {"z_y", 0.5},
    };
  }
  throw std::invalid_argument("unknown example '" + name + "'");
}

Params merged(const std::string& name, const Params& overrides) {
  Params p = defaults(name);
  for (const auto& [key, value] : overrides) {
    auto it = p.find(key);
    if (it == p.end()) throw std::invalid_argument("unknown parameter '" + key + "' for " + name);
    it->second = value;
  }
  return p;
}

ProblemSpec diffusion_convection_reaction(const std::string& name, const Params& p) {
  const bool nonlinear = name == "example2";
  ProblemSpec spec;
  spec.name = name;
  spec.components = 1;
  spec.parameters = p;

  auto side = [&](int i, bool outer_nonlinear) {
    const std::string s = std::to_string(i);
    const Vec2<double> b = make_point(p.at("b" + s + "x"), p.at("b" + s + "y"));
    const double alpha = p.at("alpha" + s);
    const double beta = p.at("beta" + s);
    const double at = p.at("alpha_tilde" + s);
    const double bt = p.at("beta_tilde" + s);
    const double f = p.at("f" + s);
    const Mat2<double> M = make_mat(p.at("M" + s + "x"), p.at("M" + s + "y"), 0.0, 0.0);
    const double nu0 = p.at("nu0");
    Material m;
    if (outer_nonlinear) {
      m.A1 = [b](Point, const auto& y1, const auto& y2) {
        using T = scalar_of<decltype(y1)>;
        return make_vec<T>(b[0] * y2(0, 0) + b[1] * y2(0, 1) + y1[0] * y1[0] * y1[0], T(0.0));
      };
      m.A2 = [nu0](Point, const auto&, const auto& y2) {
        using T = scalar_of<decltype(y2.a)>;
        const T coef = reluctivity(y2(0, 0) * y2(0, 0) + y2(0, 1) * y2(0, 1), nu0);
        return make_mat<T>(coef * y2(0, 0), coef * y2(0, 1), T(0.0), T(0.0));
      };
    } else {
      m.A1 = [b, alpha](Point, const auto& y1, const auto& y2) {
        using T = scalar_of<decltype(y1)>;
        return make_vec<T>(b[0] * y2(0, 0) + b[1] * y2(0, 1) + alpha * y1[0], T(0.0));
      };
      m.A2 = [beta](Point, const auto&, const auto& y2) {
        using T = scalar_of<decltype(y2.a)>;
        return make_mat<T>(beta * y2(0, 0), beta * y2(0, 1), T(0.0), T(0.0));
      };
    }
    m.F1 = [f](Point) { return make_point(f, 0.0); };
    m.F2 = [M](Point) { return M; };
    m.j = [at, bt](Point, const auto& y1, const auto& y2) {
      return at * y1[0] * y1[0] + bt * (y2(0, 0) * y2(0, 0) + y2(0, 1) * y2(0, 1));
    };
    return m;
  };
  spec.inside = side(1, false);
  spec.outside = side(2, nonlinear);

  const double gamma = p.at("gamma_tilde");
  if (gamma != 0.0)
    spec.j_boundary = [gamma](Point, const auto& y1, const auto&) { return gamma * y1[0] * y1[0]; };
  const double g = p.at("gN_scale");
  spec.neumann = [g](Point x) { return make_point(g * x[0] * x[1], 0.0); };

  spec.geometry = DomainGeometry::rectangle(make_point(-1, -1), make_point(1, 1), [](Point m) {
    return (m[0] < -1 + 1e-12 || m[1] < -1 + 1e-12) ? BoundaryMarker::dirichlet : BoundaryMarker::neumann;
  });
  spec.geometry.subdomains.push_back({make_point(p.at("omega_cx"), p.at("omega_cy")), p.at("omega_r")});
  spec.default_z = make_point(p.at("z_x"), p.at("z_y"));
  spec.default_shapes = {"disk", "shifted_disk", "ellipse", "shifted_ellipse", "lshape"};
  return spec;
}

ProblemSpec elasticity(const std::string& name, const Params& p) {
  const bool nonlinear = name == "example5";
  ProblemSpec spec;
  spec.name = name;
  spec.components = 2;
  spec.parameters = p;

  auto side = [&](int i) {
    const std::string s = std::to_string(i);
    const LameParameters lame = lame_from_engineering(p.at("E" + s), p.at("nu" + s));
    const double mu = lame.mu, lambda = lame.lambda;
    const Vec2<double> f = make_point(p.at("f" + s + "x"), p.at("f" + s + "y"));
    Material m;
    m.A1 = [](Point, const auto& y1, const auto&) {
      using T = scalar_of<decltype(y1)>;
      return make_vec<T>(T(0.0), T(0.0));
    };
    if (nonlinear) {
      m.A2 = [mu, lambda](Point, const auto&, const auto& y2) { return stvk_stress(y2, mu, lambda); };
      m.j = [mu, lambda](Point, const auto&, const auto& y2) { return 0.5 * contract(stvk_stress(y2, mu, lambda), y2); };
    } else {
      m.A2 = [mu, lambda](Point, const auto&, const auto& y2) { return linear_stress(y2, mu, lambda); };
      m.j = [mu, lambda](Point, const auto&, const auto& y2) { return 0.5 * contract(linear_stress(y2, mu, lambda), y2); };
    }
    m.F1 = [f](Point) { return f; };
    m.F2 = [](Point) { return Mat2<double>{}; };
    return m;
  };
  spec.inside = side(1);
  spec.outside = side(2);

  const Vec2<double> g = make_point(p.at("gN_x"), p.at("gN_y"));
  spec.neumann = [g](Point) { return g; };
  const bool literal = p.at("neumann_literal") != 0.0;
  spec.geometry = DomainGeometry::rectangle(
      make_point(0, 0), make_point(2, 1),
      [literal](Point m) {
        if (m[0] < 1e-12 && (m[1] < 0.12 || m[1] > 0.88)) return BoundaryMarker::dirichlet;
        if (!literal && m[0] > 2 - 1e-12 && m[1] > 0.45 && m[1] < 0.55) return BoundaryMarker::neumann;
        return BoundaryMarker::natural;
      },
      {make_point(0, 0.12), make_point(0, 0.88), make_point(2, 0.45), make_point(2, 0.55)});
  if (literal) spec.geometry.load_lines.push_back({make_point(1, 0.45), make_point(1, 0.55), BoundaryMarker::neumann});
  spec.geometry.subdomains = {{make_point(0.5, 0.5), 0.3}, {make_point(1.8, 0.25), 0.1}, {make_point(1.8, 0.75), 0.1}};

  const double steps = p.at("load_steps");
  if (!(steps >= 1) || steps != std::floor(steps)) throw std::invalid_argument("load_steps must be a positive integer");
  spec.load_steps = static_cast<int>(steps);
  spec.corrector_damping = p.at("corrector_damping");
  if (!(spec.corrector_damping > 0 && spec.corrector_damping <= 1))
    throw std::invalid_argument("corrector_damping must lie in (0, 1]");
  spec.default_z = make_point(p.at("z_x"), p.at("z_y"));
  spec.default_shapes = {"disk", "shifted_disk", "ellipse", "shifted_ellipse"};
  return spec;
}

struct Example1Coefficients {
  double beta1, beta2, alpha1, alpha2, at1, at2, f1, f2;
  Vec2<double> db;
};

Example1Coefficients example1_coefficients(const ProblemSpec& spec) {
  if (spec.name != "example1") throw std::invalid_argument("closed form exists for example1 only");
  const auto& p = spec.parameters;
  return {p.at("beta1"),  p.at("beta2"), p.at("alpha1"), p.at("alpha2"), p.at("alpha_tilde1"), p.at("alpha_tilde2"),
          p.at("f1"),     p.at("f2"),    make_point(p.at("b1x") - p.at("b2x"), p.at("b1y") - p.at("b2y"))};
}

}  // namespace

const std::vector<std::string>& example_names() {
  static const std::vector<std::string> names{"example1", "example2", "example4", "example5"};
  return names;
}

std::map<std::string, double> example_parameters(const std::string& name) { return defaults(name); }

ProblemSpec build_example(const std::string& name, const std::map<std::string, double>& overrides) {
  const Params p = merged(name, overrides);
  if (name == "example1" || name == "example2") return diffusion_convection_reaction(name, p);
  return elasticity(name, p);
}

LameParameters lame_from_engineering(double E, double nu) {
  if (!(E > 0)) throw std::invalid_argument("Young's modulus must be positive");
  if (!(nu >= 0 && nu < 0.5)) throw std::invalid_argument("Poisson ratio must lie in [0, 1/2)");
  return {E / (2 * (1 + nu)), E * nu / ((1 + nu) * (1 - 2 * nu))};
}

double example1_closed_form(const ProblemSpec& spec, const ClosedFormInputs& at) {
  const auto c = example1_coefficients(spec);
  const double s = c.beta1 + c.beta2;
  return 2 * c.beta2 * (c.beta1 - c.beta2) / s * dot(at.grad_u, at.grad_p) +
         2 * c.beta2 / s * dot(c.db, at.grad_u) * at.p + (c.alpha1 - c.alpha2) * at.u * at.p - (c.f1 - c.f2) * at.p +
         (c.at1 - c.at2) * at.u * at.u;
}

double example1_closed_form_without_convection_factor(const ProblemSpec& spec, const ClosedFormInputs& at) {
  const auto c = example1_coefficients(spec);
  const double s = c.beta1 + c.beta2;
  return 2 * c.beta2 * (c.beta1 - c.beta2) / s * dot(at.grad_u, at.grad_p) + dot(c.db, at.grad_u) * at.p +
         (c.alpha1 - c.alpha2) * at.u * at.p - (c.f1 - c.f2) * at.p + (c.at1 - c.at2) * at.u * at.u;
}

}  // namespace topoforge
