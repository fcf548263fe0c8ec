#include "kanol/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>

#include <boost/multiprecision/cpp_int.hpp>

#include "kanol/fixedpoint.hpp"
#include "kanol/kan.hpp"
#include "kanol/mlp.hpp"
#include "kanol/model.hpp"
#include "kanol/rng.hpp"
#include "kanol/spline.hpp"
#include "kanol/trainer.hpp"

namespace kanol {

namespace {

using boost::multiprecision::cpp_int;

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

template <typename Body>
CheckResult timed(std::string id, std::string title, Body&& body) {
  CheckResult r;
  r.id = std::move(id);
  r.title = std::move(title);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / scale;
}

// --- wide-integer reference for the fixed-point kernel ----------------------

// value = num * 2^-frac, frac may be negative.
struct Dyadic {
  cpp_int num;
  int frac;
};

cpp_int pow2(int k) { return cpp_int(1) << k; }

cpp_int floor_div(const cpp_int& a, const cpp_int& d) {
  cpp_int q = a / d;  // truncates toward zero
  if (a < 0 && q * d != a) --q;
  return q;
}

// Nearest mantissa at `format`, ties to even, then clipped to the range.
std::int64_t reference_round(const Dyadic& v, const FixedFormat& format) {
  const int target = format.frac_bits();
  cpp_int q;
  if (target >= v.frac) {
    q = v.num * pow2(target - v.frac);
  } else {
    const cpp_int d = pow2(v.frac - target);
    q = floor_div(v.num, d);
    const cpp_int twice_rem = 2 * (v.num - q * d);
    if (twice_rem > d || (twice_rem == d && (q % 2) != 0)) ++q;
  }
  const cpp_int lo = format.min_mantissa();
  const cpp_int hi = format.max_mantissa();
  if (q < lo) q = lo;
  if (q > hi) q = hi;
  return q.convert_to<std::int64_t>();
}

Dyadic dyadic_of(double x) {
  int e = 0;
  const double m = std::frexp(x, &e);
  return {cpp_int(static_cast<long long>(std::ldexp(m, 53))), 53 - e};
}

std::int64_t random_mantissa(Rng& rng, const FixedFormat& f) {
  const auto span = static_cast<std::uint64_t>(f.max_mantissa() - f.min_mantissa()) + 1;
  return f.min_mantissa() + static_cast<std::int64_t>(rng.below(span));
}

// Doubles that stress quantize(): plain values past the range, exact ties
// between two steps, and values far below one step.
double random_quantize_input(Rng& rng, const FixedFormat& f) {
  const double step = f.step();
  switch (rng.below(3)) {
    case 0: return rng.uniform(2.0 * f.min_value(), 2.0 * f.max_value());
    case 1: return (static_cast<double>(random_mantissa(rng, f)) + 0.5) * step;
    default: return rng.uniform(-4.0, 4.0) * step * std::ldexp(1.0, -static_cast<int>(rng.below(8)));
  }
}

}  // namespace

CheckResult check_partition_of_unity() {
  return timed("partition_of_unity", "basis partition of unity (F=8, p=0..3)", [](CheckResult& r) {
    double worst = 0.0;
    double worst_slope = 0.0;
    bool nonneg = true;
    for (int p = 0; p <= kMaxSplineOrder; ++p) {
      const auto lut = BasisLut::build(p, 8);
      for (int u = 0; u < lut.bins(); ++u) {
        double sum = 0.0;
        double slope = 0.0;
        for (int k = 0; k <= p; ++k) {
          sum += lut.value(k, u);
          slope += lut.slope(k, u);
          nonneg = nonneg && lut.value(k, u) >= 0.0 && lut.value(k, u) <= 1.0;
        }
        worst = std::max(worst, std::abs(sum - 1.0));
        worst_slope = std::max(worst_slope, std::abs(slope));
      }
    }
    const double tol = std::ldexp(1.0, -20);
    r.pass = worst <= tol && worst_slope <= tol && nonneg;
    r.detail = fmt("max|sum B - 1| = %.3g, max|sum dB| = %.3g (tol 2^-20), 0<=B<=1: %s", worst,
                   worst_slope, nonneg ? "yes" : "no");
  });
}

CheckResult check_activation_bounds(const VerifyOptions& opt) {
  return timed("activation_bounds", "activation stays within active coefficients", [&](CheckResult& r) {
    Rng rng(derive_seed(opt.seed, "activation_bounds"));
    const FixedFormat formats[] = {{6, 2}, {7, 3}, {10, 3}, {16, 4}};
    std::size_t float_viol = 0;
    std::size_t fixed_viol[4] = {};
    double worst_excess[4] = {};  // in units of the format step
    for (int p = 0; p <= kMaxSplineOrder; ++p) {
      for (std::size_t trial = 0; trial < opt.bound_trials; ++trial) {
        const int cells = 1 + static_cast<int>(rng.below(20));
        const GridSpec grid(-1.0, 1.0, cells, p);
        const double x = rng.uniform(-1.5, 1.5);
        const CellIndex idx = locate(x, grid);

        // Float: bound is exact up to roundoff of an (s)-term dot product.
        {
          KanLayer layer(1, 1, grid, Numerics::floating());
          for (int c = 0; c < grid.coeff_count(); ++c) layer.set_coefficient(0, 0, c, rng.uniform(-2, 2));
          double lo = INFINITY, hi = -INFINITY;
          for (int k = 0; k <= p; ++k) {
            lo = std::min(lo, layer.coefficient(0, 0, idx.cell + k));
            hi = std::max(hi, layer.coefficient(0, 0, idx.cell + k));
          }
          const double phi = layer.forward(std::vector<double>{x})[0];
          const double slack = 4 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi));
          if (phi < lo - slack || phi > hi + slack) ++float_viol;
        }
        // Fixed: within one output step of the coefficient range.
        {
          const std::size_t fi = trial % 4;
          const FixedFormat f = formats[fi];
          const Numerics num = Numerics::fixed(f);
          KanLayer layer(1, 1, grid, num);
          for (int c = 0; c < grid.coeff_count(); ++c) {
            layer.set_coefficient(0, 0, c, FixedNum::from_mantissa(random_mantissa(rng, f), f).to_real());
          }
          const double xq = num.quantize(x, Role::input);
          const CellIndex iq = locate(xq, grid);
          double lo = INFINITY, hi = -INFINITY;
          for (int k = 0; k <= p; ++k) {
            lo = std::min(lo, layer.coefficient(0, 0, iq.cell + k));
            hi = std::max(hi, layer.coefficient(0, 0, iq.cell + k));
          }
          const double phi = layer.forward(std::vector<double>{xq})[0];
          const double excess = std::max(lo - phi, phi - hi) / f.step();
          worst_excess[fi] = std::max(worst_excess[fi], excess);
          if (excess > 1.0) ++fixed_viol[fi];
        }
      }
    }
    r.pass = float_viol == 0;
    r.detail = fmt("%zu trials/order: float violations %zu; fixed (> 1 step outside):", opt.bound_trials,
                   float_viol);
    for (std::size_t fi = 0; fi < 4; ++fi) {
      r.pass = r.pass && fixed_viol[fi] == 0;
      r.detail += fmt(" <%s> %zu (worst %.0f)", formats[fi].to_string().c_str(), fixed_viol[fi],
                      worst_excess[fi]);
    }
  });
}

CheckResult check_kan_gradient_bound(const VerifyOptions& opt) {
  return timed("kan_gradient_bound", "KAN coefficient gradient |dL/dw| <= |g|", [&](CheckResult& r) {
    Rng rng(derive_seed(opt.seed, "kan_gradient_bound"));
    std::size_t violations = 0;
    std::size_t sparsity_violations = 0;
    double worst_ratio = 0.0;
    for (std::size_t trial = 0; trial < opt.bound_trials; ++trial) {
      const int p = static_cast<int>(rng.below(4));
      const int d_in = 1 + static_cast<int>(rng.below(4));
      const int d_out = 1 + static_cast<int>(rng.below(4));
      const GridSpec grid(-1.0, 1.0, 1 + static_cast<int>(rng.below(20)), p);
      KanLayer layer(d_in, d_out, grid, Numerics::floating());
      // Coefficients start at zero, so after one lr=1 step each one holds -dL/dw.
      std::vector<double> x(static_cast<std::size_t>(d_in));
      for (auto& v : x) v = rng.uniform(-1, 1) * std::pow(10.0, rng.uniform(-3, 3));
      std::vector<double> g(static_cast<std::size_t>(d_out));
      for (auto& v : g) v = rng.uniform(-1, 1) * std::pow(10.0, rng.uniform(-3, 3));
      layer.forward(x);
      layer.backward_update(g, 1.0);
      std::size_t changed = 0;
      for (int o = 0; o < d_out; ++o) {
        for (int i = 0; i < d_in; ++i) {
          for (int c = 0; c < grid.coeff_count(); ++c) {
            const double grad = -layer.coefficient(o, i, c);
            if (grad != 0.0) ++changed;
            const double bound = std::abs(g[static_cast<std::size_t>(o)]);
            worst_ratio = std::max(worst_ratio, std::abs(grad) / bound);
            if (std::abs(grad) > bound) ++violations;
          }
        }
      }
      if (changed > static_cast<std::size_t>(d_in * d_out * grid.support())) ++sparsity_violations;
    }
    r.pass = violations == 0 && sparsity_violations == 0;
    r.detail = fmt("%zu trials: violations %zu, max |dL/dw|/|g| = %.6f, sparsity violations %zu",
                   opt.bound_trials, violations, worst_ratio, sparsity_violations);
  });
}

CheckResult check_mlp_gradient_scaling(const VerifyOptions& opt) {
  return timed("mlp_gradient_scaling", "MLP first-layer gradient scales by c", [&](CheckResult& r) {
    Rng rng(derive_seed(opt.seed, "mlp_gradient_scaling"));
    double worst = 0.0;
    for (std::size_t trial = 0; trial < opt.bound_trials; ++trial) {
      const std::uint64_t init = rng.next();
      const double c = std::pow(10.0, rng.uniform(-2, 2));
      std::vector<double> x(3);
      for (auto& v : x) v = rng.uniform(-1, 1);
      const std::vector<double> g{rng.uniform(-1, 1), rng.uniform(-1, 1)};

      // Linear stack, fixed upstream gradient: the first-layer delta does not
      // depend on x, so dL/dW1 = delta x^T.
      auto first_layer_grad_norm = [&](double scale) {
        Model m = Model::mlp(MlpSpec{{3, 4, 2}, Activation::linear, true}, Numerics::floating(), init);
        auto& w1 = m.mlp_layers().front();
        for (int o = 0; o < 4; ++o)
          for (int i = 0; i < 3; ++i) w1.set_weight(o, i, 0.0);
        std::vector<double> xs = x;
        for (auto& v : xs) v *= scale;
        m.predict(xs);
        m.backward_update(g, 1.0);
        double sq = 0.0;
        for (int o = 0; o < 4; ++o)
          for (int i = 0; i < 3; ++i) sq += w1.weight(o, i) * w1.weight(o, i);
        return std::sqrt(sq);
      };
      const double base = first_layer_grad_norm(1.0);
      const double scaled = first_layer_grad_norm(c);
      if (base == 0.0) continue;
      worst = std::max(worst, std::abs(scaled / base - c) / c);
    }
    r.pass = worst <= 1e-10;
    r.detail = fmt("%zu trials: max relative error %.3g (tol 1e-10)", opt.bound_trials, worst);
  });
}

CheckResult check_cost_ratios() {
  return timed("cost_ratio", "update cost ratio s/(G+s) at equal budget", [](CheckResult& r) {
    auto ratio = [](int cells, int order) {
      KanSpec k{{1, 1}};
      k.grid_size = cells;
      k.spline_order = order;
      const Model kan = Model::kan(k, Numerics::floating(), 1);
      const int n = static_cast<int>(kan.param_count());
      const Model mlp = Model::mlp(MlpSpec{{1, n}, Activation::linear, false}, Numerics::floating(), 1);
      Rng rng(7);
      std::vector<std::vector<double>> probes;
      for (int i = 0; i < 64; ++i) probes.push_back({rng.uniform(-1.2, 1.2)});
      return update_cost_ratio(kan, mlp, probes);
    };
    const Ratio a = ratio(10, 2);
    const Ratio b = ratio(5, 0);
    r.pass = a == Ratio{3, 13} && b == Ratio{1, 6};
    r.detail = fmt("G=10,s=3: %llu/%llu (want 3/13); G=5,s=1: %llu/%llu (want 1/6)",
                   static_cast<unsigned long long>(a.num), static_cast<unsigned long long>(a.den),
                   static_cast<unsigned long long>(b.num), static_cast<unsigned long long>(b.den));
  });
}

CheckResult check_update_ops_grid_invariance() {
  return timed("grid_invariance", "per-sample KAN update ops independent of G", [](CheckResult& r) {
    std::vector<std::uint64_t> per_sample;
    std::vector<std::size_t> params;
    for (const int cells : {5, 10, 20, 40}) {
      KanSpec k{{2, 7, 1}};
      k.grid_size = cells;
      Model m = Model::kan(k, Numerics::floating(), 3);
      Rng rng(11);
      const std::uint64_t before = m.ops().update_mults;
      for (int i = 0; i < 10; ++i) {
        m.predict(std::vector<double>{rng.uniform(-1, 1), rng.uniform(-1, 1)});
        m.backward_update(std::vector<double>{1.0}, 0.0);
      }
      per_sample.push_back((m.ops().update_mults - before) / 10);
      params.push_back(m.param_count());
    }
    const std::uint64_t expect = (2 * 7 + 7 * 1) * 3;
    const bool flat = std::all_of(per_sample.begin(), per_sample.end(), [&](auto v) { return v == expect; });
    const bool grows = std::is_sorted(params.begin(), params.end()) && params.front() < params.back();
    r.pass = flat && grows;
    r.detail = fmt("update mults/sample %llu %llu %llu %llu (want %llu); params %zu -> %zu",
                   (unsigned long long)per_sample[0], (unsigned long long)per_sample[1],
                   (unsigned long long)per_sample[2], (unsigned long long)per_sample[3],
                   (unsigned long long)expect, params.front(), params.back());
  });
}

namespace {

struct ParamHandle {
  std::function<double()> get;
  std::function<void(double)> set;
};

std::vector<ParamHandle> handles(Model& m) {
  std::vector<ParamHandle> out;
  if (m.kind() == ModelKind::kan) {
    for (auto& layer : m.kan_layers()) {
      for (int o = 0; o < layer.d_out(); ++o)
        for (int i = 0; i < layer.d_in(); ++i)
          for (int c = 0; c < layer.grid().coeff_count(); ++c)
            out.push_back({[&layer, o, i, c] { return layer.coefficient(o, i, c); },
                           [&layer, o, i, c](double v) { layer.set_coefficient(o, i, c, v); }});
    }
  } else {
    for (auto& layer : m.mlp_layers()) {
      for (int o = 0; o < layer.d_out(); ++o) {
        for (int i = 0; i < layer.d_in(); ++i)
          out.push_back({[&layer, o, i] { return layer.weight(o, i); },
                         [&layer, o, i](double v) { layer.set_weight(o, i, v); }});
        if (layer.has_bias())
          out.push_back({[&layer, o] { return layer.bias(o); },
                         [&layer, o](double v) { layer.set_bias(o, v); }});
      }
    }
  }
  return out;
}

double squared_loss(Model& m, const std::vector<double>& x, double target) {
  const double d = m.predict(x)[0] - target;
  return d * d;
}

// Compares backward_update (input gradient and, through an lr=1 step, every
// parameter gradient) with central differences of the squared loss.
// `admissible` rejects points too close to a kink or a cell edge.
double fd_max_error(Model& model, Rng& rng, std::size_t points, double h,
                    const std::function<bool(const Model&, const std::vector<double>&)>& admissible,
                    std::size_t& rejected) {
  double worst = 0.0;
  std::size_t done = 0;
  rejected = 0;
  while (done < points) {
    std::vector<double> x(static_cast<std::size_t>(model.dims().front()));
    for (auto& v : x) v = rng.uniform(-0.9, 0.9);
    const double target = rng.uniform(-1, 1);
    if (!admissible(model, x)) {
      ++rejected;
      continue;
    }
    ++done;

    Model work = model;
    const double y = work.predict(x)[0];
    const std::vector<double> g{2.0 * (y - target)};
    const auto dx = work.backward_update(g, 0.0);

    Model stepped = model;
    stepped.predict(x);
    stepped.backward_update(g, 1.0);

    for (std::size_t j = 0; j < x.size(); ++j) {
      auto xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      Model probe = model;
      const double num = (squared_loss(probe, xp, target) - squared_loss(probe, xm, target)) / (2 * h);
      worst = std::max(worst, rel_err(dx[j], num));
    }
    Model probe = model;
    auto ph = handles(probe);
    auto before = handles(model);
    auto after = handles(stepped);
    for (std::size_t k = 0; k < ph.size(); ++k) {
      const double w = ph[k].get();
      const double analytic = before[k].get() - after[k].get();
      ph[k].set(w + h);
      const double lp = squared_loss(probe, x, target);
      ph[k].set(w - h);
      const double lm = squared_loss(probe, x, target);
      ph[k].set(w);
      worst = std::max(worst, rel_err(analytic, (lp - lm) / (2 * h)));
    }
  }
  return worst;
}

}  // namespace

CheckResult check_finite_differences_kan(const VerifyOptions& opt) {
  return timed("fd_kan", "finite differences, KAN [2,7,1] (float)", [&](CheckResult& r) {
    KanSpec k{{2, 7, 1}};
    k.grid_ranges = {{-1.0, 1.0}, {-3.0, 3.0}};
    k.init_scale = 1.0;
    k.sampling = BasisSampling::exact;
    Model model = Model::kan(k, Numerics::floating(), derive_seed(opt.seed, "fd_kan"));
    Rng rng(derive_seed(opt.seed, "fd_kan_points"));

    // Every layer input must sit inside its grid and at least two LUT bins
    // away from a knot, where the quadratic basis has a curvature jump.
    auto admissible = [](const Model& m, const std::vector<double>& x) {
      Model probe = m;
      std::vector<double> a = x;
      for (auto& layer : probe.kan_layers()) {
        const auto& grid = layer.grid();
        const double margin = 2.0 / grid.bins();
        for (const double v : a) {
          const double t = (v - grid.x_min()) * grid.inv_cell_width();
          if (t < margin || t > grid.cells() - margin) return false;
          const double frac = t - std::floor(t);
          if (frac < margin || frac > 1.0 - margin) return false;
        }
        a = layer.forward(a);
      }
      return true;
    };
    std::size_t rejected = 0;
    const double worst = fd_max_error(model, rng, opt.fd_points, 1e-6, admissible, rejected);
    r.pass = worst <= 1e-4;
    r.detail = fmt("%zu points (%zu rejected near knots): max relative error %.3g (tol 1e-4)",
                   opt.fd_points, rejected, worst);
  });
}

CheckResult check_finite_differences_mlp(const VerifyOptions& opt) {
  return timed("fd_mlp", "finite differences, MLP [2,20,8,5,1] (float)", [&](CheckResult& r) {
    Model model = Model::mlp(MlpSpec{{2, 20, 8, 5, 1}}, Numerics::floating(),
                             derive_seed(opt.seed, "fd_mlp"));
    Rng rng(derive_seed(opt.seed, "fd_mlp_points"));
    // Reject points where any ReLU pre-activation is near its kink.
    auto admissible = [](const Model& m, const std::vector<double>& x) {
      std::vector<double> a = x;
      for (const auto& layer : m.mlp_layers()) {
        std::vector<double> z(static_cast<std::size_t>(layer.d_out()));
        for (int o = 0; o < layer.d_out(); ++o) {
          double s = layer.has_bias() ? layer.bias(o) : 0.0;
          for (int i = 0; i < layer.d_in(); ++i) s += layer.weight(o, i) * a[static_cast<std::size_t>(i)];
          if (layer.activation() != Activation::linear && std::abs(s) < 1e-3) return false;
          z[static_cast<std::size_t>(o)] = activation_fn(layer.activation(), s);
        }
        a = z;
      }
      return true;
    };
    std::size_t rejected = 0;
    const double worst = fd_max_error(model, rng, opt.fd_points, 1e-6, admissible, rejected);
    r.pass = worst <= 1e-4;
    r.detail = fmt("%zu points (%zu rejected near kinks): max relative error %.3g (tol 1e-4)",
                   opt.fd_points, rejected, worst);
  });
}

CheckResult check_fixed_point_oracle(const VerifyOptions& opt) {
  return timed("fixed_point_oracle", "fx_add/fx_mul/quantize vs wide-integer reference", [&](CheckResult& r) {
    const FixedFormat formats[] = {{6, 2}, {7, 3}, {10, 3}, {16, 4}};
    Rng rng(derive_seed(opt.seed, "fixed_point_oracle"));
    std::size_t mismatches = 0;
    std::string first;
    auto note = [&](const char* op, const FixedFormat& f, double a, double b) {
      if (mismatches++ == 0) first = fmt(" first: %s <%s> %.17g %.17g", op, f.to_string().c_str(), a, b);
    };
    for (const auto& f : formats) {
      for (std::size_t n = 0; n < opt.oracle_cases; ++n) {
        const FixedNum a = FixedNum::from_mantissa(random_mantissa(rng, f), f);
        const FixedNum b = FixedNum::from_mantissa(random_mantissa(rng, f), f);
        // Results go to the same format half the time, otherwise to another one.
        const FixedFormat& out = rng.below(2) ? f : formats[rng.below(4)];
        const Dyadic sum{cpp_int(a.mantissa()) + cpp_int(b.mantissa()), f.frac_bits()};
        const Dyadic prod{cpp_int(a.mantissa()) * cpp_int(b.mantissa()), 2 * f.frac_bits()};
        if (fx_add(a, b, out).mantissa() != reference_round(sum, out)) note("add", f, a.to_real(), b.to_real());
        if (fx_mul(a, b, out).mantissa() != reference_round(prod, out)) note("mul", f, a.to_real(), b.to_real());
        const double z = random_quantize_input(rng, f);
        const std::int64_t want = z == 0.0 ? 0 : reference_round(dyadic_of(z), f);
        if (quantize(z, f).mantissa() != want) note("quantize", f, z, 0.0);
      }
    }
    r.pass = mismatches == 0;
    r.detail = fmt("%zu cases x 3 ops x 4 formats: %zu mismatches%s", opt.oracle_cases, mismatches,
                   first.c_str());
  });
}

std::vector<CheckResult> run_verify_suite(const VerifyOptions& opt) {
  return {check_partition_of_unity(),
          check_activation_bounds(opt),
          check_kan_gradient_bound(opt),
          check_mlp_gradient_scaling(opt),
          check_cost_ratios(),
          check_update_ops_grid_invariance(),
          check_finite_differences_kan(opt),
          check_finite_differences_mlp(opt),
          check_fixed_point_oracle(opt)};
}

void print_check_table(std::ostream& out, const std::vector<CheckResult>& results) {
  std::size_t failed = 0;
  double total = 0.0;
  for (const auto& r : results) {
    out << (r.pass ? "PASS  " : "FAIL  ") << fmt("%-22s %7.2fs  ", r.id.c_str(), r.seconds)
        << r.title << "\n      " << r.detail << '\n';
    failed += r.pass ? 0 : 1;
    total += r.seconds;
  }
  out << fmt("%zu/%zu checks passed in %.2fs\n", results.size() - failed, results.size(), total);
}

}  // namespace kanol
