#pragma once

// Mollification commutators and the error terms A, B of the mollified energy
// identity
//
//   -int psi_t 1/2 rho|u^eps|^2 + A_eps + B_eps = 0     (thm1; thm2 with rho^eps)
//
// All time derivatives are moved onto psi or onto u^eps and all spatial
// derivatives land on u^eps, so no rough quantity is ever differentiated.
//
// thm1:  X = (rho u)^eps - rho u^eps
//        B1 = -int psi [(rho u_j u_i)^eps - rho (u_j u_i)^eps] d_j u^eps_i
//        B2 = -int psi rho [(u_j u_i)^eps - u_j u^eps_i] d_j u^eps_i
// thm2:  X = (rho u)^eps - rho^eps u^eps
//        B1 = -int psi [(rho u_j u_i)^eps - (rho u)^eps_j u_i] d_j u^eps_i
//        B2 = -int psi (rho u)^eps_j (u_i - u^eps_i) d_j u^eps_i
// with A1 = -int psi_t X.u^eps, A2 = -int psi X.u^eps_t in both cases.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "vdlab/flow.hpp"
#include "vdlab/grid.hpp"
#include "vdlab/mollify.hpp"
#include "vdlab/scaling.hpp"
#include "vdlab/testfn.hpp"

namespace vdlab {

namespace detail {

inline PeriodicField broadcast_product(const PeriodicField& f, const PeriodicField& g) {
  if (!(f.grid() == g.grid())) throw ConfigError("grid mismatch in commutator");
  if (g.components() == 1) return multiply(f, g);
  return multiply(g, f);
}

inline void require_space_kernel(const MollifierKernel& k, const Grid& g) {
  if (!k.has_space()) throw ConfigError("commutator needs a kernel with a spatial part");
  if (!(k.grid == g)) throw ConfigError("kernel was built for a different grid");
}

}  // namespace detail

// (f g)^eps - f g^eps. One of f, g may be scalar; otherwise component counts match.
inline PeriodicField space_commutator(const PeriodicField& f, const PeriodicField& g, const MollifierKernel& k) {
  detail::require_space_kernel(k, f.grid());
  auto out = mollify_space(detail::broadcast_product(f, g), k);
  out -= detail::broadcast_product(f, mollify_space(g, k));
  return out;
}

inline PeriodicField space_commutator(const PeriodicField& f, const PeriodicField& g, double eps,
                                      KernelShape shape = KernelShape::compact_bump) {
  return space_commutator(f, g, make_kernel(shape, eps, KernelAxes::space, f.grid()));
}

// Brute-force form int eta_eps(y) g(x-y) (f(x-y) - f(x)) dy over the stencil,
// scalar 2D fields only. O(n^2 R^2); meant for small grids.
inline PeriodicField direct_space_commutator(const PeriodicField& f, const PeriodicField& g, const MollifierKernel& k) {
  detail::require_space_kernel(k, f.grid());
  const Grid& gr = f.grid();
  if (gr.dim != 2 || f.components() != 1 || g.components() != 1)
    throw ConfigError("direct commutator takes scalar 2D fields");
  const int n = gr.n;
  const int R = static_cast<int>(k.space_radius / gr.spacing()) + 1;
  if (2 * R >= n) throw ResolutionError("kernel stencil wraps the torus");
  PeriodicField out(gr, 1);
  const auto at = [n](int i, int j) { return static_cast<std::size_t>(((i % n + n) % n) * n + (j % n + n) % n); };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double fx = f[at(i, j)];
      double s = 0.0;
      for (int a = -R; a <= R; ++a)
        for (int b = -R; b <= R; ++b) {
          const double w = k.weight_at({a, b, 0});
          if (w != 0.0) s += w * g[at(i - a, j - b)] * (f[at(i - a, j - b)] - fx);
        }
      out[at(i, j)] = s;
    }
  return out;
}

// [d_axis(f g)]^eps - d_axis(f g^eps)
inline PeriodicField derivative_commutator(const PeriodicField& f, const PeriodicField& g, const MollifierKernel& k,
                                           int axis) {
  detail::require_space_kernel(k, f.grid());
  check_axis(f.grid(), axis);
  auto a = forward_transform(detail::broadcast_product(f, g));
  mollify_spectral(a, k);
  differentiate_spectral(a, axis);
  auto b = forward_transform(detail::broadcast_product(f, mollify_space(g, k)));
  differentiate_spectral(b, axis);
  auto out = inverse_transform(a);
  out -= inverse_transform(b);
  return out;
}

inline PeriodicField derivative_commutator(const PeriodicField& f, const PeriodicField& g, double eps, int axis,
                                           KernelShape shape = KernelShape::compact_bump) {
  return derivative_commutator(f, g, make_kernel(shape, eps, KernelAxes::space, f.grid()), axis);
}

// Time version at snapshot i: [d_t(f g)]^eps - d_t(f g^eps). The first part
// moves d_t onto the kernel; the second is a central difference of the
// snapshots i-1 and i+1. f_of and g_of map a FlowState to a field.
template <SnapshotSource S, class F, class G>
PeriodicField time_derivative_commutator(const S& src, std::size_t i, const MollifierKernel& k, F&& f_of, G&& g_of) {
  if (!k.has_time()) throw ConfigError("time commutator needs a time or space-time kernel");
  require_matching_step(src, k);
  if (k.time_offsets < 2) throw ResolutionError("time sampling too coarse for the time commutator");
  if (i < 1 || i + 1 >= src.size()) throw SupportError("time commutator needs neighbours of snapshot i");
  require_stencil(src, i - 1, k);
  require_stencil(src, i + 1, k);
  const double dt = uniform_time_step(src);
  const auto product = [&](const FlowState& st) { return detail::broadcast_product(f_of(st), g_of(st)); };
  const int comps = product(src.state(i)).components();
  auto out = mollify_at(src, i, k, product, comps).derivative;
  const auto side = [&](std::size_t j) {
    return detail::broadcast_product(f_of(src.state(j)), mollify_at(src, j, k, g_of).value);
  };
  auto diff = side(i + 1);
  diff -= side(i - 1);
  out.axpy(-1.0 / (2.0 * dt), diff);
  return out;
}

// ---------------------------------------------------------------------------
// Proof terms

enum class ProofVariant { thm1, thm2 };

inline const char* to_string(ProofVariant v) { return v == ProofVariant::thm1 ? "thm1" : "thm2"; }

// 1/r = 1/p + 1/q
inline double harmonic_exponent(double p, double q) {
  const double inv = (std::isinf(p) ? 0.0 : 1.0 / p) + (std::isinf(q) ? 0.0 : 1.0 / q);
  return inv > 0.0 ? 1.0 / inv : infinity;
}

struct CommutatorTerms {
  ProofVariant variant = ProofVariant::thm1;
  double epsilon = 0.0;
  double A_total = 0.0, A1 = 0.0, A2 = 0.0;
  double B_total = 0.0, B1 = 0.0, B2 = 0.0;
  double B_literal = std::numeric_limits<double>::quiet_NaN();  // thm2: div(rho u (x) u^eps) form
  double energy_term = 0.0;                                      // -int psi_t 1/2 rho|u^eps|^2
  // Integrals of absolute values (the quantities the estimates bound).
  double A1_bound = 0.0, A2_bound = 0.0, B1_bound = 0.0, B2_bound = 0.0;
  // Factor norms, L2 in space and L2(|psi| dt) in time.
  double X_norm = 0.0, C1_norm = 0.0, C2_norm = 0.0, grad_norm = 0.0, ut_norm = 0.0;
  double p = infinity, q = 3.0, r = 3.0, kappa = 3.0;
  double reference_scale = 0.0;  // size of the integrands, for zero detection
  std::size_t nodes = 0;
  std::size_t stride = 1;

  double identity_residual() const { return energy_term + A_total + B_total; }
  bool split_consistent() const { return std::abs(B_total) <= std::abs(B1) + std::abs(B2) + 1e-10; }
  bool finite() const {
    for (double v : {A_total, A1, A2, B_total, B1, B2, energy_term, A1_bound, A2_bound, B1_bound, B2_bound})
      if (!std::isfinite(v)) return false;
    return true;
  }
};

struct TermOptions {
  KernelShape shape = KernelShape::compact_bump;
  double p = infinity;  // density gradient exponent
  double q = 3.0;       // velocity exponent
  std::size_t max_nodes = 0;  // 0: every snapshot inside supp psi
  bool use_separable = true;  // exact factorization for separable synthetic trajectories
};

template <class S>
concept SeparableSource = SnapshotSource<S> && requires(const S& s) {
  { s.density_base() } -> std::convertible_to<PeriodicField>;
  { s.density_mode() } -> std::convertible_to<PeriodicField>;
  { s.density_factor() } -> std::convertible_to<std::vector<double>>;
  { s.velocity_mode() } -> std::convertible_to<PeriodicField>;
  { s.velocity_factor() } -> std::convertible_to<std::vector<double>>;
};

namespace detail {

// (div T)_i = sum_j d_j T_ij, T stored with component i*d + j.
inline PeriodicField tensor_divergence(const PeriodicField& T) {
  const Grid& g = T.grid();
  const int d = g.dim;
  const auto s = forward_transform(T);
  SpectralField acc(g, d);
  const double k0 = g.wavenumber_unit();
  for (int i = 0; i < d; ++i) {
    Complex* dst = acc.component(i).data();
    for (int j = 0; j < d; ++j) {
      const Complex* src = s.component(i * d + j).data();
      for_each_mode(g, [&](std::size_t k, const std::array<int, 3>& m, const std::array<bool, 3>& nyq) {
        if (!nyq[j]) dst[k] += src[k] * Complex(0.0, k0 * m[j]);
      });
    }
  }
  return inverse_transform(acc);
}

// Component i*d + j = d_j v_i.
inline PeriodicField jacobian(const PeriodicField& v) {
  const Grid& g = v.grid();
  const int d = g.dim;
  const auto s = forward_transform(v);
  PeriodicField out(g, d * d);
  for (int i = 0; i < d; ++i) {
    SpectralField one(g, 1);
    std::copy(s.component(i).begin(), s.component(i).end(), one.component(0).begin());
    for (int j = 0; j < d; ++j) out.set_component(i * d + j, inverse_transform(derivative_spectral(one, j)));
  }
  return out;
}

// T_ij = w a_j b_i (w scalar or empty)
inline PeriodicField outer(const PeriodicField* w, const PeriodicField& a, const PeriodicField& b) {
  const Grid& g = a.grid();
  const int d = g.dim;
  const std::size_t np = g.points();
  PeriodicField out(g, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double* pa = a.component(j).data();
      const double* pb = b.component(i).data();
      double* o = out.component(i * d + j).data();
      if (w) {
        const double* pw = w->data();
        for (std::size_t x = 0; x < np; ++x) o[x] = pw[x] * pa[x] * pb[x];
      } else {
        for (std::size_t x = 0; x < np; ++x) o[x] = pa[x] * pb[x];
      }
    }
  return out;
}

// Everything the term integrands need at one time node.
struct NodeFields {
  PeriodicField rho, u;                    // raw
  PeriodicField rho_eps;                   // mollified density
  PeriodicField u_eps, ut_eps, rhou_eps;   // vectors
  PeriodicField uu_eps, rhouu_eps;         // tensors (u_i u_j)^eps, (rho u_i u_j)^eps
  PeriodicField grad_u_eps;                // d_j u^eps_i
  PeriodicField div_m1;                    // div (rho u (x) u)^eps
  PeriodicField div_m2;                    // div of the variant's comparison flux
  PeriodicField div_m2_literal;            // div (rho u (x) u^eps)
};

struct NodeIntegrals {
  double x_u = 0, x_ut = 0, energy = 0, b1 = 0, b2 = 0, btot = 0, blit = 0;
  double x_u_abs = 0, x_ut_abs = 0, b1_abs = 0, b2_abs = 0;
  double x_sq = 0, c1_sq = 0, c2_sq = 0, g_sq = 0, ut_sq = 0;
  double scale = 0;
};

// Pointwise values of every integrand input at one grid point.
struct PointValues {
  double rho = 0, rho_eps = 0;
  double u[3]{}, ue[3]{}, ute[3]{}, m[3]{}, dm1[3]{}, dm2[3]{}, dml[3]{};
  double uu[9]{}, ruu[9]{}, G[9]{};
};

// `load(x, pv)` fills the values at grid point x.
template <class Load>
NodeIntegrals integrate_points(const Grid& g, ProofVariant v, Load&& load) {
  const int d = g.dim;
  const std::size_t np = g.points();
  const double vol = g.cell_volume();
  NodeIntegrals out;
  double rho_max = 0, u_max = 0, g_max = 0, ut_max = 0;
  PointValues pv;
  for (std::size_t x = 0; x < np; ++x) {
    load(x, pv);
    const double r = pv.rho;
    const double re = v == ProofVariant::thm1 ? r : pv.rho_eps;
    double x_u = 0, x_ut = 0, xx = 0, ue2 = 0, ute2 = 0;
    double b1 = 0, b2 = 0, c1c1 = 0, c2c2 = 0, gg = 0, bt = 0, bl = 0, uabs = 0;
    for (int i = 0; i < d; ++i) {
      const double ue = pv.ue[i];
      const double X = pv.m[i] - re * ue;
      x_u += X * ue;
      x_ut += X * pv.ute[i];
      xx += X * X;
      ue2 += ue * ue;
      ute2 += pv.ute[i] * pv.ute[i];
      uabs += pv.u[i] * pv.u[i];
      bt += (pv.dm1[i] - pv.dm2[i]) * ue;
      bl += (pv.dm1[i] - pv.dml[i]) * ue;
      for (int j = 0; j < d; ++j) {
        const int ij = i * d + j;
        const double G = pv.G[ij];
        double c1, c2;
        if (v == ProofVariant::thm1) {
          c1 = pv.ruu[ij] - r * pv.uu[ij];
          c2 = r * (pv.uu[ij] - pv.u[j] * ue);
        } else {
          c1 = pv.ruu[ij] - pv.m[j] * pv.u[i];
          c2 = pv.m[j] * (pv.u[i] - ue);
        }
        b1 += c1 * G;
        b2 += c2 * G;
        c1c1 += c1 * c1;
        c2c2 += c2 * c2;
        gg += G * G;
      }
    }
    out.x_u += x_u;
    out.x_ut += x_ut;
    out.energy += 0.5 * re * ue2;
    out.b1 += b1;
    out.b2 += b2;
    out.btot += bt;
    out.blit += bl;
    const double xn = std::sqrt(xx);
    out.x_u_abs += xn * std::sqrt(ue2);
    out.x_ut_abs += xn * std::sqrt(ute2);
    out.b1_abs += std::sqrt(c1c1 * gg);
    out.b2_abs += std::sqrt(c2c2 * gg);
    out.x_sq += xx;
    out.c1_sq += c1c1;
    out.c2_sq += c2c2;
    out.g_sq += gg;
    out.ut_sq += ute2;
    rho_max = std::max(rho_max, std::abs(r));
    u_max = std::max(u_max, uabs);
    g_max = std::max(g_max, gg);
    ut_max = std::max(ut_max, ute2);
  }
  for (double* p : {&out.x_u, &out.x_ut, &out.energy, &out.b1, &out.b2, &out.btot, &out.blit, &out.x_u_abs,
                    &out.x_ut_abs, &out.b1_abs, &out.b2_abs, &out.x_sq, &out.c1_sq, &out.c2_sq, &out.g_sq, &out.ut_sq})
    *p *= vol;
  out.scale = rho_max * u_max * g.volume() * (1.0 + std::sqrt(g_max) + std::sqrt(ut_max));
  return out;
}

inline NodeIntegrals integrate_node(const NodeFields& f, ProofVariant v) {
  const int d = f.u.grid().dim;
  const double* rho = f.rho.data();
  const double* rho_e = f.rho_eps.data();
  std::array<const double*, 3> u{}, ue{}, ute{}, m{}, dm1{}, dm2{}, dml{};
  std::array<const double*, 9> uu{}, ruu{}, G{};
  for (int i = 0; i < d; ++i) {
    u[i] = f.u.component(i).data();
    ue[i] = f.u_eps.component(i).data();
    ute[i] = f.ut_eps.component(i).data();
    m[i] = f.rhou_eps.component(i).data();
    dm1[i] = f.div_m1.component(i).data();
    dm2[i] = f.div_m2.component(i).data();
    dml[i] = f.div_m2_literal.component(i).data();
  }
  for (int c = 0; c < d * d; ++c) {
    uu[c] = f.uu_eps.component(c).data();
    ruu[c] = f.rhouu_eps.component(c).data();
    G[c] = f.grad_u_eps.component(c).data();
  }
  return integrate_points(f.u.grid(), v, [&](std::size_t x, PointValues& p) {
    p.rho = rho[x];
    p.rho_eps = rho_e[x];
    for (int i = 0; i < d; ++i) {
      p.u[i] = u[i][x];
      p.ue[i] = ue[i][x];
      p.ute[i] = ute[i][x];
      p.m[i] = m[i][x];
      p.dm1[i] = dm1[i][x];
      p.dm2[i] = dm2[i][x];
      p.dml[i] = dml[i][x];
    }
    for (int c = 0; c < d * d; ++c) {
      p.uu[c] = uu[c][x];
      p.ruu[c] = ruu[c][x];
      p.G[c] = G[c][x];
    }
  });
}

// Quadrature nodes: snapshots strictly inside supp psi, thinned to max_nodes.
template <SnapshotSource S>
std::vector<std::size_t> quadrature_nodes(const S& src, const TestFunction& psi, double eps, std::size_t max_nodes,
                                          std::size_t& stride) {
  const auto [a, b] = psi.support();
  if (!std::isfinite(a) || !std::isfinite(b)) throw SupportError("proof terms need a compactly supported test function");
  const double t0 = src.time(0), t1 = src.time(src.size() - 1);
  const double slack = 1e-9 * (t1 - t0);
  if (a - eps < t0 - slack || b + eps > t1 + slack)
    throw SupportError("test function support too close to the trajectory ends for epsilon " + format_number(eps));
  std::vector<std::size_t> all;
  for (std::size_t i = 0; i < src.size(); ++i)
    if (src.time(i) > a && src.time(i) < b) all.push_back(i);
  stride = 1;
  if (max_nodes > 0 && all.size() > max_nodes) stride = (all.size() + max_nodes - 1) / max_nodes;
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < all.size(); k += stride) out.push_back(all[k]);
  return out;
}

template <SnapshotSource S>
NodeFields generic_node(const S& src, std::size_t i, const MollifierKernel& k, ProofVariant v) {
  const Grid& g = src.grid();
  const int d = g.dim;
  const int dd = d * d;
  auto acc = mollify_at(
      src, i, k,
      [&](const FlowState& st) {
        PeriodicField q(g, 2 * d + 1 + 2 * dd);
        const std::size_t np = g.points();
        const double* r = st.rho.data();
        for (int a = 0; a < d; ++a) {
          const double* ua = st.u.component(a).data();
          double* qu = q.component(a).data();
          double* qm = q.component(d + 1 + a).data();
          for (std::size_t x = 0; x < np; ++x) {
            qu[x] = ua[x];
            qm[x] = r[x] * ua[x];
          }
          for (int b = 0; b < d; ++b) {
            const double* ub = st.u.component(b).data();
            double* qq = q.component(2 * d + 1 + a * d + b).data();
            double* qr = q.component(2 * d + 1 + dd + a * d + b).data();
            for (std::size_t x = 0; x < np; ++x) {
              qq[x] = ua[x] * ub[x];
              qr[x] = r[x] * qq[x];
            }
          }
        }
        q.set_component(d, st.rho);
        return q;
      },
      d);
  const auto slice = [&](int first, int count) {
    PeriodicField out(g, count);
    for (int c = 0; c < count; ++c) out.set_component(c, acc.value.component_field(first + c));
    return out;
  };
  NodeFields f;
  const FlowState st = src.state(i);
  f.rho = st.rho;
  f.u = st.u;
  f.u_eps = slice(0, d);
  f.rho_eps = slice(d, 1);
  f.rhou_eps = slice(d + 1, d);
  f.uu_eps = slice(2 * d + 1, dd);
  f.rhouu_eps = slice(2 * d + 1 + dd, dd);
  f.ut_eps = std::move(acc.derivative);
  f.grad_u_eps = jacobian(f.u_eps);
  f.div_m1 = tensor_divergence(f.rhouu_eps);
  f.div_m2_literal = tensor_divergence(outer(&f.rho, f.u, f.u_eps));
  f.div_m2 = v == ProofVariant::thm1 ? f.div_m2_literal : tensor_divergence(outer(nullptr, f.rhou_eps, f.u_eps));
  return f;
}

// Spatial factors of a separable trajectory rho = R0 + b(t) R, u = a(t) U,
// mollified once per kernel.
struct SeparableFactors {
  PeriodicField R0, R, U;
  PeriodicField M_R0, M_R, M_U, grad_U;
  PeriodicField M_R0U, M_RU;
  PeriodicField M_UU, M_R0UU, M_RUU;
  PeriodicField div_M_R0UU, div_M_RUU;
  PeriodicField div_R0_U_Ue, div_R_U_Ue;          // div(R0 U_j U^eps_i), div(R U_j U^eps_i)
  PeriodicField div_MR0U_Ue, div_MRU_Ue;          // div(M[R0 U]_j U^eps_i), div(M[R U]_j U^eps_i)
};

template <SeparableSource S>
SeparableFactors separable_factors(const S& src, const MollifierKernel& k) {
  SeparableFactors s;
  s.R0 = src.density_base();
  s.R = src.density_mode();
  s.U = src.velocity_mode();
  const auto M = [&](const PeriodicField& f) { return mollify_space(f, k); };
  s.M_R0 = M(s.R0);
  s.M_R = M(s.R);
  s.M_U = M(s.U);
  s.grad_U = jacobian(s.M_U);
  s.M_R0U = M(multiply(s.U, s.R0));
  s.M_RU = M(multiply(s.U, s.R));
  const auto UU = outer(nullptr, s.U, s.U);
  s.M_UU = M(UU);
  s.M_R0UU = M(multiply(UU, s.R0));
  s.M_RUU = M(multiply(UU, s.R));
  s.div_M_R0UU = tensor_divergence(s.M_R0UU);
  s.div_M_RUU = tensor_divergence(s.M_RUU);
  s.div_R0_U_Ue = tensor_divergence(outer(&s.R0, s.U, s.M_U));
  s.div_R_U_Ue = tensor_divergence(outer(&s.R, s.U, s.M_U));
  s.div_MR0U_Ue = tensor_divergence(outer(nullptr, s.M_R0U, s.M_U));
  s.div_MRU_Ue = tensor_divergence(outer(nullptr, s.M_RU, s.M_U));
  return s;
}

// Time-kernel moments of the separable factors at snapshot i.
struct SeparableMoments {
  double a = 0, b = 0;                                           // raw factors at t_i
  double c_1 = 0, c_a = 0, c_ab = 0, c_aa = 0, c_aab = 0, c_b = 0, d_a = 0;
};

template <SeparableSource S>
SeparableMoments separable_moments(const S& src, std::size_t i, const MollifierKernel& k) {
  require_stencil(src, i, k);
  const auto& a = src.velocity_factor();
  const auto& b = src.density_factor();
  SeparableMoments c;
  c.a = a[i];
  c.b = b[i];
  for (int sft = -k.time_offsets; sft <= k.time_offsets; ++sft) {
    const auto j = static_cast<std::size_t>(static_cast<long>(i) - sft);
    const double w = k.time_weight(sft);
    c.c_1 += w;
    c.c_a += w * a[j];
    c.c_ab += w * a[j] * b[j];
    c.c_aa += w * a[j] * a[j];
    c.c_aab += w * a[j] * a[j] * b[j];
    c.c_b += w * b[j];
    c.d_a += k.time_derivative_weight(sft) * a[j];
  }
  return c;
}

inline NodeIntegrals integrate_separable(const SeparableFactors& s, const SeparableMoments& c, ProofVariant v) {
  const int d = s.U.grid().dim;
  const double* R0 = s.R0.data();
  const double* R = s.R.data();
  const double* MR0 = s.M_R0.data();
  const double* MR = s.M_R.data();
  std::array<const double*, 3> U{}, MU{}, MR0U{}, MRU{}, dR0{}, dR{}, lR0{}, lR{}, mR0{}, mR{};
  std::array<const double*, 9> GU{}, MUU{}, MR0UU{}, MRUU{};
  for (int i = 0; i < d; ++i) {
    U[i] = s.U.component(i).data();
    MU[i] = s.M_U.component(i).data();
    MR0U[i] = s.M_R0U.component(i).data();
    MRU[i] = s.M_RU.component(i).data();
    dR0[i] = s.div_M_R0UU.component(i).data();
    dR[i] = s.div_M_RUU.component(i).data();
    lR0[i] = s.div_R0_U_Ue.component(i).data();
    lR[i] = s.div_R_U_Ue.component(i).data();
    mR0[i] = s.div_MR0U_Ue.component(i).data();
    mR[i] = s.div_MRU_Ue.component(i).data();
  }
  for (int q = 0; q < d * d; ++q) {
    GU[q] = s.grad_U.component(q).data();
    MUU[q] = s.M_UU.component(q).data();
    MR0UU[q] = s.M_R0UU.component(q).data();
    MRUU[q] = s.M_RUU.component(q).data();
  }
  const double la = c.a * c.c_a, lb = c.a * c.c_a * c.b;
  const double ma = c.c_a * c.c_a, mb = c.c_a * c.c_ab;
  return integrate_points(s.U.grid(), v, [&](std::size_t x, PointValues& p) {
    p.rho = R0[x] + c.b * R[x];
    p.rho_eps = c.c_1 * MR0[x] + c.c_b * MR[x];
    for (int i = 0; i < d; ++i) {
      p.u[i] = c.a * U[i][x];
      p.ue[i] = c.c_a * MU[i][x];
      p.ute[i] = c.d_a * MU[i][x];
      p.m[i] = c.c_a * MR0U[i][x] + c.c_ab * MRU[i][x];
      p.dm1[i] = c.c_aa * dR0[i][x] + c.c_aab * dR[i][x];
      p.dml[i] = la * lR0[i][x] + lb * lR[i][x];
      p.dm2[i] = v == ProofVariant::thm1 ? p.dml[i] : ma * mR0[i][x] + mb * mR[i][x];
    }
    for (int q = 0; q < d * d; ++q) {
      p.uu[q] = c.c_aa * MUU[q][x];
      p.ruu[q] = c.c_aa * MR0UU[q][x] + c.c_aab * MRUU[q][x];
      p.G[q] = c.c_a * GU[q][x];
    }
  });
}

}  // namespace detail

// A and B parts of the identity for one epsilon (space-time kernel).
template <SnapshotSource S>
CommutatorTerms evaluate_terms(const S& src, const TestFunction& psi, double eps, ProofVariant v,
                               const TermOptions& opt = {}) {
  const Grid& g = src.grid();
  const double dt = uniform_time_step(src);
  const auto k = make_kernel(opt.shape, eps, KernelAxes::spacetime, g, dt);
  CommutatorTerms t;
  t.variant = v;
  t.epsilon = eps;
  t.p = opt.p;
  t.q = opt.q;
  t.r = harmonic_exponent(opt.p, opt.q);
  t.kappa = t.r;
  const auto nodes = detail::quadrature_nodes(src, psi, eps, opt.max_nodes, t.stride);
  t.nodes = nodes.size();
  const double w = dt * static_cast<double>(t.stride);

  detail::SeparableFactors factors;
  bool separable = false;
  if constexpr (SeparableSource<S>) {
    if (opt.use_separable) {
      factors = detail::separable_factors(src, k);
      separable = true;
    }
  }
  double x_sq = 0, c1_sq = 0, c2_sq = 0, g_sq = 0, ut_sq = 0;
  for (std::size_t i : nodes) {
    const double time = src.time(i);
    const double ps = psi.value(time), pt = psi.derivative(time);
    detail::NodeIntegrals n;
    if constexpr (SeparableSource<S>) {
      n = separable ? detail::integrate_separable(factors, detail::separable_moments(src, i, k), v)
                    : detail::integrate_node(detail::generic_node(src, i, k, v), v);
    } else {
      n = detail::integrate_node(detail::generic_node(src, i, k, v), v);
    }
    t.A1 += -pt * w * n.x_u;
    t.A2 += -ps * w * n.x_ut;
    t.energy_term += -pt * w * n.energy;
    t.B1 += -ps * w * n.b1;
    t.B2 += -ps * w * n.b2;
    t.B_total += ps * w * n.btot;
    if (v == ProofVariant::thm2) {
      if (std::isnan(t.B_literal)) t.B_literal = 0.0;
      t.B_literal += ps * w * n.blit;
    }
    t.A1_bound += std::abs(pt) * w * n.x_u_abs;
    t.A2_bound += std::abs(ps) * w * n.x_ut_abs;
    t.B1_bound += std::abs(ps) * w * n.b1_abs;
    t.B2_bound += std::abs(ps) * w * n.b2_abs;
    x_sq += std::abs(ps) * w * n.x_sq;
    c1_sq += std::abs(ps) * w * n.c1_sq;
    c2_sq += std::abs(ps) * w * n.c2_sq;
    g_sq += std::abs(ps) * w * n.g_sq;
    ut_sq += std::abs(ps) * w * n.ut_sq;
    t.reference_scale += (std::abs(ps) + std::abs(pt)) * w * n.scale;
  }
  t.A_total = t.A1 + t.A2;
  t.X_norm = std::sqrt(x_sq);
  t.C1_norm = std::sqrt(c1_sq);
  t.C2_norm = std::sqrt(c2_sq);
  t.grad_norm = std::sqrt(g_sq);
  t.ut_norm = std::sqrt(ut_sq);
  return t;
}

template <SnapshotSource S>
CommutatorTerms term_A(const S& src, const TestFunction& psi, double eps, ProofVariant v, const TermOptions& opt = {}) {
  return evaluate_terms(src, psi, eps, v, opt);
}

template <SnapshotSource S>
CommutatorTerms term_B(const S& src, const TestFunction& psi, double eps, ProofVariant v, const TermOptions& opt = {}) {
  return evaluate_terms(src, psi, eps, v, opt);
}

// Independent epsilons evaluated on up to `jobs` threads; output order follows `eps`.
template <SnapshotSource S>
std::vector<CommutatorTerms> term_sweep(const S& src, const TestFunction& psi, std::span<const double> eps,
                                        ProofVariant v, const TermOptions& opt = {}, int jobs = 1) {
  require_sweep_shape(eps);
  std::vector<CommutatorTerms> out(eps.size());
  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, static_cast<int>(eps.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < eps.size(); ++i) out[i] = evaluate_terms(src, psi, eps[i], v, opt);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < eps.size(); i += workers) out[i] = evaluate_terms(src, psi, eps[i], v, opt);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// Predicted decay rates of each term.
struct TermPrediction {
  std::string term;
  double slope = 0.0;
  bool informational = false;
};

// Below the thm1 threshold alpha = 1/3 nothing is guaranteed and every
// verdict is informational; at the threshold B2 is marginal.
inline std::vector<TermPrediction> predicted_rates(ProofVariant v, double alpha, double beta) {
  if (v == ProofVariant::thm1) {
    const bool below = alpha < 1.0 / 3.0 - 1e-12;
    return {{"B1", 3.0 * alpha, below},        {"B2", 3.0 * alpha - 1.0, below},
            {"B_total", 3.0 * alpha - 1.0, below}, {"A_total", 0.0, true},
            {"A1", 0.0, true},                 {"A2", 0.0, true},
            {"B1_bound", 3.0 * alpha, true},   {"B2_bound", 3.0 * alpha - 1.0, true}};
  }
  const double b = 2.0 * alpha + beta - 1.0;
  const double a2 = alpha + 2.0 * beta - 1.0;
  const bool ineligible = !(b > 0.0 && a2 > 0.0);
  return {{"A1", alpha, ineligible},
          {"A2", a2, ineligible},
          {"A_total", std::min(alpha, a2), ineligible},
          {"B1", b, ineligible},
          {"B2", b, ineligible},
          {"B_total", b, ineligible},
          {"B_literal", b, true},
          {"A1_bound", alpha, true},
          {"A2_bound", a2, true},
          {"B1_bound", b, true},
          {"B2_bound", b, true}};
}

inline double term_value(const CommutatorTerms& t, const std::string& name) {
  if (name == "A_total") return t.A_total;
  if (name == "A1") return t.A1;
  if (name == "A2") return t.A2;
  if (name == "B_total") return t.B_total;
  if (name == "B1") return t.B1;
  if (name == "B2") return t.B2;
  if (name == "B_literal") return t.B_literal;
  if (name == "energy") return t.energy_term;
  if (name == "A1_bound") return t.A1_bound;
  if (name == "A2_bound") return t.A2_bound;
  if (name == "B1_bound") return t.B1_bound;
  if (name == "B2_bound") return t.B2_bound;
  if (name == "X_norm") return t.X_norm;
  if (name == "C1_norm") return t.C1_norm;
  if (name == "C2_norm") return t.C2_norm;
  if (name == "grad_norm") return t.grad_norm;
  if (name == "ut_norm") return t.ut_norm;
  throw DomainError("unknown term " + name);
}

inline const std::vector<std::string>& factor_names() {
  static const std::vector<std::string> n{"X_norm", "C1_norm", "C2_norm", "grad_norm", "ut_norm"};
  return n;
}

// Root mean square over independent realizations, per epsilon and per field.
// Single signed integrals of random-phase data cross zero at scattered
// epsilons; the ensemble magnitude is what carries the power law.
inline std::vector<CommutatorTerms> ensemble_rms(const std::vector<std::vector<CommutatorTerms>>& members) {
  if (members.empty()) throw DomainError("empty ensemble");
  const std::size_t n = members.front().size();
  for (const auto& m : members)
    if (m.size() != n) throw DomainError("ensemble members have different sweeps");
  std::vector<CommutatorTerms> out = members.front();
  const double count = static_cast<double>(members.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto& o = out[i];
    for (const auto& m : members)
      if (std::abs(m[i].epsilon - o.epsilon) > 1e-12 * o.epsilon) throw DomainError("ensemble epsilons differ");
    const auto rms = [&](double CommutatorTerms::*field) {
      double acc = 0.0;
      for (const auto& m : members) acc += m[i].*field * (m[i].*field);
      return std::sqrt(acc / count);
    };
    for (double CommutatorTerms::*f :
         {&CommutatorTerms::A_total, &CommutatorTerms::A1, &CommutatorTerms::A2, &CommutatorTerms::B_total,
          &CommutatorTerms::B1, &CommutatorTerms::B2, &CommutatorTerms::B_literal, &CommutatorTerms::energy_term,
          &CommutatorTerms::A1_bound, &CommutatorTerms::A2_bound, &CommutatorTerms::B1_bound,
          &CommutatorTerms::B2_bound, &CommutatorTerms::X_norm, &CommutatorTerms::C1_norm, &CommutatorTerms::C2_norm,
          &CommutatorTerms::grad_norm, &CommutatorTerms::ut_norm})
      o.*f = rms(f);
    double scale = 0.0;
    for (const auto& m : members) scale = std::max(scale, m[i].reference_scale);
    o.reference_scale = scale;
  }
  return out;
}

// One report per predicted term; factor norms are fitted as informational.
inline std::vector<ScalingReport> term_scaling_reports(const std::vector<CommutatorTerms>& sweep, double alpha,
                                                       double beta, double tolerance = 0.1) {
  if (sweep.empty()) throw DomainError("empty term sweep");
  const ProofVariant v = sweep.front().variant;
  std::vector<double> eps;
  double scale = 0.0;
  for (const auto& t : sweep) {
    eps.push_back(t.epsilon);
    scale = std::max(scale, t.reference_scale);
  }
  const double zero = 1e-12 * std::max(scale, 1e-300);
  std::vector<ScalingReport> out;
  for (const auto& pr : predicted_rates(v, alpha, beta)) {
    std::vector<double> vals;
    for (const auto& t : sweep) vals.push_back(term_value(t, pr.term));
    out.push_back(make_scaling_report(pr.term, eps, vals,
                                      {pr.slope, tolerance, SlopeCheck::at_least, pr.informational, zero}));
  }
  for (const auto& name : factor_names()) {
    std::vector<double> vals;
    for (const auto& t : sweep) vals.push_back(term_value(t, name));
    out.push_back(make_scaling_report(name, eps, vals, {0.0, tolerance, SlopeCheck::at_least, true, zero}));
  }
  return out;
}

inline const ScalingReport& find_report(const std::vector<ScalingReport>& r, const std::string& name) {
  for (const auto& x : r)
    if (x.quantity == name) return x;
  throw DomainError("no report for " + name);
}

// commutator-sweep CSV body: variant,term,epsilon,value
inline void write_term_rows(std::ostream& os, const std::vector<CommutatorTerms>& sweep) {
  static const std::vector<std::string> names{"A_total", "A1", "A2", "B_total", "B1", "B2", "B_literal", "energy",
                                              "A1_bound", "A2_bound", "B1_bound", "B2_bound", "X_norm", "C1_norm",
                                              "C2_norm", "grad_norm", "ut_norm"};
  for (const auto& t : sweep)
    for (const auto& n : names) {
      const double v = term_value(t, n);
      if (std::isnan(v)) continue;
      os << to_string(t.variant) << ',' << n << ',' << format_number(t.epsilon) << ',' << format_number(v) << '\n';
    }
}

}  // namespace vdlab
