#include "marginlab/dynamics.hpp"

#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <random>

namespace marginlab {

const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::kMaxSteps: return "max_steps";
    case StopReason::kLossFloor: return "loss_floor";
    case StopReason::kDirectionalConvergence: return "directional_convergence";
    case StopReason::kNormCap: return "norm_cap";
    case StopReason::kTimeHorizon: return "time_horizon";
    case StopReason::kStalled: return "stalled";
  }
  return "unknown";
}

NetParams<double> sample_unit_init(const InitConfig& cfg, Index m, Index d,
                                   double alpha) {
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  NetParams<double> theta = NetParams<double>::Zero(m, d, alpha);
  for (Index k = 0; k < m; ++k) {
    for (Index j = 0; j < d; ++j) theta.W(k, j) = normal(rng);
    if (cfg.scheme == InitScheme::kGaussian) {
      theta.a(k) = cfg.c_ainit * normal(rng);
    } else {
      double s = 1;
      if (cfg.signs == SignPattern::kAlternating) {
        s = k % 2 == 0 ? 1 : -1;
      } else {
        s = coin(rng) ? 1 : -1;
      }
      theta.a(k) = s * theta.W.row(k).norm();
    }
  }
  return theta;
}

NetParams<double> sample_init(const InitConfig& cfg, Index m, Index d,
                              double alpha) {
  if (!(cfg.sigma_init > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma_init must be positive");
  }
  return sample_unit_init(cfg, m, d, alpha).scaled(cfg.sigma_init);
}

namespace {

double log_add_exp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double mx = std::max(a, b);
  return mx + std::log1p(std::exp(-std::abs(a - b)));
}

struct Eval {
  Eigen::VectorXd q;
  double log_loss = 0;
  double gamma_smoothed = NAN;
};

Eval evaluate(const NetParams<double>& theta, const Dataset<double>& data) {
  Eval e;
  e.q = margins(theta, data);
  e.log_loss = log_loss_from_margins(e.q);
  const double sq = theta.squared_norm();
  if (sq > 0) e.gamma_smoothed = smoothed_margin_from_margins(e.q, sq).value;
  return e;
}

// Coefficients c_i with theta_new = theta + sum_i c_i grad q_i.
Eigen::VectorXd step_coefficients(const Eigen::VectorXd& q, double log_eta) {
  const Index n = q.size();
  const double log_n = std::log(static_cast<double>(n));
  Eigen::VectorXd c(n);
  for (Index i = 0; i < n; ++i) {
    c(i) = std::exp(log_neg_loss_derivative(q(i)) - log_n + log_eta);
  }
  return c;
}

Snapshot make_snapshot(long step, double t, double log_t,
                       const NetParams<double>& theta, const Eval& e,
                       const GradSelection<double>& ascent, bool keep,
                       const Eigen::VectorXd* prev_dir) {
  Snapshot s;
  s.step = step;
  s.t = t;
  s.log_t = log_t;
  s.log_loss = e.log_loss;
  s.loss = std::exp(e.log_loss);
  s.q_min = e.q.minCoeff();
  const double sq = theta.squared_norm();
  s.norm = std::sqrt(sq);
  if (sq > 0) {
    s.gamma = s.q_min / sq;
    const auto sm = smoothed_margin_from_margins(e.q, sq);
    s.gamma_smoothed = sm.value;
  } else {
    s.gamma = NAN;
    s.gamma_smoothed = NAN;
  }
  s.interpolating =
      e.log_loss < std::log(std::log(2.0) / static_cast<double>(e.q.size()));
  s.max_balance_residual = max_balance_residual(theta);
  s.kink_count = ascent.kink_count;
  // The ascent combination is -grad L up to a positive factor.
  if (s.norm > 0 && ascent.norm() > 0) {
    GradSelection<double> g = ascent;
    g.dW = -g.dW;
    g.da = -g.da;
    s.beta_cos = alignment_cosine(theta, g);
  }
  if (prev_dir && s.norm > 0) {
    s.dir_change = (theta.flat() / s.norm - *prev_dir).norm();
  }
  if (keep) s.theta = theta;
  return s;
}

}  // namespace

Trajectory integrate(const NetParams<double>& theta0,
                     const Dataset<double>& data, const FlowConfig& cfg) {
  if (!(cfg.eta0 > 0) || !(cfg.dir_tol > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "eta0 and dir_tol must be > 0");
  }
  check_dims(theta0, data.d());
  Trajectory traj;
  NetParams<double> theta = theta0;
  Eval cur = evaluate(theta, data);
  const double log_interp =
      std::log(std::log(2.0) / static_cast<double>(data.n()));
  const double log_loss_floor =
      cfg.loss_floor > 0 ? std::log(cfg.loss_floor) : -INFINITY;
  const double log_lr_floor =
      cfg.lr_loss_floor > 0 ? std::log(cfg.lr_loss_floor) : -INFINITY;
  const long record_every = std::max<long>(1, cfg.record_every);

  double s = 1;  // backtracking factor
  long clean_steps = 0;
  double t = 0;
  double log_t = -INFINITY;
  long step = 0;

  // Unit directions at recorded steps, kept for the window test.
  std::vector<std::pair<long, Eigen::VectorXd>> dirs;
  std::vector<bool> dir_interp;
  Eigen::VectorXd last_dir;

  auto record = [&](const GradSelection<double>& ascent) {
    const Eigen::VectorXd* prev = last_dir.size() ? &last_dir : nullptr;
    traj.snapshots.push_back(make_snapshot(step, t, log_t, theta, cur, ascent,
                                           cfg.keep_params, prev));
    const double nrm = theta.norm();
    if (nrm > 0) {
      last_dir = theta.flat() / nrm;
      dirs.emplace_back(step, last_dir);
      dir_interp.push_back(traj.snapshots.back().interpolating);
    }
  };

  auto ascent_at = [&](double log_eta) {
    return margin_gradient_combination(theta, data,
                                       step_coefficients(cur.q, log_eta));
  };

  if (cur.log_loss < log_interp) traj.interpolation_step = 0;
  record(ascent_at(-cur.log_loss));

  StopReason reason = StopReason::kMaxSteps;
  bool stopped = false;
  while (!stopped) {
    if (step >= cfg.max_steps) {
      reason = StopReason::kMaxSteps;
      break;
    }
    if (cur.log_loss < log_loss_floor) {
      reason = StopReason::kLossFloor;
      break;
    }
    if (std::isfinite(cfg.t_end) && t >= cfg.t_end) {
      reason = StopReason::kTimeHorizon;
      break;
    }

    const bool adaptive =
        cfg.step_rule == StepRule::kAdaptive && cur.q.minCoeff() > 0;
    int tries = 0;
    bool accepted = false;
    NetParams<double> cand;
    Eval next;
    double log_eta = 0;
    GradSelection<double> ascent;
    double eta0 = cfg.eta0;
    if (cfg.eta_decay_steps > 0 && traj.interpolation_step) {
      const double j = static_cast<double>(step - *traj.interpolation_step);
      eta0 = std::max(cfg.eta_min, eta0 / (1 + j / cfg.eta_decay_steps));
    }
    while (tries <= cfg.max_backtracks) {
      double log_base = std::log(eta0);
      if (adaptive) log_base -= std::max(cur.log_loss, log_lr_floor);
      log_eta = log_base + std::log(s);
      bool truncated = false;
      if (std::isfinite(cfg.t_end) && log_eta > std::log(cfg.t_end - t)) {
        log_eta = std::log(cfg.t_end - t);
        truncated = true;
      }
      ascent = ascent_at(log_eta);
      cand = theta;
      if (cfg.step_rule == StepRule::kRK4) {
        auto flow = [&](const NetParams<double>& p) {
          return margin_gradient_combination(
              p, data, step_coefficients(margins(p, data), log_eta));
        };
        auto shifted = [&](const GradSelection<double>& k, double h) {
          NetParams<double> p = theta;
          p.W += h * k.dW;
          p.a += h * k.da;
          return p;
        };
        const GradSelection<double> k2 = flow(shifted(ascent, 0.5));
        const GradSelection<double> k3 = flow(shifted(k2, 0.5));
        const GradSelection<double> k4 = flow(shifted(k3, 1.0));
        cand.W += (ascent.dW + 2 * k2.dW + 2 * k3.dW + k4.dW) / 6;
        cand.a += (ascent.da + 2 * k2.da + 2 * k3.da + k4.da) / 6;
      } else {
        cand.W += ascent.dW;
        cand.a += ascent.da;
      }
      if (!cand.W.allFinite() || !cand.a.allFinite()) {
        throw Error(ErrorCode::kNonFinite,
                    "non-finite parameters at step " + std::to_string(step));
      }
      next = evaluate(cand, data);
      if (!std::isfinite(next.log_loss)) {
        throw Error(ErrorCode::kNonFinite,
                    "non-finite loss at step " + std::to_string(step));
      }
      // Near the origin the loss moves less than its own rounding error.
      const double slack = 64 * std::numeric_limits<double>::epsilon() *
                           std::max(1.0, std::abs(cur.log_loss));
      bool ok = next.log_loss <= cur.log_loss + slack;
      if (ok && cfg.margin_guard && cur.log_loss < log_interp &&
          std::isfinite(cur.gamma_smoothed)) {
        ok = next.gamma_smoothed >=
             cur.gamma_smoothed - 4e-16 * std::abs(cur.gamma_smoothed);
      }
      if (ok) {
        accepted = true;
        break;
      }
      ++tries;
      ++traj.backtracks;
      if (!truncated) {
        s *= 0.5;
      } else {
        // Shrinking a truncated step still lands before the horizon.
        s = std::min(s, std::exp(log_eta - log_base)) * 0.5;
      }
    }
    if (!accepted) {
      reason = StopReason::kStalled;
      break;
    }

    if (tries == 0) {
      ++clean_steps;
      if (cfg.regrow_after > 0 && clean_steps >= cfg.regrow_after && s < 1) {
        s = std::min(1.0, 2 * s);
        clean_steps = 0;
      }
    } else {
      clean_steps = 0;
    }
    theta = std::move(cand);
    cur = std::move(next);
    ++step;
    t += std::exp(log_eta);
    log_t = log_add_exp(log_t, log_eta);
    if (!traj.interpolation_step && cur.log_loss < log_interp) {
      traj.interpolation_step = step;
    }

    const double nrm = theta.norm();
    const bool at_record = step % record_every == 0;
    bool final_step = false;
    if (nrm >= cfg.norm_cap) {
      reason = StopReason::kNormCap;
      final_step = true;
    } else if (step >= cfg.max_steps) {
      reason = StopReason::kMaxSteps;
      final_step = true;
    } else if (cur.log_loss < log_loss_floor) {
      reason = StopReason::kLossFloor;
      final_step = true;
    } else if (std::isfinite(cfg.t_end) && t >= cfg.t_end) {
      reason = StopReason::kTimeHorizon;
      final_step = true;
    }

    if (at_record || final_step) {
      record(ascent_at(-cur.log_loss));
      if (!final_step && cfg.check_dir && traj.interpolation_step &&
          step >= cfg.min_dir_steps && nrm > 0) {
        const long ref_step =
            step - std::max<long>(1, static_cast<long>(cfg.dir_window * step));
        // Latest recorded direction at or before ref_step.
        for (std::size_t k = dirs.size(); k-- > 0;) {
          if (dirs[k].first <= ref_step) {
            if (dir_interp[k] &&
                (dirs.back().second - dirs[k].second).norm() < cfg.dir_tol) {
              reason = StopReason::kDirectionalConvergence;
              final_step = true;
            }
            break;
          }
        }
      }
    }
    stopped = final_step;
  }

  if (traj.snapshots.back().step != step) record(ascent_at(-cur.log_loss));
  traj.final_theta = theta;
  traj.stop = reason;
  traj.steps = step;
  traj.step_scale = s;
  return traj;
}

MonitorReport loss_convergence_monitor(const Trajectory& traj,
                                       const Dataset<double>& data,
                                       double gamma_slack, double loss_slack) {
  MonitorReport rep;
  rep.gamma_slack = gamma_slack;
  rep.loss_slack = loss_slack;
  const double log_interp =
      std::log(std::log(2.0) / static_cast<double>(data.n()));
  const auto& snaps = traj.snapshots;
  std::optional<std::size_t> first;
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    if (snaps[k].log_loss < log_interp) {
      first = k;
      break;
    }
  }
  const double log1p_slack = std::log1p(loss_slack);
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    const double inc = snaps[k].log_loss - snaps[k - 1].log_loss;
    if (inc > log1p_slack) {
      rep.loss_monotone = false;
      rep.violations.push_back({"loss", snaps[k].step, std::expm1(inc)});
    }
  }
  if (!first) return rep;
  rep.interpolation_reached = true;
  rep.interpolation_step = snaps[*first].step;
  for (std::size_t k = *first + 1; k < snaps.size(); ++k) {
    const double prev = snaps[k - 1].gamma_smoothed;
    const double drop = prev - snaps[k].gamma_smoothed;
    if (drop > gamma_slack * std::max(std::abs(prev), 1e-300)) {
      rep.gamma_smoothed_monotone = false;
      rep.violations.push_back(
          {"gamma_smoothed", snaps[k].step, drop / std::abs(prev)});
    }
    if (snaps[k].norm < snaps[k - 1].norm) {
      rep.norm_increasing = false;
      rep.violations.push_back(
          {"norm", snaps[k].step, snaps[k - 1].norm - snaps[k].norm});
    }
  }
  return rep;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_time(double t, double log_t) {
  if (std::isfinite(t)) return format_double(t);
  const double l10 = log_t / std::log(10.0);
  const double e = std::floor(l10);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.16fe+%.0f", std::pow(10.0, l10 - e), e);
  return buf;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << "step,t,loss,q_min,gamma,gamma_smoothed,norm,dir_change,"
         "max_balance_residual,beta_cos,kink_count\n";
  for (const Snapshot& s : traj.snapshots) {
    out << s.step << ',' << format_time(s.t, s.log_t) << ','
        << format_double(s.loss) << ',' << format_double(s.q_min) << ','
        << format_double(s.gamma) << ',' << format_double(s.gamma_smoothed)
        << ',' << format_double(s.norm) << ',' << format_double(s.dir_change)
        << ',' << format_double(s.max_balance_residual) << ','
        << format_double(s.beta_cos) << ',' << s.kink_count << '\n';
  }
}

}  // namespace marginlab
