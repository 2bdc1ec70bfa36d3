// SPDX-License-Identifier: Apache-2.0
//
// Random-walk Metropolis on an unconstrained vector space.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fstrisk/rng.hpp"

namespace fstrisk {

template <std::size_t D>
using Vec = std::array<double, D>;

enum class UpdateScheme {
  joint,          // one proposal moves every coordinate
  componentwise,  // coordinates updated in index order, one accept test each
  // componentwise for the first half of warmup, then a joint proposal shaped
  // by the covariance of the second quarter of warmup states
  learned_covariance,
};

struct RandomWalkSchedule {
  UpdateScheme scheme = UpdateScheme::componentwise;
  std::size_t warmup = 2000;
  std::size_t draws = 8000;
  double target_accept = 0.30;
  std::size_t adapt_window = 100;
  double grow = 1.1;
  double shrink = 0.9;
};

template <std::size_t D>
struct ChainTrace {
  std::vector<Vec<D>> draws;
  double acceptance_rate = 0.0;  // post-warmup, averaged over coordinates
  Vec<D> step{};                 // frozen step sizes
};

/// Lower Cholesky factor of a symmetric matrix; a small ridge is added
/// when the matrix is not numerically positive definite.
template <std::size_t D>
std::array<Vec<D>, D> cholesky(std::array<Vec<D>, D> a) {
  for (double ridge = 0.0;; ridge = ridge == 0.0 ? 1e-12 : ridge * 10.0) {
    std::array<Vec<D>, D> l{};
    bool ok = true;
    for (std::size_t i = 0; i < D && ok; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double sum = a[i][j] + (i == j ? ridge : 0.0);
        for (std::size_t k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
        if (i == j) {
          if (!(sum > 0.0)) {
            ok = false;
            break;
          }
          l[i][i] = std::sqrt(sum);
        } else {
          l[i][j] = sum / l[j][j];
        }
      }
    }
    if (ok) return l;
    if (ridge > 1.0) {
      std::array<Vec<D>, D> identity{};
      for (std::size_t i = 0; i < D; ++i) identity[i][i] = 1.0;
      return identity;
    }
  }
}

/// Runs one chain.
///
/// componentwise: for d = 0..D-1, propose x_d + step_d * z (one normal),
/// then consume one open uniform for the accept test.
/// joint: propose x + step * z (one normal per coordinate in index order),
/// then one open uniform.
/// learned_covariance: componentwise until warmup / 2; then the sample
/// covariance S of warmup states [warmup / 4, warmup / 2) is factored as
/// L L^T and proposals become x + scale * L z (D normals, one uniform) with
/// scale starting at 2.38 / sqrt(D).
/// The uniform is consumed even when the proposal is out of support.
///
/// During warmup, at the end of every adapt_window iterations each step size
/// (or the joint scale) is multiplied by `grow` when its acceptance over the
/// window exceeded the target and by `shrink` otherwise. Everything is frozen
/// after warmup so the retained draws come from a fixed kernel.
template <std::size_t D, typename LogDensity>
ChainTrace<D> run_random_walk(LogDensity&& log_density, Vec<D> start, Vec<D> step,
                              const RandomWalkSchedule& schedule, CounterRng& rng) {
  ChainTrace<D> trace;
  trace.draws.reserve(schedule.draws);

  bool joint = schedule.scheme == UpdateScheme::joint;
  bool shaped = false;
  double scale = 1.0;
  std::array<Vec<D>, D> factor{};
  const std::size_t learn_from = schedule.warmup / 4;
  const std::size_t switch_at = schedule.scheme == UpdateScheme::learned_covariance ? schedule.warmup / 2 : schedule.warmup + 1;
  std::vector<Vec<D>> history;

  Vec<D> current = start;
  double current_lp = log_density(current);
  Vec<D> window_accepts{};
  std::size_t kept_accepts = 0;
  std::size_t kept_moves = 0;
  const std::size_t total = schedule.warmup + schedule.draws;

  auto try_move = [&](const Vec<D>& proposal) {
    const double proposal_lp = log_density(proposal);
    const double log_u = std::log(rng.uniform_open());
    if (std::isfinite(proposal_lp) && log_u < proposal_lp - current_lp) {
      current = proposal;
      current_lp = proposal_lp;
      return true;
    }
    return false;
  };

  for (std::size_t iter = 0; iter < total; ++iter) {
    if (iter == switch_at && history.size() > D + 1) {
      Vec<D> mean{};
      for (const auto& x : history) {
        for (std::size_t d = 0; d < D; ++d) mean[d] += x[d];
      }
      for (auto& m : mean) m /= static_cast<double>(history.size());
      std::array<Vec<D>, D> cov{};
      for (const auto& x : history) {
        for (std::size_t i = 0; i < D; ++i) {
          for (std::size_t j = 0; j < D; ++j) cov[i][j] += (x[i] - mean[i]) * (x[j] - mean[j]);
        }
      }
      for (auto& row : cov) {
        for (auto& c : row) c /= static_cast<double>(history.size() - 1);
      }
      factor = cholesky<D>(cov);
      scale = 2.38 / std::sqrt(static_cast<double>(D));
      shaped = true;
      joint = true;
      window_accepts = {};
    }

    const bool warming = iter < schedule.warmup;
    const std::size_t slots = joint ? 1 : D;
    for (std::size_t slot = 0; slot < slots; ++slot) {
      Vec<D> proposal = current;
      if (shaped) {
        Vec<D> z;
        for (auto& zi : z) zi = rng.normal();
        for (std::size_t i = 0; i < D; ++i) {
          double dx = 0.0;
          for (std::size_t k = 0; k <= i; ++k) dx += factor[i][k] * z[k];
          proposal[i] += scale * dx;
        }
      } else if (joint) {
        for (std::size_t d = 0; d < D; ++d) proposal[d] += step[d] * rng.normal();
      } else {
        proposal[slot] += step[slot] * rng.normal();
      }
      const bool accepted = try_move(proposal);
      if (warming) {
        window_accepts[slot] += accepted ? 1.0 : 0.0;
      } else {
        kept_accepts += accepted ? 1 : 0;
        ++kept_moves;
      }
    }

    if (warming) {
      if (iter >= learn_from && iter < switch_at) history.push_back(current);
      if ((iter + 1) % schedule.adapt_window == 0) {
        for (std::size_t slot = 0; slot < slots; ++slot) {
          const double rate = window_accepts[slot] / static_cast<double>(schedule.adapt_window);
          const double f = rate > schedule.target_accept ? schedule.grow : schedule.shrink;
          if (shaped) {
            scale *= f;
          } else if (joint) {
            for (auto& s : step) s *= f;
          } else {
            step[slot] *= f;
          }
          window_accepts[slot] = 0.0;
        }
      }
    } else {
      trace.draws.push_back(current);
    }
  }
  trace.acceptance_rate = kept_moves > 0 ? static_cast<double>(kept_accepts) / static_cast<double>(kept_moves) : 0.0;
  trace.step = step;
  return trace;
}

}  // namespace fstrisk
