#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "pdanse/rnn_prior.hpp"

namespace pdanse {

// Reverse pass through heads and stacked GRU. Takes gradients w.r.t. the
// belief mean and the belief *variance* (not its log); the clamp and the exp
// parameterization are folded in here so callers never deal with them.
// Per-step work is limited to the recurrent matvecs; gate pre-activation
// gradients are collected per step and turned into weight gradients with one
// product per tensor. Returns the gradient in flat layout order.
inline Eigen::VectorXd priornet_backward(const PriorNetParams& p, const PriorForwardCache& cache,
                                         const Eigen::MatrixXd& dmu,
                                         const Eigen::MatrixXd& dvar) {
  const int T = cache.T;
  const int L = p.cfg.layers;
  const Eigen::Index hd = p.cfg.hidden;

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.layout.total());
  auto gmat = [&](const std::string& name) {
    const TensorSpec& s = p.layout.at(name);
    return Eigen::Map<Eigen::MatrixXd>(grad.data() + s.offset, s.rows, s.cols);
  };
  auto gvec = [&](const std::string& name) {
    const TensorSpec& s = p.layout.at(name);
    return Eigen::Map<Eigen::VectorXd>(grad.data() + s.offset, s.size());
  };

  // var = exp(clamp(s)); d var/d s vanishes outside the clamp window
  const double clamp = p.cfg.log_var_clamp;
  const Eigen::ArrayXXd inside =
      (cache.log_var_raw.array() > -clamp && cache.log_var_raw.array() < clamp).cast<double>();
  const Eigen::MatrixXd ds = (dvar.array() * cache.var.array() * inside).matrix();

  const Eigen::MatrixXd& top = cache.h[L - 1];

  // mean head
  gmat("mean.w2") += dmu * cache.mean_hidden.transpose();
  gvec("mean.b2") += dmu.rowwise().sum();
  Eigen::MatrixXd dmh_pre = ((p.mat("mean.w2").transpose() * dmu).array() *
                             (1.0 - cache.mean_hidden.array().square()))
                                .matrix();
  gmat("mean.w1") += dmh_pre * top.transpose();
  gvec("mean.b1") += dmh_pre.rowwise().sum();
  Eigen::MatrixXd dtop = p.mat("mean.w1").transpose() * dmh_pre;

  // variance head
  gmat("var.w2") += ds * cache.var_hidden.transpose();
  gvec("var.b2") += ds.rowwise().sum();
  Eigen::MatrixXd dvh_pre = ((p.mat("var.w2").transpose() * ds).array() *
                             (1.0 - cache.var_hidden.array().square()))
                                .matrix();
  gmat("var.w1") += dvh_pre * top.transpose();
  gvec("var.b1") += dvh_pre.rowwise().sum();
  dtop += p.mat("var.w1").transpose() * dvh_pre;

  // backprop through time, top layer first; each layer hands its input
  // gradient down as the hidden-state gradient of the layer below
  Eigen::MatrixXd dh_from_above = std::move(dtop);
  for (int l = L - 1; l >= 0; --l) {
    const std::string pre = "gru" + std::to_string(l) + ".";
    const auto ur = p.mat(pre + "ur"), uz = p.mat(pre + "uz"), uc = p.mat(pre + "uc");
    const Eigen::MatrixXd& u = (l == 0) ? cache.inputs : cache.h[l - 1];

    Eigen::MatrixXd da_r(hd, T), da_z(hd, T), da_c(hd, T);
    Eigen::ArrayXd carry = Eigen::ArrayXd::Zero(hd);
    for (int t = T - 1; t >= 0; --t) {
      const Eigen::ArrayXd rt = cache.r[l].col(t).array();
      const Eigen::ArrayXd zt = cache.z[l].col(t).array();
      const Eigen::ArrayXd ct = cache.c[l].col(t).array();
      const Eigen::ArrayXd h_prev =
          (t == 0) ? Eigen::ArrayXd::Zero(hd).eval() : cache.h[l].col(t - 1).array().eval();

      const Eigen::ArrayXd dh = dh_from_above.col(t).array() + carry;
      da_c.col(t) = (dh * (1.0 - zt) * (1.0 - ct.square())).matrix();
      Eigen::ArrayXd dh_prev = dh * zt;

      const Eigen::ArrayXd drh = (uc.transpose() * da_c.col(t)).array();
      dh_prev += drh * rt;
      da_r.col(t) = (drh * h_prev * rt * (1.0 - rt)).matrix();
      dh_prev += (ur.transpose() * da_r.col(t)).array();

      da_z.col(t) = (dh * (h_prev - ct) * zt * (1.0 - zt)).matrix();
      dh_prev += (uz.transpose() * da_z.col(t)).array();

      carry = dh_prev;
    }

    // h_prev matrix: column t holds h_{t-1}, first column zero
    Eigen::MatrixXd h_shift = Eigen::MatrixXd::Zero(hd, T);
    if (T > 1) h_shift.rightCols(T - 1) = cache.h[l].leftCols(T - 1);

    gmat(pre + "wr") += da_r * u.transpose();
    gmat(pre + "wz") += da_z * u.transpose();
    gmat(pre + "wc") += da_c * u.transpose();
    gmat(pre + "ur") += da_r * h_shift.transpose();
    gmat(pre + "uz") += da_z * h_shift.transpose();
    gmat(pre + "uc") += da_c * (cache.r[l].array() * h_shift.array()).matrix().transpose();
    gvec(pre + "br") += da_r.rowwise().sum();
    gvec(pre + "bz") += da_z.rowwise().sum();
    gvec(pre + "bc") += da_c.rowwise().sum();

    if (l > 0) {
      dh_from_above = p.mat(pre + "wr").transpose() * da_r +
                      p.mat(pre + "wz").transpose() * da_z +
                      p.mat(pre + "wc").transpose() * da_c;
    }
  }

  return grad;
}

}  // namespace pdanse
