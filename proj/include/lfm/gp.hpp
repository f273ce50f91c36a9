#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <string>
#include <vector>

#include "lfm/kernels.hpp"
#include "lfm/types.hpp"

namespace lfm {

// A covariance model bound to named channels: kernel, per-channel noise
// standard deviation and per-channel constant mean. Channel binding is by id
// so that permuting the channel order of a TimeSeriesSet does not change
// predictions.
struct GpModel {
  std::vector<std::string> channel_ids;
  KernelSpec kernel;
  Eigen::VectorXd noise_std;
  Eigen::VectorXd mean;

  int num_channels() const { return static_cast<int>(channel_ids.size()); }
  int slot_of(const std::string& id) const;
  void validate() const;
};

// Training data flattened block-by-channel (all of channel 1, then channel 2,
// ...), keeping the data's channel order. `slot[c]` maps data channel c to
// its kernel/noise/mean slot in the model.
struct StackedData {
  Eigen::VectorXd t;
  Eigen::VectorXd y;
  Eigen::VectorXd resid;           // y - mean[slot]
  std::vector<Eigen::Index> offset;  // per data channel; offset.back() == n
  std::vector<int> slot;
  std::vector<std::string> channel_ids;

  Eigen::Index size() const { return t.size(); }
  int num_blocks() const { return static_cast<int>(slot.size()); }
  // Data-channel index owning stacked row i.
  int block_of(Eigen::Index i) const;
};

StackedData stack_data(const TimeSeriesSet& data, const GpModel& model);

// Dense kernel block K[i,j] = k(slot_p, tp[i], slot_q, tq[j]); uses closed
// forms with per-sample precomputation for the LFM and Gaussian-convolution
// kernels and the generic eval() otherwise. `out` must be Np x Nq.
void build_kernel_block(const KernelSpec& kernel, int slot_p,
                        const Eigen::VectorXd& tp, int slot_q,
                        const Eigen::VectorXd& tq,
                        Eigen::Ref<Eigen::MatrixXd> out);

// Gram matrix over the stacked data: entry ((q,i),(p,j)) =
// k(t_qi, t_pj) + delta_qp delta_ij sigma_q^2 (noise only if requested).
// Exactly symmetric (upper triangle mirrored). Throws NumericError naming the
// offending (channel, time) pair if a kernel evaluation is non-finite.
Eigen::MatrixXd assemble_gram(const TimeSeriesSet& data, const GpModel& model,
                              bool include_noise = true);
Eigen::MatrixXd assemble_gram(const StackedData& stacked, const GpModel& model,
                              bool include_noise = true);

// Cholesky with an escalating diagonal jitter ladder: additive jitter starts
// at 1e-8 * mean(diag) and grows tenfold up to 1e-2 * mean(diag); failure at
// the top rung raises NumericError listing the attempted ladder. The jitter
// actually used is reported. K is modified in place when jitter is applied.
struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;   // absolute value added to the diagonal
  double log_det = 0.0;  // log |K + jitter I|
};
Factorization factor_with_jitter(Eigen::MatrixXd& K);

// J(theta) = r^T (K + sigma^2 I)^{-1} r + log |K + sigma^2 I| with
// r = y - mean; computed via Cholesky. Deterministic for fixed inputs.
double log_marginal_likelihood(const TimeSeriesSet& data, const GpModel& model);

// Posterior mean/variance at the query times for an output channel or a
// latent force. Variance includes sigma_q^2 iff include_noise (channel
// targets only; QueryError for force targets with include_noise).
PosteriorPrediction predict(const TimeSeriesSet& data, const GpModel& model,
                            const PredictionTarget& target,
                            const std::vector<double>& times,
                            bool include_noise = false);

}  // namespace lfm
