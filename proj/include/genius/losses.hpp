#pragma once

#include "genius/common.hpp"
#include "genius/foresight.hpp"
#include "genius/policy.hpp"

#include <string>

namespace genius {

enum class LossKind { aco, dpo, cdpo, ropo, sft };

std::string to_string(LossKind k);
LossKind parse_loss_kind(const std::string& s);

struct LossConfig {
    double beta = 0.1;
    double alpha = 1.0;     // ACO relaxation scale
    double epsilon = 0.1;   // c-DPO label smoothing
    double gamma = 1.0;     // ROPO
    double eta = 0.5;       // ROPO
    LossKind kind = LossKind::aco;

    void validate() const;
};

// Log-ratios log pi_theta(T|x) - log pi_ref(T|x), without beta, plus advantages.
struct PairLogRatios {
    double lr_w = 0.0;
    double lr_l = 0.0;
    double adv_w = 0.0;
    double adv_l = 0.0;
};

double sigmoid(double z);
// log(1 + exp(x)) without overflow.
double softplus(double x);

// Bradley-Terry probability that the first response is preferred.
double preference_prob(double r_w, double r_l);

// min(exp(-(adv_l - adv_w) / alpha), 1): one on the normal region
// (adv_l <= adv_w), decaying on the calibration region.
double calibration_weight(double adv_w, double adv_l, double alpha);

struct PairLoss {
    double loss = 0.0;
    double z = 0.0;
    double w = 1.0;       // weight on the negative log-ratio (1 except for ACO)
    double dloss_dz = 0.0;
};

PairLoss aco_loss(const PairLogRatios& pair, const LossConfig& cfg);
double dpo_loss(const PairLogRatios& pair, const LossConfig& cfg);
double cdpo_loss(const PairLogRatios& pair, const LossConfig& cfg);
double ropo_loss(const PairLogRatios& pair, const LossConfig& cfg);

// Dispatches on cfg.kind for the pairwise kinds (aco, dpo, cdpo, ropo).
PairLoss pair_loss(const PairLogRatios& pair, const LossConfig& cfg);

// 1 - sigma(z): the factor scaling the positive/negative gradient directions.
double gradient_scale(const PairLogRatios& pair, const LossConfig& cfg);

// -(1 - sigma(z)) * (beta * grad_w - beta * w * grad_l), where grad_w and
// grad_l are gradients of log pi_theta(T^w|x) and log pi_theta(T^l|x).
LogitTable aco_gradient(const PairLogRatios& pair, const LossConfig& cfg, const LogitTable& grad_w,
                        const LogitTable& grad_l);

// dL/dz * beta * (grad_w - w * grad_l) for any pairwise kind.
LogitTable pair_gradient(const PairLogRatios& pair, const LossConfig& cfg, const LogitTable& grad_w,
                         const LogitTable& grad_l);

// Mean negative log-likelihood per token of `pos` given `query`.
double sft_loss(const TabularPolicy& policy, const TokenSeq& query, const TokenSeq& pos);
LogitTable sft_gradient(const TabularPolicy& policy, const TokenSeq& query, const TokenSeq& pos);

struct QuintupleLoss {
    double loss = 0.0;
    double z = 0.0;
    double w = 1.0;
    LogitTable grad;
};

PairLogRatios log_ratios(const TabularPolicy& policy, const TabularPolicy& reference, const PreferenceQuintuple& q);

// Loss of one quintuple through the policy, with its gradient when requested.
QuintupleLoss quintuple_loss(const TabularPolicy& policy, const TabularPolicy& reference,
                             const PreferenceQuintuple& q, const LossConfig& cfg, bool with_grad = true);

}  // namespace genius
