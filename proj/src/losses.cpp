#include "genius/losses.hpp"

#include <cmath>

namespace genius {

std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::aco: return "aco";
        case LossKind::dpo: return "dpo";
        case LossKind::cdpo: return "cdpo";
        case LossKind::ropo: return "ropo";
        case LossKind::sft: return "sft";
    }
    return "?";
}

LossKind parse_loss_kind(const std::string& s) {
    if (s == "aco") return LossKind::aco;
    if (s == "dpo") return LossKind::dpo;
    if (s == "cdpo") return LossKind::cdpo;
    if (s == "ropo") return LossKind::ropo;
    if (s == "sft") return LossKind::sft;
    throw InputError("unknown loss '" + s + "'");
}

void LossConfig::validate() const {
    if (!(beta > 0.0)) throw InputError("beta must be positive");
    if (!(alpha > 0.0)) throw InputError("alpha must be positive");
    if (!(epsilon >= 0.0 && epsilon < 0.5)) throw InputError("epsilon must be in [0, 0.5)");
    if (!(gamma >= 0.0) || !(eta >= 0.0)) throw InputError("gamma and eta must be nonnegative");
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double preference_prob(double r_w, double r_l) { return sigmoid(r_w - r_l); }

double calibration_weight(double adv_w, double adv_l, double alpha) {
    if (!(alpha > 0.0)) throw InputError("alpha must be positive");
    const double diff = adv_l - adv_w;
    if (diff <= 0.0) return 1.0;
    return std::exp(-diff / alpha);
}

namespace {

// Same operation order as the aco margin with w = 1, so the two agree bit for bit.
double dpo_z(const PairLogRatios& p, const LossConfig& cfg) { return cfg.beta * p.lr_w - cfg.beta * p.lr_l; }

}  // namespace

PairLoss aco_loss(const PairLogRatios& pair, const LossConfig& cfg) {
    PairLoss out;
    out.w = calibration_weight(pair.adv_w, pair.adv_l, cfg.alpha);
    out.z = cfg.beta * pair.lr_w - cfg.beta * out.w * pair.lr_l;
    out.loss = softplus(-out.z);
    out.dloss_dz = -(1.0 - sigmoid(out.z));
    return out;
}

double dpo_loss(const PairLogRatios& pair, const LossConfig& cfg) { return softplus(-dpo_z(pair, cfg)); }

double cdpo_loss(const PairLogRatios& pair, const LossConfig& cfg) {
    const double z = dpo_z(pair, cfg);
    return (1.0 - cfg.epsilon) * softplus(-z) + cfg.epsilon * softplus(z);
}

// L(z) = -gamma log sigma(z) + eta sigma(z), whose z-derivative is
// -(gamma - eta sigma(z)) (1 - sigma(z)).
double ropo_loss(const PairLogRatios& pair, const LossConfig& cfg) {
    const double z = dpo_z(pair, cfg);
    return cfg.gamma * softplus(-z) + cfg.eta * sigmoid(z);
}

PairLoss pair_loss(const PairLogRatios& pair, const LossConfig& cfg) {
    if (cfg.kind == LossKind::aco) return aco_loss(pair, cfg);
    PairLoss out;
    out.z = dpo_z(pair, cfg);
    const double s = sigmoid(out.z);
    switch (cfg.kind) {
        case LossKind::dpo:
            out.loss = dpo_loss(pair, cfg);
            out.dloss_dz = -(1.0 - s);
            break;
        case LossKind::cdpo:
            out.loss = cdpo_loss(pair, cfg);
            out.dloss_dz = -((1.0 - cfg.epsilon) - s);
            break;
        case LossKind::ropo:
            out.loss = ropo_loss(pair, cfg);
            out.dloss_dz = -(cfg.gamma - cfg.eta * s) * (1.0 - s);
            break;
        default:
            throw InputError("pair_loss needs a pairwise loss kind");
    }
    return out;
}

double gradient_scale(const PairLogRatios& pair, const LossConfig& cfg) { return 1.0 - sigmoid(pair_loss(pair, cfg).z); }

LogitTable pair_gradient(const PairLogRatios& pair, const LossConfig& cfg, const LogitTable& grad_w,
                         const LogitTable& grad_l) {
    if (grad_w.width() != grad_l.width()) throw InputError("gradient structures have different shapes");
    const PairLoss pl = pair_loss(pair, cfg);
    LogitTable g(grad_w.width());
    g.add_scaled(grad_w, pl.dloss_dz * cfg.beta);
    g.add_scaled(grad_l, -pl.dloss_dz * cfg.beta * pl.w);
    return g;
}

LogitTable aco_gradient(const PairLogRatios& pair, const LossConfig& cfg, const LogitTable& grad_w,
                        const LogitTable& grad_l) {
    LossConfig aco = cfg;
    aco.kind = LossKind::aco;
    return pair_gradient(pair, aco, grad_w, grad_l);
}

double sft_loss(const TabularPolicy& policy, const TokenSeq& query, const TokenSeq& pos) {
    if (pos.empty()) throw InputError("sft target must be nonempty");
    return -policy.sequence_logprob(query, pos) / static_cast<double>(pos.size());
}

LogitTable sft_gradient(const TabularPolicy& policy, const TokenSeq& query, const TokenSeq& pos) {
    if (pos.empty()) throw InputError("sft target must be nonempty");
    LogitTable g = policy.grad_sequence_logprob(query, pos);
    g.scale(-1.0 / static_cast<double>(pos.size()));
    return g;
}

PairLogRatios log_ratios(const TabularPolicy& policy, const TabularPolicy& reference, const PreferenceQuintuple& q) {
    PairLogRatios p;
    p.lr_w = policy.sequence_logprob(q.query, q.pos) - reference.sequence_logprob(q.query, q.pos);
    p.lr_l = policy.sequence_logprob(q.query, q.neg) - reference.sequence_logprob(q.query, q.neg);
    p.adv_w = q.pos_adv;
    p.adv_l = q.neg_adv;
    return p;
}

QuintupleLoss quintuple_loss(const TabularPolicy& policy, const TabularPolicy& reference,
                             const PreferenceQuintuple& q, const LossConfig& cfg, bool with_grad) {
    QuintupleLoss out;
    if (cfg.kind == LossKind::sft) {
        out.loss = sft_loss(policy, q.query, q.pos);
        out.grad = with_grad ? sft_gradient(policy, q.query, q.pos) : LogitTable(policy.vocab().size);
        return out;
    }
    const PairLogRatios pair = log_ratios(policy, reference, q);
    const PairLoss pl = pair_loss(pair, cfg);
    out.loss = pl.loss;
    out.z = pl.z;
    out.w = pl.w;
    if (with_grad) {
        out.grad = pair_gradient(pair, cfg, policy.grad_sequence_logprob(q.query, q.pos),
                                 policy.grad_sequence_logprob(q.query, q.neg));
    } else {
        out.grad = LogitTable(policy.vocab().size);
    }
    return out;
}

}  // namespace genius
